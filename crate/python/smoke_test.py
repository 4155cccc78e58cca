"""Smoke test for the horolab_py extension module."""

import json
import math

import horolab_py as hl


def main():
    g = hl.GroupElement(0.0, -1.0, 1.0, 0.0)
    x, y, theta = g.iwasawa()
    assert abs(y - 1.0) < 1e-12

    f = hl.Observable("power:s=1+0i:real")
    assert f.case == "ZeroMu"
    avg = hl.ergodic_average(f, g, 1.0)
    assert abs(avg["value"] - math.pi / 4) < 1e-10, avg

    p = hl.GroupElement(1.3, -0.2, 0.7, 0.66)
    h = hl.Observable("power:s=0.5+1.5i:real")
    assert abs(h.mu - 2.5) < 1e-12
    res = hl.ode_residual(h, p, 2.0)
    assert res["residual"] < 1e-8, res
    d = hl.functionals(h, p)
    assert math.isfinite(d["d_plus"]) and math.isfinite(d["d_minus"])
    e = hl.expansion(h, p, math.exp(4))
    assert e["reconstruction_gap"] <= e["remainder_bound"], e

    grp = hl.FuchsianGroup.octagon()
    pts = grp.sample_haar(5, 1)
    far = pts[0].horocycle(50.0)
    rep, word = grp.reduce(far)
    assert len(word) > 0
    assert grp.reduce(rep)[1] == []

    assert abs(hl.levy([0.0] * 10, [0.3] * 10) - 0.3) < 1e-6
    assert len(hl.experiments().splitlines()) == 9

    cfg = {"schema_version": 1, "experiment": "lattice-sanity", "samples": 10}
    out = hl.run_experiment(json.dumps(cfg))
    assert out["passed"], out["first_violation"]
    print("smoke test passed")


if __name__ == "__main__":
    main()
