//! Numerical laboratory for horocycle ergodic averages on SL(2,R).
//!
//! The crate is organised bottom-up:
//!
//! * [`sl2`] group elements, flows, Lie derivatives and Iwasawa coordinates
//! * [`observables`] Casimir eigenfunctions in closed form, with window norms
//! * [`quadrature`] adaptive Gauss-Legendre integration with error estimates
//! * [`ode`] the one-dimensional ODE satisfied by horocycle averages
//! * [`functionals`] the invariant functionals and expansion bounds
//! * [`lattice`] a cocompact genus-2 Fuchsian group used for recurrence
//! * [`limits`] distances between distributions and the limit-theorem experiments
//! * [`experiments`] config-driven experiment runners used by the CLI

pub mod error;
pub mod experiments;
pub mod functionals;
pub mod lattice;
pub mod limits;
pub mod observables;
pub mod ode;
pub mod quadrature;
pub mod report;
pub mod sl2;

pub use error::{Error, Result};
pub use observables::{CaseTag, Observable, Part, SpectralParameter, Window};
pub use sl2::{Flow, GroupElement, IwasawaCoords, LieAlgebraElement, LieDirection};
