//! Moment theory of planar quadrature domains given by polynomial
//! conformal maps of the unit disk.

pub mod checks;
pub mod cpoly;
pub mod domain;
pub mod error;
pub mod flow;
pub mod io;
pub mod moments;
pub mod par;
pub mod resultant;
pub mod xform;

pub use cpoly::{BiPoly, BiSeries, CPoly, LaurentPoly, Reflect};
pub use domain::{validate_domain, BoundarySampling, PolyDomain, Univalence};
pub use error::{Error, Result};
pub use moments::{ComplexMomentGrid, ExpMomentMatrix, MomentVector, ReconstructionResult};
pub use par::Exec;
pub use resultant::{Divisor, RationalMap, SpherePoint};
pub use xform::{BoundaryTransform, DiskFormula};
