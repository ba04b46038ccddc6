//! Near-field channel toolkit for extremely large antenna arrays.
//!
//! The crate models a uniform planar array (UPA) observing clustered
//! scatterers through spherical wavefronts and provides three families of
//! parameter estimators:
//!
//! * angular-domain (AD) and polar-domain (PD) dictionaries with greedy
//!   sparse coding (OMP) or subspace (MUSIC) search,
//! * the triple parametric decomposition (TPD), which uses origin-symmetric
//!   conjugate products to strip the distance-dependent quadratic phase,
//!   splits elevation from azimuth with mirrored sums, and recovers distance
//!   from center-referenced products,
//! * a Monte Carlo harness ([`evaluation`]) that compares them.
//!
//! Antennas are addressed by centered indices `(m, n)`; flat vectors are laid
//! out with `m` varying fastest.

pub mod assignment;
pub mod channel;
pub mod dictionaries;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod linalg;
pub mod recovery;
pub mod tpd;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
