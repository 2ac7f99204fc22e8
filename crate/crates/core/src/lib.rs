//! Numerical toolkit for the Borell-Brascamp-Lieb (BBL) inequality and its
//! stability theory on uniform grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`means`]: weighted q-means and the Hölder product inequalities.
//! * [`rational`]: exact rational weights `λ = j/k` and concavity indices `s`.
//! * [`gridfn`]: compactly supported nonnegative functions sampled on grids.
//! * [`supconv`]: the `(1/s, λ)`-supremal convolution and the BBL deficit.
//! * [`bodies`]: voxel sets, Minkowski combinations and lifted bodies.
//! * [`symmetry`]: the slice-wise ball symmetrization of split bodies.
//! * [`envelope`]: least p-concave majorants.
//! * [`stability`]: normalization, witness construction, constants and reports.
//!
//! Grid functions are sampled at cell centers `origin + i * spacing` and are
//! treated as piecewise constant on the cells for every measure computation.

pub mod bodies;
pub mod envelope;
pub mod error;
pub mod format;
pub mod gridfn;
pub mod hull;
pub mod means;
pub mod rational;
pub mod stability;
pub mod sum;
pub mod supconv;
pub mod symmetry;

pub use error::{Error, Result};
pub use gridfn::GridFunction;
pub use rational::{ConcavityIndex, RationalWeight};

/// Largest total dimension handled by grids and voxel sets.
pub const MAX_DIM: usize = 4;
