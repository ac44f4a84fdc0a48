//! Invariant attribute profiles for hyperspectral images.
//!
//! The crate builds rotation- and shift-robust per-pixel features from a
//! hyperspectral cube and classifies them:
//!
//! * [`sif`]: isotropic filtering of every band followed by superpixel
//!   averaging (spatial invariant features).
//! * [`grouping`] + [`fif`]: band grouping, maximum-response gradients, and
//!   polar Fourier coefficients pooled by steerable ring kernels
//!   (frequency invariant features).
//! * [`profile`]: stacking of spectra, SIFs and FIFs plus PCA reduction.
//! * [`classify`]: 1-NN, random forest, and accuracy metrics.
//! * [`pipeline`]: config-driven extraction, classification, rendering and
//!   parameter sweeps, shared by the `iap` command-line tool.

pub mod baseline;
pub mod classify;
pub mod config;
pub mod cube_io;
pub mod error;
pub mod fif;
pub mod grouping;
mod io_util;
pub mod numerics;
mod par;
pub mod pipeline;
pub mod profile;
pub mod render;
pub mod sif;

pub use error::{IapError, Result};
pub use io_util::write_atomic;
