//! Shared numerical core.

pub mod conv;
pub mod kernel;
pub mod kmeans;
pub mod pca;
pub mod plane;
pub mod rotate;
pub mod standardize;

pub use conv::{convolve2d, Boundary};
pub use kernel::{
    make_angular_kernel, make_isotropic_kernel, mean_isotropic_kernel, ComplexKernel, Kernel2D, RealKernel,
};
pub use kmeans::{kmeans, KMeansResult};
pub use pca::{covariance, pca_fit, pca_fit_of, PcaModel};
pub use plane::{ComplexPlane, Plane, RealPlane};
pub use rotate::{rotate_plane, Interpolation, RotationOp};
pub use standardize::{column_stats, standardize, ColumnStats};
