//! Curvature, flatness and trajectory diagnostics.

pub mod histogram;
pub mod noise;
pub mod pca;
pub mod sharpness;
pub mod surface;
pub mod theory;

pub use histogram::{stress_histogram, Histogram};
pub use noise::{expected_loss_under_noise, McEstimate};
pub use pca::{pca_project, PcaProjection};
pub use sharpness::{fd_hvp, grad_norm_sharpness, hutchinson_trace, hutchinson_trace_fd, SharpnessRecord};
pub use surface::{surface_grid, SurfaceGrid};
