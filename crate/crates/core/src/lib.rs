//! Matrix-free sparse image reconstruction for objects with known contour.
//!
//! The toolkit recovers wavelet-sparse images from underdetermined
//! parallel-beam tomographic measurements while constraining the solution to
//! lie inside a known (or automatically extracted) object contour:
//!
//! - [`transforms`]: orthogonal 2-D wavelet transforms (Haar, Daubechies-6).
//! - [`masking`]: binary contour masks and the identifiable coefficient set.
//! - [`operators`]: matrix-free forward/adjoint pairs, the composed
//!   measurement operator, spectral norm estimation.
//! - [`ct`]: analytic phantoms and sinograms, discrete Radon transform with
//!   exact adjoint, frequency-domain sampling, filtered backprojection.
//! - [`hull`]: automatic convex-hull mask extraction from sinograms.
//! - [`solvers`]: hard-thresholded gradient iteration with an adaptive
//!   step-size schedule, double-overrelaxation acceleration, and a
//!   proximal-gradient l1 solver.
//! - [`metrics`]: masked PSNR.
//! - [`pipeline`]: the end-to-end reconstruction used by the CLI and the
//!   acceptance suite.
//!
//! Data-parallel inner loops (projections, basis probing, strip
//! rasterization) run on rayon when the default `parallel` feature is on;
//! disabling it selects sequential fallbacks with bit-identical results.

pub mod ct;
pub mod error;
pub mod hull;
pub mod image;
pub mod io;
pub mod masking;
pub mod metrics;
pub mod operators;
pub mod pipeline;
pub mod solvers;
pub mod transforms;
pub mod vecmath;

pub use error::{Error, Result};
pub use image::Image;
pub use masking::{IdentifiableSet, Mask};
pub use transforms::{WaveletFamily, WaveletSpec};
