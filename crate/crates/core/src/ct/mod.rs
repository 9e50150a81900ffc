//! Parallel-beam CT measurement model: analytic phantom and ellipse
//! sinograms, discrete Radon transform with exact adjoint, per-projection
//! frequency-domain packing, and filtered backprojection.

mod fbp;
mod phantom;
mod radon;
mod sampling;

pub use fbp::fbp;
pub use phantom::{ellipse_sinogram, rasterize, shepp_logan, shepp_logan_ellipses, Ellipse};
pub use radon::{
    limited_angles, radon, radon_adjoint, radon_adjoint_seq, radon_seq, ProjectionGeometry,
    Sinogram,
};
pub use sampling::{
    build_sampling_operator, MeasurementBin, MeasurementLayout, MeasurementPart,
    MeasurementVector, SamplingOperator,
};
