//! End-to-end reconstruction pipeline: mask selection, identifiable set,
//! measurement operator, classical initialization, solver dispatch, and
//! image synthesis. The command-line frontend is a thin file wrapper over
//! these steps.

use crate::ct::{build_sampling_operator, fbp, SamplingOperator, Sinogram};
use crate::error::{Error, Result};
use crate::hull::{extract_hull_mask, ThresholdPolicy};
use crate::image::Image;
use crate::masking::{embed, identifiable_set, restrict, IdentifiableSet, Mask, IDENTIFIABLE_TOL};
use crate::metrics::{psnr, PsnrReport};
use crate::operators::{compose_h, spectral_norm, LinearOperator};
use crate::solvers::{
    initialize_from_fbp, mask_dore, mask_iht, mask_ista, IterationTrace, SolverConfig,
    SolverResult, StepSizeRule,
};
use crate::transforms::{inverse_dwt2, WaveletSpec};
use crate::vecmath::max_abs;

/// Where the reconstruction mask comes from.
#[derive(Debug, Clone)]
pub enum MaskSource<'a> {
    /// Every pixel; geometric side information disabled.
    Full,
    /// Convex hull extracted from a sinogram (possibly denser than the
    /// measurement one).
    Hull {
        sinogram: &'a Sinogram,
        policy: ThresholdPolicy,
    },
    /// Caller-provided mask.
    Given(Mask),
}

/// Reconstruction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fbp,
    Iht,
    Dore,
    Ista,
}

impl Method {
    pub fn is_iterative(self) -> bool {
        !matches!(self, Method::Fbp)
    }

    /// Iterate-difference convergence threshold used when none is given.
    /// The proximal solver gets a looser default; with the tiny l1 weight of
    /// the standard rule its steps shrink far more slowly than the
    /// hard-thresholding methods'.
    pub fn default_epsilon(self) -> f64 {
        match self {
            Method::Ista => 1e-12,
            _ => 1e-14,
        }
    }
}

/// Sparsity budget: explicit, or a fraction of the identifiable count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityRule {
    Explicit(usize),
    FractionOfIdentifiable(f64),
}

impl SparsityRule {
    fn resolve(&self, p_i: usize) -> usize {
        match *self {
            SparsityRule::Explicit(r) => r,
            SparsityRule::FractionOfIdentifiable(f) => (f * p_i as f64).round() as usize,
        }
    }
}

/// l1 weight: explicit, or a multiple of the infinity norm of the
/// back-projected data H^T y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    Explicit(f64),
    ScaledGradientInfNorm(f64),
}

impl TauRule {
    fn resolve<H: LinearOperator + ?Sized>(&self, h: &H, y: &[f64]) -> f64 {
        match *self {
            TauRule::Explicit(tau) => tau,
            TauRule::ScaledGradientInfNorm(c) => c * max_abs(&h.apply_adjoint(y)),
        }
    }
}

/// Solver knobs resolved against the problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub sparsity: SparsityRule,
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    pub tau: TauRule,
    /// Fixed step size; `None` selects the adaptive schedule.
    pub mu0: Option<f64>,
    pub rho_safety: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            sparsity: SparsityRule::FractionOfIdentifiable(0.04),
            epsilon: None,
            max_iters: 100_000,
            tau: TauRule::ScaledGradientInfNorm(1e-5),
            mu0: None,
            rho_safety: 1.01,
        }
    }
}

/// Geometry-independent experiment setup.
#[derive(Debug, Clone)]
pub struct ReconstructionSetup {
    pub grid_side: usize,
    pub wavelet: WaveletSpec,
    pub freq_mode: bool,
    pub seed: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ReconOutcome {
    pub image: Image,
    pub mask: Mask,
    pub p_i: usize,
    pub r_used: usize,
    pub tau_used: f64,
    pub rho_hat: f64,
    pub trace: Option<IterationTrace>,
    pub converged: bool,
    pub psnr_full_grid: Option<PsnrReport>,
}

/// Resolves a mask source against the grid.
pub fn resolve_mask(source: &MaskSource, grid_side: usize) -> Result<Mask> {
    match source {
        MaskSource::Full => Ok(Mask::full(grid_side)),
        MaskSource::Hull { sinogram, policy } => extract_hull_mask(sinogram, policy, grid_side),
        MaskSource::Given(mask) => {
            if mask.side() != grid_side {
                return Err(Error::DimensionMismatch {
                    context: "mask file",
                    expected: grid_side,
                    got: mask.side(),
                });
            }
            Ok(mask.clone())
        }
    }
}

/// Image synthesized from identifiable coefficients: lift, inverse transform,
/// zero outside the mask.
pub fn synthesize_masked_image(
    spec: &WaveletSpec,
    mask: &Mask,
    iset: &IdentifiableSet,
    coeffs: &[f64],
) -> Result<Image> {
    let full = iset.lift(coeffs)?;
    let image = inverse_dwt2(&full, spec)?;
    let masked = restrict(&image, mask)?;
    embed(&masked, mask)
}

/// Full reconstruction: classical initialization, solver run, synthesis, and
/// (when the truth is available) PSNR over the whole grid so methods with
/// different masks stay comparable.
pub fn reconstruct(
    setup: &ReconstructionSetup,
    measurements: &Sinogram,
    mask_source: &MaskSource,
    method: Method,
    params: &SolverParams,
    truth: Option<&Image>,
) -> Result<ReconOutcome> {
    let n = setup.grid_side;
    if setup.wavelet.size() != n {
        return Err(Error::DimensionMismatch {
            context: "reconstruction setup",
            expected: n,
            got: setup.wavelet.size(),
        });
    }

    let mask = resolve_mask(mask_source, n)?;
    let fbp_image = fbp(measurements, n)?;

    if method == Method::Fbp {
        let report = truth
            .map(|t| psnr(&fbp_image, t, &Mask::full(n)))
            .transpose()?;
        return Ok(ReconOutcome {
            image: fbp_image,
            mask,
            p_i: 0,
            r_used: 0,
            tau_used: 0.0,
            rho_hat: 0.0,
            trace: None,
            converged: true,
            psnr_full_grid: report,
        });
    }

    let iset = identifiable_set(&setup.wavelet, &mask, IDENTIFIABLE_TOL)?;
    let p_i = iset.p_i();
    let phi: SamplingOperator =
        build_sampling_operator(measurements.geometry().clone(), n, setup.freq_mode);
    let y = phi.encode_sinogram(measurements)?;
    let h = compose_h(phi, setup.wavelet, mask.clone(), iset.clone())?;

    let estimate = spectral_norm(&h, 1e-6, 1000, setup.seed);
    let rho_hat = estimate.rho;

    let r_used = match method {
        Method::Ista => p_i, // initialization kept dense; sparsity comes from the l1 term
        _ => params.sparsity.resolve(p_i).clamp(1, p_i),
    };
    let tau_used = match method {
        Method::Ista => params.tau.resolve(&h, &y),
        _ => 0.0,
    };

    let s0 = initialize_from_fbp(&fbp_image, &setup.wavelet, &mask, &iset, r_used)?;

    let mu0 = match params.mu0 {
        Some(mu) => StepSizeRule::Constant { mu },
        None => StepSizeRule::Adaptive { rho_hat },
    };
    let config = SolverConfig {
        r: r_used,
        epsilon: params.epsilon.unwrap_or_else(|| method.default_epsilon()),
        max_iters: params.max_iters,
        tau: tau_used,
        mu0,
        rho_safety: params.rho_safety,
    };

    let result: SolverResult = match method {
        Method::Iht => mask_iht(&y, &h, &config, &s0)?,
        Method::Dore => mask_dore(&y, &h, &config, &s0)?,
        Method::Ista => mask_ista(&y, &h, &config, &s0)?,
        Method::Fbp => unreachable!(),
    };

    let image = synthesize_masked_image(&setup.wavelet, &mask, &iset, &result.coeffs)?;
    let report = truth
        .map(|t| psnr(&image, t, &Mask::full(n)))
        .transpose()?;

    Ok(ReconOutcome {
        image,
        mask,
        p_i,
        r_used,
        tau_used,
        rho_hat,
        trace: Some(result.trace),
        converged: result.converged,
        psnr_full_grid: report,
    })
}
