//! Sparse reconstruction solvers over an abstract measurement operator:
//! hard-thresholded gradient iteration with an adaptive step-size schedule,
//! its double-overrelaxation acceleration, and a proximal-gradient solver for
//! the l1-relaxed problem.
//!
//! All solvers minimize the residual ||y - H s||^2 over coefficient vectors
//! s, the first two under a hard sparsity budget r, the last with an l1
//! penalty tau. Step sizes are chosen so the squared residual never
//! increases; see [`step_size_search`].

use crate::error::{Error, Result};
use crate::image::Image;
use crate::masking::{embed, restrict, IdentifiableSet, Mask};
use crate::operators::LinearOperator;
use crate::transforms::{forward_dwt2, WaveletSpec};
use crate::vecmath::{add_scaled, dot, norm_sq, sub};

/// Hard shrink loops beyond this count indicate a broken operator/adjoint
/// pair rather than a small step size.
const MAX_SHRINKS: usize = 10_000;

/// Doubling is capped so degenerate instances (exactly zero residual) cannot
/// grow the step size forever.
const MAX_DOUBLINGS: usize = 60;

/// Initial step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizeRule {
    /// Start from 1 / (safety * rho)^2 using a spectral-norm estimate of H,
    /// then follow the adaptive doubling/shrinking schedule.
    Adaptive { rho_hat: f64 },
    /// Fixed step size, no schedule. With a full mask this reduces the
    /// hard-thresholding iteration to its textbook constant-step form.
    Constant { mu: f64 },
}

/// Solver parameters shared by all iterative methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Sparsity budget r (hard-thresholding methods).
    pub r: usize,
    /// Convergence threshold epsilon on the normalized squared iterate
    /// difference ||s_{q+1} - s_q||^2 / p_I.
    pub epsilon: f64,
    /// Hard iteration cap.
    pub max_iters: usize,
    /// l1 regularization weight tau (proximal solver only).
    pub tau: f64,
    /// Initial step-size rule.
    pub mu0: StepSizeRule,
    /// Safety factor applied to the spectral estimate when forming step-size
    /// bounds; guards against a slightly under-converged estimate.
    pub rho_safety: f64,
}

impl SolverConfig {
    pub fn new(r: usize, mu0: StepSizeRule) -> Self {
        SolverConfig {
            r,
            epsilon: 1e-14,
            max_iters: 100_000,
            tau: 0.0,
            mu0,
            rho_safety: 1.01,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::invalid("solver config", "r must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("solver config", "epsilon must be positive"));
        }
        if self.tau < 0.0 {
            return Err(Error::invalid("solver config", "tau must be nonnegative"));
        }
        match self.mu0 {
            StepSizeRule::Adaptive { rho_hat } if !(rho_hat > 0.0) => {
                Err(Error::invalid("solver config", "rho_hat must be positive"))
            }
            StepSizeRule::Constant { mu } if !(mu > 0.0) => {
                Err(Error::invalid("solver config", "mu must be positive"))
            }
            _ => Ok(()),
        }
    }

    fn initial_mu(&self) -> f64 {
        match self.mu0 {
            StepSizeRule::Adaptive { rho_hat } => {
                let safe = rho_hat * self.rho_safety;
                1.0 / (safe * safe)
            }
            StepSizeRule::Constant { mu } => mu,
        }
    }
}

/// One iteration record. Only the spec'd columns end up in the CSV export;
/// the residual of the pre-overrelaxation iterate and its step norm are kept
/// for verifying the residual-decrease bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub q: usize,
    pub residual_sq: f64,
    pub mu: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    /// Overrelaxation acceptance: true when the re-thresholded
    /// overrelaxed point won the residual comparison.
    pub decision: Option<bool>,
    pub shrinks: Option<usize>,
    /// ||y - H s_hat||^2 of the plain thresholded gradient step.
    pub residual_sq_hat: Option<f64>,
    /// ||s_hat - s_q||^2.
    pub hat_step_sq: Option<f64>,
    /// l1-regularized objective (proximal solver only).
    pub objective: Option<f64>,
}

/// Per-iteration history of a solver run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    fn push_initial(&mut self, residual_sq: f64) {
        self.records.push(IterationRecord {
            q: 0,
            residual_sq,
            mu: None,
            alpha1: None,
            alpha2: None,
            decision: None,
            shrinks: None,
            residual_sq_hat: None,
            hat_step_sq: None,
            objective: None,
        });
    }

    /// Completed iterations (the initial state is not an iteration).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// CSV export with columns q, residual_sq, mu, alpha1, alpha2, decision,
    /// shrinks. Missing fields are left empty.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "q,residual_sq,mu,alpha1,alpha2,decision,shrinks")?;
        for rec in &self.records {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                rec.q,
                rec.residual_sq,
                opt(rec.mu),
                opt(rec.alpha1),
                opt(rec.alpha2),
                rec.decision.map(|d| (d as u8).to_string()).unwrap_or_default(),
                rec.shrinks.map(|s| s.to_string()).unwrap_or_default(),
            )?;
        }
        Ok(())
    }
}

/// Final coefficients and run history.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub coeffs: Vec<f64>,
    pub trace: IterationTrace,
    pub converged: bool,
}

/// Keeps the r largest-magnitude entries, zeroes the rest. Ties are broken
/// toward the lower index, so the result is deterministic.
pub fn hard_threshold(s: &[f64], r: usize) -> Vec<f64> {
    if r >= s.len() {
        return s.to_vec();
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    // stable sort by descending magnitude keeps lower indices first on ties
    order.sort_by(|&a, &b| {
        s[b].abs()
            .partial_cmp(&s[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = vec![0.0; s.len()];
    for &idx in order.iter().take(r) {
        out[idx] = s[idx];
    }
    out
}

/// Componentwise shrink toward zero by `t`, sign preserved; the proximal map
/// of t * ||.||_1.
pub fn soft_threshold(s: &[f64], t: f64) -> Vec<f64> {
    assert!(t >= 0.0, "soft_threshold requires a nonnegative threshold");
    s.iter()
        .map(|&v| {
            if v > t {
                v - t
            } else if v < -t {
                v + t
            } else {
                0.0
            }
        })
        .collect()
}

/// One thresholded gradient step: T_r(s + mu * H^T (y - H s)).
pub fn iht_step<H: LinearOperator + ?Sized>(
    s: &[f64],
    mu: f64,
    h: &H,
    y: &[f64],
    r: usize,
) -> Vec<f64> {
    assert!(mu > 0.0, "step size must be positive");
    let residual = sub(y, &h.apply(s));
    let grad = h.apply_adjoint(&residual);
    hard_threshold(&add_scaled(s, mu, &grad), r)
}

/// Accepted step size with the iterate it produced.
#[derive(Debug, Clone)]
pub struct StepSearch {
    pub mu: f64,
    pub s_hat: Vec<f64>,
    pub h_s_hat: Vec<f64>,
    pub residual_sq: f64,
    pub shrinks: usize,
    pub doublings: usize,
}

struct Candidate {
    s_hat: Vec<f64>,
    h_s_hat: Vec<f64>,
    residual_sq: f64,
}

fn evaluate_candidate<H: LinearOperator + ?Sized>(
    s: &[f64],
    grad: &[f64],
    mu: f64,
    h: &H,
    y: &[f64],
    r: usize,
) -> Candidate {
    let s_hat = hard_threshold(&add_scaled(s, mu, grad), r);
    let h_s_hat = h.apply(&s_hat);
    let residual_sq = norm_sq(&sub(y, &h_s_hat));
    Candidate {
        s_hat,
        h_s_hat,
        residual_sq,
    }
}

/// Step-size schedule: on the first iteration, grow the step by doubling
/// while the thresholded step keeps the residual from increasing, and keep
/// the last passing value; if even the initial guess fails, shrink by 0.9
/// until it passes. On later iterations, start from the previous step size
/// and only shrink. Termination is guaranteed because the residual condition
/// provably holds for any step size below 1 / rho(H)^2.
pub fn step_size_search<H: LinearOperator + ?Sized>(
    s_q: &[f64],
    h: &H,
    y: &[f64],
    r: usize,
    mu_in: f64,
    first_iteration: bool,
) -> Result<StepSearch> {
    if !(mu_in > 0.0) {
        return Err(Error::invalid("step size", "mu_in must be positive"));
    }
    let h_s = h.apply(s_q);
    let residual_q = sub(y, &h_s);
    let residual_sq_q = norm_sq(&residual_q);
    let grad = h.apply_adjoint(&residual_q);
    search_from_gradient(s_q, &grad, residual_sq_q, h, y, r, mu_in, first_iteration)
}

#[allow(clippy::too_many_arguments)]
fn search_from_gradient<H: LinearOperator + ?Sized>(
    s_q: &[f64],
    grad: &[f64],
    residual_sq_q: f64,
    h: &H,
    y: &[f64],
    r: usize,
    mu_in: f64,
    first_iteration: bool,
) -> Result<StepSearch> {
    let mut mu = mu_in;
    let mut cand = evaluate_candidate(s_q, grad, mu, h, y, r);
    let mut shrinks = 0usize;
    let mut doublings = 0usize;

    if cand.residual_sq <= residual_sq_q {
        if first_iteration {
            // grow while the condition keeps holding; keep the last passing
            // candidate when it finally fails
            while doublings < MAX_DOUBLINGS {
                let next_mu = mu * 2.0;
                let next = evaluate_candidate(s_q, grad, next_mu, h, y, r);
                if next.residual_sq <= residual_sq_q {
                    mu = next_mu;
                    cand = next;
                    doublings += 1;
                } else {
                    break;
                }
            }
        }
    } else {
        loop {
            if shrinks >= MAX_SHRINKS {
                return Err(Error::ShrinkCapExceeded(MAX_SHRINKS));
            }
            mu *= 0.9;
            shrinks += 1;
            cand = evaluate_candidate(s_q, grad, mu, h, y, r);
            if cand.residual_sq <= residual_sq_q {
                break;
            }
        }
    }

    Ok(StepSearch {
        mu,
        s_hat: cand.s_hat,
        h_s_hat: cand.h_s_hat,
        residual_sq: cand.residual_sq,
        shrinks,
        doublings,
    })
}

/// Exact minimizer of the residual on the line through `current` in the
/// direction `current - anchor`: returns the step coefficient and the point.
/// A direction that H maps to zero yields the degenerate answer alpha = 0.
pub fn overrelax_line<H: LinearOperator + ?Sized>(
    current: &[f64],
    anchor: &[f64],
    h: &H,
    y: &[f64],
) -> (f64, Vec<f64>) {
    let h_current = h.apply(current);
    let h_anchor = h.apply(anchor);
    let alpha = line_minimizer(&h_current, &h_anchor, y);
    (alpha, add_scaled(current, alpha, &sub(current, anchor)))
}

/// Closed-form line minimizer in measurement space:
/// alpha = <H current - H anchor, y - H current> / ||H current - H anchor||^2.
fn line_minimizer(h_current: &[f64], h_anchor: &[f64], y: &[f64]) -> f64 {
    let direction = sub(h_current, h_anchor);
    let denom = norm_sq(&direction);
    if denom == 0.0 {
        return 0.0;
    }
    dot(&direction, &sub(y, h_current)) / denom
}

fn converged(diff_sq: f64, dim: usize, epsilon: f64) -> bool {
    diff_sq / (dim as f64) < epsilon
}

/// Hard-thresholded gradient iteration with the adaptive step-size schedule.
/// The squared residual is non-increasing across iterations by construction.
pub fn mask_iht<H: LinearOperator + ?Sized>(
    y: &[f64],
    h: &H,
    config: &SolverConfig,
    s0: &[f64],
) -> Result<SolverResult> {
    config.validate()?;
    check_dims(h, y, s0)?;
    let p_i = s0.len();
    let mut s = hard_threshold(s0, config.r);
    let mut h_s = h.apply(&s);
    let mut residual_sq = norm_sq(&sub(y, &h_s));

    let mut trace = IterationTrace::default();
    trace.push_initial(residual_sq);
    let mut mu = config.initial_mu();
    let adaptive = matches!(config.mu0, StepSizeRule::Adaptive { .. });
    let mut converged_flag = false;

    for q in 1..=config.max_iters {
        let residual = sub(y, &h_s);
        let grad = h.apply_adjoint(&residual);
        let (s_new, h_s_new, res_sq_new, shrinks) = if adaptive {
            let step = search_from_gradient(&s, &grad, residual_sq, h, y, config.r, mu, q == 1)?;
            mu = step.mu;
            (step.s_hat, step.h_s_hat, step.residual_sq, step.shrinks)
        } else {
            let cand = evaluate_candidate(&s, &grad, mu, h, y, config.r);
            (cand.s_hat, cand.h_s_hat, cand.residual_sq, 0)
        };

        let diff_sq = norm_sq(&sub(&s_new, &s));
        let hat_step_sq = diff_sq;
        trace.records.push(IterationRecord {
            q,
            residual_sq: res_sq_new,
            mu: Some(mu),
            alpha1: None,
            alpha2: None,
            decision: None,
            shrinks: Some(shrinks),
            residual_sq_hat: Some(res_sq_new),
            hat_step_sq: Some(hat_step_sq),
            objective: None,
        });

        s = s_new;
        h_s = h_s_new;
        residual_sq = res_sq_new;

        if converged(diff_sq, p_i, config.epsilon) {
            converged_flag = true;
            break;
        }
    }

    Ok(SolverResult {
        coeffs: s,
        trace,
        converged: converged_flag,
    })
}

/// Double-overrelaxation acceleration: after each thresholded gradient step,
/// two exact line searches (against the current and the previous iterate)
/// followed by re-thresholding; the overrelaxed point is kept only when it
/// strictly lowers the residual.
pub fn mask_dore<H: LinearOperator + ?Sized>(
    y: &[f64],
    h: &H,
    config: &SolverConfig,
    s0: &[f64],
) -> Result<SolverResult> {
    config.validate()?;
    check_dims(h, y, s0)?;
    let p_i = s0.len();
    let mut s = hard_threshold(s0, config.r);
    let mut h_s = h.apply(&s);
    let mut residual_sq = norm_sq(&sub(y, &h_s));

    // previous completed iterate; bootstrapped to s0 so the first second
    // overrelaxation degenerates safely
    let mut s_prev = s.clone();
    let mut h_s_prev = h_s.clone();

    let mut trace = IterationTrace::default();
    trace.push_initial(residual_sq);
    let mut mu = config.initial_mu();
    let adaptive = matches!(config.mu0, StepSizeRule::Adaptive { .. });
    let mut converged_flag = false;

    for q in 1..=config.max_iters {
        let residual = sub(y, &h_s);
        let grad = h.apply_adjoint(&residual);

        // thresholded gradient step
        let (s_hat, h_s_hat, res_sq_hat, shrinks) = if adaptive {
            let step = search_from_gradient(&s, &grad, residual_sq, h, y, config.r, mu, q == 1)?;
            mu = step.mu;
            (step.s_hat, step.h_s_hat, step.residual_sq, step.shrinks)
        } else {
            let cand = evaluate_candidate(&s, &grad, mu, h, y, config.r);
            (cand.s_hat, cand.h_s_hat, cand.residual_sq, 0)
        };
        let hat_step_sq = norm_sq(&sub(&s_hat, &s));

        // first overrelaxation, against the current iterate
        let alpha1 = line_minimizer(&h_s_hat, &h_s, y);
        let z_bar = add_scaled(&s_hat, alpha1, &sub(&s_hat, &s));
        let h_z_bar = add_scaled(&h_s_hat, alpha1, &sub(&h_s_hat, &h_s));

        // second overrelaxation, against the previous iterate
        let alpha2 = line_minimizer(&h_z_bar, &h_s_prev, y);
        let z_tilde = add_scaled(&z_bar, alpha2, &sub(&z_bar, &s_prev));

        // re-threshold and decide by strict residual comparison
        let s_tilde = hard_threshold(&z_tilde, config.r);
        let h_s_tilde = h.apply(&s_tilde);
        let res_sq_tilde = norm_sq(&sub(y, &h_s_tilde));
        let take_tilde = res_sq_tilde < res_sq_hat;

        let (s_next, h_s_next, res_sq_next) = if take_tilde {
            (s_tilde, h_s_tilde, res_sq_tilde)
        } else {
            (s_hat, h_s_hat, res_sq_hat)
        };

        let diff_sq = norm_sq(&sub(&s_next, &s));
        trace.records.push(IterationRecord {
            q,
            residual_sq: res_sq_next,
            mu: Some(mu),
            alpha1: Some(alpha1),
            alpha2: Some(alpha2),
            decision: Some(take_tilde),
            shrinks: Some(shrinks),
            residual_sq_hat: Some(res_sq_hat),
            hat_step_sq: Some(hat_step_sq),
            objective: None,
        });

        s_prev = std::mem::replace(&mut s, s_next);
        h_s_prev = std::mem::replace(&mut h_s, h_s_next);
        residual_sq = res_sq_next;

        if converged(diff_sq, p_i, config.epsilon) {
            converged_flag = true;
            break;
        }
    }

    Ok(SolverResult {
        coeffs: s,
        trace,
        converged: converged_flag,
    })
}

/// Proximal-gradient iteration for the l1-relaxed objective
/// 1/2 ||y - H s||^2 + tau ||s||_1 with the fixed safe step 1 / rho_hat^2.
/// The objective is non-increasing at that step size.
pub fn mask_ista<H: LinearOperator + ?Sized>(
    y: &[f64],
    h: &H,
    config: &SolverConfig,
    s0: &[f64],
) -> Result<SolverResult> {
    config.validate()?;
    check_dims(h, y, s0)?;
    let p_i = s0.len();
    let mu = config.initial_mu();
    let tau = config.tau;

    let mut s = s0.to_vec();
    let mut h_s = h.apply(&s);
    let residual_sq0 = norm_sq(&sub(y, &h_s));

    let objective =
        |res_sq: f64, s: &[f64]| 0.5 * res_sq + tau * s.iter().map(|v| v.abs()).sum::<f64>();

    let mut trace = IterationTrace::default();
    trace.push_initial(residual_sq0);
    trace.records[0].objective = Some(objective(residual_sq0, &s));
    let mut converged_flag = false;

    for q in 1..=config.max_iters {
        let residual = sub(y, &h_s);
        let grad = h.apply_adjoint(&residual);
        let s_new = soft_threshold(&add_scaled(&s, mu, &grad), mu * tau);
        let h_s_new = h.apply(&s_new);
        let res_sq_new = norm_sq(&sub(y, &h_s_new));
        let diff_sq = norm_sq(&sub(&s_new, &s));

        trace.records.push(IterationRecord {
            q,
            residual_sq: res_sq_new,
            mu: Some(mu),
            alpha1: None,
            alpha2: None,
            decision: None,
            shrinks: None,
            residual_sq_hat: None,
            hat_step_sq: None,
            objective: Some(objective(res_sq_new, &s_new)),
        });

        s = s_new;
        h_s = h_s_new;

        if converged(diff_sq, p_i, config.epsilon) {
            converged_flag = true;
            break;
        }
    }

    Ok(SolverResult {
        coeffs: s,
        trace,
        converged: converged_flag,
    })
}

/// Initial coefficients from a classical reconstruction: mask the image,
/// transform, keep only identifiable entries, hard-threshold to the sparsity
/// budget.
pub fn initialize_from_fbp(
    fbp_image: &Image,
    spec: &WaveletSpec,
    mask: &Mask,
    iset: &IdentifiableSet,
    r: usize,
) -> Result<Vec<f64>> {
    let masked = embed(&restrict(fbp_image, mask)?, mask)?;
    let coeffs = forward_dwt2(&masked, spec)?;
    let restricted = iset.restrict(&coeffs)?;
    Ok(hard_threshold(&restricted, r))
}

fn check_dims<H: LinearOperator + ?Sized>(h: &H, y: &[f64], s0: &[f64]) -> Result<()> {
    if y.len() != h.out_dim() {
        return Err(Error::DimensionMismatch {
            context: "solver measurement vector",
            expected: h.out_dim(),
            got: y.len(),
        });
    }
    if s0.len() != h.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "solver initial coefficients",
            expected: h.in_dim(),
            got: s0.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{spectral_norm, DenseMatrix};
    use crate::vecmath::count_nonzero;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hard_threshold_keeps_largest_magnitudes() {
        let s = [0.0, 1.0, -5.0, 0.0, 3.0, 0.0];
        assert_eq!(hard_threshold(&s, 2), vec![0.0, 0.0, -5.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn hard_threshold_r_zero_and_oversized() {
        let s = [1.0, -2.0];
        assert_eq!(hard_threshold(&s, 0), vec![0.0, 0.0]);
        assert_eq!(hard_threshold(&s, 5), vec![1.0, -2.0]);
    }

    #[test]
    fn hard_threshold_tie_takes_lower_index() {
        assert_eq!(hard_threshold(&[2.0, -2.0, 1.0], 1), vec![2.0, 0.0, 0.0]);
    }

    /// Exhaustive stable-sort oracle over small integer vectors.
    #[test]
    fn hard_threshold_matches_exhaustive_oracle() {
        let vals = [-2i32, -1, 0, 1, 2];
        for a in vals {
            for b in vals {
                for c in vals {
                    for d in vals {
                        let s = [a as f64, b as f64, c as f64, d as f64];
                        for r in 0..=4usize {
                            let got = hard_threshold(&s, r);
                            // oracle: stable sort of indices by descending |v|
                            let mut idx = [0usize, 1, 2, 3];
                            idx.sort_by(|&p, &q| {
                                s[q].abs().partial_cmp(&s[p].abs()).unwrap()
                            });
                            let mut want = [0.0; 4];
                            for &i in idx.iter().take(r) {
                                want[i] = s[i];
                            }
                            assert_eq!(got, want.to_vec(), "s={s:?} r={r}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn soft_threshold_componentwise() {
        assert_eq!(soft_threshold(&[3.0, -1.0, 0.5], 1.0), vec![2.0, 0.0, 0.0]);
        let v = [0.3, -0.7, 2.0];
        assert_eq!(soft_threshold(&v, 0.0), v.to_vec());
    }

    /// Grid-scan minimization oracle for the proximal map.
    #[test]
    fn soft_threshold_matches_grid_scan_minimizer() {
        let grid_step = 1e-4;
        for &si in &[-2.5f64, -1.0, -0.3, 0.0, 0.4, 1.7, 3.0] {
            for &t in &[0.0f64, 0.2, 1.0, 2.0] {
                let got = soft_threshold(&[si], t)[0];
                let mut best = f64::INFINITY;
                let mut best_z = 0.0;
                let lim = si.abs() + t + 1.0;
                let steps = (2.0 * lim / grid_step) as usize;
                for k in 0..=steps {
                    let z = -lim + k as f64 * grid_step;
                    let val = 0.5 * (z - si) * (z - si) + t * z.abs();
                    if val < best {
                        best = val;
                        best_z = z;
                    }
                }
                assert!(
                    (got - best_z).abs() <= grid_step,
                    "s={si} t={t}: {got} vs {best_z}"
                );
            }
        }
    }

    fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn iht_step_zero_residual_is_pure_threshold() {
        let h = random_dense(5, 8, 1);
        let s: Vec<f64> = vec![0.0, 2.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5];
        let y = h.apply(&s);
        let out = iht_step(&s, 0.7, &h, &y, 2);
        assert_eq!(out, hard_threshold(&s, 2));
    }

    /// With orthonormal columns and mu = 1 from zero, one step lands on the
    /// least-squares solution H^T y.
    #[test]
    fn iht_step_orthonormal_columns_gives_least_squares() {
        let raw = random_dense(6, 4, 3);
        let m = DMatrix::from_row_slice(6, 4, raw.data());
        let q = m.qr().q();
        // nalgebra stores column-major; rebuild row-major explicitly
        let mut data = vec![0.0; 24];
        for i in 0..6 {
            for j in 0..4 {
                data[i * 4 + j] = q[(i, j)];
            }
        }
        let h = DenseMatrix::new(6, 4, data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = iht_step(&vec![0.0; 4], 1.0, &h, &y, 4);
        // dense normal-equations oracle (Q^T Q = I)
        let yv = nalgebra::DVector::from_row_slice(&y);
        let want = q.transpose() * yv;
        for j in 0..4 {
            assert!((got[j] - want[j]).abs() < 1e-10);
        }
    }

    /// The residual never increases when the step size respects the spectral
    /// bound and the iterate is feasible.
    #[test]
    fn iht_step_safe_mu_never_increases_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..200u64 {
            let rows = rng.gen_range(4..12);
            let cols = rng.gen_range(6..20);
            let r = rng.gen_range(1..=cols.min(6));
            let h = random_dense(rows, cols, 1000 + trial);
            let rho = spectral_norm(&h, 1e-10, 2000, trial).rho;
            let mu = 1.0 / (rho * rho);
            let mut s = vec![0.0; cols];
            for _ in 0..r {
                s[rng.gen_range(0..cols)] = rng.gen_range(-2.0..2.0);
            }
            let s = hard_threshold(&s, r);
            let y: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let before = norm_sq(&sub(&y, &h.apply(&s)));
            let out = iht_step(&s, mu, &h, &y, r);
            let after = norm_sq(&sub(&y, &h.apply(&out)));
            assert!(
                after <= before + 1e-12 * before.max(1.0),
                "trial {trial}: {after} > {before}"
            );
            assert!(count_nonzero(&out) <= r);
        }
    }

    #[test]
    fn step_search_accepts_safe_mu_without_shrinks() {
        let h = random_dense(8, 12, 9);
        let rho = spectral_norm(&h, 1e-10, 2000, 0).rho;
        let mu = 1.0 / (rho * rho);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut s = vec![0.0; 12];
        s[3] = 1.0;
        s[7] = -0.5;
        let out = step_size_search(&s, &h, &y, 2, mu, false).unwrap();
        assert_eq!(out.shrinks, 0);
        assert_eq!(out.mu, mu);
    }

    /// With an enormous initial step on a non-first iteration, the accepted
    /// value is mu_in * 0.9^k for the smallest passing k.
    #[test]
    fn step_search_shrink_matches_direct_scan() {
        let h = random_dense(10, 14, 21);
        let rho = spectral_norm(&h, 1e-10, 2000, 1).rho;
        let mu_in = 1e6 / (rho * rho);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let y: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut s = vec![0.0; 14];
        s[0] = 0.4;
        s[5] = -1.1;
        let r = 3;
        let out = step_size_search(&s, &h, &y, r, mu_in, false).unwrap();

        // direct scan oracle over k
        let h_s = h.apply(&s);
        let res_q = norm_sq(&sub(&y, &h_s));
        let grad = h.apply_adjoint(&sub(&y, &h_s));
        let mut k = 0usize;
        let accepted = loop {
            let mu = mu_in * 0.9f64.powi(k as i32);
            let cand = hard_threshold(&add_scaled(&s, mu, &grad), r);
            let res = norm_sq(&sub(&y, &h.apply(&cand)));
            if res <= res_q {
                break mu;
            }
            k += 1;
        };
        assert!(k > 0, "scan should require shrinking");
        assert!((out.mu - accepted).abs() <= 1e-12 * accepted);
        assert_eq!(out.shrinks, k);
    }

    #[test]
    fn overrelax_degenerate_and_scalar_cases() {
        let h = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let y = [1.0];
        // current == anchor
        let (alpha, point) = overrelax_line(&[0.5], &[0.5], &h, &y);
        assert_eq!(alpha, 0.0);
        assert_eq!(point, vec![0.5]);
        // scalar calculus oracle: minimize (1 - (0.5 + 0.5 a))^2 => a = 1
        let (alpha, point) = overrelax_line(&[0.5], &[0.0], &h, &y);
        assert!((alpha - 1.0).abs() < 1e-12);
        assert!((point[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overrelax_beats_thousand_point_line_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for trial in 0..20u64 {
            let h = random_dense(7, 5, 300 + trial);
            let y: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let current: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let anchor: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, point) = overrelax_line(&current, &anchor, &h, &y);
            let res_point = norm_sq(&sub(&y, &h.apply(&point)));
            let mut best = f64::INFINITY;
            for k in 0..1000 {
                let alpha = -5.0 + 10.0 * k as f64 / 999.0;
                let cand = add_scaled(&current, alpha, &sub(&current, &anchor));
                best = best.min(norm_sq(&sub(&y, &h.apply(&cand))));
            }
            assert!(res_point <= best + 1e-12, "trial {trial}");
            // the line minimum also beats both endpoints
            let res_current = norm_sq(&sub(&y, &h.apply(&current)));
            assert!(res_point <= res_current + 1e-12);
        }
    }

    fn planted_instance(
        rows: usize,
        cols: usize,
        sparsity: usize,
        seed: u64,
    ) -> (DenseMatrix, Vec<f64>, Vec<f64>) {
        let h = DenseMatrix::gaussian_normalized(rows, cols, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let mut s_star = vec![0.0; cols];
        let mut placed = 0;
        while placed < sparsity {
            let idx = rng.gen_range(0..cols);
            if s_star[idx] == 0.0 {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                s_star[idx] =
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                placed += 1;
            }
        }
        let y = h.apply(&s_star);
        (h, s_star, y)
    }

    #[test]
    fn mask_iht_trivial_zero_instance_converges_immediately() {
        let h = random_dense(6, 10, 40);
        let rho = spectral_norm(&h, 1e-10, 2000, 3).rho;
        let config = SolverConfig::new(3, StepSizeRule::Adaptive { rho_hat: rho });
        let result = mask_iht(&vec![0.0; 6], &h, &config, &vec![0.0; 10]).unwrap();
        assert!(result.converged);
        assert_eq!(result.trace.iterations(), 1);
        assert!(result.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_iht_recovers_planted_sparse_vector() {
        let (h, s_star, y) = planted_instance(40, 100, 5, 7);
        let rho = spectral_norm(&h, 1e-9, 3000, 5).rho;
        let mut config = SolverConfig::new(5, StepSizeRule::Adaptive { rho_hat: rho });
        config.epsilon = 1e-28;
        config.max_iters = 3000;
        let result = mask_iht(&y, &h, &config, &vec![0.0; 100]).unwrap();
        let err = norm_sq(&sub(&result.coeffs, &s_star)).sqrt() / norm_sq(&s_star).sqrt();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn mask_dore_matches_iht_on_plantable_instances() {
        for trial in 0..20u64 {
            let (h, _s_star, y) = planted_instance(30, 80, 4, 100 + trial);
            let rho = spectral_norm(&h, 1e-9, 3000, 5).rho;
            let mut config = SolverConfig::new(4, StepSizeRule::Adaptive { rho_hat: rho });
            config.epsilon = 1e-28;
            config.max_iters = 4000;
            let iht = mask_iht(&y, &h, &config, &vec![0.0; 80]).unwrap();
            let dore = mask_dore(&y, &h, &config, &vec![0.0; 80]).unwrap();
            let res_iht = iht.trace.records.last().unwrap().residual_sq;
            let res_dore = dore.trace.records.last().unwrap().residual_sq;
            assert!(
                (res_iht - res_dore).abs() <= 1e-10,
                "trial {trial}: {res_iht} vs {res_dore}"
            );
            assert!(
                dore.trace.iterations() <= iht.trace.iterations(),
                "trial {trial}: dore {} > iht {}",
                dore.trace.iterations(),
                iht.trace.iterations()
            );
        }
    }

    #[test]
    fn dore_decision_never_loses_to_the_plain_step() {
        let (h, _s, y) = planted_instance(25, 60, 6, 3);
        let rho = spectral_norm(&h, 1e-9, 3000, 5).rho;
        let mut config = SolverConfig::new(6, StepSizeRule::Adaptive { rho_hat: rho });
        config.epsilon = 1e-24;
        config.max_iters = 500;
        let result = mask_dore(&y, &h, &config, &vec![0.0; 60]).unwrap();
        for rec in &result.trace.records[1..] {
            assert!(rec.residual_sq <= rec.residual_sq_hat.unwrap() + 1e-15);
        }
    }

    #[test]
    fn dore_first_iteration_bootstrap_is_degenerate_safe() {
        // with s_prev == s0 and z_bar == s0 the second overrelaxation must
        // produce alpha2 = 0 rather than NaN
        let h = DenseMatrix::identity(3);
        let y = [0.0, 0.0, 0.0];
        let config = SolverConfig::new(1, StepSizeRule::Constant { mu: 1.0 });
        let result = mask_dore(&y, &h, &config, &[0.0, 0.0, 0.0]).unwrap();
        assert!(result.converged);
        let rec = &result.trace.records[1];
        assert_eq!(rec.alpha1, Some(0.0));
        assert_eq!(rec.alpha2, Some(0.0));
    }

    #[test]
    fn residuals_are_monotone_for_both_solvers() {
        for trial in 0..30u64 {
            let (h, _s, y) = planted_instance(20, 50, 8, 500 + trial);
            let rho = spectral_norm(&h, 1e-9, 3000, 5).rho;
            let mut config = SolverConfig::new(5, StepSizeRule::Adaptive { rho_hat: rho });
            config.epsilon = 1e-20;
            config.max_iters = 300;
            for run in [
                mask_iht(&y, &h, &config, &vec![0.0; 50]).unwrap(),
                mask_dore(&y, &h, &config, &vec![0.0; 50]).unwrap(),
            ] {
                let r0 = run.trace.records[0].residual_sq;
                for w in run.trace.records.windows(2) {
                    assert!(
                        w[1].residual_sq <= w[0].residual_sq + 1e-12 * r0,
                        "trial {trial}"
                    );
                }
                let mus: Vec<f64> = run.trace.records[1..]
                    .iter()
                    .map(|r| r.mu.unwrap())
                    .collect();
                for w in mus.windows(2) {
                    assert!(w[1] <= w[0] + 1e-15, "mu grew: {:?}", mus);
                }
            }
        }
    }

    #[test]
    fn ista_tau_zero_reaches_least_squares_objective() {
        let h = random_dense(6, 4, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rho = spectral_norm(&h, 1e-10, 3000, 2).rho;
        let mut config = SolverConfig::new(4, StepSizeRule::Adaptive { rho_hat: rho });
        config.epsilon = 1e-26;
        config.max_iters = 20000;
        config.tau = 0.0;
        let result = mask_ista(&y, &h, &config, &vec![0.0; 4]).unwrap();
        // dense least-squares oracle
        let m = DMatrix::from_row_slice(6, 4, h.data());
        let yv = nalgebra::DVector::from_row_slice(&y);
        let sol = m.clone().svd(true, true).solve(&yv, 1e-12).unwrap();
        let best = (m * sol - yv).norm_squared() * 0.5;
        let got = result.trace.records.last().unwrap().objective.unwrap();
        assert!((got - best).abs() < 1e-8, "{got} vs {best}");
    }

    #[test]
    fn ista_large_tau_fixes_zero() {
        let h = random_dense(5, 7, 70);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad = h.apply_adjoint(&y);
        let tau = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rho = spectral_norm(&h, 1e-10, 2000, 2).rho;
        let mut config = SolverConfig::new(7, StepSizeRule::Adaptive { rho_hat: rho });
        config.tau = tau;
        config.max_iters = 50;
        let result = mask_ista(&y, &h, &config, &vec![0.0; 7]).unwrap();
        assert!(result.converged);
        assert!(result.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ista_objective_is_monotone() {
        let (h, _s, y) = planted_instance(20, 40, 5, 80);
        let rho = spectral_norm(&h, 1e-9, 3000, 2).rho;
        let mut config = SolverConfig::new(5, StepSizeRule::Adaptive { rho_hat: rho });
        config.tau = 1e-3;
        config.epsilon = 1e-24;
        config.max_iters = 500;
        let result = mask_ista(&y, &h, &config, &vec![0.0; 40]).unwrap();
        let objectives: Vec<f64> = result
            .trace
            .records
            .iter()
            .map(|r| r.objective.unwrap())
            .collect();
        for w in objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * objectives[0].max(1.0));
        }
    }

    #[test]
    fn sparsity_budget_is_preserved_every_iteration() {
        let (h, _s, y) = planted_instance(15, 30, 10, 90);
        let rho = spectral_norm(&h, 1e-9, 2000, 2).rho;
        let mut config = SolverConfig::new(4, StepSizeRule::Adaptive { rho_hat: rho });
        config.max_iters = 50;
        config.epsilon = 1e-30;
        let result = mask_dore(&y, &h, &config, &vec![0.2; 30]).unwrap();
        assert!(count_nonzero(&result.coeffs) <= 4);
    }

    #[test]
    fn trace_csv_has_spec_columns() {
        let h = DenseMatrix::identity(2);
        let config = SolverConfig::new(1, StepSizeRule::Constant { mu: 0.5 });
        let result = mask_iht(&[1.0, 0.0], &h, &config, &[0.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        result.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "q,residual_sq,mu,alpha1,alpha2,decision,shrinks"
        );
        assert!(text.lines().count() >= 2);
    }

    #[test]
    fn solver_rejects_bad_dimensions_and_configs() {
        let h = DenseMatrix::identity(3);
        let config = SolverConfig::new(1, StepSizeRule::Constant { mu: 1.0 });
        assert!(mask_iht(&[0.0; 2], &h, &config, &[0.0; 3]).is_err());
        assert!(mask_iht(&[0.0; 3], &h, &config, &[0.0; 2]).is_err());
        let mut bad = config;
        bad.epsilon = 0.0;
        assert!(mask_iht(&[0.0; 3], &h, &bad, &[0.0; 3]).is_err());
        let mut bad_r = config;
        bad_r.r = 0;
        assert!(mask_dore(&[0.0; 3], &h, &bad_r, &[0.0; 3]).is_err());
    }
}
