//! Matrix-free linear operators with adjoints, the composed measurement
//! operator acting on identifiable coefficients, and power-iteration spectral
//! norm estimation.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::masking::{embed, restrict, IdentifiableSet, Mask};
use crate::transforms::{forward_dwt2, inverse_dwt2, WaveletSpec};
use crate::vecmath::{dot, norm, norm_sq};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Forward/adjoint pair between real vector spaces.
pub trait LinearOperator: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, input: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, input: &[f64]) -> Vec<f64>;
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn apply(&self, input: &[f64]) -> Vec<f64> {
        (**self).apply(input)
    }
    fn apply_adjoint(&self, input: &[f64]) -> Vec<f64> {
        (**self).apply_adjoint(input)
    }
}

/// Dense row-major matrix operator. Used for small synthetic instances and
/// as the reference in operator tests.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::new",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    /// Gaussian matrix with unit-norm columns, a standard random sensing
    /// ensemble for synthetic recovery experiments.
    pub fn gaussian_normalized(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; rows * cols];
        for v in data.iter_mut() {
            // Box-Muller from two uniforms keeps us independent of rand_distr.
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            *v = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
        for j in 0..cols {
            let col_norm: f64 = (0..rows)
                .map(|i| data[i * cols + j] * data[i * cols + j])
                .sum::<f64>()
                .sqrt();
            if col_norm > 0.0 {
                for i in 0..rows {
                    data[i * cols + j] /= col_norm;
                }
            }
        }
        DenseMatrix {
            rows,
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl LinearOperator for DenseMatrix {
    fn in_dim(&self) -> usize {
        self.cols
    }

    fn out_dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.cols, "DenseMatrix::apply input length");
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, input))
            .collect()
    }

    fn apply_adjoint(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.rows, "DenseMatrix::apply_adjoint input length");
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(input) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }
}

/// Composed measurement operator on identifiable coefficients:
/// forward lifts the coefficients, synthesizes the image, zeroes it outside
/// the mask, and applies the sampling operator; the adjoint runs the
/// transposed chain.
#[derive(Debug, Clone)]
pub struct ComposedOperator<P> {
    phi: P,
    spec: WaveletSpec,
    mask: Mask,
    iset: IdentifiableSet,
}

impl<P: LinearOperator> ComposedOperator<P> {
    pub fn new(phi: P, spec: WaveletSpec, mask: Mask, iset: IdentifiableSet) -> Result<Self> {
        let p = spec.coeff_len();
        if phi.in_dim() != p {
            return Err(Error::DimensionMismatch {
                context: "ComposedOperator sampling input",
                expected: p,
                got: phi.in_dim(),
            });
        }
        if mask.side() != spec.size() {
            return Err(Error::DimensionMismatch {
                context: "ComposedOperator mask",
                expected: spec.size(),
                got: mask.side(),
            });
        }
        if iset.total() != p {
            return Err(Error::DimensionMismatch {
                context: "ComposedOperator identifiable set",
                expected: p,
                got: iset.total(),
            });
        }
        Ok(ComposedOperator {
            phi,
            spec,
            mask,
            iset,
        })
    }

    pub fn sampling(&self) -> &P {
        &self.phi
    }

    pub fn identifiable(&self) -> &IdentifiableSet {
        &self.iset
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Image synthesized from identifiable coefficients, zero outside the
    /// mask.
    pub fn synthesize_image(&self, coeffs: &[f64]) -> Result<Image> {
        let full = self.iset.lift(coeffs)?;
        let image = inverse_dwt2(&full, &self.spec)?;
        let masked = restrict(&image, &self.mask)?;
        embed(&masked, &self.mask)
    }
}

/// Builds the composed operator mapping identifiable coefficients to
/// measurements.
pub fn compose_h<P: LinearOperator>(
    phi: P,
    spec: WaveletSpec,
    mask: Mask,
    iset: IdentifiableSet,
) -> Result<ComposedOperator<P>> {
    ComposedOperator::new(phi, spec, mask, iset)
}

impl<P: LinearOperator> LinearOperator for ComposedOperator<P> {
    fn in_dim(&self) -> usize {
        self.iset.p_i()
    }

    fn out_dim(&self) -> usize {
        self.phi.out_dim()
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        let image = self
            .synthesize_image(input)
            .expect("dimensions checked at construction");
        self.phi.apply(image.data())
    }

    fn apply_adjoint(&self, input: &[f64]) -> Vec<f64> {
        let back = self.phi.apply_adjoint(input);
        let image = Image::from_vec(self.spec.size(), back)
            .expect("sampling adjoint output has p entries");
        let masked = restrict(&image, &self.mask).expect("dims checked");
        let zeroed = embed(&masked, &self.mask).expect("dims checked");
        let coeffs = forward_dwt2(&zeroed, &self.spec).expect("dims checked");
        self.iset.restrict(&coeffs).expect("dims checked")
    }
}

/// Result of power-iteration spectral norm estimation.
#[derive(Debug, Clone, Copy)]
pub struct SpectralEstimate {
    /// Largest singular value estimate (raw, no safety factor).
    pub rho: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

impl SpectralEstimate {
    /// Estimate inflated by a safety factor, for use in step-size bounds
    /// where an underestimate would void the monotonicity guarantee.
    pub fn rho_safe(&self, safety: f64) -> f64 {
        self.rho * safety
    }
}

/// Estimates the spectral norm by power iteration on A^T A from a seeded
/// random start. Stops when successive Rayleigh-quotient estimates differ
/// relatively by less than `tol` or after `max_iters` products.
pub fn spectral_norm<O: LinearOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> SpectralEstimate {
    let n = op.in_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A fresh start vector is drawn if the first lands in the null space.
    for _attempt in 0..3 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vnorm = norm(&v);
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);

        let mut estimate = 0.0f64;
        for iter in 1..=max_iters {
            let av = op.apply(&v);
            let new_estimate = norm(&av); // ||Av|| with unit v = sqrt(Rayleigh quotient of A^T A)
            if new_estimate == 0.0 {
                break;
            }
            let w = op.apply_adjoint(&av);
            let wnorm = norm(&w);
            if wnorm == 0.0 {
                break;
            }
            v = w;
            v.iter_mut().for_each(|x| *x /= wnorm);
            let rel = (new_estimate - estimate).abs() / new_estimate.max(f64::MIN_POSITIVE);
            estimate = new_estimate;
            if rel < tol {
                return SpectralEstimate {
                    rho: estimate,
                    iterations_used: iter,
                    converged: true,
                };
            }
        }
        if estimate > 0.0 {
            return SpectralEstimate {
                rho: estimate,
                iterations_used: max_iters,
                converged: false,
            };
        }
    }
    // Zero operator (or start vectors annihilated repeatedly).
    SpectralEstimate {
        rho: 0.0,
        iterations_used: 0,
        converged: true,
    }
}

/// Largest relative adjoint mismatch |<Au, v> - <u, A^T v>| over seeded random
/// pairs, normalized by the product of vector norms and the operator scale.
pub fn adjoint_gap<O: LinearOperator + ?Sized>(op: &O, seed: u64, pairs: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let u: Vec<f64> = (0..op.in_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..op.out_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let au = op.apply(&u);
        let atv = op.apply_adjoint(&v);
        let lhs = dot(&au, &v);
        let rhs = dot(&u, &atv);
        let scale = norm_sq(&au)
            .sqrt()
            .max(norm_sq(&atv).sqrt())
            .max(1e-300)
            * norm(&u).max(norm(&v)).max(1e-300);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    worst
}

/// Materializes an operator column by column; a test and diagnostics helper.
pub fn materialize<O: LinearOperator + ?Sized>(op: &O) -> DenseMatrix {
    let (rows, cols) = (op.out_dim(), op.in_dim());
    let mut data = vec![0.0; rows * cols];
    let mut e = vec![0.0; cols];
    for j in 0..cols {
        e[j] = 1.0;
        let col = op.apply(&e);
        e[j] = 0.0;
        for i in 0..rows {
            data[i * cols + j] = col[i];
        }
    }
    DenseMatrix {
        rows,
        cols,
        data,
    }
}
