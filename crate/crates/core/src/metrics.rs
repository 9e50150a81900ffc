//! Reconstruction quality metrics.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::masking::Mask;

/// Peak signal-to-noise ratio restricted to a mask. The peak range comes
/// from the true image inside the mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsnrReport {
    /// 10 log10(range^2 / mse); +infinity when the error is exactly zero.
    pub psnr_db: f64,
    /// max - min of the true image inside the mask.
    pub peak_range: f64,
    /// Mean squared error over interior pixels.
    pub mse_inside_mask: f64,
}

impl PsnrReport {
    /// Flat key-value text block.
    pub fn to_report_block(&self) -> String {
        format!(
            "psnr_db = {}\npeak_range = {}\nmse_inside_mask = {}\n",
            self.psnr_db, self.peak_range, self.mse_inside_mask
        )
    }
}

/// PSNR of `recon` against `truth` over the interior of `mask`:
/// 10 log10( range^2 / (sum of squared errors / p_M) ).
pub fn psnr(recon: &Image, truth: &Image, mask: &Mask) -> Result<PsnrReport> {
    if recon.side() != truth.side() || recon.side() != mask.side() {
        return Err(Error::DimensionMismatch {
            context: "psnr",
            expected: mask.side(),
            got: recon.side().max(truth.side()),
        });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sse = 0.0;
    for idx in mask.interior_indices() {
        let t = truth.data()[idx];
        lo = lo.min(t);
        hi = hi.max(t);
        let d = recon.data()[idx] - t;
        sse += d * d;
    }
    let peak_range = hi - lo;
    if peak_range == 0.0 {
        return Err(Error::DegeneratePeak);
    }
    let mse = sse / mask.p_m() as f64;
    let psnr_db = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak_range * peak_range / mse).log10()
    };
    Ok(PsnrReport {
        psnr_db,
        peak_range,
        mse_inside_mask: mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_reconstruction_is_infinite() {
        let truth = Image::from_vec(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let report = psnr(&truth.clone(), &truth, &Mask::full(2)).unwrap();
        assert!(report.psnr_db.is_infinite());
        assert_eq!(report.mse_inside_mask, 0.0);
    }

    #[test]
    fn two_pixel_case_matches_direct_formula() {
        // truth [0, 1], recon [0, 0]: range 1, mse 0.5, 10 log10(2) dB
        let inside = vec![true, true, false, false];
        let mask = Mask::from_bools(2, inside).unwrap();
        let truth = Image::from_vec(2, vec![0.0, 1.0, 9.0, 9.0]).unwrap();
        let recon = Image::from_vec(2, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let report = psnr(&recon, &truth, &mask).unwrap();
        assert!((report.peak_range - 1.0).abs() < 1e-15);
        assert!((report.mse_inside_mask - 0.5).abs() < 1e-15);
        assert!((report.psnr_db - 10.0 * 2.0f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn constant_truth_is_degenerate() {
        let truth = Image::from_vec(2, vec![3.0; 4]).unwrap();
        let recon = Image::zeros(2);
        assert!(matches!(
            psnr(&recon, &truth, &Mask::full(2)),
            Err(Error::DegeneratePeak)
        ));
    }

    #[test]
    fn affine_rescaling_leaves_psnr_unchanged() {
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth_data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let recon_data: Vec<f64> = truth_data
            .iter()
            .map(|v| v + rng.gen_range(-0.1..0.1))
            .collect();
        let truth = Image::from_vec(n, truth_data.clone()).unwrap();
        let recon = Image::from_vec(n, recon_data.clone()).unwrap();
        let mask = Mask::full(n);
        let base = psnr(&recon, &truth, &mask).unwrap().psnr_db;
        for &(a, b) in &[(2.0, 0.0), (-1.5, 3.0), (0.3, -7.0)] {
            let truth2 =
                Image::from_vec(n, truth_data.iter().map(|v| a * v + b).collect()).unwrap();
            let recon2 =
                Image::from_vec(n, recon_data.iter().map(|v| a * v + b).collect()).unwrap();
            let scaled = psnr(&recon2, &truth2, &mask).unwrap().psnr_db;
            assert!((scaled - base).abs() < 1e-9, "a={a} b={b}");
        }
    }

    #[test]
    fn mask_change_acts_only_through_peak_range() {
        // constant per-pixel error; shrinking the mask changes PSNR only via
        // the range of the truth inside it
        let n = 4;
        let truth = Image::from_vec(
            n,
            (0..16).map(|i| if i < 8 { i as f64 } else { 3.0 }).collect(),
        )
        .unwrap();
        let recon =
            Image::from_vec(n, truth.data().iter().map(|v| v + 1.0).collect()).unwrap();
        let full = Mask::full(n);
        let half = Mask::from_bools(n, (0..16).map(|i| i < 8).collect()).unwrap();
        let r_full = psnr(&recon, &truth, &full).unwrap();
        let r_half = psnr(&recon, &truth, &half).unwrap();
        assert!((r_full.mse_inside_mask - 1.0).abs() < 1e-15);
        assert!((r_half.mse_inside_mask - 1.0).abs() < 1e-15);
        let expected_delta =
            20.0 * (r_full.peak_range / r_half.peak_range).log10();
        assert!((r_full.psnr_db - r_half.psnr_db - expected_delta).abs() < 1e-12);
    }
}
