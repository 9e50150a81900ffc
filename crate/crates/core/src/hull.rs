//! Automatic convex-hull mask extraction from sinograms: per-angle support
//! intervals, the strips they induce in the image plane, and the rasterized
//! intersection of all strips.

use crate::ct::Sinogram;
use crate::error::{Error, Result};
use crate::image::pixel_center;
use crate::masking::Mask;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Threshold rule for deciding where a projection is nonzero. The threshold
/// is `fraction` times the projection's peak magnitude unless an absolute
/// override is set (useful for low-density objects).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub fraction: f64,
    pub absolute: Option<f64>,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy {
            fraction: 1e-3,
            absolute: None,
        }
    }
}

impl ThresholdPolicy {
    fn threshold(&self, peak: f64) -> f64 {
        match self.absolute {
            Some(abs) => abs,
            None => self.fraction * peak,
        }
    }
}

/// Detector interval [a, b] outside which a projection is below threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
}

impl SupportInterval {
    /// Strip membership test for a point (x, y) in the image plane.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let t = x * self.theta.cos() + y * self.theta.sin();
        t >= self.a && t <= self.b
    }
}

/// Strips whose intersection bounds the object.
#[derive(Debug, Clone, PartialEq)]
pub struct StripSet {
    pub strips: Vec<SupportInterval>,
}

/// Smallest detector interval containing every sample above threshold,
/// converted to physical coordinates and widened by one detector pitch per
/// side. The widening covers the sub-pitch part of the true support that the
/// sample grid cannot see, so the strip never cuts into the object.
pub fn projection_support(
    projection: &[f64],
    policy: &ThresholdPolicy,
    theta: f64,
    pitch: f64,
    origin: f64,
) -> Result<SupportInterval> {
    if projection.len() < 2 {
        return Err(Error::invalid("projection", "need at least two samples"));
    }
    let peak = projection.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = policy.threshold(peak);
    let above = |v: &f64| v.abs() > threshold;
    let first = match projection.iter().position(above) {
        Some(i) => i,
        None => return Err(Error::EmptySupport),
    };
    let last = projection.iter().rposition(above).unwrap();
    let center = (projection.len() as f64 - 1.0) / 2.0;
    let coord = |c: usize| (c as f64 - center) * pitch + origin;
    Ok(SupportInterval {
        theta,
        a: coord(first) - pitch,
        b: coord(last) + pitch,
    })
}

/// Support intervals of every projection in a sinogram.
pub fn sinogram_supports(sino: &Sinogram, policy: &ThresholdPolicy) -> Result<StripSet> {
    let geom = sino.geometry();
    let strips = geom
        .angles()
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            projection_support(sino.row(k), policy, theta, geom.pitch(), geom.origin()).map_err(
                |e| match e {
                    Error::EmptySupport => Error::EmptySupportAtAngle {
                        index: k,
                        theta_rad: theta,
                    },
                    other => other,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StripSet { strips })
}

/// Rasterizes the intersection of strips: a pixel is kept when its center
/// satisfies every strip constraint. Folding strip by strip lets pixels
/// already excluded be skipped.
pub fn rasterize_strips(strips: &StripSet, grid_side: usize) -> Result<Mask> {
    let n = grid_side;
    let mut inside = vec![true; n * n];
    for strip in &strips.strips {
        let (sin_t, cos_t) = strip.theta.sin_cos();
        let update_row = |i: usize, row: &mut [bool]| {
            for (j, cell) in row.iter_mut().enumerate() {
                if !*cell {
                    continue;
                }
                let (x, y) = pixel_center(n, i, j);
                let t = x * cos_t + y * sin_t;
                if t < strip.a || t > strip.b {
                    *cell = false;
                }
            }
        };
        #[cfg(feature = "parallel")]
        inside
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| update_row(i, row));
        #[cfg(not(feature = "parallel"))]
        inside
            .chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| update_row(i, row));
    }
    Mask::from_bools(n, inside)
}

/// Convex-hull mask from a sinogram: per-angle supports intersected in the
/// image plane. On exact sinograms the mask is a superset of the object.
pub fn extract_hull_mask(
    sino: &Sinogram,
    policy: &ThresholdPolicy,
    grid_side: usize,
) -> Result<Mask> {
    let strips = sinogram_supports(sino, policy)?;
    rasterize_strips(&strips, grid_side)
}

/// Sequential reference path of [`extract_hull_mask`].
pub fn extract_hull_mask_seq(
    sino: &Sinogram,
    policy: &ThresholdPolicy,
    grid_side: usize,
) -> Result<Mask> {
    let strips = sinogram_supports(sino, policy)?;
    let n = grid_side;
    let mut inside = vec![true; n * n];
    for strip in &strips.strips {
        let (sin_t, cos_t) = strip.theta.sin_cos();
        for i in 0..n {
            for j in 0..n {
                let cell = &mut inside[i * n + j];
                if !*cell {
                    continue;
                }
                let (x, y) = pixel_center(n, i, j);
                let t = x * cos_t + y * sin_t;
                if t < strip.a || t > strip.b {
                    *cell = false;
                }
            }
        }
    }
    Mask::from_bools(n, inside)
}
