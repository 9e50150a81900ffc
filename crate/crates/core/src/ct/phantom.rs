//! Analytic ellipse phantoms: rasterization by pixel-center sampling and
//! exact line-integral sinograms.

use super::radon::{ProjectionGeometry, Sinogram};
use crate::error::{Error, Result};
use crate::image::{pixel_center, Image};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Ellipse in normalized [-1, 1]^2 coordinates with additive density.
/// `a` and `b` are the semi-axes along the ellipse's own x/y axes before
/// rotation by `phi` (radians, counterclockwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub x0: f64,
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub density: f64,
}

impl Ellipse {
    pub fn new(x0: f64, y0: f64, a: f64, b: f64, phi_deg: f64, density: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::invalid("ellipse", "semi-axes must be positive"));
        }
        if !density.is_finite() {
            return Err(Error::invalid("ellipse", "density must be finite"));
        }
        Ok(Ellipse {
            x0,
            y0,
            a,
            b,
            phi: phi_deg.to_radians(),
            density,
        })
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.x0;
        let dy = y - self.y0;
        let (sin_p, cos_p) = self.phi.sin_cos();
        let xr = dx * cos_p + dy * sin_p;
        let yr = -dx * sin_p + dy * cos_p;
        (xr / self.a).powi(2) + (yr / self.b).powi(2) <= 1.0
    }

    /// Half-width of the projection support at angle `theta`.
    #[inline]
    pub fn projection_halfwidth(&self, theta: f64) -> f64 {
        let psi = theta - self.phi;
        let (sin_p, cos_p) = psi.sin_cos();
        ((self.a * cos_p).powi(2) + (self.b * sin_p).powi(2)).sqrt()
    }

    /// Exact line integral (chord length times density) of the ray at angle
    /// `theta`, signed distance `t` from the origin.
    #[inline]
    pub fn line_integral(&self, theta: f64, t: f64) -> f64 {
        let (sin_t, cos_t) = theta.sin_cos();
        let tau = t - (self.x0 * cos_t + self.y0 * sin_t);
        let w_sq = {
            let psi = theta - self.phi;
            let (sin_p, cos_p) = psi.sin_cos();
            (self.a * cos_p).powi(2) + (self.b * sin_p).powi(2)
        };
        let rem = w_sq - tau * tau;
        if rem <= 0.0 {
            0.0
        } else {
            2.0 * self.density * self.a * self.b * rem.sqrt() / w_sq
        }
    }
}

/// The standard ten-ellipse head phantom parameter table
/// (x0, y0, a, b, rotation in degrees, additive density).
pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    const TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
        (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
        (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
        (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
        (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
        (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
        (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
        (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
        (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
        (0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
        (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
    ];
    TABLE
        .iter()
        .map(|&(x0, y0, a, b, phi, rho)| Ellipse::new(x0, y0, a, b, phi, rho).unwrap())
        .collect()
}

/// Rasterizes an ellipse set by summing densities of ellipses containing each
/// pixel center.
pub fn rasterize(ellipses: &[Ellipse], grid_side: usize) -> Image {
    let n = grid_side;
    let mut image = Image::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = pixel_center(n, i, j);
            let v: f64 = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.density)
                .sum();
            image.set(i, j, v);
        }
    }
    image
}

/// Standard head phantom: raster plus the analytic ellipse description.
pub fn shepp_logan(grid_side: usize) -> Result<(Image, Vec<Ellipse>)> {
    if !grid_side.is_power_of_two() || grid_side < 2 {
        return Err(Error::NonPowerOfTwo(grid_side));
    }
    let ellipses = shepp_logan_ellipses();
    Ok((rasterize(&ellipses, grid_side), ellipses))
}

fn sino_row(ellipses: &[Ellipse], geom: &ProjectionGeometry, theta: f64) -> Vec<f64> {
    (0..geom.detectors())
        .map(|c| {
            let t = geom.detector_coord(c);
            ellipses.iter().map(|e| e.line_integral(theta, t)).sum()
        })
        .collect()
}

/// Exact analytic sinogram of an ellipse set: closed-form chord lengths,
/// superposed over the set.
pub fn ellipse_sinogram(ellipses: &[Ellipse], geom: &ProjectionGeometry) -> Sinogram {
    let rows: Vec<Vec<f64>> = {
        #[cfg(feature = "parallel")]
        {
            geom.angles()
                .par_iter()
                .map(|&theta| sino_row(ellipses, geom, theta))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            geom.angles()
                .iter()
                .map(|&theta| sino_row(ellipses, geom, theta))
                .collect()
        }
    };
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Sinogram::new(geom.clone(), data).expect("row count matches geometry")
}
