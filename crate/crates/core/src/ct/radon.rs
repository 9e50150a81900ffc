//! Discrete Radon transform (pixel-driven, linear detector interpolation)
//! and its exact adjoint, plus the projection geometry shared by analytic
//! sinograms, the hull strips, and filtered backprojection.

use crate::error::{Error, Result};
use crate::image::{pixel_center, pixel_pitch, Image};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Detector-line geometry of a parallel-beam scan: projection angles
/// (radians, strictly increasing in [0, pi)), detector count, detector pitch,
/// and origin offset of the detector axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGeometry {
    angles: Vec<f64>,
    detectors: usize,
    pitch: f64,
    origin: f64,
}

impl ProjectionGeometry {
    pub fn new(angles: Vec<f64>, detectors: usize, pitch: f64, origin: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("geometry", "at least one angle required"));
        }
        if angles
            .iter()
            .any(|&a| !a.is_finite() || !(0.0..std::f64::consts::PI).contains(&a))
        {
            return Err(Error::invalid("geometry", "angles must lie in [0, pi)"));
        }
        if angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("geometry", "angles must be strictly increasing"));
        }
        if detectors < 2 {
            return Err(Error::invalid("geometry", "at least two detectors required"));
        }
        if !(pitch > 0.0) {
            return Err(Error::invalid("geometry", "detector pitch must be positive"));
        }
        Ok(ProjectionGeometry {
            angles,
            detectors,
            pitch,
            origin,
        })
    }

    /// Geometry matching an n-sided grid: 2n - 1 detectors at pixel pitch,
    /// centered on the rotation axis. The detector axis then spans the grid
    /// diagonal.
    pub fn standard(grid_side: usize, angles: Vec<f64>) -> Result<Self> {
        ProjectionGeometry::new(angles, 2 * grid_side - 1, pixel_pitch(grid_side), 0.0)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Number of projections K.
    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn detectors(&self) -> usize {
        self.detectors
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Physical coordinate of detector bin `c`.
    #[inline]
    pub fn detector_coord(&self, c: usize) -> f64 {
        (c as f64 - (self.detectors as f64 - 1.0) / 2.0) * self.pitch + self.origin
    }

    /// Fractional detector position of physical coordinate `t`.
    #[inline]
    pub fn detector_position(&self, t: f64) -> f64 {
        (t - self.origin) / self.pitch + (self.detectors as f64 - 1.0) / 2.0
    }
}

/// Uniformly spaced projection angles over [0, 180) degrees with a missing
/// contiguous span removed. The span is centered on `missing_center_deg`;
/// a zero span keeps the full half-circle.
pub fn limited_angles(spacing_deg: f64, missing_span_deg: f64, missing_center_deg: f64) -> Vec<f64> {
    let lo = missing_center_deg - missing_span_deg / 2.0;
    let hi = missing_center_deg + missing_span_deg / 2.0;
    let mut angles = Vec::new();
    let mut k = 0usize;
    loop {
        let deg = k as f64 * spacing_deg;
        if deg >= 180.0 {
            break;
        }
        if missing_span_deg <= 0.0 || deg < lo || deg >= hi {
            angles.push(deg.to_radians());
        }
        k += 1;
    }
    angles
}

/// Projection data p_theta(t) over K angles and a detector axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geom: ProjectionGeometry,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(geom: ProjectionGeometry, data: Vec<f64>) -> Result<Self> {
        let expected = geom.num_angles() * geom.detectors();
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "Sinogram::new",
                expected,
                got: data.len(),
            });
        }
        Ok(Sinogram { geom, data })
    }

    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geom
    }

    pub fn num_angles(&self) -> usize {
        self.geom.num_angles()
    }

    pub fn detectors(&self) -> usize {
        self.geom.detectors()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.geom.detectors();
        &self.data[k * d..(k + 1) * d]
    }

    /// Projections whose first or last bin is not (numerically) zero.
    /// Nonempty output signals an object clipped by the detector span, which
    /// makes hull extraction unreliable.
    pub fn clipped_projections(&self) -> Vec<usize> {
        let tol = 1e-12
            * self
                .data
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.num_angles())
            .filter(|&k| {
                let row = self.row(k);
                row[0].abs() > tol || row[row.len() - 1].abs() > tol
            })
            .collect()
    }
}

/// One projection row: each pixel center projects to the detector axis and
/// deposits its mass onto the two nearest bins with linear weights.
fn project_angle(image: &Image, geom: &ProjectionGeometry, theta: f64) -> Vec<f64> {
    let n = image.side();
    let delta = pixel_pitch(n);
    let scale = delta * delta / geom.pitch;
    let (sin_t, cos_t) = theta.sin_cos();
    let d = geom.detectors();
    let mut row = vec![0.0; d];
    for i in 0..n {
        for j in 0..n {
            let v = image.get(i, j);
            if v == 0.0 {
                continue;
            }
            let (x, y) = pixel_center(n, i, j);
            let u = geom.detector_position(x * cos_t + y * sin_t);
            let c0 = u.floor();
            let frac = u - c0;
            let c0 = c0 as isize;
            if c0 >= 0 && (c0 as usize) < d {
                row[c0 as usize] += v * scale * (1.0 - frac);
            }
            let c1 = c0 + 1;
            if c1 >= 0 && (c1 as usize) < d {
                row[c1 as usize] += v * scale * frac;
            }
        }
    }
    row
}

fn radon_impl(image: &Image, geom: &ProjectionGeometry, parallel: bool) -> Sinogram {
    let rows: Vec<Vec<f64>> = if parallel {
        #[cfg(feature = "parallel")]
        {
            geom.angles
                .par_iter()
                .map(|&theta| project_angle(image, geom, theta))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        unreachable!()
    } else {
        geom.angles
            .iter()
            .map(|&theta| project_angle(image, geom, theta))
            .collect()
    };
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Sinogram {
        geom: geom.clone(),
        data,
    }
}

/// Discrete Radon transform. Projections are computed independently per
/// angle (parallelized when the `parallel` feature is on) and assembled in
/// fixed angle order, so the output is bit-reproducible.
pub fn radon(image: &Image, geom: &ProjectionGeometry) -> Result<Sinogram> {
    if image.side() == 0 {
        return Err(Error::invalid("radon", "empty image"));
    }
    #[cfg(feature = "parallel")]
    return Ok(radon_impl(image, geom, true));
    #[cfg(not(feature = "parallel"))]
    Ok(radon_impl(image, geom, false))
}

/// Sequential reference path of [`radon`].
pub fn radon_seq(image: &Image, geom: &ProjectionGeometry) -> Result<Sinogram> {
    if image.side() == 0 {
        return Err(Error::invalid("radon", "empty image"));
    }
    Ok(radon_impl(image, geom, false))
}

fn backproject_pixel(sino: &Sinogram, n: usize, i: usize, j: usize) -> f64 {
    let geom = &sino.geom;
    let delta = pixel_pitch(n);
    let scale = delta * delta / geom.pitch;
    let d = geom.detectors();
    let (x, y) = pixel_center(n, i, j);
    let mut acc = 0.0;
    for (k, &theta) in geom.angles.iter().enumerate() {
        let (sin_t, cos_t) = theta.sin_cos();
        let u = geom.detector_position(x * cos_t + y * sin_t);
        let c0 = u.floor();
        let frac = u - c0;
        let c0 = c0 as isize;
        let row = sino.row(k);
        if c0 >= 0 && (c0 as usize) < d {
            acc += row[c0 as usize] * scale * (1.0 - frac);
        }
        let c1 = c0 + 1;
        if c1 >= 0 && (c1 as usize) < d {
            acc += row[c1 as usize] * scale * frac;
        }
    }
    acc
}

fn radon_adjoint_impl(sino: &Sinogram, n: usize, parallel: bool) -> Image {
    let mut image = Image::zeros(n);
    if parallel {
        #[cfg(feature = "parallel")]
        {
            image
                .data_mut()
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, out_row)| {
                    for (j, out) in out_row.iter_mut().enumerate() {
                        *out = backproject_pixel(sino, n, i, j);
                    }
                });
        }
        #[cfg(not(feature = "parallel"))]
        unreachable!()
    } else {
        for i in 0..n {
            for j in 0..n {
                let v = backproject_pixel(sino, n, i, j);
                image.set(i, j, v);
            }
        }
    }
    image
}

/// Exact transpose of [`radon`]: per-pixel gather with the same interpolation
/// weights, summing angles in fixed order (bit-reproducible under
/// parallelism over pixels).
pub fn radon_adjoint(sino: &Sinogram, grid_side: usize) -> Result<Image> {
    if grid_side == 0 {
        return Err(Error::invalid("radon_adjoint", "empty grid"));
    }
    #[cfg(feature = "parallel")]
    return Ok(radon_adjoint_impl(sino, grid_side, true));
    #[cfg(not(feature = "parallel"))]
    Ok(radon_adjoint_impl(sino, grid_side, false))
}

/// Sequential reference path of [`radon_adjoint`].
pub fn radon_adjoint_seq(sino: &Sinogram, grid_side: usize) -> Result<Image> {
    if grid_side == 0 {
        return Err(Error::invalid("radon_adjoint", "empty grid"));
    }
    Ok(radon_adjoint_impl(sino, grid_side, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_vec(n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn limited_angle_count_matches_missing_span() {
        assert_eq!(limited_angles(1.0, 25.0, 90.0).len(), 155);
        assert_eq!(limited_angles(1.0, 0.0, 90.0).len(), 180);
    }

    #[test]
    fn zero_image_projects_to_zero() {
        let geom = ProjectionGeometry::standard(8, limited_angles(30.0, 0.0, 0.0)).unwrap();
        let sino = radon(&Image::zeros(8), &geom).unwrap();
        assert!(sino.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_dot_product_test() {
        let n = 16;
        let geom = ProjectionGeometry::standard(n, limited_angles(10.0, 0.0, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..30 {
            let x = random_image(n, trial);
            let y_data: Vec<f64> = (0..geom.num_angles() * geom.detectors())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let y = Sinogram::new(geom.clone(), y_data).unwrap();
            let ax = radon(&x, &geom).unwrap();
            let aty = radon_adjoint(&y, n).unwrap();
            let lhs: f64 = ax.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(aty.data()).map(|(a, b)| a * b).sum();
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!(
                (lhs - rhs).abs() / scale < 1e-8,
                "trial {trial}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn parallel_and_sequential_paths_are_identical() {
        let n = 16;
        let geom = ProjectionGeometry::standard(n, limited_angles(15.0, 0.0, 0.0)).unwrap();
        let x = random_image(n, 9);
        let a = radon(&x, &geom).unwrap();
        let b = radon_seq(&x, &geom).unwrap();
        assert_eq!(a.data(), b.data());
        let back_a = radon_adjoint(&a, n).unwrap();
        let back_b = radon_adjoint_seq(&a, n).unwrap();
        assert_eq!(back_a.data(), back_b.data());
    }

    #[test]
    fn geometry_validation() {
        assert!(ProjectionGeometry::new(vec![], 8, 0.1, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![0.0, 0.0], 8, 0.1, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![0.0, 3.2], 8, 0.1, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![0.0], 1, 0.1, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![0.0], 8, 0.0, 0.0).is_err());
    }

    #[test]
    fn detector_coords_are_centered() {
        let geom = ProjectionGeometry::new(vec![0.0], 5, 0.5, 0.0).unwrap();
        assert!((geom.detector_coord(2) - 0.0).abs() < 1e-15);
        assert!((geom.detector_coord(0) + 1.0).abs() < 1e-15);
        assert!((geom.detector_position(0.25) - 2.5).abs() < 1e-15);
    }
}
