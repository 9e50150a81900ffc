//! Orthogonal 2-D discrete wavelet transforms used as the sparsifying basis.
//!
//! Both families use periodic (circular) boundary extension, which keeps the
//! finite-grid transform exactly orthogonal. Filters are normalized so basis
//! functions have unit l2 norm. The 2-D transform is the standard separable
//! multi-level decomposition recursing on the low-low band; coefficients are
//! stored packed in place (quadrants per level) and flattened row-major.

use crate::error::{Error, Result};
use crate::image::Image;

/// Orthonormal Haar lowpass filter.
const HAAR_LO: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

/// Orthonormal Daubechies 6-tap lowpass filter (scaling coefficients).
const DB6_LO: [f64; 6] = [
    0.332_670_552_950_956_9,
    0.806_891_509_313_338_8,
    0.459_877_502_119_331_3,
    -0.135_011_020_010_390_84,
    -0.085_441_273_882_241_49,
    0.035_226_291_882_100_656,
];

/// Wavelet family of the sparsifying transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    /// 2-tap Haar filter.
    Haar,
    /// 6-tap Daubechies filter.
    Daubechies6,
}

impl WaveletFamily {
    fn lowpass(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR_LO,
            WaveletFamily::Daubechies6 => &DB6_LO,
        }
    }
}

/// Configuration of the orthogonal 2-D transform: family, depth, grid side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveletSpec {
    family: WaveletFamily,
    levels: u32,
    size: usize,
}

impl WaveletSpec {
    /// `size` must be a power of two and `1 <= levels <= log2(size)`.
    pub fn new(family: WaveletFamily, levels: u32, size: usize) -> Result<Self> {
        if !size.is_power_of_two() || size < 2 {
            return Err(Error::NonPowerOfTwo(size));
        }
        let max = size.trailing_zeros();
        if levels == 0 || levels > max {
            return Err(Error::TooManyLevels { levels, size, max });
        }
        Ok(WaveletSpec {
            family,
            levels,
            size,
        })
    }

    /// Default depth log2(size) - 2, keeping a 4x4 coarse band (minimum 1).
    pub fn with_default_levels(family: WaveletFamily, size: usize) -> Result<Self> {
        if !size.is_power_of_two() || size < 2 {
            return Err(Error::NonPowerOfTwo(size));
        }
        let levels = size.trailing_zeros().saturating_sub(2).max(1);
        WaveletSpec::new(family, levels, size)
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Grid side n.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Coefficient count p = n^2.
    pub fn coeff_len(&self) -> usize {
        self.size * self.size
    }
}

/// Highpass filter by alternating flip of the lowpass filter.
fn highpass(lo: &[f64]) -> Vec<f64> {
    let n = lo.len();
    (0..n)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * lo[n - 1 - m]
        })
        .collect()
}

/// One periodized analysis step: `out[k] = sum_m f[m] x[(2k + m) mod len]`
/// for the lowpass half, same with the highpass filter for the second half.
fn analyze_periodic(signal: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    let len = signal.len();
    let half = len / 2;
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (m, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            let x = signal[(2 * k + m) % len];
            a += l * x;
            d += h * x;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

/// Transpose of `analyze_periodic`.
fn synthesize_periodic(coeffs: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    let len = coeffs.len();
    let half = len / 2;
    out.fill(0.0);
    for k in 0..half {
        let a = coeffs[k];
        let d = coeffs[half + k];
        for (m, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            out[(2 * k + m) % len] += a * l + d * h;
        }
    }
}

fn check_image(image: &Image, spec: &WaveletSpec) -> Result<()> {
    if image.side() != spec.size {
        return Err(Error::DimensionMismatch {
            context: "forward_dwt2",
            expected: spec.size,
            got: image.side(),
        });
    }
    Ok(())
}

/// Analysis transform: coefficients of the image in the orthonormal wavelet
/// basis (the action of the transpose of the synthesis matrix).
pub fn forward_dwt2(image: &Image, spec: &WaveletSpec) -> Result<Vec<f64>> {
    check_image(image, spec)?;
    let n = spec.size;
    let lo = spec.family.lowpass();
    let hi = highpass(lo);
    let mut grid = image.data().to_vec();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];

    let mut m = n;
    for _ in 0..spec.levels {
        // rows of the current low-low block
        for i in 0..m {
            line[..m].copy_from_slice(&grid[i * n..i * n + m]);
            analyze_periodic(&line[..m], lo, &hi, &mut out[..m]);
            grid[i * n..i * n + m].copy_from_slice(&out[..m]);
        }
        // columns
        for j in 0..m {
            for i in 0..m {
                line[i] = grid[i * n + j];
            }
            analyze_periodic(&line[..m], lo, &hi, &mut out[..m]);
            for i in 0..m {
                grid[i * n + j] = out[i];
            }
        }
        m /= 2;
    }
    Ok(grid)
}

/// Synthesis transform: image from packed wavelet coefficients. Exact inverse
/// (and transpose) of [`forward_dwt2`].
pub fn inverse_dwt2(coeffs: &[f64], spec: &WaveletSpec) -> Result<Image> {
    if coeffs.len() != spec.coeff_len() {
        return Err(Error::DimensionMismatch {
            context: "inverse_dwt2",
            expected: spec.coeff_len(),
            got: coeffs.len(),
        });
    }
    let n = spec.size;
    let lo = spec.family.lowpass();
    let hi = highpass(lo);
    let mut grid = coeffs.to_vec();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];

    let mut m = n >> (spec.levels - 1);
    for _ in 0..spec.levels {
        // columns first (reverse of analysis order)
        for j in 0..m {
            for i in 0..m {
                line[i] = grid[i * n + j];
            }
            synthesize_periodic(&line[..m], lo, &hi, &mut out[..m]);
            for i in 0..m {
                grid[i * n + j] = out[i];
            }
        }
        for i in 0..m {
            line[..m].copy_from_slice(&grid[i * n..i * n + m]);
            synthesize_periodic(&line[..m], lo, &hi, &mut out[..m]);
            grid[i * n..i * n + m].copy_from_slice(&out[..m]);
        }
        m *= 2;
    }
    Image::from_vec(n, grid)
}

/// Wavelet basis image for coefficient index `j` (column j of the synthesis
/// matrix).
pub fn basis_image(spec: &WaveletSpec, j: usize) -> Result<Image> {
    let mut e = vec![0.0; spec.coeff_len()];
    e[j] = 1.0;
    inverse_dwt2(&e, spec)
}
