//! Square pixel grid with the physical coordinate convention shared by the
//! projection model and the hull strips.
//!
//! The grid covers the square [-1, 1] x [-1, 1]. Pixels are stored row-major;
//! row 0 is the top of the image (largest y), column 0 the left (smallest x).

use crate::error::{Error, Result};

/// Square real-valued pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    side: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(side: usize) -> Self {
        Image {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::DimensionMismatch {
                context: "Image::from_vec",
                expected: side * side,
                got: data.len(),
            });
        }
        Ok(Image { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of pixels, n^2.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.side + col] = value;
    }
}

/// Pixel spacing of an n-sided grid covering [-1, 1].
#[inline]
pub fn pixel_pitch(side: usize) -> f64 {
    2.0 / side as f64
}

/// Physical center (x, y) of pixel (row, col).
#[inline]
pub fn pixel_center(side: usize, row: usize, col: usize) -> (f64, f64) {
    let delta = pixel_pitch(side);
    let x = -1.0 + (col as f64 + 0.5) * delta;
    let y = 1.0 - (row as f64 + 0.5) * delta;
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_cover_the_unit_square() {
        let n = 8;
        let (x0, y0) = pixel_center(n, 0, 0);
        let (x1, y1) = pixel_center(n, n - 1, n - 1);
        assert!((x0 - (-1.0 + 0.125)).abs() < 1e-15);
        assert!((y0 - (1.0 - 0.125)).abs() < 1e-15);
        assert!((x1 - (1.0 - 0.125)).abs() < 1e-15);
        assert!((y1 - (-1.0 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Image::from_vec(3, vec![0.0; 8]).is_err());
    }
}
