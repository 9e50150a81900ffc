//! The sampling operator: discrete Radon transform, optionally followed by a
//! per-projection unitary DFT emitted as stacked real/imaginary parts of the
//! non-redundant half-spectrum.
//!
//! Each projection is zero-padded to the next power of two, so a projection
//! of d samples yields exactly nfft real measurements (the packing is an
//! isometry, which keeps the operator norm equal to the plain Radon one).

use super::radon::{radon, radon_adjoint, ProjectionGeometry, Sinogram};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::operators::LinearOperator;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which part of a complex frequency bin a measurement entry carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementPart {
    Re,
    Im,
}

/// Source of a single measurement entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementBin {
    pub projection: usize,
    pub bin: usize,
    pub part: MeasurementPart,
}

/// Entry-by-entry description of the measurement vector layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementLayout {
    pub bins: Vec<MeasurementBin>,
}

/// Measurement vector with its layout descriptor.
#[derive(Debug, Clone)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    pub layout: MeasurementLayout,
}

#[derive(Clone)]
struct FreqPacking {
    nfft: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FreqPacking {
    fn new(detectors: usize) -> Self {
        let nfft = detectors.next_power_of_two();
        let mut planner = FftPlanner::new();
        FreqPacking {
            nfft,
            forward: planner.plan_fft_forward(nfft),
            inverse: planner.plan_fft_inverse(nfft),
        }
    }

    /// Unitary DFT of a zero-padded projection, packed into nfft reals:
    /// [X0.re, sqrt2*X1.re, sqrt2*X1.im, ..., X_{nfft/2}.re]. The sqrt(2)
    /// weights on mirrored bins make the packing an isometry.
    fn pack(&self, row: &[f64]) -> Vec<f64> {
        let nfft = self.nfft;
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for (slot, &v) in buf.iter_mut().zip(row) {
            slot.re = v;
        }
        self.forward.process(&mut buf);
        let unit = 1.0 / (nfft as f64).sqrt();
        let r2 = std::f64::consts::SQRT_2;
        let mut out = vec![0.0; nfft];
        out[0] = buf[0].re * unit;
        for k in 1..nfft / 2 {
            out[2 * k - 1] = buf[k].re * unit * r2;
            out[2 * k] = buf[k].im * unit * r2;
        }
        out[nfft - 1] = buf[nfft / 2].re * unit;
        out
    }

    /// Adjoint of [`FreqPacking::pack`]: rebuild the Hermitian spectrum,
    /// inverse unitary DFT, truncate the padding.
    fn unpack_adjoint(&self, packed: &[f64], detectors: usize) -> Vec<f64> {
        let nfft = self.nfft;
        let inv_r2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        buf[0] = Complex64::new(packed[0], 0.0);
        for k in 1..nfft / 2 {
            let z = Complex64::new(packed[2 * k - 1] * inv_r2, packed[2 * k] * inv_r2);
            buf[k] = z;
            buf[nfft - k] = z.conj();
        }
        buf[nfft / 2] = Complex64::new(packed[nfft - 1], 0.0);
        self.inverse.process(&mut buf);
        let unit = 1.0 / (nfft as f64).sqrt();
        buf[..detectors].iter().map(|z| z.re * unit).collect()
    }
}

/// The physical forward map Phi from an image to real measurements.
#[derive(Clone)]
pub struct SamplingOperator {
    geom: ProjectionGeometry,
    grid_side: usize,
    freq: Option<FreqPacking>,
}

impl std::fmt::Debug for SamplingOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SamplingOperator")
            .field("angles", &self.geom.num_angles())
            .field("detectors", &self.geom.detectors())
            .field("grid_side", &self.grid_side)
            .field("freq_mode", &self.freq.is_some())
            .finish()
    }
}

/// Builds Phi for a grid of side `grid_side`. With `freq_mode` the operator
/// emits per-projection spectra; otherwise it is the Radon transform with
/// projections flattened in angle order.
pub fn build_sampling_operator(
    geom: ProjectionGeometry,
    grid_side: usize,
    freq_mode: bool,
) -> SamplingOperator {
    let freq = freq_mode.then(|| FreqPacking::new(geom.detectors()));
    SamplingOperator {
        geom,
        grid_side,
        freq,
    }
}

impl SamplingOperator {
    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geom
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    pub fn freq_mode(&self) -> bool {
        self.freq.is_some()
    }

    /// Measurements per projection.
    pub fn bins_per_projection(&self) -> usize {
        match &self.freq {
            Some(f) => f.nfft,
            None => self.geom.detectors(),
        }
    }

    /// Encodes already-measured projection data into the measurement vector
    /// this operator's forward map would produce for the underlying sinogram.
    pub fn encode_sinogram(&self, sino: &Sinogram) -> Result<Vec<f64>> {
        if sino.geometry() != &self.geom {
            return Err(Error::invalid(
                "sinogram",
                "geometry does not match the sampling operator",
            ));
        }
        Ok(self.encode_rows(sino))
    }

    fn encode_rows(&self, sino: &Sinogram) -> Vec<f64> {
        match &self.freq {
            None => sino.data().to_vec(),
            Some(packing) => {
                let k = sino.num_angles();
                let rows: Vec<Vec<f64>> = {
                    #[cfg(feature = "parallel")]
                    {
                        (0..k)
                            .into_par_iter()
                            .map(|i| packing.pack(sino.row(i)))
                            .collect()
                    }
                    #[cfg(not(feature = "parallel"))]
                    {
                        (0..k).map(|i| packing.pack(sino.row(i))).collect()
                    }
                };
                rows.into_iter().flatten().collect()
            }
        }
    }

    /// Measurement vector together with its layout.
    pub fn measure(&self, sino: &Sinogram) -> Result<MeasurementVector> {
        Ok(MeasurementVector {
            values: self.encode_sinogram(sino)?,
            layout: self.layout(),
        })
    }

    /// (projection, frequency-bin, part) source of every measurement entry.
    pub fn layout(&self) -> MeasurementLayout {
        let mut bins = Vec::with_capacity(self.out_dim());
        for projection in 0..self.geom.num_angles() {
            match &self.freq {
                None => {
                    for bin in 0..self.geom.detectors() {
                        bins.push(MeasurementBin {
                            projection,
                            bin,
                            part: MeasurementPart::Re,
                        });
                    }
                }
                Some(packing) => {
                    let nfft = packing.nfft;
                    bins.push(MeasurementBin {
                        projection,
                        bin: 0,
                        part: MeasurementPart::Re,
                    });
                    for k in 1..nfft / 2 {
                        bins.push(MeasurementBin {
                            projection,
                            bin: k,
                            part: MeasurementPart::Re,
                        });
                        bins.push(MeasurementBin {
                            projection,
                            bin: k,
                            part: MeasurementPart::Im,
                        });
                    }
                    bins.push(MeasurementBin {
                        projection,
                        bin: nfft / 2,
                        part: MeasurementPart::Re,
                    });
                }
            }
        }
        MeasurementLayout { bins }
    }
}

impl LinearOperator for SamplingOperator {
    fn in_dim(&self) -> usize {
        self.grid_side * self.grid_side
    }

    fn out_dim(&self) -> usize {
        self.geom.num_angles() * self.bins_per_projection()
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        let image = Image::from_vec(self.grid_side, input.to_vec())
            .expect("input length equals grid size");
        let sino = radon(&image, &self.geom).expect("geometry validated at construction");
        self.encode_rows(&sino)
    }

    fn apply_adjoint(&self, input: &[f64]) -> Vec<f64> {
        let k = self.geom.num_angles();
        let d = self.geom.detectors();
        let rows: Vec<Vec<f64>> = match &self.freq {
            None => input.chunks_exact(d).map(|c| c.to_vec()).collect(),
            Some(packing) => {
                let chunks: Vec<&[f64]> = input.chunks_exact(packing.nfft).collect();
                #[cfg(feature = "parallel")]
                {
                    chunks
                        .par_iter()
                        .map(|c| packing.unpack_adjoint(c, d))
                        .collect()
                }
                #[cfg(not(feature = "parallel"))]
                {
                    chunks
                        .iter()
                        .map(|c| packing.unpack_adjoint(c, d))
                        .collect()
                }
            }
        };
        debug_assert_eq!(rows.len(), k);
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let sino = Sinogram::new(self.geom.clone(), data).expect("row shape");
        radon_adjoint(&sino, self.grid_side)
            .expect("grid validated")
            .into_vec()
    }
}
