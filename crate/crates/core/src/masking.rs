//! Binary pixel masks, restriction/embedding of images, and the identifiable
//! coefficient set.
//!
//! A coefficient index is identifiable when its wavelet basis image has
//! support intersecting the mask; only those coefficients influence the
//! measurements. The set is found by probing every basis image and testing
//! its magnitude inside the mask against a tolerance relative to the basis
//! image's own peak.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::transforms::{basis_image, WaveletSpec};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Relative tolerance deciding whether a basis image is nonzero inside the
/// mask. Irrational filter taps make exact-zero tests unsafe.
pub const IDENTIFIABLE_TOL: f64 = 1e-12;

/// Binary mask over an n x n grid; `true` marks pixels inside the contour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    side: usize,
    inside: Vec<bool>,
    count: usize,
}

impl Mask {
    /// Mask covering every pixel.
    pub fn full(side: usize) -> Self {
        Mask {
            side,
            inside: vec![true; side * side],
            count: side * side,
        }
    }

    pub fn from_bools(side: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != side * side {
            return Err(Error::DimensionMismatch {
                context: "Mask::from_bools",
                expected: side * side,
                got: inside.len(),
            });
        }
        let count = inside.iter().filter(|b| **b).count();
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(Mask {
            side,
            inside,
            count,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Total pixel count p = n^2.
    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    /// Number of pixels inside the mask.
    pub fn p_m(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.inside[index]
    }

    pub fn is_full(&self) -> bool {
        self.count == self.inside.len()
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.inside
    }

    /// Row-major indices of interior pixels; this fixed order defines the
    /// layout of restricted vectors.
    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
    }

    /// True when `self` is a subset of `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.side == other.side
            && self
                .inside
                .iter()
                .zip(&other.inside)
                .all(|(a, b)| !*a || *b)
    }
}

/// Sorted coefficient indices whose basis images overlap the mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifiableSet {
    indices: Vec<usize>,
    total: usize,
}

impl IdentifiableSet {
    pub fn from_indices(indices: Vec<usize>, total: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "identifiable set",
                "indices must be strictly increasing",
            ));
        }
        if indices.last().is_some_and(|&last| last >= total) {
            return Err(Error::invalid(
                "identifiable set",
                "index exceeds coefficient count",
            ));
        }
        Ok(IdentifiableSet { indices, total })
    }

    /// Number of identifiable coefficients.
    pub fn p_i(&self) -> usize {
        self.indices.len()
    }

    /// Full coefficient count p.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.total
    }

    /// Place a restricted coefficient vector into a length-p vector, zeros
    /// elsewhere.
    pub fn lift(&self, restricted: &[f64]) -> Result<Vec<f64>> {
        if restricted.len() != self.indices.len() {
            return Err(Error::DimensionMismatch {
                context: "IdentifiableSet::lift",
                expected: self.indices.len(),
                got: restricted.len(),
            });
        }
        let mut full = vec![0.0; self.total];
        for (&idx, &v) in self.indices.iter().zip(restricted) {
            full[idx] = v;
        }
        Ok(full)
    }

    /// Keep only the identifiable entries of a length-p vector.
    pub fn restrict(&self, full: &[f64]) -> Result<Vec<f64>> {
        if full.len() != self.total {
            return Err(Error::DimensionMismatch {
                context: "IdentifiableSet::restrict",
                expected: self.total,
                got: full.len(),
            });
        }
        Ok(self.indices.iter().map(|&idx| full[idx]).collect())
    }
}

/// Interior pixel values in row-major order.
pub fn restrict(image: &Image, mask: &Mask) -> Result<Vec<f64>> {
    if image.side() != mask.side() {
        return Err(Error::DimensionMismatch {
            context: "restrict",
            expected: mask.side(),
            got: image.side(),
        });
    }
    let data = image.data();
    Ok(mask.interior_indices().map(|i| data[i]).collect())
}

/// Image equal to `values` inside the mask and exactly zero outside.
pub fn embed(values: &[f64], mask: &Mask) -> Result<Image> {
    if values.len() != mask.p_m() {
        return Err(Error::DimensionMismatch {
            context: "embed",
            expected: mask.p_m(),
            got: values.len(),
        });
    }
    let mut image = Image::zeros(mask.side());
    let data = image.data_mut();
    for (idx, &v) in mask.interior_indices().zip(values) {
        data[idx] = v;
    }
    Ok(image)
}

fn probe_column(spec: &WaveletSpec, mask: &Mask, j: usize, tol: f64) -> bool {
    let basis = basis_image(spec, j).expect("canonical vector has valid length");
    let data = basis.data();
    let peak = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = tol * peak;
    mask.interior_indices().any(|i| data[i].abs() > threshold)
}

/// Indices of coefficients whose basis images are nonzero inside the mask,
/// probing columns in parallel. Column results are independent, so the output
/// is deterministic regardless of schedule.
pub fn identifiable_set(spec: &WaveletSpec, mask: &Mask, tol: f64) -> Result<IdentifiableSet> {
    #[cfg(feature = "parallel")]
    {
        identifiable_set_impl(spec, mask, tol, true)
    }
    #[cfg(not(feature = "parallel"))]
    {
        identifiable_set_impl(spec, mask, tol, false)
    }
}

/// Sequential reference path of [`identifiable_set`].
pub fn identifiable_set_seq(spec: &WaveletSpec, mask: &Mask, tol: f64) -> Result<IdentifiableSet> {
    identifiable_set_impl(spec, mask, tol, false)
}

fn identifiable_set_impl(
    spec: &WaveletSpec,
    mask: &Mask,
    tol: f64,
    parallel: bool,
) -> Result<IdentifiableSet> {
    if mask.side() != spec.size() {
        return Err(Error::DimensionMismatch {
            context: "identifiable_set",
            expected: spec.size(),
            got: mask.side(),
        });
    }
    let p = spec.coeff_len();
    if mask.is_full() {
        // Orthogonal basis: no zero columns.
        return IdentifiableSet::from_indices((0..p).collect(), p);
    }
    let hits: Vec<bool> = if parallel {
        #[cfg(feature = "parallel")]
        {
            (0..p)
                .into_par_iter()
                .map(|j| probe_column(spec, mask, j, tol))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        unreachable!()
    } else {
        (0..p).map(|j| probe_column(spec, mask, j, tol)).collect()
    };
    let indices: Vec<usize> = hits
        .iter()
        .enumerate()
        .filter(|(_, h)| **h)
        .map(|(j, _)| j)
        .collect();
    IdentifiableSet::from_indices(indices, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{inverse_dwt2, WaveletFamily};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn left_half_mask(n: usize) -> Mask {
        let inside: Vec<bool> = (0..n * n).map(|i| i % n < n / 2).collect();
        Mask::from_bools(n, inside).unwrap()
    }

    #[test]
    fn full_mask_keeps_all_columns() {
        let spec = WaveletSpec::new(WaveletFamily::Haar, 2, 4).unwrap();
        let iset = identifiable_set(&spec, &Mask::full(4), IDENTIFIABLE_TOL).unwrap();
        assert_eq!(iset.p_i(), 16);
        assert!(iset.is_full());
    }

    /// Dense column-support oracle: materialize every basis image and test
    /// supports directly, for all family/mask pairs on small grids.
    #[test]
    fn probing_matches_dense_column_support_oracle() {
        for family in [WaveletFamily::Haar, WaveletFamily::Daubechies6] {
            for n in [4usize, 8, 16] {
                let spec = WaveletSpec::new(family, 1, n).unwrap();
                let masks = [left_half_mask(n), single_pixel_mask(n, 1, 2), Mask::full(n)];
                for mask in &masks {
                    let iset = identifiable_set(&spec, mask, IDENTIFIABLE_TOL).unwrap();
                    let mut expected = Vec::new();
                    for j in 0..n * n {
                        let mut e = vec![0.0; n * n];
                        e[j] = 1.0;
                        let col = inverse_dwt2(&e, &spec).unwrap();
                        let peak = col.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        let hit = mask
                            .interior_indices()
                            .any(|i| col.data()[i].abs() > IDENTIFIABLE_TOL * peak);
                        if hit {
                            expected.push(j);
                        }
                    }
                    assert_eq!(iset.indices(), expected.as_slice(), "{family:?} n={n}");
                }
            }
        }
    }

    fn single_pixel_mask(n: usize, i: usize, j: usize) -> Mask {
        let mut inside = vec![false; n * n];
        inside[i * n + j] = true;
        Mask::from_bools(n, inside).unwrap()
    }

    #[test]
    fn restrict_full_mask_is_row_major_flatten() {
        let image = Image::from_vec(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = restrict(&image, &Mask::full(2)).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn single_pixel_restrict() {
        let mut image = Image::zeros(4);
        image.set(1, 2, 7.5);
        let mask = single_pixel_mask(4, 1, 2);
        assert_eq!(restrict(&image, &mask).unwrap(), vec![7.5]);
    }

    #[test]
    fn embed_is_zero_outside_and_section_of_restrict() {
        let n = 8;
        let mask = left_half_mask(n);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..mask.p_m()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let image = embed(&v, &mask).unwrap();
        for i in 0..n * n {
            if !mask.contains(i) {
                assert_eq!(image.data()[i], 0.0);
            }
        }
        assert_eq!(restrict(&image, &mask).unwrap(), v);
    }

    #[test]
    fn embed_then_restrict_round_trip_when_supported() {
        let n = 4;
        let mask = left_half_mask(n);
        let mut image = Image::zeros(n);
        for idx in mask.interior_indices().collect::<Vec<_>>() {
            image.data_mut()[idx] = idx as f64 + 1.0;
        }
        let back = embed(&restrict(&image, &mask).unwrap(), &mask).unwrap();
        assert_eq!(back.data(), image.data());
    }

    #[test]
    fn checkerboard_embed() {
        let n = 4;
        let inside: Vec<bool> = (0..n * n).map(|i| (i / n + i % n) % 2 == 0).collect();
        let mask = Mask::from_bools(n, inside.clone()).unwrap();
        let image = embed(&vec![1.0; mask.p_m()], &mask).unwrap();
        for (i, &b) in inside.iter().enumerate() {
            assert_eq!(image.data()[i], if b { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn monotone_under_mask_growth() {
        let n = 8;
        let spec = WaveletSpec::new(WaveletFamily::Daubechies6, 2, n).unwrap();
        let small = single_pixel_mask(n, 3, 3);
        let big = left_half_mask(n);
        // make sure small is inside big
        assert!(small.is_subset_of(&big));
        let i_small = identifiable_set(&spec, &small, IDENTIFIABLE_TOL).unwrap();
        let i_big = identifiable_set(&spec, &big, IDENTIFIABLE_TOL).unwrap();
        for idx in i_small.indices() {
            assert!(i_big.indices().contains(idx));
        }
    }

    #[test]
    fn parallel_and_sequential_probing_agree() {
        let spec = WaveletSpec::new(WaveletFamily::Haar, 2, 8).unwrap();
        let mask = left_half_mask(8);
        let a = identifiable_set(&spec, &mask, IDENTIFIABLE_TOL).unwrap();
        let b = identifiable_set_seq(&spec, &mask, IDENTIFIABLE_TOL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lift_restrict_round_trip() {
        let iset = IdentifiableSet::from_indices(vec![1, 3, 4], 6).unwrap();
        let lifted = iset.lift(&[9.0, 8.0, 7.0]).unwrap();
        assert_eq!(lifted, vec![0.0, 9.0, 0.0, 8.0, 7.0, 0.0]);
        assert_eq!(iset.restrict(&lifted).unwrap(), vec![9.0, 8.0, 7.0]);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let mask = Mask::full(4);
        assert!(restrict(&Image::zeros(8), &mask).is_err());
        assert!(embed(&[1.0; 3], &mask).is_err());
        assert!(Mask::from_bools(4, vec![false; 16]).is_err());
    }

    proptest! {
        #[test]
        fn restrict_embed_identity(values in proptest::collection::vec(-10.0f64..10.0, 32)) {
            let mask = left_half_mask(8);
            let v = &values[..mask.p_m()];
            let back = restrict(&embed(v, &mask).unwrap(), &mask).unwrap();
            prop_assert_eq!(back.as_slice(), v);
        }
    }
}
