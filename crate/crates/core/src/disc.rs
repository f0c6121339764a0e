//! Logistic discriminator over pooled band-energy trajectories.
//!
//! The transition region is cut into `n_slices` equal time slices and the
//! spectrum into `k` bands; each feature is the mean of `log(1 + magnitude)`
//! over one (band, slice) cell.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curves::{Axis, BandLayout, Interval};
use crate::grid::Grid;
use crate::mixer::check_region;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub n_slices: usize,
    /// Ascending normalized frequencies separating the `k` feature bands.
    pub band_cutoffs: Vec<f64>,
}

impl FeatureSpec {
    /// One cutoff per layout boundary, at the geometric centre of `(f_min, f_max)`.
    pub fn from_layout(layout: &BandLayout, n_slices: usize) -> Self {
        let band_cutoffs =
            layout.boundaries().iter().map(|b| if b.lo > 0.0 { libm::sqrt(b.lo * b.hi) } else { b.mid() }).collect();
        FeatureSpec { n_slices, band_cutoffs }
    }

    pub fn bands(&self) -> usize {
        self.band_cutoffs.len() + 1
    }

    pub fn len(&self) -> usize {
        self.n_slices * self.bands()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feature index of `(band, slice)`: band-major, so each band's
    /// trajectory is contiguous.
    pub fn index(&self, band: usize, slice: usize) -> usize {
        band * self.n_slices + slice
    }
}

/// Precomputed cell assignment for one pair of axes and transition region.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePooling {
    n_features: usize,
    frame_slice: Vec<Option<usize>>,
    bin_band: Vec<usize>,
    n_slices: usize,
    counts: Vec<usize>,
}

impl FeaturePooling {
    pub fn new(spec: &FeatureSpec, time: &Axis, freq: &Axis, region: Interval) -> Result<Self> {
        check_region(region)?;
        if spec.n_slices == 0 {
            return Err(Error::InvalidArgument("feature spec needs at least one time slice".into()));
        }
        let width = region.hi - region.lo;
        let frame_slice: Vec<Option<usize>> = time
            .values()
            .iter()
            .map(|&v| {
                (v >= region.lo && v <= region.hi).then(|| {
                    let s = libm::floor((v - region.lo) / width * spec.n_slices as f64) as usize;
                    s.min(spec.n_slices - 1)
                })
            })
            .collect();
        if frame_slice.iter().all(Option::is_none) {
            return Err(Error::InvalidArgument(format!(
                "transition region [{}, {}] contains no frame",
                region.lo, region.hi
            )));
        }
        let bin_band: Vec<usize> =
            freq.values().iter().map(|&v| spec.band_cutoffs.iter().filter(|&&c| v >= c).count()).collect();
        let n_features = spec.len();
        let mut counts = vec![0usize; n_features];
        for s in frame_slice.iter().flatten() {
            for &b in &bin_band {
                counts[spec.index(b, *s)] += 1;
            }
        }
        Ok(FeaturePooling { n_features, frame_slice, bin_band, n_slices: spec.n_slices, counts })
    }

    pub fn len(&self) -> usize {
        self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.n_features == 0
    }

    #[inline]
    fn slot(&self, band: usize, slice: usize) -> usize {
        band * self.n_slices + slice
    }

    pub fn features(&self, mix: &Grid) -> Result<Vec<f64>> {
        mix.ensure_shape("mix for feature pooling", (self.frame_slice.len(), self.bin_band.len()))?;
        let mut sums = vec![0.0; self.n_features];
        for (t, slice) in self.frame_slice.iter().enumerate() {
            let Some(s) = *slice else { continue };
            for (&m, &b) in mix.row(t).iter().zip(&self.bin_band) {
                sums[self.slot(b, s)] += libm::log1p(m);
            }
        }
        for (x, &c) in sums.iter_mut().zip(&self.counts) {
            *x = if c > 0 { *x / c as f64 } else { 0.0 };
        }
        Ok(sums)
    }

    /// `dL/dmix` given `dL/dfeatures`.
    pub fn backward(&self, mix: &Grid, dfeat: &[f64]) -> Result<Grid> {
        mix.ensure_shape("mix for feature pooling", (self.frame_slice.len(), self.bin_band.len()))?;
        if dfeat.len() != self.n_features {
            return Err(Error::InvalidArgument(format!(
                "feature gradient has {} entries, expected {}",
                dfeat.len(),
                self.n_features
            )));
        }
        let scale: Vec<f64> =
            dfeat.iter().zip(&self.counts).map(|(&g, &c)| if c > 0 { g / c as f64 } else { 0.0 }).collect();
        let mut out = Grid::zeros(mix.rows(), mix.cols());
        for (t, slice) in self.frame_slice.iter().enumerate() {
            let Some(s) = *slice else { continue };
            let mrow = mix.row(t);
            for (f, dst) in out.row_mut(t).iter_mut().enumerate() {
                *dst = scale[self.slot(self.bin_band[f], s)] / (1.0 + mrow[f]);
            }
        }
        Ok(out)
    }
}

/// Pooled features of a full-window magnitude on linear axes.
pub fn disc_features(mix: &Grid, region: Interval, spec: &FeatureSpec) -> Result<Vec<f64>> {
    let pooling = FeaturePooling::new(spec, &Axis::linear(mix.rows()), &Axis::linear(mix.cols()), region)?;
    pooling.features(mix)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(sigmoid(z))` without overflow.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -libm::log1p(libm::exp(-z))
    } else {
        z - libm::log1p(libm::exp(z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl DiscriminatorParams {
    pub fn zeros(n: usize) -> Self {
        DiscriminatorParams { weights: vec![0.0; n], bias: 0.0 }
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "discriminator expects {} features, got {}",
                self.weights.len(),
                features.len()
            )));
        }
        Ok(self.weights.iter().zip(features).map(|(w, f)| w * f).sum::<f64>() + self.bias)
    }

    /// Probability that `features` come from a real mix.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(features)?))
    }

    /// Gradient of the binary cross-entropy `-[y log p + (1-y) log(1-p)]`:
    /// `((p - y) f, p - y)`.
    pub fn bce_gradient(&self, features: &[f64], label: f64) -> Result<(Vec<f64>, f64)> {
        let r = self.forward(features)? - label;
        Ok((features.iter().map(|f| r * f).collect(), r))
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// Per-feature standardization `(f - mean) / scale` in front of the
/// logistic layer. Being affine, it folds into an equivalent
/// [`DiscriminatorParams`] on raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(n: usize) -> Self {
        FeatureNorm { mean: vec![0.0; n], scale: vec![1.0; n] }
    }

    /// Mean and standard deviation of each feature over `samples`; scales
    /// below `min_scale` are raised to it.
    pub fn fit(samples: &[&[f64]], min_scale: f64) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::EmptyBatch("feature normalization needs samples"));
        };
        let n = first.len();
        if samples.iter().any(|s| s.len() != n) {
            return Err(Error::InvalidArgument("feature vectors differ in length".into()));
        }
        let count = samples.len() as f64;
        let mean: Vec<f64> = (0..n).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / count).collect();
        let scale = (0..n)
            .map(|i| {
                let var = samples.iter().map(|s| (s[i] - mean[i]) * (s[i] - mean[i])).sum::<f64>() / count;
                libm::sqrt(var).max(min_scale)
            })
            .collect();
        Ok(FeatureNorm { mean, scale })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "normalization expects {} features, got {}",
                self.len(),
                features.len()
            )));
        }
        Ok(features.iter().zip(&self.mean).zip(&self.scale).map(|((f, m), s)| (f - m) / s).collect())
    }

    /// Discriminator on raw features equal to `disc` applied after this normalization.
    pub fn fold(&self, disc: &DiscriminatorParams) -> DiscriminatorParams {
        let weights: Vec<f64> = disc.weights.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let shift: f64 = weights.iter().zip(&self.mean).map(|(w, m)| w * m).sum();
        DiscriminatorParams { weights, bias: disc.bias - shift }
    }
}
