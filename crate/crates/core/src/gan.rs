//! Min-max adversarial updates between raw mixer parameters (the generator)
//! and a logistic discriminator on pooled band features.
//!
//! Each [`GanState::step`] runs one discriminator ascent step on
//! `mean log D(real) + mean log(1 - D(fake))`, then one generator descent
//! step on `mean log(1 - D(fake))` (or `-mean log D(fake)` when
//! non-saturating), with gradients chained through feature pooling, the
//! masked magnitude, the masks and the constraint mapping. An optional
//! [`FeatureNorm`] standardizes features in front of the logistic layer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curves::{BandLayout, Interval};
use crate::disc::{log_sigmoid, sigmoid, DiscriminatorParams, FeatureNorm, FeaturePooling, FeatureSpec};
use crate::grad::mix_backward_unchecked;
use crate::grid::Grid;
use crate::mixer::{constrain, mix_magnitude_unchecked, PairSpectra, RawParams};
use crate::optim::{Optimizer, OptimizerKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorLoss {
    /// Minimize `log(1 - D(fake))`.
    #[default]
    MinMax,
    /// Minimize `-log D(fake)`.
    NonSaturating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanConfig {
    pub g_lr: f64,
    pub d_lr: f64,
    pub optimizer: OptimizerKind,
    pub generator_loss: GeneratorLoss,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig { g_lr: 2e-3, d_lr: 1e-3, optimizer: OptimizerKind::adam(), generator_loss: GeneratorLoss::MinMax }
    }
}

/// A prepared training pair with its transition region and pooling.
#[derive(Debug, Clone)]
pub struct GanPair {
    pub spectra: PairSpectra,
    pub region: Interval,
    pub pooling: FeaturePooling,
}

impl GanPair {
    pub fn new(spectra: PairSpectra, region: Interval, spec: &FeatureSpec) -> Result<Self> {
        let pooling = FeaturePooling::new(spec, &spectra.time, &spectra.freq, region)?;
        Ok(GanPair { spectra, region, pooling })
    }
}

/// One generated sample: a pair rendered with generator `generator`.
#[derive(Debug, Clone, Copy)]
pub struct FakeItem<'a> {
    pub pair: &'a GanPair,
    pub generator: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// Discriminator cross-entropy, `-(mean log D(real) + mean log(1 - D(fake)))`.
    pub d_loss: f64,
    /// Generator objective after the discriminator update.
    pub g_loss: f64,
    /// Mean `D(fake)` at the start of the step.
    pub mean_d_fake: f64,
    pub mean_d_real: f64,
    pub g_grad_norm: f64,
}

/// Ascent direction of the discriminator objective with respect to `(w, b)`.
pub fn discriminator_gradient(disc: &DiscriminatorParams, real: &[&[f64]], fake: &[&[f64]]) -> Result<(Vec<f64>, f64)> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::EmptyBatch("discriminator needs real and fake samples"));
    }
    let n = disc.weights.len();
    let mut gw = vec![0.0; n];
    let mut gb = 0.0;
    // d/dz log sigmoid(z) = 1 - p ; d/dz log(1 - sigmoid(z)) = -p
    for (batch, real_label) in [(real, true), (fake, false)] {
        let scale = 1.0 / batch.len() as f64;
        for f in batch {
            let p = disc.forward(f)?;
            let c = if real_label { 1.0 - p } else { -p } * scale;
            for (g, x) in gw.iter_mut().zip(f.iter()) {
                *g += c * x;
            }
            gb += c;
        }
    }
    Ok((gw, gb))
}

#[derive(Debug, Clone)]
pub struct GanState {
    pub generators: Vec<RawParams>,
    /// Logistic layer; it sees features after `norm`.
    pub disc: DiscriminatorParams,
    pub norm: FeatureNorm,
    layout: BandLayout,
    config: GanConfig,
    gen_opts: Vec<Optimizer>,
    disc_opt: Optimizer,
}

impl GanState {
    pub fn new(
        generators: Vec<RawParams>,
        disc: DiscriminatorParams,
        layout: BandLayout,
        config: GanConfig,
    ) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::EmptyBatch("at least one generator vector is required"));
        }
        if let Some(g) = generators.iter().find(|g| g.layout().k != layout.k()) {
            return Err(Error::InvalidArgument(format!(
                "generator laid out for k={}, band layout has k={}",
                g.layout().k,
                layout.k()
            )));
        }
        let gen_opts = generators.iter().map(|g| Optimizer::new(config.optimizer, config.g_lr, g.len())).collect();
        let disc_opt = Optimizer::new(config.optimizer, config.d_lr, disc.weights.len() + 1);
        let norm = FeatureNorm::identity(disc.weights.len());
        Ok(GanState { generators, disc, norm, layout, config, gen_opts, disc_opt })
    }

    /// Standardize features before the logistic layer.
    pub fn with_norm(mut self, norm: FeatureNorm) -> Result<Self> {
        if norm.len() != self.disc.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "normalization covers {} features, discriminator has {}",
                norm.len(),
                self.disc.weights.len()
            )));
        }
        self.norm = norm;
        Ok(self)
    }

    /// The current discriminator expressed on raw (unnormalized) features.
    pub fn raw_discriminator(&self) -> DiscriminatorParams {
        self.norm.fold(&self.disc)
    }

    pub fn layout(&self) -> &BandLayout {
        &self.layout
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    /// Mixed magnitude of a fake item under its current generator.
    pub fn fake_mix(&self, item: &FakeItem<'_>) -> Result<Grid> {
        let raw = self.generator(item.generator)?;
        let params = constrain(raw, item.pair.region, &self.layout)?;
        Ok(mix_magnitude_unchecked(&params, &item.pair.spectra))
    }

    /// Raw pooled features of a fake item.
    pub fn fake_features(&self, item: &FakeItem<'_>) -> Result<Vec<f64>> {
        item.pair.pooling.features(&self.fake_mix(item)?)
    }

    fn generator(&self, idx: usize) -> Result<&RawParams> {
        self.generators.get(idx).ok_or_else(|| Error::InvalidArgument(format!("no generator with index {idx}")))
    }

    /// Gradients of the generator objective for each generator touched by `fake`.
    /// Entries of untouched generators are zero.
    pub fn generator_gradients(&self, fake: &[FakeItem<'_>]) -> Result<(f64, Vec<Vec<f64>>)> {
        if fake.is_empty() {
            return Err(Error::EmptyBatch("generator step needs fake samples"));
        }
        let scale = 1.0 / fake.len() as f64;
        let mut grads: Vec<Vec<f64>> = self.generators.iter().map(|g| vec![0.0; g.len()]).collect();
        let mut objective = 0.0;
        for item in fake {
            let raw = self.generator(item.generator)?;
            let params = constrain(raw, item.pair.region, &self.layout)?;
            let mix = mix_magnitude_unchecked(&params, &item.pair.spectra);
            let feats = self.norm.apply(&item.pair.pooling.features(&mix)?)?;
            let z = self.disc.logit(&feats)?;
            let p = sigmoid(z);
            let (value, dz) = match self.config.generator_loss {
                GeneratorLoss::MinMax => (log_sigmoid(-z), -p),
                GeneratorLoss::NonSaturating => (-log_sigmoid(z), -(1.0 - p)),
            };
            objective += value * scale;
            let dfeat: Vec<f64> =
                self.disc.weights.iter().zip(&self.norm.scale).map(|(w, s)| dz * w * scale / s).collect();
            let dmix = item.pair.pooling.backward(&mix, &dfeat)?;
            let g = mix_backward_unchecked(raw, &params, &item.pair.spectra, item.pair.region, &self.layout, &dmix);
            for (dst, v) in grads[item.generator].iter_mut().zip(g) {
                *dst += v;
            }
        }
        Ok((objective, grads))
    }

    /// One discriminator ascent step on raw real and fake features.
    /// Returns `(d_loss, mean D(real), mean D(fake))` measured before the update.
    pub fn discriminator_step(&mut self, real: &[&[f64]], fake: &[&[f64]]) -> Result<(f64, f64, f64)> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::EmptyBatch("discriminator step needs real and fake samples"));
        }
        let real_feats: Vec<Vec<f64>> = real.iter().map(|f| self.norm.apply(f)).collect::<Result<_>>()?;
        let fake_feats: Vec<Vec<f64>> = fake.iter().map(|f| self.norm.apply(f)).collect::<Result<_>>()?;
        let real: Vec<&[f64]> = real_feats.iter().map(Vec::as_slice).collect();
        let fake: Vec<&[f64]> = fake_feats.iter().map(Vec::as_slice).collect();

        let mean = |xs: &[&[f64]], d: &DiscriminatorParams| -> Result<(f64, f64, f64)> {
            let (mut p_sum, mut lp, mut lq) = (0.0, 0.0, 0.0);
            for f in xs {
                let z = d.logit(f)?;
                p_sum += sigmoid(z);
                lp += log_sigmoid(z);
                lq += log_sigmoid(-z);
            }
            let n = xs.len() as f64;
            Ok((p_sum / n, lp / n, lq / n))
        };
        let (mean_d_real, log_d_real, _) = mean(&real, &self.disc)?;
        let (mean_d_fake, _, log_1m_d_fake) = mean(&fake, &self.disc)?;
        let d_loss = -(log_d_real + log_1m_d_fake);

        let (gw, gb) = discriminator_gradient(&self.disc, &real, &fake)?;
        if gw.iter().any(|g| !g.is_finite()) || !gb.is_finite() {
            return Err(Error::NonFinite(format!("discriminator gradient (d_loss={d_loss})")));
        }
        // ascent: descend on the negated gradient
        let mut theta: Vec<f64> = self.disc.weights.iter().copied().chain(core::iter::once(self.disc.bias)).collect();
        let neg: Vec<f64> = gw.iter().chain(core::iter::once(&gb)).map(|g| -g).collect();
        self.disc_opt.step(&mut theta, &neg);
        self.disc.bias = theta.pop().expect("bias entry");
        self.disc.weights = theta;
        if !self.disc.is_finite() {
            return Err(Error::NonFinite("discriminator parameters".into()));
        }
        Ok((d_loss, mean_d_real, mean_d_fake))
    }

    pub fn step(&mut self, real: &[&[f64]], fake: &[FakeItem<'_>]) -> Result<StepMetrics> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::EmptyBatch("adversarial step needs real and fake samples"));
        }
        let fake_feats: Vec<Vec<f64>> = fake.iter().map(|item| self.fake_features(item)).collect::<Result<_>>()?;
        let fake_refs: Vec<&[f64]> = fake_feats.iter().map(Vec::as_slice).collect();
        let (d_loss, mean_d_real, mean_d_fake) = self.discriminator_step(real, &fake_refs)?;

        let (g_loss, grads) = self.generator_gradients(fake)?;
        let mut norm2 = 0.0;
        for g in &grads {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("generator gradient (g_loss={g_loss})")));
            }
            norm2 += g.iter().map(|x| x * x).sum::<f64>();
        }
        let mut touched = vec![false; self.generators.len()];
        for item in fake {
            touched[item.generator] = true;
        }
        for (idx, grad) in grads.iter().enumerate() {
            if !touched[idx] {
                continue;
            }
            let mut values = self.generators[idx].values().to_vec();
            self.gen_opts[idx].step(&mut values, grad);
            self.generators[idx].set_clamped(&values);
        }
        Ok(StepMetrics { d_loss, g_loss, mean_d_fake, mean_d_real, g_grad_norm: libm::sqrt(norm2) })
    }
}
