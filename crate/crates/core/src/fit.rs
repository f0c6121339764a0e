//! Inverse rendering: fit raw mixer parameters to a reference spectrogram.

use alloc::format;
use alloc::vec::Vec;

use crate::grad::MixProblem;
use crate::mixer::{constrain, MixerParams, RawParams};
use crate::optim::{Optimizer, OptimizerKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Seeds random initializations made by callers; the fit itself is deterministic.
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig { steps: 200, learning_rate: 1e-2, optimizer: OptimizerKind::adam(), seed: 0 }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub raw: RawParams,
    pub params: MixerParams,
    /// Loss before each step followed by the final loss (`steps + 1` entries).
    pub history: Vec<f64>,
}

/// Gradient descent on `problem`, clamping raw coordinates to `[0, 1]` after
/// each step.
///
/// Fails with [`Error::Divergence`] if the loss becomes non-finite or the run
/// ends above its starting loss.
pub fn fit_params(problem: &MixProblem<'_>, init: RawParams, opt: &OptConfig) -> Result<FitOutcome> {
    opt.validate()?;
    let mut raw = init;
    let mut optimizer = Optimizer::new(opt.optimizer, opt.learning_rate, raw.len());
    let mut history = Vec::with_capacity(opt.steps + 1);
    let mut values = raw.values().to_vec();
    for step in 0..opt.steps {
        let (loss, grad) = problem.loss_and_grad(&raw)?;
        history.push(loss);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step, history });
        }
        optimizer.step(&mut values, &grad);
        raw.set_clamped(&values);
        values.copy_from_slice(raw.values());
    }
    let final_loss = problem.loss(&raw)?;
    history.push(final_loss);
    if !final_loss.is_finite() || final_loss > history[0] {
        return Err(Error::Divergence { step: opt.steps, history });
    }
    let params = constrain(&raw, problem.region, problem.layout)?;
    Ok(FitOutcome { raw, params, history })
}
