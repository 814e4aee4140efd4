use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Model, ModelGrads, Similarity};
use super::task::{Dataset, Sample};
use crate::attention::{HardwareModel, Normalization, ScoreMode};
use crate::cell::LevelSet;
use crate::error::{Error, Result};
use crate::metrics::{EnergyLedger, LedgerReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub similarity: Similarity,
    pub d_model: usize,
    pub d_head: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Soft-match temperature (V), held constant over training.
    pub tau: f64,
    /// Score normalization for the aCAM arm; SDP always uses softmax.
    pub normalization: Normalization,
    pub causal: bool,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            similarity: Similarity::AcamSoft,
            d_model: 16,
            d_head: 8,
            learning_rate: 0.005,
            momentum: 0.9,
            epochs: 50,
            batch_size: 8,
            tau: 10e-3,
            normalization: Normalization::Exponential { beta: 2.0 },
            causal: false,
            seed: 11,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.d_head == 0 || self.batch_size == 0 {
            return Err(Error::invalid("model widths and batch size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.tau > 0.0)
        {
            return Err(Error::invalid(
                "need learning_rate >= 0, momentum in [0, 1), tau > 0",
            ));
        }
        Ok(())
    }
}

/// Train/validation MAE after `epoch` passes; epoch 0 is the initial model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub curve: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.curve {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Soft,
    Hard,
    HardQuantized,
}

impl EvalMode {
    fn score_mode(self) -> (ScoreMode, bool) {
        match self {
            EvalMode::Soft => (ScoreMode::Soft, false),
            EvalMode::Hard => (ScoreMode::Hard, false),
            EvalMode::HardQuantized => (ScoreMode::Hard, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub mae: f64,
    pub ledger: Option<LedgerReport>,
}

/// Saved model plus everything needed to rebuild its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub version: u32,
    pub task: super::task::SyntheticTaskSpec,
    pub spec: ModelSpec,
    pub model: Model,
}

impl ModelCheckpoint {
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.version != Self::VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        Ok(ck)
    }
}

fn stack<'a>(arrays: impl Iterator<Item = &'a Array2<f64>>) -> Array2<f64> {
    let views: Vec<_> = arrays.map(|a| a.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("samples share a width")
}

fn column_stats(a: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = a.mean_axis(Axis(0)).expect("non-empty");
    let std = a
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    (mean, std)
}

fn calibrate(model: &mut Model, samples: &[Sample]) -> Result<()> {
    let embedded: Vec<Array2<f64>> = samples.iter().map(|s| model.embed(s.x.view())).collect();
    if let Some(head) = model.acam_head_mut() {
        head.calibrate(embedded.iter().map(|e| e.view()))?;
    }
    Ok(())
}

/// Mean absolute error (degrees) over samples, time steps and angles.
fn mae_on(
    model: &Model,
    samples: &[Sample],
    mode: EvalMode,
    hw: &HardwareModel,
) -> Result<(f64, Option<EnergyLedger>)> {
    let (score, quantize) = mode.score_mode();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut ledger: Option<EnergyLedger> = None;
    for s in samples {
        let out = model.forward(s.x.view(), score, quantize, hw)?;
        total += (&out.pred - &s.y).mapv(f64::abs).sum();
        count += s.y.len();
        if let Some(l) = out.ledger {
            match &mut ledger {
                Some(acc) => acc.absorb(&l)?,
                None => ledger = Some(l),
            }
        }
    }
    Ok((total / count as f64, ledger))
}

/// Summed MAE gradient over a batch; the loss is the batch mean.
pub fn batch_gradient(
    model: &Model,
    batch: &[&Sample],
    hw: &HardwareModel,
) -> Result<(f64, ModelGrads)> {
    let n: usize = batch.iter().map(|s| s.y.len()).sum();
    let mut grads = ModelGrads::zeros_like(model);
    let mut loss = 0.0;
    for s in batch {
        let out = model.forward(s.x.view(), ScoreMode::Soft, false, hw)?;
        let diff = &out.pred - &s.y;
        loss += diff.mapv(f64::abs).sum();
        let d_pred = diff.mapv(|d| d.signum() / n as f64);
        grads.add_assign(&model.backward(&out.cache, d_pred.view())?);
    }
    Ok((loss / n as f64, grads))
}

/// Builds the model, fits input/target standardization and the voltage
/// calibration on the training split.
pub fn init_model(spec: &ModelSpec, data: &Dataset, rng: &mut ChaCha8Rng) -> Result<Model> {
    spec.validate()?;
    let mut model = Model::new(
        spec.similarity,
        data.spec.n_channels,
        data.spec.n_angles,
        spec.d_model,
        spec.d_head,
        spec.tau,
        LevelSet::default(),
        rng,
    );
    if let Some(h) = model.acam_head_mut() {
        h.causal = spec.causal;
        h.normalization = spec.normalization;
    }
    if let super::model::Head::Sdp(h) = &mut model.head {
        h.causal = spec.causal;
    }
    let (xm, xs) = column_stats(&stack(data.train.iter().map(|s| &s.x)));
    let (ym, ys) = column_stats(&stack(data.train.iter().map(|s| &s.y)));
    model.x_mean = xm;
    model.x_std = xs;
    model.y_mean = ym;
    model.y_std = ys;
    calibrate(&mut model, &data.train)?;
    Ok(model)
}

/// Minibatch gradient descent with heavy-ball momentum on the MAE loss.
/// The voltage calibration is refitted on the training split after every
/// epoch and held fixed within an epoch. Single-threaded and deterministic.
pub fn train(spec: &ModelSpec, data: &Dataset) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut model = init_model(spec, data, &mut rng)?;
    let hw = HardwareModel::default();

    let log = |model: &Model, epoch: usize| -> Result<EpochLog> {
        let (train_mae, _) = mae_on(model, &data.train, EvalMode::Soft, &hw)?;
        let (val_mae, _) = mae_on(model, &data.val, EvalMode::Soft, &hw)?;
        if !train_mae.is_finite() || !val_mae.is_finite() {
            return Err(Error::Training {
                epoch,
                diagnostic: format!("MAE not finite (train {train_mae}, val {val_mae})"),
            });
        }
        Ok(EpochLog {
            epoch,
            train_mae,
            val_mae,
        })
    };

    let mut curve = vec![log(&model, 0)?];
    let mut velocity = ModelGrads::zeros_like(&model);
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(spec.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data.train[i]).collect();
            let (loss, grads) = batch_gradient(&model, &batch, &hw)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Training {
                    epoch,
                    diagnostic: format!(
                        "non-finite loss {loss} or gradient (norm {})",
                        grads.norm()
                    ),
                });
            }
            for (v, g) in velocity_slices(&mut velocity)
                .into_iter()
                .zip(grads.slices())
            {
                for (vi, gi) in v.iter_mut().zip(g) {
                    *vi = spec.momentum * *vi + gi;
                }
            }
            let mut finite = true;
            for (p, v) in model.params_mut().into_iter().zip(velocity.slices()) {
                for (pi, vi) in p.iter_mut().zip(v) {
                    *pi -= spec.learning_rate * vi;
                    finite &= pi.is_finite();
                }
            }
            if let Some(h) = model.acam_head() {
                finite &= h.v_range().iter().all(|&r| r > 0.0 && r.is_finite());
            }
            if !finite {
                return Err(Error::Training {
                    epoch,
                    diagnostic: format!("parameters left the valid domain after a step with loss {loss} and gradient norm {}", grads.norm()),
                });
            }
        }
        calibrate(&mut model, &data.train)?;
        curve.push(log(&model, epoch)?);
    }
    Ok(TrainOutcome { model, curve })
}

fn velocity_slices(v: &mut ModelGrads) -> Vec<&mut [f64]> {
    vec![
        v.w_in.as_slice_mut().expect("standard layout"),
        v.b_in.as_slice_mut().expect("standard layout"),
        v.w_q.as_slice_mut().expect("standard layout"),
        v.w_k.as_slice_mut().expect("standard layout"),
        v.w_v.as_slice_mut().expect("standard layout"),
        v.range_param.as_slice_mut().expect("standard layout"),
        v.w_out.as_slice_mut().expect("standard layout"),
        v.b_out.as_slice_mut().expect("standard layout"),
    ]
}

/// Validation MAE in the requested similarity mode. Hard modes run every
/// attention evaluation on a macro and return the accumulated ledger.
pub fn evaluate(
    model: &Model,
    data: &Dataset,
    mode: EvalMode,
    hw: &HardwareModel,
) -> Result<EvalReport> {
    if model.similarity() == Similarity::Sdp && mode != EvalMode::Soft {
        return Err(Error::invalid("hard evaluation modes need an aCAM model"));
    }
    let (mae, ledger) = mae_on(model, &data.val, mode, hw)?;
    let bits = (hw.levels.len() as f64).log2().floor() as u32;
    Ok(EvalReport {
        mode,
        mae,
        ledger: ledger.map(|l| l.report(bits)),
    })
}

/// Validation MAE of predicting the per-angle training mean everywhere.
pub fn constant_mean_mae(data: &Dataset) -> f64 {
    let mean = stack(data.train.iter().map(|s| &s.y))
        .mean_axis(Axis(0))
        .expect("non-empty");
    let val = stack(data.val.iter().map(|s| &s.y));
    (&val - &mean).mapv(f64::abs).mean().expect("non-empty")
}
