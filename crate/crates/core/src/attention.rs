//! Attention with aCAM match-count similarity.
//!
//! Queries and keys are projected, mapped onto the cell voltage span and
//! compared window-by-window: the score between query `i` and key `j` is the
//! number of dimensions `d` where `k[j][d]` lies inside
//! `(q[i][d] - r[d]/2, q[i][d] + r[d]/2)`. Scores are normalized linearly
//! (rows sum to one) rather than through a softmax.
//!
//! Two evaluation routes exist:
//!
//! * **hard** - keys are written into a [`Macro`] and each query is a
//!   broadcast search; scores are the ADC codes and the ledger is charged.
//! * **soft** - each window indicator is replaced by a product of two
//!   logistic gates of temperature `tau`, which is differentiable in the
//!   stored voltage, the query voltage and the window width.
//!
//! [`SdpHead`] is the scaled dot-product baseline with the same interface.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cell::{DeviceConstants, LevelSet};
use crate::error::{Error, Result};
use crate::macro_array::{min_adc_bits, Macro, MacroConfig};
use crate::metrics::EnergyLedger;
use crate::variation::VariationSpec;

pub const DEFAULT_TAU: f64 = 10e-3;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn check_soft(r: f64, tau: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("window width must be > 0, got {r}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    Ok(())
}

/// Smooth window indicator `sigmoid(a) * sigmoid(b)` with
/// `a = (v_store - vdl + r/2) / tau` and `b = (vdl + r/2 - v_store) / tau`.
pub fn soft_match(v_store: f64, vdl: f64, r: f64, tau: f64) -> Result<f64> {
    check_soft(r, tau)?;
    Ok(soft_match_parts(v_store, vdl, r, tau).value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftMatchGrads {
    pub d_store: f64,
    pub d_vdl: f64,
    pub d_range: f64,
}

pub fn soft_match_grads(v_store: f64, vdl: f64, r: f64, tau: f64) -> Result<SoftMatchGrads> {
    check_soft(r, tau)?;
    let p = soft_match_parts(v_store, vdl, r, tau);
    Ok(SoftMatchGrads {
        d_store: p.d_store,
        d_vdl: -p.d_store,
        d_range: p.d_range,
    })
}

#[derive(Debug, Clone, Copy)]
struct SoftParts {
    value: f64,
    d_store: f64,
    d_range: f64,
}

#[inline]
fn soft_match_parts(v_store: f64, vdl: f64, r: f64, tau: f64) -> SoftParts {
    let half = 0.5 * r;
    let sa = sigmoid((v_store - vdl + half) / tau);
    let sb = sigmoid((vdl + half - v_store) / tau);
    let da = sa * (1.0 - sa);
    let db = sb * (1.0 - sb);
    SoftParts {
        value: sa * sb,
        d_store: (da * sb - sa * db) / tau,
        d_range: (da * sb + sa * db) / (2.0 * tau),
    }
}

/// Affine map from activations onto the cell voltage span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerCalibration {
    pub x_min: f64,
    pub x_max: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl QuantizerCalibration {
    pub fn new(x_min: f64, x_max: f64, levels: &LevelSet) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid(format!(
                "calibration needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            v_lo: levels.first(),
            v_hi: levels.last(),
        })
    }

    /// Min/max over a calibration batch.
    pub fn fit<I: IntoIterator<Item = f64>>(values: I, levels: &LevelSet) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        Self::new(lo, hi, levels)
    }

    pub fn slope(&self) -> f64 {
        (self.v_hi - self.v_lo) / (self.x_max - self.x_min)
    }

    /// Clamped affine map.
    pub fn to_voltage(&self, x: f64) -> f64 {
        self.v_lo + (x.clamp(self.x_min, self.x_max) - self.x_min) * self.slope()
    }

    /// Derivative of [`to_voltage`](Self::to_voltage); zero where clamped.
    pub fn derivative(&self, x: f64) -> f64 {
        if (self.x_min..=self.x_max).contains(&x) {
            self.slope()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Soft,
    Hard,
}

/// Device model used for hard-mode scoring.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HardwareModel {
    pub constants: DeviceConstants,
    pub levels: LevelSet,
    /// `None` means ideal cells.
    pub variation: Option<VariationSpec>,
}

impl HardwareModel {
    fn build_macro(&self, rows: usize, cols: usize) -> Result<Macro> {
        let cfg = MacroConfig {
            n_rows: rows,
            m_cols: cols,
            constants: self.constants,
            levels: self.levels.clone(),
            adc_bits: min_adc_bits(cols),
            endurance_checking: true,
        };
        match &self.variation {
            Some(spec) => Macro::with_variation(cfg, spec),
            None => Macro::new(cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub raw: Array2<f64>,
    pub weights: Array2<f64>,
}

/// Raw similarity of every query row against every key row.
///
/// Hard mode writes the keys into a fresh macro (`T_k` row writes) and runs
/// one search per query (`T_q` searches); the returned ledger holds exactly
/// those charges.
pub fn acam_scores(
    q_volt: ArrayView2<f64>,
    k_volt: ArrayView2<f64>,
    v_range: ArrayView1<f64>,
    tau: f64,
    mode: ScoreMode,
    hw: &HardwareModel,
) -> Result<(Array2<f64>, Option<EnergyLedger>)> {
    let d = q_volt.ncols();
    if k_volt.ncols() != d || v_range.len() != d {
        return Err(Error::invalid(format!(
            "dimension mismatch: queries {d}, keys {}, ranges {}",
            k_volt.ncols(),
            v_range.len()
        )));
    }
    let (tq, tk) = (q_volt.nrows(), k_volt.nrows());
    match mode {
        ScoreMode::Soft => {
            for &r in v_range {
                check_soft(r, tau)?;
            }
            let mut raw = Array2::zeros((tq, tk));
            for ((i, j), s) in raw.indexed_iter_mut() {
                *s = (0..d)
                    .map(|c| {
                        soft_match_parts(k_volt[[j, c]], q_volt[[i, c]], v_range[c], tau).value
                    })
                    .sum();
            }
            Ok((raw, None))
        }
        ScoreMode::Hard => {
            let mut mac = hw.build_macro(tk, d)?;
            let keys: Vec<Vec<f64>> = k_volt.rows().into_iter().map(|r| r.to_vec()).collect();
            mac.write_matrix(&keys)?;
            let ranges = v_range.to_vec();
            let mut raw = Array2::zeros((tq, tk));
            for (i, q) in q_volt.rows().into_iter().enumerate() {
                let res = mac.search(&q.to_vec(), &ranges)?;
                for (j, &code) in res.adc_codes.iter().enumerate() {
                    raw[[i, j]] = code as f64;
                }
            }
            Ok((raw, Some(mac.ledger().clone())))
        }
    }
}

fn allowed(causal: bool, i: usize, j: usize) -> bool {
    !causal || j <= i
}

/// `w[i][j] = (raw[i][j] + eps/n_i) / (sum_j raw[i][j] + eps)` over the
/// `n_i` unmasked keys of row `i`; masked entries get zero weight.
pub fn normalize_scores(raw: ArrayView2<f64>, epsilon: f64, causal: bool) -> Result<Array2<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be > 0"));
    }
    if raw.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::invalid("raw scores must be non-negative"));
    }
    if causal && raw.nrows() != raw.ncols() {
        return Err(Error::invalid("causal masking needs a square score matrix"));
    }
    let mut w = Array2::zeros(raw.raw_dim());
    for (i, row) in raw.rows().into_iter().enumerate() {
        let n = (0..row.len()).filter(|&j| allowed(causal, i, j)).count();
        let total: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| allowed(causal, i, *j))
            .map(|(_, x)| x)
            .sum();
        for (j, &x) in row.iter().enumerate() {
            if allowed(causal, i, j) {
                w[[i, j]] = (x + epsilon / n as f64) / (total + epsilon);
            }
        }
    }
    Ok(w)
}

/// Row-wise `exp(beta * raw)` normalized to sum to one over allowed keys.
pub fn normalize_scores_exp(raw: ArrayView2<f64>, beta: f64, causal: bool) -> Result<Array2<f64>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta must be finite and > 0"));
    }
    if raw.iter().any(|&x| !x.is_finite()) {
        return Err(Error::invalid("raw scores must be finite"));
    }
    if causal && raw.nrows() != raw.ncols() {
        return Err(Error::invalid("causal masking needs a square score matrix"));
    }
    let mut w = Array2::zeros(raw.raw_dim());
    for (i, row) in raw.rows().into_iter().enumerate() {
        let top = row
            .iter()
            .enumerate()
            .filter(|(j, _)| allowed(causal, i, *j))
            .map(|(_, &x)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (j, &x) in row.iter().enumerate() {
            if allowed(causal, i, j) {
                let e = (beta * (x - top)).exp();
                w[[i, j]] = e;
                total += e;
            }
        }
        w.row_mut(i).mapv_inplace(|e| e / total);
    }
    Ok(w)
}

/// How match counts become attention weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// `(raw + eps/n) / (sum + eps)`.
    Linear,
    /// `exp(beta * raw)` over the row.
    Exponential { beta: f64 },
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

/// Single aCAM attention head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    pub d_model: usize,
    pub d_head: usize,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    /// Unconstrained window parameters; `r = range_scale * softplus(p)`.
    pub range_param: Array1<f64>,
    pub range_scale: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub normalization: Normalization,
    pub causal: bool,
    pub calibration: Option<QuantizerCalibration>,
    pub levels: LevelSet,
}

/// Everything the soft backward pass needs.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    q_volt: Array2<f64>,
    k_volt: Array2<f64>,
    raw: Array2<f64>,
    weights: Array2<f64>,
    differentiable: bool,
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub y: Array2<f64>,
    pub scores: ScoreMatrix,
    pub ledger: Option<EnergyLedger>,
    pub cache: AttentionCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub x: Array2<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub range_param: Array1<f64>,
}

impl AttentionHead {
    /// Random projections, every window at `levels.v_range_default()`.
    pub fn new<R: Rng>(d_model: usize, d_head: usize, levels: LevelSet, rng: &mut R) -> Self {
        let std = 1.0 / (d_model as f64).sqrt();
        let range_scale = levels.v_range_default();
        // softplus(ln(e - 1)) = 1
        let p0 = (std::f64::consts::E - 1.0).ln();
        Self {
            d_model,
            d_head,
            w_q: normal_matrix(d_model, d_head, std, rng),
            w_k: normal_matrix(d_model, d_head, std, rng),
            w_v: normal_matrix(d_model, d_model, std, rng),
            range_param: Array1::from_elem(d_head, p0),
            range_scale,
            tau: DEFAULT_TAU,
            epsilon: DEFAULT_EPSILON,
            normalization: Normalization::Linear,
            causal: false,
            calibration: None,
            levels,
        }
    }

    pub fn v_range(&self) -> Array1<f64> {
        self.range_param.mapv(|p| self.range_scale * softplus(p))
    }

    /// Sets window widths directly (each must be > 0).
    pub fn set_v_range(&mut self, widths: &[f64]) -> Result<()> {
        if widths.len() != self.d_head || widths.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::invalid("need d_head positive window widths"));
        }
        // inverse softplus
        self.range_param = widths
            .iter()
            .map(|&r| (r / self.range_scale).exp_m1().ln())
            .collect();
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let (dm, dh) = (self.d_model, self.d_head);
        if self.w_q.dim() != (dm, dh) || self.w_k.dim() != (dm, dh) || self.w_v.dim() != (dm, dm) {
            return Err(Error::invalid(
                "projection shapes do not match d_model/d_head",
            ));
        }
        if self.range_param.len() != dh {
            return Err(Error::invalid("range_param length must equal d_head"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be > 0"));
        }
        if let Normalization::Exponential { beta } = self.normalization {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::invalid("beta must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Fits the activation-to-voltage map to the min/max of the query and
    /// key projections over a calibration batch.
    pub fn calibrate<'a, I>(&mut self, batch: I) -> Result<()>
    where
        I: IntoIterator<Item = ArrayView2<'a, f64>>,
    {
        let mut values = Vec::new();
        for x in batch {
            values.extend(x.dot(&self.w_q).iter().copied());
            values.extend(x.dot(&self.w_k).iter().copied());
        }
        self.calibration = Some(QuantizerCalibration::fit(values, &self.levels)?);
        Ok(())
    }

    fn voltages(&self, a: &Array2<f64>, quantize: bool) -> Result<Array2<f64>> {
        let cal = self
            .calibration
            .ok_or_else(|| Error::State("attention head has no voltage calibration".into()))?;
        Ok(a.mapv(|x| {
            let v = cal.to_voltage(x);
            if quantize {
                self.levels.snap(v)
            } else {
                v
            }
        }))
    }

    pub fn forward(
        &self,
        x: ArrayView2<f64>,
        mode: ScoreMode,
        quantize: bool,
        hw: &HardwareModel,
    ) -> Result<AttentionOutput> {
        self.validate()?;
        if x.ncols() != self.d_model {
            return Err(Error::invalid(format!(
                "input has {} features, head expects {}",
                x.ncols(),
                self.d_model
            )));
        }
        let q = x.dot(&self.w_q);
        let k = x.dot(&self.w_k);
        let v = x.dot(&self.w_v);
        let q_volt = self.voltages(&q, quantize)?;
        let k_volt = self.voltages(&k, quantize)?;
        let ranges = self.v_range();
        let (mut raw, ledger) = acam_scores(
            q_volt.view(),
            k_volt.view(),
            ranges.view(),
            self.tau,
            mode,
            hw,
        )?;
        if self.causal {
            for ((i, j), s) in raw.indexed_iter_mut() {
                if !allowed(true, i, j) {
                    *s = 0.0;
                }
            }
        }
        let weights = match self.normalization {
            Normalization::Linear => normalize_scores(raw.view(), self.epsilon, self.causal)?,
            Normalization::Exponential { beta } => {
                normalize_scores_exp(raw.view(), beta, self.causal)?
            }
        };
        let y = weights.dot(&v);
        let cache = AttentionCache {
            x: x.to_owned(),
            q,
            k,
            v,
            q_volt,
            k_volt,
            raw: raw.clone(),
            weights: weights.clone(),
            differentiable: mode == ScoreMode::Soft && !quantize,
        };
        Ok(AttentionOutput {
            y,
            scores: ScoreMatrix { raw, weights },
            ledger,
            cache,
        })
    }

    /// Reverse pass of a soft, unquantized forward.
    pub fn backward(
        &self,
        cache: &AttentionCache,
        grad_y: ArrayView2<f64>,
    ) -> Result<AttentionGrads> {
        if !cache.differentiable {
            return Err(Error::State(
                "backward needs a soft-mode, unquantized forward pass".into(),
            ));
        }
        if grad_y.dim() != (cache.x.nrows(), self.d_model) {
            return Err(Error::invalid(
                "grad_y shape does not match the forward output",
            ));
        }
        let cal = self
            .calibration
            .ok_or_else(|| Error::State("missing calibration".into()))?;
        let (tq, tk) = cache.raw.dim();
        let ranges = self.v_range();

        let d_weights = grad_y.dot(&cache.v.t());
        let d_v = cache.weights.t().dot(&grad_y);

        let mut d_raw = Array2::zeros((tq, tk));
        for i in 0..tq {
            let mean: f64 = (0..tk)
                .filter(|&j| allowed(self.causal, i, j))
                .map(|j| d_weights[[i, j]] * cache.weights[[i, j]])
                .sum();
            match self.normalization {
                Normalization::Linear => {
                    let total: f64 = (0..tk)
                        .filter(|&j| allowed(self.causal, i, j))
                        .map(|j| cache.raw[[i, j]])
                        .sum();
                    let denom = total + self.epsilon;
                    for j in (0..tk).filter(|&j| allowed(self.causal, i, j)) {
                        d_raw[[i, j]] = (d_weights[[i, j]] - mean) / denom;
                    }
                }
                Normalization::Exponential { beta } => {
                    for j in (0..tk).filter(|&j| allowed(self.causal, i, j)) {
                        d_raw[[i, j]] = beta * cache.weights[[i, j]] * (d_weights[[i, j]] - mean);
                    }
                }
            }
        }

        let mut d_qv = Array2::<f64>::zeros((tq, self.d_head));
        let mut d_kv = Array2::<f64>::zeros((tk, self.d_head));
        let mut d_r = Array1::<f64>::zeros(self.d_head);
        for ((i, j), &g) in d_raw.indexed_iter() {
            if g == 0.0 {
                continue;
            }
            for c in 0..self.d_head {
                let p = soft_match_parts(
                    cache.k_volt[[j, c]],
                    cache.q_volt[[i, c]],
                    ranges[c],
                    self.tau,
                );
                d_kv[[j, c]] += g * p.d_store;
                d_qv[[i, c]] -= g * p.d_store;
                d_r[c] += g * p.d_range;
            }
        }

        let d_q = &d_qv * &cache.q.mapv(|a| cal.derivative(a));
        let d_k = &d_kv * &cache.k.mapv(|a| cal.derivative(a));
        let range_param = ndarray::Zip::from(&d_r)
            .and(&self.range_param)
            .map_collect(|&g, &p| g * self.range_scale * sigmoid(p));

        let xt = cache.x.t();
        let x = d_q.dot(&self.w_q.t()) + d_k.dot(&self.w_k.t()) + d_v.dot(&self.w_v.t());
        Ok(AttentionGrads {
            x,
            w_q: xt.dot(&d_q),
            w_k: xt.dot(&d_k),
            w_v: xt.dot(&d_v),
            range_param,
        })
    }
}

/// Scaled dot-product attention head, `softmax(Q K^T / sqrt(d)) V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpHead {
    pub d_model: usize,
    pub d_head: usize,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub causal: bool,
}

#[derive(Debug, Clone)]
pub struct SdpCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpGrads {
    pub x: Array2<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
}

impl SdpHead {
    pub fn new<R: Rng>(d_model: usize, d_head: usize, rng: &mut R) -> Self {
        let std = 1.0 / (d_model as f64).sqrt();
        Self {
            d_model,
            d_head,
            w_q: normal_matrix(d_model, d_head, std, rng),
            w_k: normal_matrix(d_model, d_head, std, rng),
            w_v: normal_matrix(d_model, d_model, std, rng),
            causal: false,
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ScoreMatrix, SdpCache)> {
        if x.ncols() != self.d_model {
            return Err(Error::invalid("input width does not match d_model"));
        }
        let q = x.dot(&self.w_q);
        let k = x.dot(&self.w_k);
        let v = x.dot(&self.w_v);
        let raw = q.dot(&k.t()) / (self.d_head as f64).sqrt();
        let mut weights = Array2::zeros(raw.raw_dim());
        for (i, (row, mut out)) in raw.rows().into_iter().zip(weights.rows_mut()).enumerate() {
            let max = row
                .iter()
                .enumerate()
                .filter(|(j, _)| allowed(self.causal, i, *j))
                .fold(f64::NEG_INFINITY, |m, (_, &s)| m.max(s));
            let mut total = 0.0;
            for (j, &s) in row.iter().enumerate() {
                if allowed(self.causal, i, j) {
                    out[j] = (s - max).exp();
                    total += out[j];
                }
            }
            out /= total;
        }
        let y = weights.dot(&v);
        let cache = SdpCache {
            x: x.to_owned(),
            q,
            k,
            v,
            weights: weights.clone(),
        };
        Ok((y, ScoreMatrix { raw, weights }, cache))
    }

    pub fn backward(&self, cache: &SdpCache, grad_y: ArrayView2<f64>) -> SdpGrads {
        let d_weights = grad_y.dot(&cache.v.t());
        let d_v = cache.weights.t().dot(&grad_y);
        let inner = (&d_weights * &cache.weights).sum_axis(Axis(1));
        let mut d_s = &cache.weights * &d_weights;
        for (mut row, (w, g)) in d_s
            .rows_mut()
            .into_iter()
            .zip(cache.weights.rows().into_iter().zip(inner.iter()))
        {
            row.zip_mut_with(&w, |ds, &wij| *ds -= wij * g);
        }
        let scale = 1.0 / (self.d_head as f64).sqrt();
        let d_q = d_s.dot(&cache.k) * scale;
        let d_k = d_s.t().dot(&cache.q) * scale;
        let xt = cache.x.t();
        SdpGrads {
            x: d_q.dot(&self.w_q.t()) + d_k.dot(&self.w_k.t()) + d_v.dot(&self.w_v.t()),
            w_q: xt.dot(&d_q),
            w_k: xt.dot(&d_k),
            w_v: xt.dot(&d_v),
        }
    }
}
