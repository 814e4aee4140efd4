use std::f64::consts::TAU;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the target range (degrees).
const ANGLE_SPAN: f64 = 90.0;
const SINUSOIDS_PER_CHANNEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticTaskSpec {
    pub n_channels: usize,
    pub n_angles: usize,
    pub seq_len: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub noise_std: f64,
    /// Length of the causal moving average applied to the rectified mix.
    pub smoothing: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        Self {
            n_channels: 4,
            n_angles: 3,
            seq_len: 32,
            n_train: 128,
            n_val: 32,
            noise_std: 0.05,
            smoothing: 4,
            seed: 7,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.n_angles == 0 || self.seq_len == 0 || self.smoothing == 0 {
            return Err(Error::invalid("task dimensions must be >= 1"));
        }
        if self.n_train == 0 || self.n_val == 0 {
            return Err(Error::invalid(
                "train and validation splits must be non-empty",
            ));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std must be >= 0"));
        }
        Ok(())
    }
}

/// One sequence: `x` is `seq_len x n_channels`, `y` is `seq_len x n_angles`
/// in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub spec: SyntheticTaskSpec,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

impl Dataset {
    /// Channels are sums of random-frequency sinusoids plus Gaussian noise.
    /// Each target angle is a causal moving average of a rectified linear
    /// mix of the clean channels, rescaled so all targets span [0, 90].
    pub fn generate(spec: &SyntheticTaskSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mix = Array2::from_shape_simple_fn((spec.n_channels, spec.n_angles), || {
            unit.sample(&mut rng)
        }) / (spec.n_channels as f64).sqrt();
        let bias: Array1<f64> = (0..spec.n_angles)
            .map(|_| rng.random_range(0.0..0.5))
            .collect();

        let total = spec.n_train + spec.n_val;
        let mut raw = Vec::with_capacity(total);
        for _ in 0..total {
            let mut clean = Array2::<f64>::zeros((spec.seq_len, spec.n_channels));
            for mut channel in clean.columns_mut() {
                for _ in 0..SINUSOIDS_PER_CHANNEL {
                    let cycles = rng.random_range(0.5..4.0);
                    let amp = rng.random_range(0.3..1.0);
                    let phase = rng.random_range(0.0..TAU);
                    for (t, v) in channel.iter_mut().enumerate() {
                        *v += amp * (TAU * cycles * t as f64 / spec.seq_len as f64 + phase).sin();
                    }
                }
            }
            let noisy = if spec.noise_std > 0.0 {
                let noise = Normal::new(0.0, spec.noise_std).expect("finite noise");
                &clean + &Array2::from_shape_simple_fn(clean.raw_dim(), || noise.sample(&mut rng))
            } else {
                clean.clone()
            };
            let rectified = (clean.dot(&mix) + &bias).mapv(|v| v.max(0.0));
            let mut envelope = Array2::zeros(rectified.raw_dim());
            for t in 0..spec.seq_len {
                let start = (t + 1).saturating_sub(spec.smoothing);
                let window = rectified.slice(ndarray::s![start..=t, ..]);
                envelope
                    .row_mut(t)
                    .assign(&window.mean_axis(Axis(0)).expect("non-empty window"));
            }
            raw.push((noisy, envelope));
        }

        let (lo, hi) = raw
            .iter()
            .flat_map(|(_, e)| e.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let scale = if hi > lo { ANGLE_SPAN / (hi - lo) } else { 0.0 };
        let mut samples: Vec<Sample> = raw
            .into_iter()
            .map(|(x, e)| Sample {
                x,
                y: e.mapv(|v| (v - lo) * scale),
            })
            .collect();
        let val = samples.split_off(spec.n_train);
        Ok(Self {
            spec: spec.clone(),
            train: samples,
            val,
        })
    }

    /// Mean absolute Pearson correlation over all (channel, angle) pairs,
    /// pooled over the training split.
    pub fn mean_abs_channel_target_correlation(&self) -> f64 {
        let xs: Vec<Array2<f64>> = self.train.iter().map(|s| s.x.clone()).collect();
        let ys: Vec<Array2<f64>> = self.train.iter().map(|s| s.y.clone()).collect();
        let x = ndarray::concatenate(Axis(0), &xs.iter().map(|a| a.view()).collect::<Vec<_>>())
            .expect("same width");
        let y = ndarray::concatenate(Axis(0), &ys.iter().map(|a| a.view()).collect::<Vec<_>>())
            .expect("same width");
        let mut acc = 0.0;
        for c in x.columns() {
            for a in y.columns() {
                acc += pearson(&c.to_vec(), &a.to_vec()).abs();
            }
        }
        acc / (x.ncols() * y.ncols()) as f64
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}
