use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attention::{
    AttentionCache, AttentionHead, HardwareModel, ScoreMode, SdpCache, SdpHead,
};
use crate::cell::LevelSet;
use crate::error::Result;
use crate::metrics::EnergyLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    AcamSoft,
    Sdp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Acam(AttentionHead),
    Sdp(SdpHead),
}

/// `pred = relu(h + attn(h)) W_out + b_out` with `h = x W_in + b_in + pe`,
/// where `pe` is the sinusoidal positional encoding.
///
/// Inputs are standardized with training-set statistics and predictions are
/// produced in standardized target units, then mapped back to degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub x_mean: Array1<f64>,
    pub x_std: Array1<f64>,
    pub y_mean: Array1<f64>,
    pub y_std: Array1<f64>,
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub head: Head,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

/// Gradients in the same layout as the model's trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub range_param: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

pub(crate) enum HeadCache {
    Acam(AttentionCache),
    Sdp(SdpCache),
}

pub(crate) struct ForwardCache {
    xn: Array2<f64>,
    z: Array2<f64>,
    u: Array2<f64>,
    head: HeadCache,
}

pub(crate) struct ForwardOutput {
    pub pred: Array2<f64>,
    pub ledger: Option<EnergyLedger>,
    pub cache: ForwardCache,
}

impl Model {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        similarity: Similarity,
        n_channels: usize,
        n_angles: usize,
        d_model: usize,
        d_head: usize,
        tau: f64,
        levels: LevelSet,
        rng: &mut R,
    ) -> Self {
        let w_in = Array2::from_shape_simple_fn((n_channels, d_model), || {
            Normal::new(0.0, 1.0 / (n_channels as f64).sqrt())
                .unwrap()
                .sample(rng)
        });
        let head = match similarity {
            Similarity::AcamSoft => {
                let mut h = AttentionHead::new(d_model, d_head, levels, rng);
                h.tau = tau;
                Head::Acam(h)
            }
            Similarity::Sdp => Head::Sdp(SdpHead::new(d_model, d_head, rng)),
        };
        let out_std = 0.1 / (d_model as f64).sqrt();
        let w_out = Array2::from_shape_simple_fn((d_model, n_angles), || {
            Normal::new(0.0, out_std).unwrap().sample(rng)
        });
        Self {
            x_mean: Array1::zeros(n_channels),
            x_std: Array1::ones(n_channels),
            y_mean: Array1::zeros(n_angles),
            y_std: Array1::ones(n_angles),
            w_in,
            b_in: Array1::zeros(d_model),
            head,
            w_out,
            b_out: Array1::zeros(n_angles),
        }
    }

    pub fn similarity(&self) -> Similarity {
        match self.head {
            Head::Acam(_) => Similarity::AcamSoft,
            Head::Sdp(_) => Similarity::Sdp,
        }
    }

    pub fn acam_head(&self) -> Option<&AttentionHead> {
        match &self.head {
            Head::Acam(h) => Some(h),
            Head::Sdp(_) => None,
        }
    }

    pub fn acam_head_mut(&mut self) -> Option<&mut AttentionHead> {
        match &mut self.head {
            Head::Acam(h) => Some(h),
            Head::Sdp(_) => None,
        }
    }

    /// Standardized inputs projected into the model width, plus the
    /// positional encoding.
    pub fn embed(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.standardize(x).dot(&self.w_in)
            + &self.b_in
            + positional_encoding(x.nrows(), self.w_in.ncols())
    }

    fn standardize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.x_mean) / &self.x_std
    }

    pub(crate) fn forward(
        &self,
        x: ArrayView2<f64>,
        mode: ScoreMode,
        quantize: bool,
        hw: &HardwareModel,
    ) -> Result<ForwardOutput> {
        let xn = self.standardize(x);
        let h = xn.dot(&self.w_in) + &self.b_in + positional_encoding(x.nrows(), self.w_in.ncols());
        let (attn, ledger, head) = match &self.head {
            Head::Acam(head) => {
                let out = head.forward(h.view(), mode, quantize, hw)?;
                (out.y, out.ledger, HeadCache::Acam(out.cache))
            }
            Head::Sdp(head) => {
                let (y, _, cache) = head.forward(h.view())?;
                (y, None, HeadCache::Sdp(cache))
            }
        };
        let z = h + attn;
        let u = z.mapv(|v| v.max(0.0));
        let out = u.dot(&self.w_out) + &self.b_out;
        let pred = out * &self.y_std + &self.y_mean;
        Ok(ForwardOutput {
            pred,
            ledger,
            cache: ForwardCache { xn, z, u, head },
        })
    }

    /// Predictions in degrees.
    pub fn predict(
        &self,
        x: ArrayView2<f64>,
        mode: ScoreMode,
        quantize: bool,
        hw: &HardwareModel,
    ) -> Result<Array2<f64>> {
        Ok(self.forward(x, mode, quantize, hw)?.pred)
    }

    /// Reverse pass given the gradient with respect to the predictions.
    pub(crate) fn backward(
        &self,
        cache: &ForwardCache,
        d_pred: ArrayView2<f64>,
    ) -> Result<ModelGrads> {
        let d_out = &d_pred * &self.y_std;
        let w_out = cache.u.t().dot(&d_out);
        let b_out = d_out.sum_axis(Axis(0));
        let d_u = d_out.dot(&self.w_out.t());
        let d_z = ndarray::Zip::from(&d_u)
            .and(&cache.z)
            .map_collect(|&g, &z| if z > 0.0 { g } else { 0.0 });

        let (d_h_attn, w_q, w_k, w_v, range_param) = match (&self.head, &cache.head) {
            (Head::Acam(head), HeadCache::Acam(c)) => {
                let g = head.backward(c, d_z.view())?;
                (g.x, g.w_q, g.w_k, g.w_v, g.range_param)
            }
            (Head::Sdp(head), HeadCache::Sdp(c)) => {
                let g = head.backward(c, d_z.view());
                (g.x, g.w_q, g.w_k, g.w_v, Array1::zeros(0))
            }
            _ => unreachable!("cache built by this model"),
        };
        let d_h = d_z + d_h_attn;
        Ok(ModelGrads {
            w_in: cache.xn.t().dot(&d_h),
            b_in: d_h.sum_axis(Axis(0)),
            w_q,
            w_k,
            w_v,
            range_param,
            w_out,
            b_out,
        })
    }

    /// Trainable parameters, in the same order as [`ModelGrads::slices`].
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let (w_q, w_k, w_v, range) = match &mut self.head {
            Head::Acam(h) => (&mut h.w_q, &mut h.w_k, &mut h.w_v, Some(&mut h.range_param)),
            Head::Sdp(h) => (&mut h.w_q, &mut h.w_k, &mut h.w_v, None),
        };
        let mut out: Vec<&mut [f64]> = vec![
            self.w_in.as_slice_mut().expect("standard layout"),
            self.b_in.as_slice_mut().expect("standard layout"),
            w_q.as_slice_mut().expect("standard layout"),
            w_k.as_slice_mut().expect("standard layout"),
            w_v.as_slice_mut().expect("standard layout"),
        ];
        out.push(match range {
            Some(r) => r.as_slice_mut().expect("standard layout"),
            None => &mut [],
        });
        out.push(self.w_out.as_slice_mut().expect("standard layout"));
        out.push(self.b_out.as_slice_mut().expect("standard layout"));
        out
    }
}

impl ModelGrads {
    pub fn zeros_like(model: &Model) -> Self {
        let (w_q, w_k, w_v, r) = match &model.head {
            Head::Acam(h) => (
                h.w_q.raw_dim(),
                h.w_k.raw_dim(),
                h.w_v.raw_dim(),
                h.range_param.len(),
            ),
            Head::Sdp(h) => (h.w_q.raw_dim(), h.w_k.raw_dim(), h.w_v.raw_dim(), 0),
        };
        Self {
            w_in: Array2::zeros(model.w_in.raw_dim()),
            b_in: Array1::zeros(model.b_in.len()),
            w_q: Array2::zeros(w_q),
            w_k: Array2::zeros(w_k),
            w_v: Array2::zeros(w_v),
            range_param: Array1::zeros(r),
            w_out: Array2::zeros(model.w_out.raw_dim()),
            b_out: Array1::zeros(model.b_out.len()),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_in.as_slice().expect("standard layout"),
            self.b_in.as_slice().expect("standard layout"),
            self.w_q.as_slice().expect("standard layout"),
            self.w_k.as_slice().expect("standard layout"),
            self.w_v.as_slice().expect("standard layout"),
            self.range_param.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
            self.b_out.as_slice().expect("standard layout"),
        ]
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        self.w_in += &other.w_in;
        self.b_in += &other.b_in;
        self.w_q += &other.w_q;
        self.w_k += &other.w_k;
        self.w_v += &other.w_v;
        self.range_param += &other.range_param;
        self.w_out += &other.w_out;
        self.b_out += &other.b_out;
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .all(|g| g.is_finite())
    }
}

/// Fixed sinusoidal encoding: column pairs `(2i, 2i + 1)` hold
/// `sin(t / 10000^(2i/d))` and `cos(t / 10000^(2i/d))`.
pub fn positional_encoding(steps: usize, width: usize) -> Array2<f64> {
    Array2::from_shape_fn((steps, width), |(t, c)| {
        let freq = 10_000f64.powf(-((c / 2 * 2) as f64) / width as f64);
        let angle = t as f64 * freq;
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}
