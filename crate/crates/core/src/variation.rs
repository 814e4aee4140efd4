//! Monte Carlo device variation.
//!
//! Each Monte Carlo instance is one cell with its own comparator and write
//! offsets, drawn from a counter-addressed generator keyed by
//! `(seed, instance, draw)`. Changing the number of instances, the order of
//! evaluation or the thread count never changes an individual instance, and
//! scaling a sigma rescales the same underlying normal draws (common random
//! numbers across sigma sweeps).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{search_window, CellState, DeviceConstants, LevelSet};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::time::SimTime;

const READ_NOISE_SALT: u64 = 0x5EAD_0000_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationSpec {
    /// Std-dev of each comparator's input-referred offset (V).
    pub sigma_cmp: f64,
    /// Std-dev of the per-cell write error (V).
    pub sigma_write: f64,
    /// Std-dev of per-read noise on the compared voltage (V).
    pub sigma_read: f64,
    pub seed: u64,
}

impl Default for VariationSpec {
    fn default() -> Self {
        Self {
            sigma_cmp: 5e-3,
            sigma_write: 2e-3,
            sigma_read: 0.0,
            seed: 0,
        }
    }
}

impl VariationSpec {
    pub fn ideal() -> Self {
        Self {
            sigma_cmp: 0.0,
            sigma_write: 0.0,
            sigma_read: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("sigma_cmp", self.sigma_cmp),
            ("sigma_write", self.sigma_write),
            ("sigma_read", self.sigma_read),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {s}")));
            }
        }
        Ok(())
    }

    /// Offsets of instance `index`.
    pub fn offsets(&self, index: u64) -> CellOffsets {
        let mut rng = CounterRng::new(self.seed, index);
        CellOffsets {
            offset_low: self.sigma_cmp * rng.normal_at(0),
            offset_high: self.sigma_cmp * rng.normal_at(1),
            write_offset: self.sigma_write * rng.normal_at(2),
        }
    }

    fn read_noise(&self, instance: u64, read: u64) -> f64 {
        if self.sigma_read == 0.0 {
            return 0.0;
        }
        self.sigma_read * CounterRng::new(self.seed ^ READ_NOISE_SALT, instance).normal_at(read)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOffsets {
    pub offset_low: f64,
    pub offset_high: f64,
    pub write_offset: f64,
}

impl CellOffsets {
    pub fn cell(&self) -> CellState {
        CellState::with_offsets(self.offset_low, self.offset_high, self.write_offset)
    }
}

/// Offsets for instances `0..n_cells`.
pub fn sample_variation(spec: &VariationSpec, n_cells: usize) -> Vec<CellOffsets> {
    (0..n_cells as u64).map(|k| spec.offsets(k)).collect()
}

/// Match tallies per (stored level, query level) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub trials: u32,
    pub threshold: f64,
    pub levels: Vec<f64>,
    /// `counts[stored][query]`.
    pub counts: Vec<Vec<u32>>,
}

impl ConfusionMatrix {
    pub fn diagonal(&self) -> Vec<u32> {
        (0..self.levels.len()).map(|k| self.counts[k][k]).collect()
    }

    pub fn off_diagonal_mass(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(a, row)| {
                row.iter()
                    .enumerate()
                    .filter(move |(b, _)| *b != a)
                    .map(|(_, &c)| c as u64)
            })
            .sum()
    }

    pub fn per_level_accuracy(&self) -> Vec<f64> {
        self.diagonal()
            .iter()
            .map(|&d| d as f64 / self.trials as f64)
            .collect()
    }

    /// Levels whose diagonal tally reaches `fraction` of the trials.
    pub fn distinguishable_levels(&self, fraction: f64) -> usize {
        self.per_level_accuracy()
            .iter()
            .filter(|&&a| a >= fraction)
            .count()
    }

    /// `floor(log2(levels with >= 90 % diagonal hits))`.
    pub fn effective_bits(&self) -> u32 {
        match self.distinguishable_levels(0.9) {
            0 => 0,
            n => usize::BITS - 1 - n.leading_zeros(),
        }
    }

    pub fn summary(&self) -> ConfusionSummary {
        ConfusionSummary {
            trials: self.trials,
            levels: self.levels.len(),
            threshold_a: self.threshold,
            per_level_accuracy: self.per_level_accuracy(),
            distinguishable_levels: self.distinguishable_levels(0.9),
            effective_bits: self.effective_bits(),
            off_diagonal_mass: self.off_diagonal_mass(),
        }
    }

    /// Long format: one record per (stored, query) pair.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "stored_level",
            "stored_V",
            "query_level",
            "query_V",
            "matches",
            "trials",
        ])?;
        for (a, row) in self.counts.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                w.write_record([
                    a.to_string(),
                    self.levels[a].to_string(),
                    b.to_string(),
                    self.levels[b].to_string(),
                    c.to_string(),
                    self.trials.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub trials: u32,
    pub levels: usize,
    pub threshold_a: f64,
    pub per_level_accuracy: Vec<f64>,
    pub distinguishable_levels: usize,
    pub effective_bits: u32,
    pub off_diagonal_mass: u64,
}

/// Every stored level against every query level, once per Monte Carlo
/// instance. Instance `t` is one cell with fixed offsets; it is rewritten
/// with each stored level and searched with each query level at width
/// `levels.v_range_default()`. A trial counts as a match when the single
/// cell's match-line current exceeds `threshold`.
pub fn run_confusion(
    spec: &VariationSpec,
    constants: &DeviceConstants,
    levels: &LevelSet,
    trials: u32,
    threshold: f64,
) -> Result<ConfusionMatrix> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let n = levels.len();
    let v = levels.voltages();
    let windows = v
        .iter()
        .map(|&q| search_window(q, levels.v_range_default()))
        .collect::<Result<Vec<_>>>()?;

    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<u32>> {
            let base = spec.offsets(t).cell();
            let mut hits = vec![0u32; n * n];
            for a in 0..n {
                let cell = base.write(v[a], SimTime::ZERO, None)?;
                for b in 0..n {
                    let noise = spec.read_noise(t, (a * n + b) as u64);
                    let matched = cell.matches_with_noise(windows[b], SimTime::ZERO, 0.0, noise)?;
                    if constants.cell_current(matched) > threshold {
                        hits[a * n + b] = 1;
                    }
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut flat = vec![0u32; n * n];
    for hits in per_trial {
        for (acc, h) in flat.iter_mut().zip(hits) {
            *acc += h;
        }
    }
    Ok(ConfusionMatrix {
        trials,
        threshold,
        levels: v.to_vec(),
        counts: flat.chunks(n).map(<[_]>::to_vec).collect(),
    })
}

/// A single search condition: stored voltage and query voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentCase {
    pub v_store: f64,
    pub vdl: f64,
}

impl CurrentCase {
    pub const MATCH: CurrentCase = CurrentCase {
        v_store: 0.45,
        vdl: 0.45,
    };
    pub const MISMATCH: CurrentCase = CurrentCase {
        v_store: 0.45,
        vdl: 0.40,
    };
}

/// Per-trial single-cell match-line currents for a match condition and a
/// mismatch condition, evaluated on the same Monte Carlo instances.
pub fn current_distribution(
    spec: &VariationSpec,
    constants: &DeviceConstants,
    match_case: CurrentCase,
    mismatch_case: CurrentCase,
    v_range: f64,
    trials: u32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let run = |case: CurrentCase, read: u64| -> Result<Vec<f64>> {
        let window = search_window(case.vdl, v_range)?;
        (0..trials as u64)
            .map(|t| {
                let cell = spec
                    .offsets(t)
                    .cell()
                    .write(case.v_store, SimTime::ZERO, None)?;
                let noise = spec.read_noise(t, read);
                Ok(constants.cell_current(cell.matches_with_noise(
                    window,
                    SimTime::ZERO,
                    0.0,
                    noise,
                )?))
            })
            .collect()
    };
    Ok((run(match_case, 0)?, run(mismatch_case, 1)?))
}

/// Two-column CSV of sampled currents for CDF plotting.
pub fn write_currents_csv<W: Write>(matched: &[f64], mismatched: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "match_current_A", "mismatch_current_A"])?;
    for (t, (a, b)) in matched.iter().zip(mismatched).enumerate() {
        w.write_record([t.to_string(), format!("{a:e}"), format!("{b:e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_offsets_are_zero() {
        for o in sample_variation(&VariationSpec::ideal(), 100) {
            assert_eq!(
                (o.offset_low, o.offset_high, o.write_offset),
                (0.0, 0.0, 0.0)
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let spec = VariationSpec {
            seed: 9,
            ..VariationSpec::default()
        };
        let a = sample_variation(&spec, 64);
        assert_eq!(a, sample_variation(&spec, 64));
        assert_eq!(&a[..10], &sample_variation(&spec, 10)[..]);
        let other = sample_variation(&VariationSpec { seed: 10, ..spec }, 64);
        assert_ne!(a, other);
    }

    #[test]
    fn sample_std_matches_sigma() {
        let spec = VariationSpec {
            sigma_cmp: 5e-3,
            seed: 3,
            ..VariationSpec::default()
        };
        let xs: Vec<f64> = sample_variation(&spec, 100_000)
            .iter()
            .map(|o| o.offset_low)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd / 5e-3 - 1.0).abs() < 0.02, "sd = {sd}");
    }

    #[test]
    fn ideal_confusion_is_identity() {
        let k = DeviceConstants::default();
        let c = run_confusion(
            &VariationSpec::ideal(),
            &k,
            &LevelSet::default(),
            50,
            350e-9,
        )
        .unwrap();
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(c.counts[a][b], if a == b { 50 } else { 0 });
            }
        }
        assert_eq!(c.effective_bits(), 3);
    }

    #[test]
    fn wide_sigma_confuses_neighbours() {
        let k = DeviceConstants::default();
        let spec = VariationSpec {
            sigma_cmp: 50e-3,
            ..VariationSpec::default()
        };
        let c = run_confusion(&spec, &k, &LevelSet::default(), 50, 350e-9).unwrap();
        assert!(c.off_diagonal_mass() > 0);
        assert!((0..7).any(|a| c.counts[a][a + 1] > 0 || c.counts[a + 1][a] > 0));
    }

    #[test]
    fn calibrated_sigma_is_diagonally_dominant() {
        let k = DeviceConstants::default();
        let c = run_confusion(
            &VariationSpec::default(),
            &k,
            &LevelSet::default(),
            50,
            350e-9,
        )
        .unwrap();
        for (a, row) in c.counts.iter().enumerate() {
            for (b, &x) in row.iter().enumerate() {
                if a != b {
                    assert!(row[a] > x);
                }
            }
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let k = DeviceConstants::default();
        assert!(
            run_confusion(&VariationSpec::ideal(), &k, &LevelSet::default(), 0, 350e-9).is_err()
        );
    }

    #[test]
    fn ideal_currents() {
        let k = DeviceConstants::default();
        let (m, mm) = current_distribution(
            &VariationSpec::ideal(),
            &k,
            CurrentCase::MATCH,
            CurrentCase::MISMATCH,
            0.05,
            50,
        )
        .unwrap();
        assert!(m.iter().all(|&i| i == 1.826e-6));
        assert!(mm.iter().all(|&i| i == 0.5e-12));
        let (m, mm) = current_distribution(
            &VariationSpec::ideal(),
            &k,
            CurrentCase::MATCH,
            CurrentCase::MISMATCH,
            0.05,
            1,
        )
        .unwrap();
        assert_eq!((m.len(), mm.len()), (1, 1));
    }

    #[test]
    fn confusion_csv_shape() {
        let k = DeviceConstants::default();
        let c =
            run_confusion(&VariationSpec::ideal(), &k, &LevelSet::default(), 2, 350e-9).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 65);
    }
}
