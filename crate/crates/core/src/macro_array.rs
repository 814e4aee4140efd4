//! N x M array of cells sharing NOR match lines.
//!
//! Rows hold words (keys), columns hold dimensions. Writes go one row at a
//! time; a search broadcasts one window per column to every row at once and
//! each row's match line carries `count * i_match + (M - count) * i_mismatch`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{search_window, CellState, DeviceConstants, LevelSet, Window};
use crate::error::{Error, Result};
use crate::metrics::{from_attojoules, EnergyLedger, LedgerEvent};
use crate::rng::CounterRng;
use crate::time::SimTime;
use crate::variation::{sample_variation, VariationSpec};

/// Arrays at least this large evaluate rows in parallel.
const PARALLEL_CELLS: usize = 1 << 14;

/// Smallest ADC width that can represent every count `0..=m`.
pub fn min_adc_bits(m_cols: usize) -> u32 {
    usize::BITS - m_cols.leading_zeros()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroConfig {
    pub n_rows: usize,
    pub m_cols: usize,
    pub constants: DeviceConstants,
    pub levels: LevelSet,
    pub adc_bits: u32,
    pub endurance_checking: bool,
}

impl MacroConfig {
    /// Default devices and levels with the narrowest faithful ADC.
    pub fn new(n_rows: usize, m_cols: usize) -> Self {
        Self {
            n_rows,
            m_cols,
            constants: DeviceConstants::default(),
            levels: LevelSet::default(),
            adc_bits: min_adc_bits(m_cols),
            endurance_checking: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.m_cols == 0 {
            return Err(Error::invalid(
                "macro needs at least one row and one column",
            ));
        }
        let need = min_adc_bits(self.m_cols);
        if self.adc_bits < need || self.adc_bits > 32 {
            return Err(Error::invalid(format!(
                "adc_bits = {} cannot resolve {} columns (need {need}..=32)",
                self.adc_bits, self.m_cols
            )));
        }
        self.constants.validate()?;
        self.levels.validate()
    }

    fn endurance_limit(&self) -> Option<u64> {
        self.endurance_checking
            .then_some(self.constants.endurance_limit)
    }
}

/// Ideal ADC: inverts the match-line current law and saturates at full scale.
pub fn adc_readout(current: f64, m_cols: usize, adc_bits: u32, constants: &DeviceConstants) -> u32 {
    let floor = m_cols as f64 * constants.i_mismatch;
    let step = constants.i_match - constants.i_mismatch;
    let code = ((current - floor) / step).round();
    let full_scale = if adc_bits >= 32 {
        u32::MAX as f64
    } else {
        ((1u64 << adc_bits) - 1) as f64
    };
    code.clamp(0.0, full_scale) as u32
}

/// Match-line current of a row with `count` matching cells out of `m_cols`.
pub fn ml_current(count: u32, m_cols: usize, constants: &DeviceConstants) -> f64 {
    count as f64 * constants.i_match + (m_cols as u32 - count) as f64 * constants.i_mismatch
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub counts: Vec<u32>,
    pub ml_currents: Vec<f64>,
    pub adc_codes: Vec<u32>,
    /// Energy charged for this search (J).
    pub energy: f64,
    /// Latency charged for this search (s).
    pub latency: f64,
}

impl SearchResult {
    pub fn csv_header() -> [&'static str; 5] {
        ["query", "row", "count", "ml_current_A", "adc_code"]
    }

    /// Appends one record per row, tagged with the query index.
    pub fn write_csv_records<W: Write>(&self, query: usize, w: &mut csv::Writer<W>) -> Result<()> {
        for (row, ((count, current), code)) in self
            .counts
            .iter()
            .zip(&self.ml_currents)
            .zip(&self.adc_codes)
            .enumerate()
        {
            w.write_record([
                query.to_string(),
                row.to_string(),
                count.to_string(),
                format!("{current:e}"),
                code.to_string(),
            ])?;
        }
        Ok(())
    }
}

/// Per-read Gaussian noise on the compared voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadNoise {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Macro {
    config: MacroConfig,
    cells: Vec<CellState>,
    clock: SimTime,
    ledger: EnergyLedger,
    read_noise: Option<ReadNoise>,
    searches_issued: u64,
}

impl Macro {
    /// A macro of ideal cells, all storing 0 V.
    pub fn new(config: MacroConfig) -> Result<Self> {
        config.validate()?;
        let ledger = EnergyLedger::new(&config.constants)?;
        let cells = vec![CellState::default(); config.n_rows * config.m_cols];
        Ok(Self {
            config,
            cells,
            clock: SimTime::ZERO,
            ledger,
            read_noise: None,
            searches_issued: 0,
        })
    }

    /// A macro whose cells carry sampled comparator and write offsets.
    /// Cell `(i, j)` uses draw stream `i * M + j`.
    pub fn with_variation(config: MacroConfig, spec: &VariationSpec) -> Result<Self> {
        let mut m = Self::new(config)?;
        spec.validate()?;
        let offsets = sample_variation(spec, m.cells.len());
        for (cell, offsets) in m.cells.iter_mut().zip(offsets) {
            *cell = CellState::with_offsets(
                offsets.offset_low,
                offsets.offset_high,
                offsets.write_offset,
            );
        }
        if spec.sigma_read > 0.0 {
            m.read_noise = Some(ReadNoise {
                sigma: spec.sigma_read,
                seed: spec.seed,
            });
        }
        Ok(m)
    }

    pub fn config(&self) -> &MacroConfig {
        &self.config
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut EnergyLedger {
        &mut self.ledger
    }

    pub fn set_read_noise(&mut self, noise: Option<ReadNoise>) {
        self.read_noise = noise;
    }

    pub fn cell(&self, row: usize, col: usize) -> &CellState {
        &self.cells[row * self.config.m_cols + col]
    }

    pub fn row(&self, row: usize) -> &[CellState] {
        let m = self.config.m_cols;
        &self.cells[row * m..(row + 1) * m]
    }

    pub fn stored_voltages(&self) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.config.m_cols)
            .map(|r| r.iter().map(|c| c.v_store).collect())
            .collect()
    }

    /// Writes one word. All cells in the row see the same write time; the
    /// clock then advances by one row-write latency.
    pub fn write_row(&mut self, row: usize, targets: &[f64]) -> Result<()> {
        let m = self.config.m_cols;
        if row >= self.config.n_rows {
            return Err(Error::invalid(format!(
                "row {row} out of range (N = {})",
                self.config.n_rows
            )));
        }
        if targets.len() != m {
            return Err(Error::invalid(format!(
                "row write needs {m} targets, got {}",
                targets.len()
            )));
        }
        let limit = self.config.endurance_limit();
        let now = self.clock;
        let written = self
            .row(row)
            .iter()
            .zip(targets)
            .map(|(cell, &t)| cell.write(t, now, limit))
            .collect::<Result<Vec<_>>>()?;
        self.cells[row * m..(row + 1) * m].copy_from_slice(&written);
        self.clock += SimTime::from_ps(self.ledger.units().write_row_ps);
        self.ledger
            .record(LedgerEvent::RowWrite { cells: m as u64 });
        Ok(())
    }

    /// Writes rows `0..N` in order.
    pub fn write_matrix<R: AsRef<[f64]>>(&mut self, targets: &[R]) -> Result<()> {
        if targets.len() != self.config.n_rows {
            return Err(Error::invalid(format!(
                "matrix write needs {} rows, got {}",
                self.config.n_rows,
                targets.len()
            )));
        }
        if let Some(bad) = targets
            .iter()
            .find(|r| r.as_ref().len() != self.config.m_cols)
        {
            return Err(Error::invalid(format!(
                "matrix write needs {} columns, got a row of {}",
                self.config.m_cols,
                bad.as_ref().len()
            )));
        }
        for (i, row) in targets.iter().enumerate() {
            self.write_row(i, row.as_ref())?;
        }
        Ok(())
    }

    /// Broadcast search. Every row is compared against the same per-column
    /// windows at the current clock.
    pub fn search(&mut self, vdl: &[f64], v_range: &[f64]) -> Result<SearchResult> {
        let m = self.config.m_cols;
        if vdl.len() != m || v_range.len() != m {
            return Err(Error::invalid(format!(
                "search needs {m} query voltages and ranges, got {} and {}",
                vdl.len(),
                v_range.len()
            )));
        }
        let windows = vdl
            .iter()
            .zip(v_range)
            .map(|(&v, &r)| search_window(v, r))
            .collect::<Result<Vec<_>>>()?;

        let now = self.clock;
        let droop = self.config.constants.retention_droop_rate;
        let noise = self.read_noise.map(|n| (n, self.searches_issued));
        let eval_row = |(i, row): (usize, &[CellState])| -> Result<u32> {
            count_row(row, &windows, now, droop, noise.map(|(n, s)| (n, s, i * m)))
        };
        let counts: Vec<u32> = if self.cells.len() >= PARALLEL_CELLS {
            self.cells
                .par_chunks(m)
                .enumerate()
                .map(eval_row)
                .collect::<Result<_>>()?
        } else {
            self.cells
                .chunks(m)
                .enumerate()
                .map(eval_row)
                .collect::<Result<_>>()?
        };

        let k = &self.config.constants;
        let ml_currents: Vec<f64> = counts.iter().map(|&c| ml_current(c, m, k)).collect();
        let adc_codes = ml_currents
            .iter()
            .map(|&i| adc_readout(i, m, self.config.adc_bits, k))
            .collect();

        let matches: u64 = counts.iter().map(|&c| c as u64).sum();
        let mismatches = (self.cells.len() as u64) - matches;
        let before = self.ledger.total_energy_aj();
        self.ledger.record(LedgerEvent::Search {
            matches,
            mismatches,
        });
        let energy = from_attojoules(self.ledger.total_energy_aj() - before);
        let dt = SimTime::from_ps(self.ledger.units().read_ps);
        self.clock += dt;
        self.searches_issued += 1;

        Ok(SearchResult {
            counts,
            ml_currents,
            adc_codes,
            energy,
            latency: dt.as_secs(),
        })
    }

    pub fn advance_clock(&mut self, dt_secs: f64) -> Result<()> {
        self.clock += SimTime::from_secs(dt_secs)?;
        Ok(())
    }

    pub fn export_state(&self) -> MacroState {
        MacroState {
            version: MacroState::VERSION,
            config: self.config.clone(),
            clock: self.clock,
            read_noise: self.read_noise,
            searches_issued: self.searches_issued,
            cells: self
                .cells
                .chunks(self.config.m_cols)
                .map(<[_]>::to_vec)
                .collect(),
        }
    }

    /// Restores a macro; the ledger starts empty.
    pub fn import_state(state: MacroState) -> Result<Self> {
        if state.version != MacroState::VERSION {
            return Err(Error::invalid(format!(
                "unsupported macro state version {}",
                state.version
            )));
        }
        let mut m = Self::new(state.config)?;
        if state.cells.len() != m.config.n_rows
            || state.cells.iter().any(|r| r.len() != m.config.m_cols)
        {
            return Err(Error::invalid(
                "macro state grid does not match its configuration",
            ));
        }
        m.cells = state.cells.into_iter().flatten().collect();
        m.clock = state.clock;
        m.read_noise = state.read_noise;
        m.searches_issued = state.searches_issued;
        Ok(m)
    }
}

fn count_row(
    row: &[CellState],
    windows: &[Window],
    now: SimTime,
    droop: f64,
    noise: Option<(ReadNoise, u64, usize)>,
) -> Result<u32> {
    let mut rng = noise.map(|(n, search, _)| {
        (
            n.sigma,
            CounterRng::new(n.seed ^ 0x5EAD_0000_0000_0000, search),
        )
    });
    let base = noise.map_or(0, |(_, _, base)| base);
    let mut count = 0;
    for (j, (cell, w)) in row.iter().zip(windows).enumerate() {
        let read_noise = match &mut rng {
            Some((sigma, r)) => *sigma * r.normal_at((base + j) as u64),
            None => 0.0,
        };
        if cell.matches_with_noise(*w, now, droop, read_noise)? {
            count += 1;
        }
    }
    Ok(count)
}

/// Serializable snapshot of a macro.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub version: u32,
    pub config: MacroConfig,
    pub clock: SimTime,
    pub read_noise: Option<ReadNoise>,
    pub searches_issued: u64,
    pub cells: Vec<Vec<CellState>>,
}

impl MacroState {
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn macro_with(rows: &[Vec<f64>]) -> Macro {
        let mut m = Macro::new(MacroConfig::new(rows.len(), rows[0].len())).unwrap();
        m.write_matrix(rows).unwrap();
        m
    }

    #[test]
    fn adc_bit_rule() {
        assert_eq!(min_adc_bits(1), 1);
        assert_eq!(min_adc_bits(3), 2);
        assert_eq!(min_adc_bits(4), 3);
        assert_eq!(min_adc_bits(128), 8);
        let mut cfg = MacroConfig::new(2, 4);
        cfg.adc_bits = 2;
        assert!(cfg.validate().is_err());
        assert!(Macro::new(MacroConfig::new(0, 4)).is_err());
    }

    #[test]
    fn write_row_charges_energy_and_time() {
        let mut m = Macro::new(MacroConfig::new(2, 128)).unwrap();
        m.write_row(0, &[0.4; 128]).unwrap();
        assert_eq!(m.ledger().total_energy_aj(), 128 * 4_800);
        assert!((m.ledger().total_energy() - 614.4e-15).abs() < 1e-24);
        assert_eq!(m.clock().as_ps(), 20_000);
        assert_eq!(m.cell(0, 127).write_count, 1);
        assert_eq!(m.cell(1, 0).write_count, 0);
    }

    #[test]
    fn full_write_latency() {
        let mut m = Macro::new(MacroConfig::new(128, 128)).unwrap();
        m.write_matrix(&vec![vec![0.3; 128]; 128]).unwrap();
        assert_eq!(m.ledger().total_latency_ps(), 2_560_000);
        assert_eq!(m.ledger().total_energy_aj(), 128 * 128 * 4_800);
        assert!((m.ledger().total_energy() - 78.6432e-12).abs() < 1e-20);
    }

    #[test]
    fn write_dimension_errors() {
        let mut m = Macro::new(MacroConfig::new(2, 4)).unwrap();
        assert!(matches!(
            m.write_row(0, &[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(m.write_row(2, &[0.3; 4]).is_err());
        assert!(m.write_matrix(&[vec![0.3; 4]]).is_err());
        assert!(m.write_matrix(&[vec![0.3; 4], vec![0.3; 3]]).is_err());
        // failed writes leave the ledger untouched
        assert_eq!(m.ledger().row_writes, 0);
    }

    #[test]
    fn write_matrix_ideal() {
        let m = macro_with(&[vec![0.25, 0.3], vec![0.45, 0.6]]);
        assert_eq!(m.stored_voltages(), vec![vec![0.25, 0.3], vec![0.45, 0.6]]);
    }

    #[test]
    fn search_examples() {
        let stored = vec![0.25, 0.35, 0.45, 0.55];
        let mut m = macro_with(std::slice::from_ref(&stored));
        let r = m.search(&stored, &[0.05; 4]).unwrap();
        assert_eq!(r.counts, vec![4]);
        assert!((r.ml_currents[0] - 7.304e-6).abs() < 1e-18);
        assert_eq!(r.adc_codes, vec![4]);

        let shifted: Vec<f64> = stored.iter().map(|v| v + 0.05).collect();
        let r = m.search(&shifted, &[0.05; 4]).unwrap();
        assert_eq!(r.counts, vec![0]);
        assert!((r.ml_currents[0] - 2e-12).abs() < 1e-24);
        assert_eq!(r.adc_codes, vec![0]);
    }

    #[test]
    fn search_energy_one_match_in_eight() {
        let mut m = macro_with(&[vec![0.25; 8]]);
        let mut q = vec![0.5; 8];
        q[3] = 0.25;
        let r = m.search(&q, &[0.05; 8]).unwrap();
        assert_eq!(r.counts, vec![1]);
        assert!((r.energy - 26.3e-15).abs() < 1e-27);
        assert!((r.latency - 6e-9).abs() < 1e-21);
    }

    #[test]
    fn search_dimension_errors() {
        let mut m = macro_with(&[vec![0.3; 4]]);
        assert!(m.search(&[0.3; 3], &[0.05; 4]).is_err());
        assert!(m.search(&[0.3; 4], &[0.05; 3]).is_err());
        assert!(m.search(&[0.3; 4], &[0.05, 0.05, -0.01, 0.05]).is_err());
    }

    #[test]
    fn adc_examples() {
        let k = DeviceConstants::default();
        assert_eq!(adc_readout(7.304e-6, 4, 3, &k), 4);
        assert_eq!(adc_readout(2e-12, 4, 3, &k), 0);
        assert_eq!(adc_readout(ml_current(5, 8, &k), 8, 2, &k), 3);
        assert_eq!(adc_readout(0.0, 4, 3, &k), 0);
    }

    #[test]
    fn clock_and_retention() {
        let mut m = macro_with(&[vec![0.45]]);
        let t0 = m.clock();
        m.advance_clock(0.0).unwrap();
        assert_eq!(m.clock(), t0);
        assert!(m.advance_clock(-1.0).is_err());

        m.advance_clock(500.0).unwrap();
        assert_eq!(m.search(&[0.45], &[0.05]).unwrap().counts, vec![1]);
        m.advance_clock(500.0).unwrap();
        assert_eq!(m.search(&[0.45], &[0.05]).unwrap().counts, vec![0]);
    }

    #[test]
    fn state_round_trip() {
        let mut m = macro_with(&[vec![0.3, 0.4], vec![0.5, 0.6]]);
        m.advance_clock(1.5).unwrap();
        let text = m.export_state().to_json().unwrap();
        let back = Macro::import_state(MacroState::from_json(&text).unwrap()).unwrap();
        assert_eq!(back.export_state(), m.export_state());
        assert_eq!(back.clock(), m.clock());
    }

    #[test]
    fn endurance_enforced_through_macro() {
        let mut cfg = MacroConfig::new(1, 1);
        cfg.constants.endurance_limit = 2;
        let mut m = Macro::new(cfg).unwrap();
        m.write_row(0, &[0.3]).unwrap();
        m.write_row(0, &[0.3]).unwrap();
        assert!(matches!(
            m.write_row(0, &[0.3]),
            Err(Error::Endurance { .. })
        ));
    }
}
