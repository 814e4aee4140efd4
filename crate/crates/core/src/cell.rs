//! A single dynamic aCAM cell.
//!
//! The cell stores one voltage on a capacitor and compares it against a
//! search window `(vdl_l, vdl_h)` applied on its inputs. Both comparisons are
//! strict, so a stored voltage sitting exactly on a window edge mismatches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Supply rail. Only used to clamp writes and stored voltages.
pub const VDD: f64 = 0.9;

/// Spacing tolerance for [`LevelSet`] uniformity checks.
const LEVEL_TOLERANCE: f64 = 1e-6;

/// Per-cell device figures. Energies are per cell per event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConstants {
    /// Mean match-line current of a matching cell (A).
    pub i_match: f64,
    /// Mean match-line current of a mismatching cell (A).
    pub i_mismatch: f64,
    /// Search energy of a matching cell (J).
    pub e_search_match: f64,
    /// Search energy of a mismatching cell (J).
    pub e_search_mismatch: f64,
    /// Write energy per cell (J).
    pub e_write: f64,
    /// Worst-case search latency (s).
    pub t_read: f64,
    /// Worst-case row write latency (s).
    pub t_write_row: f64,
    /// Linear droop of the stored voltage (V/s).
    pub retention_droop_rate: f64,
    /// Write cycles a cell tolerates.
    pub endurance_limit: u64,
    /// ML current above which a single cell is counted as a match (A).
    pub match_threshold_current: f64,
}

impl Default for DeviceConstants {
    fn default() -> Self {
        Self {
            i_match: 1.826e-6,
            i_mismatch: 0.5e-12,
            e_search_match: 8.1e-15,
            e_search_mismatch: 2.6e-15,
            e_write: 4.8e-15,
            t_read: 6e-9,
            t_write_row: 20e-9,
            // half a 50 mV level over 1e3 s of retention
            retention_droop_rate: 25e-6,
            endurance_limit: 100_000_000_000,
            match_threshold_current: 350e-9,
        }
    }
}

impl DeviceConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("i_mismatch", self.i_mismatch),
            ("e_search_match", self.e_search_match),
            ("e_search_mismatch", self.e_search_mismatch),
            ("e_write", self.e_write),
            ("t_read", self.t_read),
            ("t_write_row", self.t_write_row),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.i_match > self.match_threshold_current
            && self.match_threshold_current > self.i_mismatch)
        {
            return Err(Error::invalid(
                "currents must satisfy i_match > match_threshold_current > i_mismatch",
            ));
        }
        if !(self.retention_droop_rate.is_finite() && self.retention_droop_rate >= 0.0) {
            return Err(Error::invalid("retention_droop_rate must be >= 0"));
        }
        Ok(())
    }

    /// Match-line contribution of one cell.
    pub fn cell_current(&self, is_match: bool) -> f64 {
        if is_match {
            self.i_match
        } else {
            self.i_mismatch
        }
    }
}

/// Free-function form of [`DeviceConstants::cell_current`].
pub fn cell_current(is_match: bool, constants: &DeviceConstants) -> f64 {
    constants.cell_current(is_match)
}

/// The discrete voltages a cell can hold, plus the default search width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    voltages: Vec<f64>,
    v_range_default: f64,
}

impl Default for LevelSet {
    /// Eight levels from 0.25 V to 0.60 V in 50 mV steps, 50 mV windows.
    fn default() -> Self {
        Self::uniform(0.25, 0.05, 8, 0.05).expect("default level set is valid")
    }
}

impl LevelSet {
    pub fn new(voltages: Vec<f64>, v_range_default: f64) -> Result<Self> {
        let set = Self {
            voltages,
            v_range_default,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn uniform(first: f64, step: f64, count: usize, v_range_default: f64) -> Result<Self> {
        let voltages = (0..count).map(|k| first + step * k as f64).collect();
        Self::new(voltages, v_range_default)
    }

    pub fn validate(&self) -> Result<()> {
        if self.voltages.is_empty() {
            return Err(Error::invalid("level set is empty"));
        }
        if self.voltages.iter().any(|v| !(0.0..=VDD).contains(v)) {
            return Err(Error::invalid("level voltages must lie within [0, VDD]"));
        }
        if !(self.v_range_default.is_finite() && self.v_range_default >= 0.0) {
            return Err(Error::invalid("v_range_default must be >= 0"));
        }
        if self.voltages.len() == 1 {
            return Ok(());
        }
        let spacing = self.spacing();
        for pair in self.voltages.windows(2) {
            let d = pair[1] - pair[0];
            if d <= 0.0 {
                return Err(Error::invalid("level voltages must be strictly increasing"));
            }
            if (d - spacing).abs() > LEVEL_TOLERANCE {
                return Err(Error::invalid("level voltages must be uniformly spaced"));
            }
        }
        if self.v_range_default > spacing + LEVEL_TOLERANCE {
            return Err(Error::invalid(format!(
                "v_range_default {} exceeds level spacing {spacing}; adjacent windows overlap",
                self.v_range_default
            )));
        }
        Ok(())
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    pub fn len(&self) -> usize {
        self.voltages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltages.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.voltages[0]
    }

    pub fn last(&self) -> f64 {
        self.voltages[self.voltages.len() - 1]
    }

    pub fn v_range_default(&self) -> f64 {
        self.v_range_default
    }

    /// Mean level spacing; zero for a single level.
    pub fn spacing(&self) -> f64 {
        if self.voltages.len() < 2 {
            0.0
        } else {
            (self.last() - self.first()) / (self.voltages.len() - 1) as f64
        }
    }

    pub fn nearest_index(&self, v: f64) -> usize {
        let mut best = 0;
        for (k, level) in self.voltages.iter().enumerate() {
            if (level - v).abs() < (self.voltages[best] - v).abs() {
                best = k;
            }
        }
        best
    }

    /// Snap a voltage to the nearest level. Ties go to the lower level.
    pub fn snap(&self, v: f64) -> f64 {
        self.voltages[self.nearest_index(v)]
    }
}

/// Search window applied to a column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub low: f64,
    pub high: f64,
}

impl Window {
    /// Strict containment, the ideal comparator pair.
    pub fn contains(&self, v: f64) -> bool {
        self.low < v && v < self.high
    }
}

/// Splits a query voltage into the lower and upper search bounds.
pub fn search_window(vdl: f64, v_range: f64) -> Result<Window> {
    if !(v_range >= 0.0) || !vdl.is_finite() || !v_range.is_finite() {
        return Err(Error::invalid(format!(
            "search range must be finite and >= 0, got {v_range}"
        )));
    }
    let half = v_range / 2.0;
    Ok(Window {
        low: vdl - half,
        high: vdl + half,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub v_store: f64,
    /// Input-referred offset of the lower-bound comparator (V).
    pub offset_low: f64,
    /// Input-referred offset of the upper-bound comparator (V).
    pub offset_high: f64,
    /// Error added to every write (V).
    pub write_offset: f64,
    pub write_count: u64,
    pub last_write_time: SimTime,
}

impl CellState {
    pub fn with_offsets(offset_low: f64, offset_high: f64, write_offset: f64) -> Self {
        Self {
            offset_low,
            offset_high,
            write_offset,
            ..Self::default()
        }
    }

    /// Stored voltage after linear droop toward ground.
    pub fn effective_stored_voltage(&self, now: SimTime, droop_rate: f64) -> Result<f64> {
        let elapsed = now
            .checked_sub(self.last_write_time)
            .ok_or(Error::TimeTravel {
                now,
                last_write: self.last_write_time,
            })?;
        let v = self.v_store - droop_rate * elapsed.as_secs();
        Ok(v.max(0.0))
    }

    /// Window comparison with the cell's frozen comparator offsets.
    pub fn matches(&self, window: Window, now: SimTime, droop_rate: f64) -> Result<bool> {
        self.matches_with_noise(window, now, droop_rate, 0.0)
    }

    /// As [`matches`](Self::matches), with an extra per-read voltage error.
    pub fn matches_with_noise(
        &self,
        window: Window,
        now: SimTime,
        droop_rate: f64,
        read_noise: f64,
    ) -> Result<bool> {
        if window.low > window.high {
            return Err(Error::invalid(
                "search window lower bound exceeds upper bound",
            ));
        }
        let v = self.effective_stored_voltage(now, droop_rate)? + read_noise;
        Ok(v > window.low + self.offset_low && v < window.high + self.offset_high)
    }

    /// Charges the capacitor to `target`. There is no verify step; the
    /// frozen write offset lands in the stored value as-is.
    pub fn write(&self, target: f64, now: SimTime, endurance_limit: Option<u64>) -> Result<Self> {
        if !(0.0..=VDD).contains(&target) {
            return Err(Error::invalid(format!(
                "write target {target} V outside [0, {VDD}] V"
            )));
        }
        if let Some(limit) = endurance_limit {
            if self.write_count >= limit {
                return Err(Error::Endurance {
                    writes: self.write_count,
                    limit,
                });
            }
        }
        Ok(Self {
            v_store: (target + self.write_offset).clamp(0.0, VDD),
            write_count: self.write_count + 1,
            last_write_time: now,
            ..*self
        })
    }
}
