//! Energy and latency accounting.
//!
//! The ledger keeps integer tallies per event class and accumulates energy
//! in attojoules and latency in picoseconds, so the closed-form identities
//! `total = sum(count * unit cost)` hold exactly rather than up to rounding.
//! Peripheral circuitry (DACs, ADCs, controller) is not charged.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cell::DeviceConstants;
use crate::error::{Error, Result};
use crate::time::SimTime;

const AJ_PER_J: f64 = 1e18;

/// Per-event unit costs in integer units, derived once from the constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCosts {
    pub write_aj: u64,
    pub search_match_aj: u64,
    pub search_mismatch_aj: u64,
    pub read_ps: u64,
    pub write_row_ps: u64,
}

impl UnitCosts {
    pub fn from_constants(c: &DeviceConstants) -> Result<Self> {
        Ok(Self {
            write_aj: to_attojoules(c.e_write),
            search_match_aj: to_attojoules(c.e_search_match),
            search_mismatch_aj: to_attojoules(c.e_search_mismatch),
            read_ps: SimTime::from_secs(c.t_read)?.as_ps(),
            write_row_ps: SimTime::from_secs(c.t_write_row)?.as_ps(),
        })
    }
}

pub fn to_attojoules(joules: f64) -> u64 {
    (joules * AJ_PER_J).round() as u64
}

pub fn from_attojoules(aj: u128) -> f64 {
    aj as f64 / AJ_PER_J
}

/// One charged operation, as recorded in the optional event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerEvent {
    RowWrite { cells: u64 },
    Search { matches: u64, mismatches: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    units: UnitCosts,
    pub write_events: u64,
    pub match_events: u64,
    pub mismatch_events: u64,
    pub searches: u64,
    pub row_writes: u64,
    energy_aj: u128,
    latency_ps: u128,
    #[serde(skip)]
    log: Option<Vec<LedgerEvent>>,
}

impl EnergyLedger {
    pub fn new(constants: &DeviceConstants) -> Result<Self> {
        Ok(Self::with_units(UnitCosts::from_constants(constants)?))
    }

    pub fn with_units(units: UnitCosts) -> Self {
        Self {
            units,
            write_events: 0,
            match_events: 0,
            mismatch_events: 0,
            searches: 0,
            row_writes: 0,
            energy_aj: 0,
            latency_ps: 0,
            log: None,
        }
    }

    /// Keep every charged event for later replay.
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> &[LedgerEvent] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn units(&self) -> UnitCosts {
        self.units
    }

    pub fn record(&mut self, event: LedgerEvent) {
        match event {
            LedgerEvent::RowWrite { cells } => {
                self.row_writes += 1;
                self.write_events += cells;
                self.energy_aj += cells as u128 * self.units.write_aj as u128;
                self.latency_ps += self.units.write_row_ps as u128;
            }
            LedgerEvent::Search {
                matches,
                mismatches,
            } => {
                self.searches += 1;
                self.match_events += matches;
                self.mismatch_events += mismatches;
                self.energy_aj += matches as u128 * self.units.search_match_aj as u128
                    + mismatches as u128 * self.units.search_mismatch_aj as u128;
                self.latency_ps += self.units.read_ps as u128;
            }
        }
        if let Some(log) = &mut self.log {
            log.push(event);
        }
    }

    pub fn total_energy_aj(&self) -> u128 {
        self.energy_aj
    }

    pub fn total_latency_ps(&self) -> u128 {
        self.latency_ps
    }

    pub fn total_energy(&self) -> f64 {
        from_attojoules(self.energy_aj)
    }

    pub fn total_latency(&self) -> f64 {
        self.latency_ps as f64 * 1e-12
    }

    pub fn search_energy_aj(&self) -> u128 {
        self.match_events as u128 * self.units.search_match_aj as u128
            + self.mismatch_events as u128 * self.units.search_mismatch_aj as u128
    }

    /// Both closed-form identities against the running totals.
    pub fn is_consistent(&self) -> bool {
        let energy =
            self.write_events as u128 * self.units.write_aj as u128 + self.search_energy_aj();
        let latency = self.searches as u128 * self.units.read_ps as u128
            + self.row_writes as u128 * self.units.write_row_ps as u128;
        energy == self.energy_aj && latency == self.latency_ps
    }

    /// Adds another ledger's tallies. Unit costs must agree.
    pub fn absorb(&mut self, other: &EnergyLedger) -> Result<()> {
        if self.units != other.units {
            return Err(Error::invalid(
                "cannot merge ledgers with different unit costs",
            ));
        }
        self.write_events += other.write_events;
        self.match_events += other.match_events;
        self.mismatch_events += other.mismatch_events;
        self.searches += other.searches;
        self.row_writes += other.row_writes;
        self.energy_aj += other.energy_aj;
        self.latency_ps += other.latency_ps;
        if let Some(log) = &mut self.log {
            log.extend_from_slice(other.events());
        }
        Ok(())
    }

    /// Tallies accrued since `earlier`, which must be a prior snapshot of
    /// this ledger.
    pub fn delta_since(&self, earlier: &EnergyLedger) -> EnergyLedger {
        let log = self
            .log
            .as_ref()
            .map(|l| l[earlier.events().len().min(l.len())..].to_vec());
        EnergyLedger {
            units: self.units,
            write_events: self.write_events - earlier.write_events,
            match_events: self.match_events - earlier.match_events,
            mismatch_events: self.mismatch_events - earlier.mismatch_events,
            searches: self.searches - earlier.searches,
            row_writes: self.row_writes - earlier.row_writes,
            energy_aj: self.energy_aj - earlier.energy_aj,
            latency_ps: self.latency_ps - earlier.latency_ps,
            log,
        }
    }

    pub fn report(&self, bits_per_cell: u32) -> LedgerReport {
        let cell_searches = self.match_events + self.mismatch_events;
        let search_energy = from_attojoules(self.search_energy_aj());
        let per_cell = if cell_searches == 0 {
            0.0
        } else {
            search_energy / cell_searches as f64
        };
        let per_bit = if bits_per_cell == 0 {
            0.0
        } else {
            per_cell / bits_per_cell as f64
        };
        let latency = self.total_latency();
        LedgerReport {
            write_events: self.write_events,
            match_events: self.match_events,
            mismatch_events: self.mismatch_events,
            searches: self.searches,
            row_writes: self.row_writes,
            total_energy_j: self.total_energy(),
            total_latency_s: latency,
            search_energy_j: search_energy,
            write_energy_j: from_attojoules(
                self.write_events as u128 * self.units.write_aj as u128,
            ),
            search_latency_s: self.searches as f64 * self.units.read_ps as f64 * 1e-12,
            write_latency_s: self.row_writes as f64 * self.units.write_row_ps as f64 * 1e-12,
            search_energy_per_cell_j: per_cell,
            energy_per_search_per_bit_j: per_bit,
            searches_per_second: if latency > 0.0 {
                self.searches as f64 / latency
            } else {
                0.0
            },
        }
    }
}

/// Flat summary of a ledger, suitable for TOML or CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub write_events: u64,
    pub match_events: u64,
    pub mismatch_events: u64,
    pub searches: u64,
    pub row_writes: u64,
    pub total_energy_j: f64,
    pub total_latency_s: f64,
    pub search_energy_j: f64,
    pub write_energy_j: f64,
    pub search_latency_s: f64,
    pub write_latency_s: f64,
    pub search_energy_per_cell_j: f64,
    pub energy_per_search_per_bit_j: f64,
    pub searches_per_second: f64,
}

impl LedgerReport {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Two-column `metric,value` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "value"])?;
        let value = toml::Value::try_from(self)?;
        if let toml::Value::Table(table) = value {
            for (k, v) in table {
                w.write_record([k, v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean search energy of one cell when each of `n_intervals` levels is
/// equally likely, i.e. a match happens with probability `1/n_intervals`.
pub fn expected_search_energy_per_cell(
    n_intervals: u32,
    constants: &DeviceConstants,
) -> Result<f64> {
    if n_intervals == 0 {
        return Err(Error::invalid("n_intervals must be >= 1"));
    }
    let p = 1.0 / n_intervals as f64;
    Ok(p * constants.e_search_match + (1.0 - p) * constants.e_search_mismatch)
}

pub fn energy_per_bit(avg_energy: f64, bits: u32) -> Result<f64> {
    if bits == 0 {
        return Err(Error::invalid("bits must be >= 1"));
    }
    Ok(avg_energy / bits as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> EnergyLedger {
        EnergyLedger::new(&DeviceConstants::default()).unwrap()
    }

    #[test]
    fn units_are_exact() {
        let u = ledger().units();
        assert_eq!(u.write_aj, 4_800);
        assert_eq!(u.search_match_aj, 8_100);
        assert_eq!(u.search_mismatch_aj, 2_600);
        assert_eq!(u.read_ps, 6_000);
        assert_eq!(u.write_row_ps, 20_000);
    }

    #[test]
    fn expected_energy_examples() {
        let k = DeviceConstants::default();
        assert!((expected_search_energy_per_cell(1, &k).unwrap() - 8.1e-15).abs() < 1e-27);
        assert!((expected_search_energy_per_cell(8, &k).unwrap() - 3.2875e-15).abs() < 1e-27);
        let far = expected_search_energy_per_cell(u32::MAX, &k).unwrap();
        assert!((far - 2.6e-15).abs() < 1e-23);
        assert!(expected_search_energy_per_cell(0, &k).is_err());
    }

    #[test]
    fn per_bit_examples() {
        assert!((energy_per_bit(3.0e-15, 3).unwrap() - 1.0e-15).abs() < 1e-27);
        assert!((energy_per_bit(3.2875e-15, 3).unwrap() - 1.0958333e-15).abs() < 1e-21);
        assert_eq!(energy_per_bit(0.0, 3).unwrap(), 0.0);
        assert!(energy_per_bit(1.0, 0).is_err());
    }

    #[test]
    fn empty_report_is_zero() {
        let r = ledger().report(3);
        assert_eq!(r.total_energy_j, 0.0);
        assert_eq!(r.total_latency_s, 0.0);
        assert_eq!(r.searches_per_second, 0.0);
        assert_eq!(r.energy_per_search_per_bit_j, 0.0);
    }

    #[test]
    fn one_search_report() {
        let mut l = ledger();
        l.record(LedgerEvent::Search {
            matches: 1,
            mismatches: 7,
        });
        assert_eq!(l.total_energy_aj(), 26_300);
        assert_eq!(l.total_latency_ps(), 6_000);
        assert!(l.is_consistent());
        let r = l.report(3);
        assert!((r.total_energy_j - 26.3e-15).abs() < 1e-27);
        assert!((r.total_latency_s - 6e-9).abs() < 1e-21);
    }

    #[test]
    fn delta_and_absorb() {
        let mut l = ledger();
        l.enable_log();
        l.record(LedgerEvent::RowWrite { cells: 4 });
        let snap = l.clone();
        l.record(LedgerEvent::Search {
            matches: 2,
            mismatches: 2,
        });
        let d = l.delta_since(&snap);
        assert_eq!(d.searches, 1);
        assert_eq!(d.row_writes, 0);
        assert_eq!(d.total_energy_aj(), 2 * 8_100 + 2 * 2_600);
        assert_eq!(d.events().len(), 1);

        let mut total = ledger();
        total.absorb(&snap).unwrap();
        total.absorb(&d).unwrap();
        assert_eq!(total.total_energy_aj(), l.total_energy_aj());
        assert!(total.is_consistent());
    }

    #[test]
    fn report_csv_has_all_fields() {
        let mut buf = Vec::new();
        ledger().report(3).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("metric,value\n"));
        assert_eq!(text.lines().count(), 15);
    }
}
