//! Flat key/value macro configuration file (TOML syntax).
//!
//! ```toml
//! version = 1
//! rows = 128
//! cols = 128
//! level_first = 0.25
//! level_step = 0.05
//! level_count = 8
//! sigma_cmp = 0.005
//! ```
//!
//! Every key is optional and falls back to the built-in default; unknown
//! keys are rejected.

use serde::{Deserialize, Serialize};

use crate::cell::{DeviceConstants, LevelSet};
use crate::error::{Error, Result};
use crate::macro_array::{min_adc_bits, MacroConfig};
use crate::variation::VariationSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroFile {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adc_bits: Option<u32>,
    pub endurance_checking: bool,

    pub i_match: f64,
    pub i_mismatch: f64,
    pub match_threshold_current: f64,
    pub e_search_match: f64,
    pub e_search_mismatch: f64,
    pub e_write: f64,
    pub t_read: f64,
    pub t_write_row: f64,
    pub retention_droop_rate: f64,
    pub endurance_limit: u64,

    pub level_first: f64,
    pub level_step: f64,
    pub level_count: usize,
    pub v_range_default: f64,

    pub sigma_cmp: f64,
    pub sigma_write: f64,
    pub sigma_read: f64,
    pub seed: u64,
}

impl Default for MacroFile {
    fn default() -> Self {
        let k = DeviceConstants::default();
        let v = VariationSpec::default();
        Self {
            version: Self::VERSION,
            rows: 128,
            cols: 128,
            adc_bits: None,
            endurance_checking: true,
            i_match: k.i_match,
            i_mismatch: k.i_mismatch,
            match_threshold_current: k.match_threshold_current,
            e_search_match: k.e_search_match,
            e_search_mismatch: k.e_search_mismatch,
            e_write: k.e_write,
            t_read: k.t_read,
            t_write_row: k.t_write_row,
            retention_droop_rate: k.retention_droop_rate,
            endurance_limit: k.endurance_limit,
            level_first: 0.25,
            level_step: 0.05,
            level_count: 8,
            v_range_default: 0.05,
            sigma_cmp: v.sigma_cmp,
            sigma_write: v.sigma_write,
            sigma_read: v.sigma_read,
            seed: v.seed,
        }
    }
}

impl MacroFile {
    pub const VERSION: u32 = 1;

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: MacroFile = toml::from_str(text)?;
        if file.version != Self::VERSION {
            return Err(Error::invalid(format!(
                "unsupported config version {}",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn constants(&self) -> DeviceConstants {
        DeviceConstants {
            i_match: self.i_match,
            i_mismatch: self.i_mismatch,
            e_search_match: self.e_search_match,
            e_search_mismatch: self.e_search_mismatch,
            e_write: self.e_write,
            t_read: self.t_read,
            t_write_row: self.t_write_row,
            retention_droop_rate: self.retention_droop_rate,
            endurance_limit: self.endurance_limit,
            match_threshold_current: self.match_threshold_current,
        }
    }

    pub fn levels(&self) -> Result<LevelSet> {
        LevelSet::uniform(
            self.level_first,
            self.level_step,
            self.level_count,
            self.v_range_default,
        )
    }

    pub fn variation(&self) -> VariationSpec {
        VariationSpec {
            sigma_cmp: self.sigma_cmp,
            sigma_write: self.sigma_write,
            sigma_read: self.sigma_read,
            seed: self.seed,
        }
    }

    pub fn macro_config(&self) -> Result<MacroConfig> {
        let cfg = MacroConfig {
            n_rows: self.rows,
            m_cols: self.cols,
            constants: self.constants(),
            levels: self.levels()?,
            adc_bits: self.adc_bits.unwrap_or_else(|| min_adc_bits(self.cols)),
            endurance_checking: self.endurance_checking,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
