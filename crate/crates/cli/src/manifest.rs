//! Run manifest: the effective configuration, seeds, constant provenance
//! and output list of one invocation. Contains nothing time- or
//! host-dependent, so identical runs produce identical manifests.

use acam_core::MacroFile;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliResult;

#[derive(Debug, Clone, Serialize)]
struct Provenance {
    name: &'static str,
    value: f64,
    unit: &'static str,
    source: &'static str,
}

pub struct Manifest {
    command: &'static str,
    threads: Option<usize>,
    seeds: Table,
    arguments: Table,
    results: Table,
    config: Option<MacroFile>,
}

impl Manifest {
    pub fn new(command: &'static str, threads: Option<usize>) -> Self {
        Self {
            command,
            threads,
            seeds: Table::new(),
            arguments: Table::new(),
            results: Table::new(),
            config: None,
        }
    }

    pub fn config(&mut self, file: &MacroFile) -> &mut Self {
        self.config = Some(file.clone());
        self
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.into(), Value::Integer(value as i64));
        self
    }

    pub fn arg(&mut self, name: &str, value: impl Into<Value>) -> &mut Self {
        self.arguments.insert(name.into(), value.into());
        self
    }

    pub fn result(&mut self, name: &str, value: impl Into<Value>) -> &mut Self {
        self.results.insert(name.into(), value.into());
        self
    }

    /// Inserts a serializable value (struct or table) under `results.name`.
    pub fn result_table<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<&mut Self> {
        self.results.insert(name.into(), Value::try_from(value)?);
        Ok(self)
    }

    pub fn render(&self, outputs: &[String]) -> CliResult<String> {
        let mut root = Table::new();
        root.insert("tool".into(), "acam".into());
        root.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        root.insert("command".into(), self.command.into());
        root.insert(
            "threads".into(),
            match self.threads {
                Some(n) => Value::Integer(n as i64),
                None => "auto".into(),
            },
        );
        let mut files: Vec<String> = outputs.to_vec();
        files.push("manifest.toml".into());
        root.insert(
            "outputs".into(),
            Value::Array(files.into_iter().map(Value::String).collect()),
        );
        root.insert("seeds".into(), Value::Table(self.seeds.clone()));
        root.insert("arguments".into(), Value::Table(self.arguments.clone()));
        if let Some(cfg) = &self.config {
            root.insert("config".into(), Value::try_from(cfg)?);
            root.insert("constants".into(), Value::try_from(provenance(cfg))?);
        }
        root.insert("results".into(), Value::Table(self.results.clone()));
        Ok(toml::to_string(&root)?)
    }
}

fn provenance(cfg: &MacroFile) -> Vec<Provenance> {
    const REPORTED: &str = "reported device characterization";
    vec![
        Provenance {
            name: "i_match",
            value: cfg.i_match,
            unit: "A",
            source: "reported mean cell current, match state",
        },
        Provenance {
            name: "i_mismatch",
            value: cfg.i_mismatch,
            unit: "A",
            source: "reported mean cell current, mismatch state",
        },
        Provenance {
            name: "match_threshold_current",
            value: cfg.match_threshold_current,
            unit: "A",
            source: "sense threshold between the two current states",
        },
        Provenance {
            name: "e_search_match",
            value: cfg.e_search_match,
            unit: "J",
            source: REPORTED,
        },
        Provenance {
            name: "e_search_mismatch",
            value: cfg.e_search_mismatch,
            unit: "J",
            source: REPORTED,
        },
        Provenance {
            name: "e_write",
            value: cfg.e_write,
            unit: "J",
            source: REPORTED,
        },
        Provenance {
            name: "t_read",
            value: cfg.t_read,
            unit: "s",
            source: "reported search time",
        },
        Provenance {
            name: "t_write_row",
            value: cfg.t_write_row,
            unit: "s",
            source: "reported row write time",
        },
        Provenance {
            name: "retention_droop_rate",
            value: cfg.retention_droop_rate,
            unit: "V/s",
            source: "half a level spacing lost over the reported retention time",
        },
        Provenance {
            name: "endurance_limit",
            value: cfg.endurance_limit as f64,
            unit: "writes",
            source: REPORTED,
        },
        Provenance {
            name: "level_step",
            value: cfg.level_step,
            unit: "V",
            source: "dynamic range divided into the reported number of distinguishable levels",
        },
        Provenance {
            name: "v_range_default",
            value: cfg.v_range_default,
            unit: "V",
            source: "one level spacing",
        },
        Provenance {
            name: "sigma_cmp",
            value: cfg.sigma_cmp,
            unit: "V",
            source: "calibrated so every level stays distinguishable",
        },
        Provenance {
            name: "sigma_write",
            value: cfg.sigma_write,
            unit: "V",
            source: "local modelling choice",
        },
        Provenance {
            name: "sigma_read",
            value: cfg.sigma_read,
            unit: "V",
            source: "local modelling choice",
        },
    ]
}
