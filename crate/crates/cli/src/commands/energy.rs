use acam_core::metrics::{energy_per_bit, expected_search_energy_per_cell};
use clap::Args;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::OutDir;
use crate::manifest::Manifest;
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// Largest level count in the table.
    #[arg(long, env = "ACAM_LEVELS")]
    levels: Option<usize>,
    /// Columns per search for the workload projection.
    #[arg(long, env = "ACAM_COLS")]
    cols: Option<usize>,
    /// Row writes in the projected workload.
    #[arg(long, env = "ACAM_ROW_WRITES", default_value_t = 0)]
    row_writes: u64,
    /// Searches in the projected workload.
    #[arg(long, env = "ACAM_SEARCHES", default_value_t = 0)]
    searches: u64,
    /// Convert this mean per-cell search energy (J) to energy per bit.
    #[arg(long, env = "ACAM_PER_BIT_INPUT")]
    per_bit_input: Option<f64>,
}

#[derive(Serialize)]
struct Row {
    levels: usize,
    bits: u32,
    match_probability: f64,
    search_energy_per_cell_j: f64,
    energy_per_bit_j: f64,
}

#[derive(Serialize)]
struct Workload {
    levels: usize,
    cols: usize,
    row_writes: u64,
    searches: u64,
    write_energy_j: f64,
    search_energy_j: f64,
    total_energy_j: f64,
    write_latency_s: f64,
    search_latency_s: f64,
    total_latency_s: f64,
}

pub fn run(global: &GlobalArgs, args: EnergyArgs) -> CliResult<()> {
    let mut file = global.load_config()?;
    if let Some(n) = args.levels {
        file.level_count = n;
    }
    if let Some(c) = args.cols {
        file.cols = c;
    }
    if file.level_count < 2 {
        return Err(CliError::Usage("--levels must be >= 2".into()));
    }
    let k = file.constants();
    k.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let rows = (2..=file.level_count)
        .map(|n| -> CliResult<Row> {
            let e = expected_search_energy_per_cell(n as u32, &k)?;
            let bits = n.ilog2();
            Ok(Row {
                levels: n,
                bits,
                match_probability: 1.0 / n as f64,
                search_energy_per_cell_j: e,
                energy_per_bit_j: energy_per_bit(e, bits)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let top = rows.last().expect("at least one level count");

    let cells = file.cols as f64;
    let write_energy = args.row_writes as f64 * cells * k.e_write;
    let search_energy = args.searches as f64 * cells * top.search_energy_per_cell_j;
    let write_latency = args.row_writes as f64 * k.t_write_row;
    let search_latency = args.searches as f64 * k.t_read;
    let workload = Workload {
        levels: file.level_count,
        cols: file.cols,
        row_writes: args.row_writes,
        searches: args.searches,
        write_energy_j: write_energy,
        search_energy_j: search_energy,
        total_energy_j: write_energy + search_energy,
        write_latency_s: write_latency,
        search_latency_s: search_latency,
        total_latency_s: write_latency + search_latency,
    };

    let mut out = OutDir::create(&global.out_dir)?;
    let mut w = csv::Writer::from_writer(out.file("energy.csv")?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);

    let mut summary = toml::Table::new();
    summary.insert("workload".into(), toml::Value::try_from(&workload)?);
    if let Some(e) = args.per_bit_input {
        if !(e >= 0.0) {
            return Err(CliError::Usage("--per-bit-input must be >= 0".into()));
        }
        let mut t = toml::Table::new();
        t.insert("input_energy_j".into(), e.into());
        t.insert("bits".into(), (top.bits as i64).into());
        t.insert(
            "energy_per_bit_j".into(),
            energy_per_bit(e, top.bits)?.into(),
        );
        summary.insert("per_bit".into(), toml::Value::Table(t));
    }
    out.write_string("energy.toml", &toml::to_string(&summary)?)?;

    let mut manifest = Manifest::new("energy", global.threads());
    manifest
        .config(&file)
        .arg("row_writes", args.row_writes as i64)
        .arg("searches", args.searches as i64)
        .result("search_energy_per_cell_j", top.search_energy_per_cell_j)
        .result("energy_per_bit_j", top.energy_per_bit_j)
        .result("total_energy_j", workload.total_energy_j)
        .result("total_latency_s", workload.total_latency_s);
    if let Some(e) = args.per_bit_input {
        manifest.arg("per_bit_input", e);
    }
    let text = manifest.render(out.written())?;
    out.write_string("manifest.toml", &text)?;
    Ok(())
}
