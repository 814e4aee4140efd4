use std::path::PathBuf;

use acam_core::macro_array::MacroState;
use acam_core::{Macro, SearchResult};
use clap::Args;

use crate::error::{CliError, CliResult};
use crate::io::{read_matrix, OutDir};
use crate::manifest::Manifest;
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Key matrix CSV, one macro row per line (V).
    #[arg(
        long,
        env = "ACAM_KEYS",
        required_unless_present = "state",
        conflicts_with = "state"
    )]
    keys: Option<PathBuf>,
    /// Saved macro state (JSON) to search instead of writing keys.
    #[arg(long, env = "ACAM_STATE")]
    state: Option<PathBuf>,
    /// Query CSV, one search vector per line (V).
    #[arg(long, env = "ACAM_QUERIES")]
    queries: PathBuf,
    /// Expected row count; checked against the key file.
    #[arg(long, env = "ACAM_ROWS")]
    rows: Option<usize>,
    /// Expected column count; checked against the key file.
    #[arg(long, env = "ACAM_COLS")]
    cols: Option<usize>,
    /// Window width for every column (V); defaults to the configured width.
    #[arg(long, env = "ACAM_V_RANGE")]
    v_range: Option<f64>,
    /// Comparator offset standard deviation (V).
    #[arg(long, env = "ACAM_SIGMA_CMP")]
    sigma_cmp: Option<f64>,
    /// Ideal cells: zero every variation sigma.
    #[arg(long, env = "ACAM_IDEAL")]
    ideal: bool,
    /// Seconds of retention between writing the keys and the first search.
    #[arg(long, env = "ACAM_HOLD", default_value_t = 0.0)]
    hold: f64,
    /// Also write the macro state after searching to `state.json`.
    #[arg(long, env = "ACAM_SAVE_STATE")]
    save_state: bool,
}

pub fn run(global: &GlobalArgs, args: SearchArgs) -> CliResult<()> {
    let mut file = global.load_config()?;
    if let Some(s) = args.sigma_cmp {
        file.sigma_cmp = s;
    }
    if args.ideal {
        file.sigma_cmp = 0.0;
        file.sigma_write = 0.0;
        file.sigma_read = 0.0;
    }
    let mut manifest = Manifest::new("search", global.threads());
    manifest.seed("variation", file.seed);

    let mut mac = match (&args.keys, &args.state) {
        (Some(path), _) => {
            let keys = read_matrix(path)?;
            if keys.is_empty() {
                return Err(CliError::in_file(path, "key file has no rows"));
            }
            let (n, m) = (keys.len(), keys[0].len());
            for (flag, want, got) in [("--rows", args.rows, n), ("--cols", args.cols, m)] {
                if let Some(want) = want {
                    if want != got {
                        return Err(CliError::in_file(
                            path,
                            format!("{flag} {want} but the key file has {got}"),
                        ));
                    }
                }
            }
            file.rows = n;
            file.cols = m;
            let cfg = file
                .macro_config()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let mut mac = Macro::with_variation(cfg, &file.variation())?;
            mac.write_matrix(&keys)
                .map_err(|e| CliError::in_file(path, e))?;
            manifest.arg("keys", path.display().to_string());
            mac
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::in_file(path, e))?;
            let state = MacroState::from_json(&text).map_err(|e| CliError::in_file(path, e))?;
            let mac = Macro::import_state(state).map_err(|e| CliError::in_file(path, e))?;
            file.rows = mac.config().n_rows;
            file.cols = mac.config().m_cols;
            manifest.arg("state", path.display().to_string());
            mac
        }
        (None, None) => unreachable!("clap requires --keys or --state"),
    };
    if args.hold != 0.0 {
        mac.advance_clock(args.hold)
            .map_err(|e| CliError::Usage(format!("--hold: {e}")))?;
    }

    let m = mac.config().m_cols;
    let queries = read_matrix(&args.queries)?;
    if let Some(q) = queries.first() {
        if q.len() != m {
            return Err(CliError::in_file(
                &args.queries,
                format!("queries have {} columns, macro has {m}", q.len()),
            ));
        }
    }
    let width = args
        .v_range
        .unwrap_or(mac.config().levels.v_range_default());
    if !(width > 0.0) {
        return Err(CliError::Usage(format!(
            "--v-range must be > 0, got {width}"
        )));
    }
    let widths = vec![width; m];

    let before = mac.ledger().clone();
    let mut out = OutDir::create(&global.out_dir)?;
    let mut w = csv::Writer::from_writer(out.file("search.csv")?);
    w.write_record(SearchResult::csv_header())?;
    for (qi, q) in queries.iter().enumerate() {
        let res = mac.search(q, &widths)?;
        res.write_csv_records(qi, &mut w)?;
    }
    w.flush()?;
    drop(w);

    let bits = mac.config().levels.len().ilog2();
    let total = mac.ledger().report(bits);
    let search = mac.ledger().delta_since(&before).report(bits);
    let mut ledger = toml::Table::new();
    ledger.insert("total".into(), toml::Value::try_from(&total)?);
    ledger.insert("search".into(), toml::Value::try_from(&search)?);
    out.write_string("ledger.toml", &toml::to_string(&ledger)?)?;
    if args.save_state {
        out.write_string("state.json", &mac.export_state().to_json()?)?;
    }

    manifest
        .config(&file)
        .arg("queries", args.queries.display().to_string())
        .arg("v_range", width)
        .arg("hold_s", args.hold)
        .arg("ideal", args.ideal)
        .result("rows", file.rows as i64)
        .result("cols", file.cols as i64)
        .result("n_queries", queries.len() as i64)
        .result("search_latency_s", search.total_latency_s)
        .result("search_energy_j", search.total_energy_j)
        .result("total_energy_j", total.total_energy_j)
        .result("total_latency_s", total.total_latency_s);
    let text = manifest.render(out.written())?;
    out.write_string("manifest.toml", &text)?;
    Ok(())
}
