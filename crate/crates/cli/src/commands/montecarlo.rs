use acam_core::variation::{current_distribution, run_confusion, write_currents_csv, CurrentCase};
use clap::Args;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::OutDir;
use crate::manifest::Manifest;
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    /// Number of levels.
    #[arg(long, env = "ACAM_LEVELS")]
    levels: Option<usize>,
    /// Comparator offset standard deviation (V).
    #[arg(long, env = "ACAM_SIGMA_CMP")]
    sigma_cmp: Option<f64>,
    /// Write offset standard deviation (V).
    #[arg(long, env = "ACAM_SIGMA_WRITE")]
    sigma_write: Option<f64>,
    /// Cell instances per confusion matrix.
    #[arg(long, env = "ACAM_TRIALS", default_value_t = 50)]
    trials: u32,
    /// Instances for the match/mismatch current distributions.
    #[arg(long, env = "ACAM_CURRENT_TRIALS", default_value_t = 1000)]
    current_trials: u32,
}

#[derive(Serialize)]
struct CurrentStats {
    trials: u32,
    match_mean_a: f64,
    mismatch_mean_a: f64,
    min_ratio: f64,
    min_match_a: f64,
    max_mismatch_a: f64,
}

pub fn run(global: &GlobalArgs, args: MonteCarloArgs) -> CliResult<()> {
    let mut file = global.load_config()?;
    if let Some(n) = args.levels {
        file.level_count = n;
    }
    if let Some(s) = args.sigma_cmp {
        file.sigma_cmp = s;
    }
    if let Some(s) = args.sigma_write {
        file.sigma_write = s;
    }
    if args.trials == 0 || args.current_trials == 0 {
        return Err(CliError::Usage(
            "--trials and --current-trials must be >= 1".into(),
        ));
    }
    let levels = file.levels().map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = file.variation();
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let k = file.constants();

    let cm = run_confusion(&spec, &k, &levels, args.trials, k.match_threshold_current)?;
    let (matched, mismatched) = current_distribution(
        &spec,
        &k,
        CurrentCase::MATCH,
        CurrentCase::MISMATCH,
        levels.v_range_default(),
        args.current_trials,
    )?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let stats = CurrentStats {
        trials: args.current_trials,
        match_mean_a: mean(&matched),
        mismatch_mean_a: mean(&mismatched),
        min_ratio: matched
            .iter()
            .zip(&mismatched)
            .map(|(a, b)| a / b)
            .fold(f64::INFINITY, f64::min),
        min_match_a: matched.iter().copied().fold(f64::INFINITY, f64::min),
        max_mismatch_a: mismatched.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };

    let mut out = OutDir::create(&global.out_dir)?;
    cm.write_csv(out.file("confusion.csv")?)?;
    write_currents_csv(&matched, &mismatched, out.file("currents.csv")?)?;
    let mut summary = toml::Table::new();
    summary.insert("confusion".into(), toml::Value::try_from(cm.summary())?);
    summary.insert("currents".into(), toml::Value::try_from(&stats)?);
    out.write_string("summary.toml", &toml::to_string(&summary)?)?;

    let mut manifest = Manifest::new("montecarlo", global.threads());
    manifest
        .config(&file)
        .seed("variation", file.seed)
        .arg("trials", args.trials as i64)
        .arg("current_trials", args.current_trials as i64)
        .result(
            "distinguishable_levels",
            cm.distinguishable_levels(0.9) as i64,
        )
        .result("off_diagonal_mass", cm.off_diagonal_mass() as i64)
        .result("min_current_ratio", stats.min_ratio);
    let text = manifest.render(out.written())?;
    out.write_string("manifest.toml", &text)?;
    Ok(())
}
