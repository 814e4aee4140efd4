use std::path::PathBuf;

use acam_core::harness::{
    constant_mean_mae, evaluate, train, Dataset, EvalMode, EvalReport, Model, ModelCheckpoint,
    ModelSpec, Similarity, SyntheticTaskSpec,
};
use acam_core::{HardwareModel, MacroFile, Normalization};
use clap::{Args, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::io::OutDir;
use crate::manifest::Manifest;
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arm {
    Acam,
    Sdp,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormKind {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Soft,
    Hard,
    HardQuantized,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Which similarity to train.
    #[arg(long, env = "ACAM_MODE", value_enum, default_value_t = Arm::Both)]
    mode: Arm,
    /// Training epochs [default: 50]
    #[arg(long, env = "ACAM_EPOCHS")]
    epochs: Option<usize>,
    /// SGD learning rate [default: 0.005]
    #[arg(long, env = "ACAM_LEARNING_RATE")]
    learning_rate: Option<f64>,
    /// Count normalization for the aCAM arm.
    #[arg(long, env = "ACAM_NORMALIZATION", value_enum, default_value_t = NormKind::Exponential)]
    normalization: NormKind,
    /// Exponent scale for exponential normalization.
    #[arg(long, env = "ACAM_BETA", default_value_t = 2.0)]
    beta: f64,
    /// Seed of the synthetic task.
    #[arg(long, env = "ACAM_TASK_SEED")]
    task_seed: Option<u64>,
    /// Time steps per sequence [default: 32]
    #[arg(long, env = "ACAM_SEQ_LEN")]
    seq_len: Option<usize>,
    /// Training sequences [default: 128]
    #[arg(long, env = "ACAM_N_TRAIN")]
    n_train: Option<usize>,
    /// Validation sequences [default: 32]
    #[arg(long, env = "ACAM_N_VAL")]
    n_val: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `acam train`.
    #[arg(long, env = "ACAM_CHECKPOINT")]
    checkpoint: PathBuf,
    /// Evaluation mode; hardware modes need an aCAM checkpoint.
    #[arg(long, env = "ACAM_MODE", value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,
    /// Sample device variation from the configuration in hardware modes.
    #[arg(long, env = "ACAM_VARIATION")]
    variation: bool,
}

fn arm_name(s: Similarity) -> &'static str {
    match s {
        Similarity::AcamSoft => "acam",
        Similarity::Sdp => "sdp",
    }
}

fn mode_name(m: EvalMode) -> &'static str {
    match m {
        EvalMode::Soft => "soft",
        EvalMode::Hard => "hard",
        EvalMode::HardQuantized => "hard_quantized",
    }
}

/// Device model for hardware evaluation: configured constants, the
/// model's own level set, optional variation.
fn hardware(file: &MacroFile, model: &Model, variation: bool) -> HardwareModel {
    let levels = model
        .acam_head()
        .map(|h| h.levels.clone())
        .unwrap_or_default();
    HardwareModel {
        constants: file.constants(),
        levels,
        variation: variation.then(|| file.variation()),
    }
}

fn eval_modes(similarity: Similarity, requested: ModeArg) -> CliResult<Vec<EvalMode>> {
    let all = match similarity {
        Similarity::AcamSoft => vec![EvalMode::Soft, EvalMode::Hard, EvalMode::HardQuantized],
        Similarity::Sdp => vec![EvalMode::Soft],
    };
    Ok(match requested {
        ModeArg::All => all,
        ModeArg::Soft => vec![EvalMode::Soft],
        ModeArg::Hard | ModeArg::HardQuantized if similarity == Similarity::Sdp => {
            return Err(CliError::Usage(
                "hardware modes need an aCAM checkpoint".into(),
            ))
        }
        ModeArg::Hard => vec![EvalMode::Hard],
        ModeArg::HardQuantized => vec![EvalMode::HardQuantized],
    })
}

/// Adds the ledger of every hardware-mode report to `hw_table`.
fn collect_ledgers(arm: &str, reports: &[EvalReport], hw_table: &mut toml::Table) -> CliResult<()> {
    for r in reports {
        if let Some(ledger) = &r.ledger {
            hw_table.insert(
                format!("{arm}_{}", mode_name(r.mode)),
                toml::Value::try_from(ledger)?,
            );
        }
    }
    Ok(())
}

pub fn run_train(global: &GlobalArgs, args: TrainArgs) -> CliResult<()> {
    let file = global.load_config()?;
    let mut task = SyntheticTaskSpec::default();
    if let Some(s) = args.task_seed {
        task.seed = s;
    }
    if let Some(n) = args.seq_len {
        task.seq_len = n;
    }
    if let Some(n) = args.n_train {
        task.n_train = n;
    }
    if let Some(n) = args.n_val {
        task.n_val = n;
    }
    task.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut base = ModelSpec::default();
    if let Some(seed) = global.seed {
        base.seed = seed;
    }
    if let Some(e) = args.epochs {
        base.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        base.learning_rate = lr;
    }
    base.normalization = match args.normalization {
        NormKind::Linear => Normalization::Linear,
        NormKind::Exponential => Normalization::Exponential { beta: args.beta },
    };
    base.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Normalization::Exponential { beta } = base.normalization {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(CliError::Usage("--beta must be finite and > 0".into()));
        }
    }

    let data = Dataset::generate(&task)?;
    let arms = match args.mode {
        Arm::Acam => vec![Similarity::AcamSoft],
        Arm::Sdp => vec![Similarity::Sdp],
        Arm::Both => vec![Similarity::AcamSoft, Similarity::Sdp],
    };

    let mut out = OutDir::create(&global.out_dir)?;
    let mut manifest = Manifest::new("train", global.threads());
    let mut mae = csv::Writer::from_writer(out.file("mae.csv")?);
    mae.write_record(["arm", "mode", "epoch0_val_mae", "val_mae"])?;
    let floor = constant_mean_mae(&data);
    mae.write_record([
        "constant_mean",
        "none",
        &floor.to_string(),
        &floor.to_string(),
    ])?;
    let mut hw_table = toml::Table::new();
    let mut soft_mae = Vec::new();

    for sim in arms {
        let name = arm_name(sim);
        let spec = ModelSpec {
            similarity: sim,
            ..base.clone()
        };
        let outcome = train(&spec, &data)?;
        outcome.write_curve_csv(out.file(&format!("curve_{name}.csv"))?)?;
        let ck = ModelCheckpoint {
            version: ModelCheckpoint::VERSION,
            task: task.clone(),
            spec: spec.clone(),
            model: outcome.model,
        };
        out.write_string(&format!("checkpoint_{name}.json"), &ck.to_json()?)?;

        let hw = hardware(&file, &ck.model, false);
        let e0 = outcome.curve[0].val_mae;
        let mut reports = Vec::new();
        for mode in eval_modes(sim, ModeArg::All)? {
            let r = evaluate(&ck.model, &data, mode, &hw)?;
            mae.write_record([name, mode_name(mode), &e0.to_string(), &r.mae.to_string()])?;
            manifest.result(&format!("{name}_{}_val_mae", mode_name(mode)), r.mae);
            if mode == EvalMode::Soft {
                soft_mae.push((name, r.mae));
            }
            reports.push(r);
        }
        collect_ledgers(name, &reports, &mut hw_table)?;
        manifest.result(&format!("{name}_epoch0_val_mae"), e0);
    }
    mae.flush()?;
    drop(mae);
    if !hw_table.is_empty() {
        out.write_string("hardware.toml", &toml::to_string(&hw_table)?)?;
    }
    if let [(_, a), (_, s)] = soft_mae[..] {
        manifest.result("sdp_over_acam_val_mae", s / a);
    }

    manifest
        .config(&file)
        .seed("model", base.seed)
        .seed("task", task.seed)
        .result("constant_mean_val_mae", floor);
    manifest.result_table("model_spec", &base)?;
    manifest.result_table("task", &task)?;
    let text = manifest.render(out.written())?;
    out.write_string("manifest.toml", &text)?;
    Ok(())
}

pub fn run_eval(global: &GlobalArgs, args: EvalArgs) -> CliResult<()> {
    let file = global.load_config()?;
    let text = std::fs::read_to_string(&args.checkpoint)
        .map_err(|e| CliError::in_file(&args.checkpoint, e))?;
    let ck =
        ModelCheckpoint::from_json(&text).map_err(|e| CliError::in_file(&args.checkpoint, e))?;
    let sim = ck.model.similarity();
    let modes = eval_modes(sim, args.mode)?;
    let data = Dataset::generate(&ck.task)?;
    let hw = hardware(&file, &ck.model, args.variation);

    let mut out = OutDir::create(&global.out_dir)?;
    let mut manifest = Manifest::new("eval", global.threads());
    let mut w = csv::Writer::from_writer(out.file("eval.csv")?);
    w.write_record(["arm", "mode", "val_mae"])?;
    let mut reports = Vec::new();
    for mode in modes {
        let r = evaluate(&ck.model, &data, mode, &hw)?;
        w.write_record([arm_name(sim), mode_name(mode), &r.mae.to_string()])?;
        manifest.result(&format!("{}_val_mae", mode_name(mode)), r.mae);
        reports.push(r);
    }
    w.flush()?;
    drop(w);
    let mut hw_table = toml::Table::new();
    collect_ledgers(arm_name(sim), &reports, &mut hw_table)?;
    if !hw_table.is_empty() {
        out.write_string("hardware.toml", &toml::to_string(&hw_table)?)?;
    }

    manifest
        .config(&file)
        .seed("model", ck.spec.seed)
        .seed("task", ck.task.seed)
        .seed("variation", file.seed)
        .arg("checkpoint", args.checkpoint.display().to_string())
        .arg("variation", args.variation);
    let text = manifest.render(out.written())?;
    out.write_string("manifest.toml", &text)?;
    Ok(())
}
