use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randumb::bench::{append_json_lines, csv_table, run_ablation, run_benchmark, sweep_embedding, RunConfig, RunResult};
use randumb::data_io::load_dataset;
use randumb::{oracle, Error, Result};
use serde_json::Value;

const DATA_DIR_ENV: &str = "RANDUMB_DATA_DIR";

#[derive(Parser)]
#[command(name = "randumb", version, about = "One-pass class-incremental runs with random Fourier features")]
struct Cli {
    /// JSON file with any subset of the run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream the training set once and evaluate the chosen variant.
    Run(RunArgs),
    /// Repeat a run across embedding sizes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated even embedding sizes in ascending order.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
    },
    /// Run every classifier variant over the same stream.
    Ablate(RunArgs),
    /// Check the implementation against brute-force references.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append reports as JSON lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// mnist, cifar10, cifar100, tinyimagenet, miniimagenet or features:NAME
    #[arg(long)]
    dataset: Option<String>,
    /// Defaults to $RANDUMB_DATA_DIR, then ./data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// randumb, kernel_ncm, slda, ncm or rp_relu
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Add a horizontally flipped copy after every training image.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    augment: Option<bool>,
    #[arg(long)]
    classes_per_task: Option<usize>,
    /// Comma-separated permutation of the class ids.
    #[arg(long, value_delimiter = ',')]
    class_order: Option<Vec<u32>>,
    /// pooled_within_class or global
    #[arg(long)]
    estimator_mode: Option<String>,
    /// samples_minus_one or samples_minus_classes
    #[arg(long)]
    normalizer: Option<String>,
    /// unit_l2 or none
    #[arg(long)]
    input_norm: Option<String>,
    #[arg(long)]
    eval_every_k: Option<usize>,
    #[arg(long)]
    memory_cap_bytes: Option<u64>,
    /// Append results as JSON lines here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a CSV table of the results.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn config_error(msg: impl std::fmt::Display) -> Error {
    Error::Config(msg.to_string())
}

fn parse_enum<T: serde::de::DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(Value::String(value.into())).map_err(|_| config_error(format!("invalid --{flag} '{value}'")))
}

fn read_config_file(path: &Path) -> Result<serde_json::Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(config_error(format!("{} must hold a JSON object", path.display()))),
        Err(e) => Err(config_error(format!("{}: {e}", path.display()))),
    }
}

/// Layers flags over the config file over the environment over defaults.
fn build_config(file: Option<&Path>, args: &RunArgs, env_data_dir: Option<PathBuf>) -> Result<RunConfig> {
    let map = file.map(read_config_file).transpose()?.unwrap_or_default();
    let file_sets_data_dir = map.contains_key("data_dir");
    let mut cfg: RunConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| config_error(format!("config file: {e}")))?;
    if !file_sets_data_dir {
        if let Some(dir) = env_data_dir {
            cfg.data_dir = dir;
        }
    }
    if let Some(d) = &args.dataset {
        cfg.dataset = d.parse()?;
    }
    if let Some(d) = &args.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(v) = &args.variant {
        cfg.variant = v.parse()?;
    }
    if let Some(m) = &args.estimator_mode {
        cfg.estimator_mode = parse_enum("estimator-mode", m)?;
    }
    if let Some(n) = &args.normalizer {
        cfg.normalizer = parse_enum("normalizer", n)?;
    }
    if let Some(n) = &args.input_norm {
        cfg.input_norm = parse_enum("input-norm", n)?;
    }
    cfg.embed_dim = args.embed_dim.unwrap_or(cfg.embed_dim);
    cfg.gamma = args.gamma.unwrap_or(cfg.gamma);
    cfg.lambda = args.lambda.or(cfg.lambda);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.augment = args.augment.or(cfg.augment);
    cfg.classes_per_task = args.classes_per_task.unwrap_or(cfg.classes_per_task);
    cfg.class_order = args.class_order.clone().or(cfg.class_order);
    cfg.eval_every_k = args.eval_every_k.or(cfg.eval_every_k);
    cfg.memory_cap_bytes = args.memory_cap_bytes.unwrap_or(cfg.memory_cap_bytes);
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return Err(config_error(format!("gamma must be positive, got {}", cfg.gamma)));
    }
    Ok(cfg)
}

fn emit_json_lines<T: serde::Serialize>(out: Option<&Path>, items: &[T], append: impl Fn(&Path) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => append(path),
        None => {
            let mut stdout = std::io::stdout().lock();
            for item in items {
                let line = serde_json::to_string(item).map_err(|e| Error::Data(e.to_string()))?;
                writeln!(stdout, "{line}").map_err(|e| Error::Data(e.to_string()))?;
            }
            Ok(())
        }
    }
}

fn report(results: &[RunResult], args: &RunArgs) -> Result<()> {
    for r in results {
        eprintln!(
            "{:<10} {:<11} E={:<6} acc={:.4} ({:.1}s)",
            r.config.dataset.name(),
            r.config.variant,
            r.feature_dim,
            r.average_accuracy,
            r.wall_time_seconds
        );
    }
    emit_json_lines(args.out.as_deref(), results, |p| append_json_lines(p, results))?;
    if let Some(path) = &args.csv {
        std::fs::write(path, csv_table(results)).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    let env_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Run(args) => {
            let cfg = build_config(file, args, env_dir)?;
            let data = load_dataset(&cfg.dataset, &cfg.data_dir)?;
            report(&[run_benchmark(&cfg, &data)?], args)?;
        }
        Command::Sweep { run, dims } => {
            let cfg = build_config(file, run, env_dir)?;
            let data = load_dataset(&cfg.dataset, &cfg.data_dir)?;
            report(&sweep_embedding(dims, &cfg, &data)?, run)?;
        }
        Command::Ablate(args) => {
            let cfg = build_config(file, args, env_dir)?;
            let data = load_dataset(&cfg.dataset, &cfg.data_dir)?;
            report(&run_ablation(&cfg, &data)?, args)?;
        }
        Command::Verify { seed, out } => {
            let reports = oracle::run_suite(*seed);
            for r in &reports {
                eprintln!("{r}");
            }
            emit_json_lines(out.as_deref(), &reports, |p| {
                let mut f = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
                for r in &reports {
                    writeln!(f, "{}", serde_json::to_string(r).expect("plain struct"))
                        .map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
                }
                Ok(())
            })?;
            return Ok(reports.iter().all(|r| r.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use randumb::Variant;

    #[test]
    fn flags_override_file_and_env_is_lowest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"embed_dim": 4000, "variant": "slda", "seed": 9}"#).unwrap();
        let args = RunArgs {
            embed_dim: Some(2000),
            ..RunArgs::default()
        };
        let cfg = build_config(Some(&path), &args, Some("/env/dir".into())).unwrap();
        assert_eq!(cfg.embed_dim, 2000);
        assert_eq!(cfg.variant, Variant::Slda);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.data_dir, PathBuf::from("/env/dir"));

        std::fs::write(&path, r#"{"data_dir": "/file/dir"}"#).unwrap();
        let cfg = build_config(Some(&path), &RunArgs::default(), Some("/env/dir".into())).unwrap();
        assert_eq!(cfg.data_dir, PathBuf::from("/file/dir"));
    }

    #[test]
    fn bad_settings_are_config_errors() {
        let args = RunArgs {
            estimator_mode: Some("diagonal".into()),
            ..RunArgs::default()
        };
        assert_eq!(build_config(None, &args, None).unwrap_err().exit_code(), 2);
        let args = RunArgs {
            gamma: Some(0.0),
            ..RunArgs::default()
        };
        assert_eq!(build_config(None, &args, None).unwrap_err().exit_code(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, "[1, 2]").unwrap();
        assert_eq!(build_config(Some(&path), &RunArgs::default(), None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn enum_flags_use_config_spellings() {
        let args = RunArgs {
            estimator_mode: Some("global".into()),
            normalizer: Some("samples_minus_classes".into()),
            dataset: Some("features:vit".into()),
            ..RunArgs::default()
        };
        let cfg = build_config(None, &args, None).unwrap();
        assert_eq!(cfg.estimator_mode, randumb::EstimatorMode::Global);
        assert_eq!(cfg.normalizer, randumb::Normalizer::SamplesMinusClasses);
        assert_eq!(cfg.dataset.name(), "features:vit");
    }

    #[test]
    fn cli_parses_subcommands() {
        let cli = Cli::try_parse_from(["randumb", "sweep", "--dims", "1000,2000", "--augment"]).unwrap();
        match cli.command {
            Command::Sweep { dims, run } => {
                assert_eq!(dims, vec![1000, 2000]);
                assert_eq!(run.augment, Some(true));
            }
            _ => panic!("expected sweep"),
        }
        let cli = Cli::try_parse_from(["randumb", "run", "--augment", "false"]).unwrap();
        assert!(matches!(cli.command, Command::Run(RunArgs { augment: Some(false), .. })));
    }
}
