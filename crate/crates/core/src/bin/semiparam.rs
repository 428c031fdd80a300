use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semiparam_dyn::harness::{self, dataset, ExperimentConfig, SigmaSetting, Which};
use semiparam_dyn::{Error, Result};

#[derive(Parser)]
#[command(name = "semiparam", version, about = "Incremental semiparametric inverse dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate datasets A and B for a seed.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Only write one dataset (`a` or `b`).
        #[arg(long)]
        which: Option<String>,
    },
    /// Run the sequential test-then-update protocol and summarize.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate the per-fold results in a run directory.
    Summarize {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the configured seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of p, np, sp.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long)]
    features: Option<usize>,
    /// A positive bandwidth or `median`.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long = "lambda-p")]
    lambda_p: Option<f64>,
    #[arg(long = "lambda-np")]
    lambda_np: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(e) = &self.estimators {
            cfg.estimators = e.clone();
        }
        if let Some(d) = self.features {
            cfg.features = d;
        }
        if let Some(s) = &self.sigma {
            cfg.sigma = SigmaSetting::parse(s)?;
        }
        if self.lambda_p.is_some() {
            cfg.lambda_p = self.lambda_p;
        }
        if self.lambda_np.is_some() {
            cfg.lambda_np = self.lambda_np;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(summary: &harness::Summary) {
    println!("estimator  regime_rmse  std(pooled)  std(seeds)  std(folds)");
    for e in &summary.estimators {
        println!(
            "{:<9}  {:>11.5}  {:>11.5}  {:>10.5}  {:>10.5}",
            e.kind.label(),
            e.regime_mean,
            e.regime_std,
            e.regime_std_seeds,
            e.regime_std_folds
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common, which } => {
            let cfg = common.config()?;
            let which: Vec<Which> = match which.as_deref().map(str::to_ascii_lowercase).as_deref() {
                None => vec![Which::A, Which::B],
                Some("a") => vec![Which::A],
                Some("b") => vec![Which::B],
                Some(other) => return Err(Error::Config(format!("--which must be a or b, got `{other}`"))),
            };
            std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
                path: common.out.clone(),
                source: e,
            })?;
            for &seed in &cfg.seeds {
                for &w in &which {
                    let data = dataset::generate_dataset(&cfg, w, seed)?;
                    let name = if cfg.seeds.len() == 1 {
                        w.file_name().to_string()
                    } else {
                        format!("seed_{seed}_{}", w.file_name())
                    };
                    let path = common.out.join(name);
                    dataset::write_csv(&path, &data)?;
                    println!("wrote {} ({} samples)", path.display(), data.len());
                }
            }
            Ok(())
        }
        Command::Run { common } => {
            let cfg = common.config()?;
            let summary = harness::run_protocol(&cfg, &common.out)?;
            print_summary(&summary);
            Ok(())
        }
        Command::Summarize { out } => {
            let summary = harness::summarize(&out)?;
            print_summary(&summary);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
