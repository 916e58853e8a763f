use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use bwshare::experiments::{
    self, fig3_sweep, fig4_sweep, fig5_sweep, gamma_grid, imbalance_rates, run_scenario, write_scenario,
    ExperimentConfig, ExperimentError, Sweep,
};
use bwshare::model::{DebtState, PeriodState, SystemConfig};
use bwshare::oracle::brute_force_optimum;
use bwshare::policy::PolicyKind;

#[derive(Parser)]
#[command(name = "bwshare", version, about = "Inter-operator bandwidth sharing for real-time traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pooling gain of two deadline-constrained queues over a deadline grid.
    Fig1(Fig1Args),
    /// Improvement against the per-region sharing cap.
    Fig3 {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated caps.
        #[arg(long, value_delimiter = ',')]
        caps: Option<Vec<u32>>,
        /// Imbalance of the base rates.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Improvement and slots shared against the rate imbalance.
    Fig4 {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Improvement against the load multiplier, for several period lengths.
    Fig5 {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0.1)]
        gamma_step: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma_max: f64,
        #[arg(long, value_delimiter = ',')]
        period_lengths: Option<Vec<u32>>,
    },
    /// Runs the sweep from the configuration file (the base point when none).
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact optimum of one period, read from a JSON instance.
    #[command(hide = true)]
    Oracle {
        instance: PathBuf,
        #[arg(long)]
        no_sharing: bool,
    },
}

#[derive(Args)]
struct Fig1Args {
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    d_step: f64,
    #[arg(long, default_value_t = 10.0)]
    d_max: f64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    replications: Option<usize>,
    /// Periods per run.
    #[arg(long)]
    horizon: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    parallelism: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => experiments::default_config(),
        };
        if let Some(s) = self.seed {
            cfg.policy.seed = s;
        }
        if let Some(r) = self.replications {
            cfg.policy.replications = r;
        }
        if let Some(k) = self.horizon {
            cfg.system.horizon = k;
        }
        if self.parallelism.is_some() {
            cfg.policy.parallelism = self.parallelism;
        }
        Ok(cfg)
    }
}

#[derive(Deserialize)]
struct OracleInstance {
    system: SystemConfig,
    state: PeriodState,
    debts: DebtState,
}

fn sweep_and_write(
    mut cfg: ExperimentConfig,
    sweep: Sweep,
    out: &Path,
    stem: &str,
) -> Result<serde_json::Value, ExperimentError> {
    cfg.sweep = Some(sweep);
    let spec = cfg.resolve()?;
    let result = run_scenario(&spec)?;
    let files = write_scenario(&result, out, stem, stem)?;
    Ok(serde_json::json!({
        "rows": result.rows.len(),
        "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
    }))
}

fn execute(cli: Cli) -> Result<serde_json::Value, ExperimentError> {
    match cli.command {
        Command::Fig1(a) => {
            if !(a.d_step > 0.0 && a.d_max.is_finite()) {
                return Err(ExperimentError::Config("d-step must be > 0".into()));
            }
            let n = (a.d_max / a.d_step).round() as usize;
            let grid: Vec<f64> = (1..=n).map(|k| (k as f64 * a.d_step * 1e9).round() / 1e9).collect();
            let path = a.out.join("fig1.csv");
            let pts = experiments::emit_fig1(a.mu, a.rho, &grid, &path)?;
            Ok(serde_json::json!({ "rows": pts.len(), "files": [path.display().to_string()] }))
        }
        Command::Fig3 { common, caps, beta } => {
            let mut cfg = common.load()?;
            if let Some(b) = beta {
                cfg.arrivals.rates = experiments::config::PerRegionValue::Table(imbalance_rates(b, 1.0));
            }
            let sweep = match caps {
                Some(caps) => Sweep::SharingCap { caps },
                None => fig3_sweep(),
            };
            sweep_and_write(cfg, sweep, &common.out, "fig3")
        }
        Command::Fig4 { common, betas, scale } => {
            let cfg = common.load()?;
            let sweep = match fig4_sweep() {
                Sweep::Imbalance { betas: b, scale: s } => Sweep::Imbalance {
                    betas: betas.unwrap_or(b),
                    scale: scale.unwrap_or(s),
                },
                other => other,
            };
            sweep_and_write(cfg, sweep, &common.out, "fig4")
        }
        Command::Fig5 {
            common,
            gamma_step,
            gamma_max,
            period_lengths,
        } => {
            let cfg = common.load()?;
            if !(gamma_step > 0.0 && gamma_max.is_finite() && gamma_max >= 0.0) {
                return Err(ExperimentError::Config("gamma-step must be > 0 and gamma-max >= 0".into()));
            }
            let sweep = match fig5_sweep() {
                Sweep::Load { period_lengths: t, .. } => Sweep::Load {
                    gammas: gamma_grid(gamma_step, gamma_max),
                    period_lengths: period_lengths.unwrap_or(t),
                },
                other => other,
            };
            sweep_and_write(cfg, sweep, &common.out, "fig5")
        }
        Command::Run { common } => {
            let cfg = common.load()?;
            let sweep = cfg.sweep.clone().unwrap_or(Sweep::None);
            sweep_and_write(cfg, sweep, &common.out, "run")
        }
        Command::Oracle { instance, no_sharing } => {
            let text = std::fs::read_to_string(&instance)?;
            let inst: OracleInstance = serde_json::from_str(&text)?;
            let (decision, value) = brute_force_optimum(&inst.system, &inst.state, &inst.debts, no_sharing)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
            let policy = if no_sharing { PolicyKind::NoSharing } else { PolicyKind::Sharing };
            let ours = policy.decide(&inst.system, &inst.state, &inst.debts)?;
            Ok(serde_json::json!({
                "objective": value.to_string(),
                "decision": decision,
                "policy_decision": ours,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
