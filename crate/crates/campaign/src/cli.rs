//! Command-line front end. Campaign subcommands mirror the HTTP endpoints
//! and print the same JSON bodies.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use monobo::benchmarks::{emit_report, run_batch, text_summary, write_trials_csv, BenchmarkId};
use monobo::engine::{AlgoConfig, AlgoTag};

use crate::config::ServiceConfig;
use crate::error::{CampaignError, Result};
use crate::http::parse_point;
use crate::model::CreateCampaign;
use crate::service::{CampaignService, ObserveRequest};
use crate::store::CampaignStore;

#[derive(Debug, Parser)]
#[command(name = "monobo", version, about = "Target-value Bayesian optimization with monotonicity hints")]
pub struct Cli {
    /// TOML service configuration.
    #[arg(long, global = true, env = "MONOBO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Campaign storage directory; overrides the configuration.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic benchmark experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Human-in-the-loop campaigns.
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    Run(BenchRun),
}

#[derive(Debug, Args)]
pub struct BenchRun {
    #[arg(long = "fn", value_name = "ID")]
    pub function: BenchmarkId,
    #[arg(long, value_delimiter = ',', default_value = "standard,bo_ds,bo_mg,random")]
    pub algos: Vec<AlgoTag>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 30)]
    pub budget: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Per-iteration trial CSV. The summary goes to `<stem>_summary.csv`
    /// and `<stem>_summary.txt` alongside.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CampaignCommand {
    /// Create from a JSON request (file path or `-` for stdin).
    Create { request: PathBuf },
    List,
    Show { id: String },
    Suggest { id: String },
    Observe {
        id: String,
        #[arg(long)]
        ticket: u64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long)]
        note: Option<String>,
        /// Comma-separated point actually run, if not the suggested one.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long)]
        allow_out_of_bounds: bool,
    },
    Export {
        id: String,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Slice {
        id: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(long, allow_hyphen_values = true)]
        fixed: Option<String>,
    },
    /// Replace the algorithm configuration from a JSON file.
    Config { id: String, file: PathBuf },
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CampaignError::invalid("body", e.to_string()))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = ServiceConfig::from_env(cli.config.as_deref())?;
    if let Some(d) = cli.data_dir {
        cfg.data_dir = d;
    }
    match cli.command {
        Command::Bench(BenchCommand::Run(args)) => bench(args, &cfg.defaults),
        Command::Campaign(cmd) => {
            let svc = CampaignService::new(CampaignStore::open(&cfg.data_dir)?, cfg.defaults.clone(), cfg.suggest_budget());
            campaign(&svc, cmd)
        }
        Command::Serve { listen } => {
            let addr = listen.unwrap_or(cfg.listen.clone());
            let svc = CampaignService::new(CampaignStore::open(&cfg.data_dir)?, cfg.defaults.clone(), cfg.suggest_budget());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::http::serve(Arc::new(svc), &addr))?;
            Ok(())
        }
    }
}

fn bench(args: BenchRun, config: &AlgoConfig) -> Result<()> {
    let spec = args.function.spec();
    let report = run_batch(&spec, &args.algos, args.trials, args.budget, args.seed, config)?;
    if let Some(out) = &args.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_trials_csv(&report, std::fs::File::create(out)?)?;
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("bench");
        let summary = out.with_file_name(format!("{stem}_summary.csv"));
        emit_report(&report, &summary)?;
        eprintln!("wrote {} and {}", out.display(), summary.display());
    }
    print!("{}", text_summary(&report));
    Ok(())
}

fn campaign(svc: &CampaignService, cmd: CampaignCommand) -> Result<()> {
    match cmd {
        CampaignCommand::Create { request } => {
            let req: CreateCampaign = parse_json(&read_input(&request)?)?;
            print_json(&svc.create(req)?);
        }
        CampaignCommand::List => print_json(&svc.list()?),
        CampaignCommand::Show { id } => print_json(&svc.get(&id)?),
        CampaignCommand::Suggest { id } => print_json(&svc.suggest(&id)?),
        CampaignCommand::Observe {
            id,
            ticket,
            y,
            note,
            x,
            allow_out_of_bounds,
        } => {
            let req = ObserveRequest {
                ticket_id: ticket,
                y,
                note,
                x: x.as_deref().map(parse_point).transpose()?,
                allow_out_of_bounds,
            };
            print_json(&svc.observe(&id, req)?);
        }
        CampaignCommand::Export { id, format, out } => {
            let text = svc.export(&id, &format)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        CampaignCommand::Slice {
            id,
            dim,
            resolution,
            fixed,
        } => {
            let fixed = fixed.as_deref().map(parse_point).transpose()?;
            print_json(&svc.slice(&id, dim, resolution, fixed)?);
        }
        CampaignCommand::Config { id, file } => {
            let cfg: AlgoConfig = parse_json(&read_input(&file)?)?;
            print_json(&svc.update_config(&id, cfg)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_bench_run() {
        let cli = Cli::try_parse_from([
            "monobo", "bench", "run", "--fn", "f1", "--algos", "standard,bo_ds,bo_mg,random", "--trials", "20",
            "--budget", "30", "--seed", "7", "--out", "results/f1.csv",
        ])
        .unwrap();
        let Command::Bench(BenchCommand::Run(r)) = cli.command else { panic!() };
        assert_eq!(r.function, BenchmarkId::F1);
        assert_eq!(r.algos, AlgoTag::ALL.to_vec());
        assert_eq!(r.out, Some(PathBuf::from("results/f1.csv")));
    }

    #[test]
    fn parses_negative_observation() {
        let cli = Cli::try_parse_from(["monobo", "campaign", "observe", "abc", "--ticket", "3", "--y", "-0.5"]).unwrap();
        let Command::Campaign(CampaignCommand::Observe { y, .. }) = cli.command else { panic!() };
        assert_eq!(y, -0.5);
    }
}
