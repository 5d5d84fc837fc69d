use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use windflex::error::Result;
use windflex::pipeline::{self, guarded, load_case, now_stamp, Artifacts};
use windflex::{run_pipeline, RunConfig, Stage};

/// Weather-driven flexibility reserve studies.
#[derive(Debug, Parser)]
#[command(name = "windflex", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate the weather tables.
    Ingest(Common),
    /// Fit the transition model and the feature coupling.
    Fit(Common),
    /// Generate stressed weather and wind power scenarios.
    Stress(Common),
    /// Size flexibility reserve and aggregate it to the policy's entities.
    Size(Common),
    /// Solve the day-ahead SCUC.
    Scuc(Common),
    /// Solve the real-time dispatch.
    Rt(Common),
    /// Compute costs and activation factors and write the report.
    Evaluate(Common),
    /// Run every stage, plus the configured sweep.
    Pipeline(Common),
}

fn load(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    cfg.apply_env()?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(c) => {
            let cfg = load(&c)?;
            let art = Artifacts::new(&c.out);
            guarded(&art, Stage::Ingest, || art.save_ingested(&pipeline::ingest(&cfg)?))
        }
        Command::Fit(c) => {
            let cfg = load(&c)?;
            let art = Artifacts::new(&c.out);
            guarded(&art, Stage::Fit, || {
                let ing = art.load_ingested(&cfg)?;
                art.save_fitted(&pipeline::fit(&cfg, &ing)?)
            })
        }
        Command::Stress(c) => {
            let cfg = load(&c)?;
            let art = Artifacts::new(&c.out);
            guarded(&art, Stage::Stress, || {
                let case = load_case(&cfg)?;
                let ing = art.load_ingested(&cfg)?;
                let fitted = art.load_fitted()?;
                let (st, weather) = pipeline::stress(&cfg, &case, &fitted, &ing, cfg.seed)?;
                art.save_stressed(&st, &weather, cfg.stressor.envelope_ci)
            })
        }
        Command::Size(c) => {
            let cfg = load(&c)?;
            let art = Artifacts::new(&c.out);
            guarded(&art, Stage::Size, || {
                let case = load_case(&cfg)?;
                let st = art.load_stressed()?;
                art.save_sized(&pipeline::size(&case, &st, &cfg.reserve, cfg.policy)?)
            })
        }
        Command::Scuc(c) => {
            let cfg = load(&c)?;
            let art = Artifacts::new(&c.out);
            guarded(&art, Stage::Scuc, || {
                let case = load_case(&cfg)?;
                let st = art.load_stressed()?;
                let sized = art.load_sized()?;
                art.save_scheduled(&pipeline::scuc(&cfg, &case, &st, &sized)?)
            })
        }
        Command::Rt(c) => {
            let cfg = load(&c)?;
            let art = Artifacts::new(&c.out);
            guarded(&art, Stage::Rt, || {
                let sc = art.load_scheduled()?;
                art.save_rt(&sc, &pipeline::rt(&cfg, &sc)?)
            })
        }
        Command::Evaluate(c) => {
            let cfg = load(&c)?;
            let art = Artifacts::new(&c.out);
            let report = guarded(&art, Stage::Evaluate, || {
                let sized = art.load_sized()?;
                let sc = art.load_scheduled()?;
                let rts = art.load_rt()?;
                let report = pipeline::evaluate(&cfg, cfg.seed, &sized, &sc, &rts, now_stamp())?;
                art.save_report(&report, &sc, &rts)?;
                Ok(report)
            })?;
            print!("{}", report.render_table());
            Ok(())
        }
        Command::Pipeline(c) => {
            let cfg = load(&c)?;
            let report = run_pipeline(&cfg, &c.out)?;
            print!("{}", report.render_table());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
