//! Command-line surface of the `pdm` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use pdm_core::labelling::LabelScheme;

use crate::commands::{cmd_extract, cmd_generate, cmd_report, cmd_run, cmd_select, Layout};
use crate::config::ExperimentConfig;
use crate::error::{ConfigError, Result};

#[derive(Debug, Parser)]
#[command(name = "pdm", version, about = "Predictive-maintenance pipeline: data, features, double CV and reports")]
pub struct Cli {
    /// Experiment configuration (TOML). Defaults describe the reference
    /// experiment on the synthetic corpus.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory shared by all stages.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the seeded synthetic corpus to `<out>/dataset`.
    Generate,
    /// Compute hourly feature tables into `<out>/features`.
    Extract {
        /// Append a `label` column: binary:<w>, multi:<w1>,<w2>,..., rul, lifepct, relu:<t_d>.
        #[arg(long)]
        label: Option<String>,
    },
    /// Rank and select features over all runs.
    Select,
    /// Double cross-validation of every formulation and aggregation.
    Run {
        /// Validate the configuration and print the fold plan only.
        #[arg(long)]
        dry_run: bool,
    },
    /// Render comparison tables and indicator traces from stored results.
    Report,
}

impl Cli {
    pub fn load_config(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.jobs > 0 {
        // fails only if a pool already exists, which then keeps serving
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    let layout = Layout::new(&cli.out);
    if let Command::Report = cli.command {
        cmd_report(&layout)?;
        return Ok(());
    }
    let cfg = cli.load_config()?;
    match &cli.command {
        Command::Generate => {
            cmd_generate(&cfg, &layout)?;
        }
        Command::Extract { label } => {
            let scheme = label
                .as_deref()
                .map(|s| s.parse::<LabelScheme>().map_err(|e| ConfigError::new("--label", e)))
                .transpose()?;
            cmd_extract(&cfg, &layout, scheme.as_ref())?;
        }
        Command::Select => {
            cmd_select(&cfg, &layout)?;
        }
        Command::Run { dry_run } => {
            cmd_run(&cfg, &layout, *dry_run)?;
        }
        Command::Report => unreachable!(),
    }
    Ok(())
}
