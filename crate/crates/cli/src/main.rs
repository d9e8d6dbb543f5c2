use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use slidesurge::coupling::import_dtopo;
use slidesurge::par::Workers;
use slidesurge::raster::write_esri_ascii;
use slidesurge::scenario::{
    make_synthetic_basin, parse_config, run_coupled, run_slide_only, run_tsunami_only, run_validation_suite, Scenario,
};

#[derive(Parser)]
#[command(name = "slidesurge", version, about = "Subaqueous landslide and tsunami simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (default: the scenario's output_dir, else out/<name>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; SLIDESURGE_THREADS takes precedence.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Reserved. The simulator has no stochastic components.
    #[arg(long, value_name = "SEED", hide = true)]
    seed: Option<String>,
}

#[derive(Args)]
struct WithConfig {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Run the slide and record the bed-motion series.
    RunSlide(WithConfig),
    /// Run the water model forced by a recorded bed-motion series.
    RunTsunami {
        #[command(flatten)]
        args: WithConfig,
        /// Bed-motion file (default: <out>/dtopo/bed_motion.dtopo).
        #[arg(long, value_name = "PATH")]
        dtopo: Option<PathBuf>,
    },
    /// Slide, then water, with all artifacts.
    RunCoupled(WithConfig),
    /// Write the synthetic basin bed and slide thickness grids.
    MakeBasin(WithConfig),
    /// Run the verification cases and report pass/fail.
    Validate(Common),
}

fn out_dir(common: &Common, scenario: &Scenario) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&scenario.name))
}

fn workers(common: &Common) -> Result<Workers> {
    if common.seed.is_some() {
        bail!("--seed is not supported: the simulator is deterministic and has no random inputs");
    }
    Ok(Workers::from_env_or(common.threads)?)
}

fn load(path: &Path) -> Result<Scenario> {
    parse_config(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::RunSlide(a) => {
            let pool = workers(&a.common)?;
            let scenario = load(&a.config)?;
            let out = out_dir(&a.common, &scenario);
            let outcome = pool.install(|| run_slide_only(&scenario, &out))?;
            print!("{}", outcome.to_key_values());
            println!("output={}", out.display());
        }
        Command::RunTsunami { args, dtopo } => {
            let pool = workers(&args.common)?;
            let scenario = load(&args.config)?;
            let out = out_dir(&args.common, &scenario);
            let dtopo = dtopo.unwrap_or_else(|| out.join("dtopo").join("bed_motion.dtopo"));
            let series = import_dtopo(&dtopo).with_context(|| format!("reading {}", dtopo.display()))?;
            let outcome = pool.install(|| run_tsunami_only(&scenario, &series, &out))?;
            print!("{}", outcome.to_key_values());
            println!("output={}", out.display());
        }
        Command::RunCoupled(a) => {
            let pool = workers(&a.common)?;
            let scenario = load(&a.config)?;
            let out = out_dir(&a.common, &scenario);
            pool.install(|| run_coupled(&scenario, &out))?;
            let report = std::fs::read_to_string(out.join("report.txt")).context("reading report")?;
            print!("{report}");
            println!("output={}", out.display());
        }
        Command::MakeBasin(a) => {
            workers(&a.common)?;
            let scenario = load(&a.config)?;
            let Some(basin) = &scenario.basin else {
                bail!("scenario {} has no [basin] section", scenario.name);
            };
            let out = out_dir(&a.common, &scenario);
            let fields = out.join("fields");
            std::fs::create_dir_all(&fields).with_context(|| format!("creating {}", fields.display()))?;
            let (bed, slide) = make_synthetic_basin(basin)?;
            write_esri_ascii(&bed, fields.join("bed.asc"))?;
            write_esri_ascii(&slide, fields.join("slide_initial.asc"))?;
            println!("bed={}", fields.join("bed.asc").display());
            println!("slide={}", fields.join("slide_initial.asc").display());
        }
        Command::Validate(common) => {
            let pool = workers(&common)?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out/validation"));
            let report = pool.install(|| run_validation_suite(&out))?;
            print!("{}", report.render());
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
