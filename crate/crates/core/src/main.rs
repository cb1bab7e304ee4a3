use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dimlab::cli::{exit_code, run_curvature, run_spectrum, run_sweep, run_verify};
use dimlab::config::{ExperimentConfig, ReportFormat};

#[derive(Parser)]
#[command(name = "dimlab", version, about = "Curvature of direct images on families of flat tori")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config report formats.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Identity suite, Nakano defect and family oracles over the grid list.
    Verify,
    /// Curvature at s = 0 against the finite-difference oracle.
    Curvature,
    /// Laplacian spectra against the Landau levels.
    Spectrum,
    /// Curvature over a disc of base points.
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
    .and_then(|mut c| {
        if let Some(s) = args.seed {
            c.seed = s;
        }
        if let Some(f) = args.format {
            c.formats = vec![match f {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            }];
        }
        c.validate().map(|_| c)
    });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dimlab: {e}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("dimlab: cannot start {} workers: {e}", args.jobs);
            return ExitCode::from(2);
        }
    };
    let (report, timings) = pool.install(|| match args.command {
        Command::Verify => run_verify(&cfg),
        Command::Curvature => run_curvature(&cfg),
        Command::Spectrum => run_spectrum(&cfg),
        Command::Sweep => run_sweep(&cfg),
    });
    let written = report.write(&args.out, &cfg.formats).and_then(|mut w| {
        w.push(timings.write(&args.out)?);
        Ok(w)
    });
    match written {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("dimlab: cannot write reports to {}: {e}", args.out.display());
            return ExitCode::from(3);
        }
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {} (N={:?}): {:e} vs {:?}", c.name, c.grid, c.value, c.threshold);
    }
    for r in report.identities.iter().filter(|r| !r.pass) {
        eprintln!("FAIL identity {} [{:?}]: {:?} order {:?}", r.identity, r.forms, r.relative, r.order);
    }
    for f in &report.failures {
        eprintln!("ERROR {}: {}", f.stage, f.message);
    }
    ExitCode::from(exit_code(&report) as u8)
}
