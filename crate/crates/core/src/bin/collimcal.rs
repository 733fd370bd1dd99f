use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use collimcal::cli::{self, CalibrateArgs, Mode};
use collimcal::synth::Sweep;

#[derive(Parser)]
#[command(name = "collimcal", version, about = "Collimator-based camera calibration")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic observation file with ground truth.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating camera as a camera file.
        #[arg(long)]
        camera_out: Option<PathBuf>,
    },
    /// Calibrate from an observation file.
    Calibrate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Ray database (single mode).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Skip the final bundle adjustment.
        #[arg(long)]
        no_refine: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a ray database from a reference image and its known camera.
    BuildDb {
        #[arg(long)]
        ref_obs: PathBuf,
        #[arg(long)]
        ref_cam: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo sweep and write a CSV.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        sweep: SweepArg,
        #[arg(long)]
        out: PathBuf,
        /// Fill the ms_per_trial column (makes the output run-dependent).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Nimg,
    Minimal,
    Single,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Noise,
    Images,
    Spherical,
}

fn run(args: Args) -> collimcal::Result<()> {
    match args.command {
        Command::Simulate { config, out, camera_out } => {
            cli::cmd_simulate(&config, &out, camera_out.as_deref())
        }
        Command::Calibrate { input, mode, reference, no_refine, out } => {
            let mode = match mode {
                ModeArg::Nimg => Mode::Nimg,
                ModeArg::Minimal => Mode::Minimal,
                ModeArg::Single => Mode::Single,
            };
            let report = cli::cmd_calibrate(&CalibrateArgs {
                input,
                mode,
                reference,
                refine: !no_refine,
                out,
            })?;
            let k = &report.intrinsics;
            eprintln!(
                "{}: fx {:.4} fy {:.4} cx {:.4} cy {:.4} skew {:.5}, rms {:.4} px",
                report.solver, k.fx, k.fy, k.cx, k.cy, k.gamma, report.rms_reprojection
            );
            Ok(())
        }
        Command::BuildDb { ref_obs, ref_cam, out } => {
            let db = cli::cmd_build_db(&ref_obs, &ref_cam, &out)?;
            eprintln!("{} rays written", db.len());
            Ok(())
        }
        Command::Benchmark { config, sweep, out, timing } => {
            let sweep = match sweep {
                SweepArg::Noise => Sweep::Noise,
                SweepArg::Images => Sweep::Images,
                SweepArg::Spherical => Sweep::Spherical,
            };
            cli::cmd_benchmark(&config, sweep, &out, timing).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_INPUT } else { cli::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
