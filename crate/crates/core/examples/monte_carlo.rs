//! Small noise sweep written as CSV to stdout. Run with `--release`.

use collimcal::synth::{run_monte_carlo, write_csv, SolverSelection, Sweep, SweepValues, SyntheticConfig};

fn main() -> collimcal::Result<()> {
    let config = SyntheticConfig {
        trial_count: 10,
        image_count: 8,
        sweeps: SweepValues {
            noise: vec![0.5, 2.0],
            ..SweepValues::default()
        },
        ..SyntheticConfig::default()
    };
    let report = run_monte_carlo(&config, Sweep::Noise, &SolverSelection::default())?;
    write_csv(&report, true, std::io::stdout().lock())
}
