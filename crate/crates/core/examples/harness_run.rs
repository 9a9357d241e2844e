//! Drives the experiment runner from code instead of the `mfk` binary.
//! Writes its artifacts under the system temp directory.

use mfk::harness::{self, Experiment, RunConfig};

fn main() -> mfk::Result<()> {
    let mut config = RunConfig::from_toml(
        r#"
        [problem]
        preset = "exponential_growth"
        lambda = 0.5

        [grid]
        nodes = 256
        time_steps = 32

        [particles]
        count = 20000
        seeds = 4

        [output]
        stride = 8

        [tolerances]
        l1 = 1e-3
        mass = 1e-3
        "#,
    )?;
    config.output.dir = std::env::temp_dir().join("mfk-harness-example");

    for experiment in [Experiment::Validate, Experiment::SimulateFrozen] {
        config.experiment = Some(experiment);
        let outcome = harness::run(&config)?;
        println!(
            "{}: {}",
            experiment.name(),
            if outcome.pass() { "pass" } else { "fail" }
        );
        for c in &outcome.report.checks {
            println!("  {:<20} {:.3e} (limit {:.3e})", c.name, c.value, c.limit);
        }
    }
    println!("artifacts in {}", config.output.dir.display());
    Ok(())
}
