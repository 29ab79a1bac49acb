//! Runs named verification experiments and prints their criteria.
//!
//! cargo run --release --example verify_report -- psi-oracle kernel-mass

use ffpe::verify::{run_experiment, ExperimentId, ExperimentSpec};
use ffpe::Params;

fn main() -> ffpe::Result<()> {
    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = vec!["psi-oracle".into(), "kernel-mass".into()];
    }
    for name in names {
        let report = run_experiment(&ExperimentSpec::new(ExperimentId::parse(&name)?, Params::default(), 7))?;
        println!("{name}: {}", if report.passed() { "PASS" } else { "FAIL" });
        for c in &report.criteria {
            println!("  {}", c.describe());
        }
    }
    Ok(())
}
