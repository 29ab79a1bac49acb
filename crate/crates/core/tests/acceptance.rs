//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Tests hold a shared lock so runtime limits are measured without
//! contention from the others. Lines go straight to stderr so they show up
//! without `--nocapture`.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use ffpe::verify::{run_experiment, Criterion, ExperimentId, ExperimentSpec, VerdictReport};
use ffpe::Params;

static SERIAL: Mutex<()> = Mutex::new(());

const SEED: u64 = 7;

fn run(ids: &[ExperimentId]) -> (VerdictReport, f64) {
    let start = Instant::now();
    let mut merged = VerdictReport::new("acceptance");
    for &id in ids {
        let r = run_experiment(&ExperimentSpec::new(id, Params::default(), SEED)).unwrap_or_else(|e| panic!("{}: {e}", id.name()));
        merged.absorb(r);
    }
    (merged, start.elapsed().as_secs_f64())
}

fn verdict(number: usize, title: &str, ids: &[ExperimentId], runtime_limit: Option<f64>) {
    let _guard = SERIAL.lock().unwrap_or_else(|p| p.into_inner());
    let (mut report, secs) = run(ids);
    if let Some(limit) = runtime_limit {
        report.check(Criterion::at_most("runtime-seconds", secs, limit));
    }
    let ok = report.passed();
    let mut out = std::io::stderr().lock();
    let _ = writeln!(out);
    for c in &report.criteria {
        let _ = writeln!(out, "    {}", c.describe());
    }
    let _ = writeln!(out, "{} criterion {number:>2} {title} ({secs:.1} s)", if ok { "PASS" } else { "FAIL" });
    drop(out);
    assert!(ok, "criterion {number} ({title}) failed");
}

#[test]
fn criterion_01_psi_oracle() {
    verdict(1, "psi quadrature vs closed form", &[ExperimentId::PsiOracle], Some(5.0));
}

#[test]
fn criterion_02_gaussian_oracle() {
    verdict(2, "alpha = 2 Gaussian flow", &[ExperimentId::GaussianOracle], Some(10.0));
}

#[test]
fn criterion_03_ode_oracle() {
    verdict(3, "mode-wise ODE and semigroup", &[ExperimentId::OdeOracle], None);
}

#[test]
fn criterion_04_kernel_mass() {
    verdict(4, "kernel mass and positivity", &[ExperimentId::KernelMass], None);
}

#[test]
fn criterion_05_pointwise_bound() {
    verdict(5, "pointwise kernel bound", &[ExperimentId::PointwiseBound], None);
}

#[test]
fn criterion_06_weighted_l1_suite() {
    verdict(
        6,
        "weighted L1 scaling and interpolation",
        &[ExperimentId::E1Scaling, ExperimentId::ShiftScaling, ExperimentId::Interpolation],
        None,
    );
}

#[test]
fn criterion_07_picard() {
    verdict(7, "Picard convergence on calibrated data", &[ExperimentId::Picard], Some(120.0));
}

#[test]
fn criterion_08_cross_oracle() {
    verdict(8, "Picard vs splitting", &[ExperimentId::CrossOracle], None);
}

#[test]
fn criterion_09_scaling_invariance() {
    verdict(9, "critical scaling", &[ExperimentId::ScalingInvariance], None);
}

#[test]
fn criterion_10_decay_bound() {
    verdict(10, "weighted decay constants", &[ExperimentId::DecayBound], None);
}

#[test]
fn criterion_11_bilinear() {
    verdict(11, "bilinear and contraction ratios", &[ExperimentId::Bilinear], None);
}

#[test]
fn criterion_12_reproducibility() {
    verdict(12, "thread-count reproducibility", &[ExperimentId::Reproducibility], None);
}
