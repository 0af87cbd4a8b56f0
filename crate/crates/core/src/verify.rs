//! Randomized property sweeps over the lemma checkers.

use rand::Rng;

use crate::error::Result;
use crate::linalg::{random_psd, random_unit, sym_eig, OrthoBasis, SymMatrix};
use crate::metrics::{
    check_eigengap_perturbation, check_reduction_lemma, check_sin_to_epca, check_trace_frobenius,
};
use crate::rng::{label_key, substream};

pub const SLACK_TOL: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    pub min_slack: f64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }
}

impl std::fmt::Display for SweepReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {} instances, {} violations, min slack {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.violations,
            self.min_slack
        )
    }
}

struct Tally {
    report: SweepReport,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { report: SweepReport { name, instances: 0, violations: 0, min_slack: f64::INFINITY } }
    }

    fn record(&mut self, slack: f64) {
        self.report.instances += 1;
        self.report.min_slack = self.report.min_slack.min(slack);
        if !(slack >= SLACK_TOL) {
            self.report.violations += 1;
        }
    }
}

/// PSD matrix whose spectrum is scaled to a random magnitude.
fn random_sigma(d: usize, rng: &mut impl Rng) -> SymMatrix {
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    random_psd(d, rng).scale(scale)
}

pub fn sweep_reduction_lemma(instances: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = substream(seed, &[label_key("reduction")]);
    let mut t = Tally::new("reduction lemma");
    while t.report.instances < instances {
        let d = rng.random_range(2..=10);
        let k = rng.random_range(1..d);
        let sigma = random_sigma(d, &mut rng);
        let u = OrthoBasis::random(d, k, &mut rng);
        t.record(check_reduction_lemma(&u, &sigma, k)?.slack);
    }
    Ok(t.report)
}

pub fn sweep_sin_to_epca(instances: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = substream(seed, &[label_key("sin-to-epca")]);
    let mut t = Tally::new("sin to ePCA");
    while t.report.instances < instances {
        let d = rng.random_range(2..=10);
        let sigma = random_sigma(d, &mut rng);
        let v = sym_eig(&sigma)?.vector(0);
        let w = random_unit(d, &mut rng);
        t.record(check_sin_to_epca(&w, &v, &sigma)?.slack);
    }
    Ok(t.report)
}

pub fn sweep_eigengap_perturbation(instances: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = substream(seed, &[label_key("eigengap")]);
    let mut t = Tally::new("eigengap perturbation");
    while t.report.instances < instances {
        let d = rng.random_range(3..=10);
        let sigma = random_sigma(d, &mut rng);
        let v1 = sym_eig(&sigma)?.vector(0);
        let xi = 10f64.powf(rng.random_range(-6.0..-1.0));
        let s2 = xi * rng.random::<f64>();
        let z = random_unit(d, &mut rng);
        let z = &z - &v1 * v1.dot(&z);
        if z.norm() < 1e-6 {
            continue;
        }
        let u = &v1 * (1.0 - s2).sqrt() + z.normalize() * s2.sqrt();
        let w = check_eigengap_perturbation(&sigma, &u, xi)?;
        t.record(w.deviation_slack.min(w.gap_slack));
    }
    Ok(t.report)
}

pub fn sweep_trace_frobenius(instances: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = substream(seed, &[label_key("trace-frobenius")]);
    let mut t = Tally::new("trace vs frobenius");
    while t.report.instances < instances {
        let d = rng.random_range(2..=10);
        let k = rng.random_range(1..d);
        let x = random_sigma(d, &mut rng);
        let u = OrthoBasis::random(d, k, &mut rng);
        t.record(check_trace_frobenius(&u, &x)?.slack);
    }
    Ok(t.report)
}

/// Runs every sweep with 1000 instances.
pub fn run_all(seed: u64) -> Result<Vec<SweepReport>> {
    Ok(vec![
        sweep_reduction_lemma(1000, seed)?,
        sweep_sin_to_epca(1000, seed)?,
        sweep_eigengap_perturbation(1000, seed)?,
        sweep_trace_frobenius(1000, seed)?,
    ])
}
