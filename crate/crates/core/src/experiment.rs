//! Seeded experiment sweeps and their CSV output.
//!
//! # Config grammar
//!
//! ```text
//! # comment
//! key = value                 top-level setting
//! key = v1, v2, v3            grid or list
//! [algorithm-name]            following keys override that algorithm
//! ```
//!
//! Top-level keys: `preset`, `generator`, `algorithms`, `n`, `d`, `k`,
//! `sigma`, `gap`, `epsilon`, `delta`, `lambda1`, `alpha`, `trials`, `seed`,
//! `out`. A `preset` line must come first and loads that preset's values as
//! defaults. Section keys are listed in [`AlgorithmKind::allowed_keys`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{dp_gauss_1, dp_gauss_2, dp_power_method, ClipThresholds, PowerCalibration};
use crate::datagen::{gaussian_outer, heavy_tail_mixture, spiked_rank1, spiked_rankk, GeneratorKind, SampleStream};
use crate::dp_pca::{k_dp_pca, BatchRule, DpOjas, EPcaOracle, ExactOracle, ModifiedDpPca, OjaOracle, OracleConfig};
use crate::error::{Error, Result};
use crate::linalg::{OrthoBasis, SymMatrix};
use crate::metrics::zeta_utility;
use crate::oja::LrPolicy;
use crate::privacy::PrivacyBudget;
use crate::rng::{hash_keys, label_key, substream};

/// Column order of the result CSV.
pub const COLUMNS: [&str; 20] = [
    "generator",
    "algorithm",
    "n",
    "d",
    "k",
    "sigma",
    "gap",
    "epsilon",
    "delta",
    "trial",
    "seed",
    "zeta2",
    "captured_energy",
    "optimal_energy",
    "sine",
    "frob_sq",
    "status",
    "diag_retries",
    "diag_bottoms",
    "ms",
];

pub const PRESETS: [&str; 6] = ["fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig2c"];

const DATA_KEY: u64 = 1;
const ALGO_KEY: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AlgorithmKind {
    KDpPca,
    KDpOjas,
    DpGauss1,
    DpGauss2,
    DpPowerMethod,
    Oja,
    Exact,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 7] = [
        AlgorithmKind::KDpPca,
        AlgorithmKind::KDpOjas,
        AlgorithmKind::DpGauss1,
        AlgorithmKind::DpGauss2,
        AlgorithmKind::DpPowerMethod,
        AlgorithmKind::Oja,
        AlgorithmKind::Exact,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::KDpPca => "k-dp-pca",
            AlgorithmKind::KDpOjas => "k-dp-ojas",
            AlgorithmKind::DpGauss1 => "dp-gauss-1",
            AlgorithmKind::DpGauss2 => "dp-gauss-2",
            AlgorithmKind::DpPowerMethod => "dp-power-method",
            AlgorithmKind::Oja => "oja",
            AlgorithmKind::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Keys accepted in this algorithm's config section.
    pub fn allowed_keys(&self) -> &'static [&'static str] {
        match self {
            AlgorithmKind::KDpPca => &["batch", "tau", "schedule", "k_const", "a", "c_range", "reuse_first_half"],
            AlgorithmKind::KDpOjas => &["schedule", "tau", "k_const", "a", "c_clip", "c_noise"],
            AlgorithmKind::DpGauss1 => &["clip_c", "confidence"],
            AlgorithmKind::DpGauss2 => &["clip_c", "confidence", "max_retries"],
            AlgorithmKind::DpPowerMethod => &["clip_c", "confidence", "iterations", "calibration"],
            AlgorithmKind::Oja => &["schedule"],
            AlgorithmKind::Exact => &[],
        }
    }

    fn default_schedule(&self) -> LrPolicy {
        match self {
            AlgorithmKind::KDpOjas => LrPolicy::Harmonic,
            _ => LrPolicy::KdppcaExperimental,
        }
    }
}

/// Per-algorithm settings. Unset fields take the model-derived defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub batch: Option<BatchRule>,
    pub tau: Option<f64>,
    pub schedule: Option<LrPolicy>,
    pub k_const: Option<f64>,
    pub a: Option<f64>,
    pub c_range: Option<f64>,
    pub c_clip: Option<f64>,
    pub c_noise: Option<f64>,
    pub reuse_first_half: bool,
    pub clip_c: f64,
    pub confidence: f64,
    pub max_retries: usize,
    pub iterations: usize,
    pub calibration: PowerCalibration,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind) -> Self {
        AlgorithmSpec {
            kind,
            batch: None,
            tau: None,
            schedule: None,
            k_const: None,
            a: None,
            c_range: None,
            c_clip: None,
            c_noise: None,
            reuse_first_half: false,
            clip_c: 1.0,
            confidence: 0.01,
            max_retries: 100,
            iterations: 10,
            calibration: PowerCalibration::Formula,
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        if !self.kind.allowed_keys().contains(&key) {
            return Err(format!(
                "unknown key `{key}` for [{}]; allowed: {}",
                self.kind.name(),
                self.kind.allowed_keys().join(", ")
            ));
        }
        match key {
            "batch" => {
                self.batch = Some(match value {
                    "sqrt" => BatchRule::Sqrt,
                    "theoretical" => BatchRule::Theoretical,
                    v => BatchRule::Fixed(parse_num(key, v)?),
                })
            }
            "schedule" => {
                self.schedule = Some(match value {
                    "harmonic" => LrPolicy::Harmonic,
                    "experimental" => LrPolicy::KdppcaExperimental,
                    v => return Err(format!("schedule must be harmonic or experimental, got `{v}`")),
                })
            }
            "calibration" => {
                self.calibration = match value {
                    "formula" => PowerCalibration::Formula,
                    "advanced" => PowerCalibration::AdvancedComposition,
                    v => return Err(format!("calibration must be formula or advanced, got `{v}`")),
                }
            }
            "reuse_first_half" => self.reuse_first_half = parse_num(key, value)?,
            "tau" => self.tau = Some(parse_num(key, value)?),
            "k_const" => self.k_const = Some(parse_num(key, value)?),
            "a" => self.a = Some(parse_num(key, value)?),
            "c_range" => self.c_range = Some(parse_num(key, value)?),
            "c_clip" => self.c_clip = Some(parse_num(key, value)?),
            "c_noise" => self.c_noise = Some(parse_num(key, value)?),
            "clip_c" => self.clip_c = parse_num(key, value)?,
            "confidence" => self.confidence = parse_num(key, value)?,
            "max_retries" => self.max_retries = parse_num(key, value)?,
            "iterations" => self.iterations = parse_num(key, value)?,
            _ => unreachable!(),
        }
        Ok(())
    }

    fn oracle_config(&self, stream: &SampleStream) -> OracleConfig {
        let mut cfg = OracleConfig::from_model(stream.model());
        cfg.schedule = self.schedule.unwrap_or(self.kind.default_schedule());
        cfg.batch = self.batch.unwrap_or(cfg.batch);
        cfg.tau = self.tau.unwrap_or(cfg.tau);
        cfg.k_const = self.k_const.unwrap_or(cfg.k_const);
        cfg.a = self.a.unwrap_or(cfg.a);
        cfg.c_range = self.c_range.unwrap_or(cfg.c_range);
        cfg.c_clip = self.c_clip.unwrap_or(cfg.c_clip);
        cfg.c_noise = self.c_noise.unwrap_or(cfg.c_noise);
        cfg.reuse_first_half = self.reuse_first_half;
        cfg
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}` for `{key}`"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<Vec<T>, String> {
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

/// A sweep over data and privacy parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub generator: GeneratorKind,
    pub algorithms: Vec<AlgorithmSpec>,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub k: Vec<usize>,
    pub sigma: Vec<f64>,
    /// `Δ_k = λ_k − λ_{k+1}` of the spiked rank-`k` model.
    pub gap: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub delta: f64,
    pub lambda1: f64,
    /// Mixture weight of the heavy-tailed generator.
    pub alpha: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorKind::SpikedRankK,
            algorithms: [
                AlgorithmKind::KDpPca,
                AlgorithmKind::KDpOjas,
                AlgorithmKind::DpGauss1,
                AlgorithmKind::DpGauss2,
                AlgorithmKind::DpPowerMethod,
            ]
            .into_iter()
            .map(AlgorithmSpec::new)
            .collect(),
            n: (0..7).map(|j| 1000 << j).collect(),
            d: vec![200],
            k: vec![2],
            sigma: vec![0.025],
            gap: vec![5.0],
            epsilon: vec![1.0],
            delta: 0.01,
            lambda1: 10.0,
            alpha: 0.1,
            trials: 50,
            base_seed: 0,
            out: None,
        }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    pub gap: f64,
    pub epsilon: f64,
}

impl GridPoint {
    fn keys(&self) -> [u64; 6] {
        [
            self.n as u64,
            self.d as u64,
            self.k as u64,
            self.sigma.to_bits(),
            self.gap.to_bits(),
            self.epsilon.to_bits(),
        ]
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::default();
    let fixed_n = vec![32_000];
    let cfg = match name {
        "fig1a" => base,
        "fig1b" => ExperimentConfig { sigma: vec![0.001], ..base },
        "fig1c" => ExperimentConfig { n: fixed_n, d: vec![25, 50, 100, 200, 400], ..base },
        "fig2a" => ExperimentConfig { n: vec![1000], gap: vec![1.0, 2.0, 4.0, 6.0, 8.0, 10.0], ..base },
        "fig2b" => ExperimentConfig { n: fixed_n, sigma: vec![0.001, 0.005, 0.025, 0.1, 0.5], ..base },
        "fig2c" => base,
        _ => {
            return Err(Error::Usage(format!(
                "unknown preset `{name}`; available presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut overrides: BTreeMap<AlgorithmKind, AlgorithmSpec> = BTreeMap::new();
        let mut section: Option<AlgorithmKind> = None;
        let mut seen_setting = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| Error::Config { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let kind = AlgorithmKind::parse(name.trim())
                    .ok_or_else(|| err(format!("unknown algorithm section [{}]", name.trim())))?;
                section = Some(kind);
                overrides.entry(kind).or_insert_with(|| AlgorithmSpec::new(kind));
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            if let Some(kind) = section {
                overrides.get_mut(&kind).unwrap().set(key, value).map_err(err)?;
                continue;
            }
            if key == "preset" {
                if seen_setting {
                    return Err(err("`preset` must precede other settings".into()));
                }
                cfg = preset(value).map_err(|e| err(e.to_string()))?;
                seen_setting = true;
                continue;
            }
            seen_setting = true;
            cfg.set(key, value).map_err(err)?;
        }
        for spec in &mut cfg.algorithms {
            if let Some(o) = overrides.get(&spec.kind) {
                *spec = o.clone();
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "generator" => {
                self.generator = [
                    GeneratorKind::SpikedRank1,
                    GeneratorKind::SpikedRankK,
                    GeneratorKind::GaussianOuter,
                    GeneratorKind::HeavyTailMixture,
                ]
                .into_iter()
                .find(|g| g.name() == value)
                .ok_or_else(|| format!("unknown generator `{value}`"))?
            }
            "algorithms" => {
                self.algorithms = value
                    .split(',')
                    .map(|s| {
                        AlgorithmKind::parse(s.trim())
                            .map(AlgorithmSpec::new)
                            .ok_or_else(|| format!("unknown algorithm `{}`", s.trim()))
                    })
                    .collect::<std::result::Result<_, _>>()?
            }
            "n" => self.n = parse_list(key, value)?,
            "d" => self.d = parse_list(key, value)?,
            "k" => self.k = parse_list(key, value)?,
            "sigma" => self.sigma = parse_list(key, value)?,
            "gap" => self.gap = parse_list(key, value)?,
            "epsilon" => self.epsilon = parse_list(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "lambda1" => self.lambda1 = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "seed" => self.base_seed = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must be in (0, 1), got {}", self.delta));
        }
        for (name, empty) in [
            ("algorithms", self.algorithms.is_empty()),
            ("n", self.n.is_empty()),
            ("d", self.d.is_empty()),
            ("k", self.k.is_empty()),
            ("sigma", self.sigma.is_empty()),
            ("gap", self.gap.is_empty()),
            ("epsilon", self.epsilon.is_empty()),
        ] {
            if empty {
                return bad(format!("grid `{name}` is empty"));
            }
        }
        if let Some(&e) = self.epsilon.iter().find(|&&e| !(e > 0.0)) {
            return bad(format!("epsilon must be positive, got {e}"));
        }
        if self.k.iter().any(|&k| k == 0) || self.n.iter().any(|&n| n == 0) {
            return bad("n and k must be positive".into());
        }
        Ok(())
    }

    /// Grid points in sweep order: `d, k, sigma, gap, epsilon`, then `n`.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &k in &self.k {
                for &sigma in &self.sigma {
                    for &gap in &self.gap {
                        for &epsilon in &self.epsilon {
                            for &n in &self.n {
                                out.push(GridPoint { n, d, k, sigma, gap, epsilon });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn row_count(&self) -> usize {
        self.grid().len() * self.algorithms.len() * self.trials
    }

    /// Seed of one `(grid point, algorithm, trial)` cell.
    pub fn trial_seed(&self, point: &GridPoint, algorithm: AlgorithmKind, trial: usize) -> u64 {
        let mut keys = vec![self.base_seed];
        keys.extend(point.keys());
        keys.push(label_key(algorithm.name()));
        keys.push(trial as u64);
        hash_keys(&keys)
    }

    /// Sample stream for a grid point. For the spiked rank-`k` model the
    /// eigenvalues step linearly from `λ_1` down to `Λ_k = gap`, so the
    /// `k`-th eigengap of `Σ` equals `gap`.
    pub fn stream(&self, point: &GridPoint, seed: u64) -> Result<SampleStream> {
        let GridPoint { d, k, sigma, gap, .. } = *point;
        match self.generator {
            GeneratorKind::SpikedRank1 => spiked_rank1(d, self.lambda1, sigma, seed),
            GeneratorKind::SpikedRankK => spiked_rankk(d, k, &self.spectrum(k, gap), sigma, seed),
            GeneratorKind::GaussianOuter => {
                let mut diag = vec![sigma * sigma; d];
                for (i, l) in self.spectrum(k.min(d), gap).into_iter().enumerate() {
                    diag[i] += l;
                }
                gaussian_outer(d, &SymMatrix::diagonal(&diag), seed)
            }
            GeneratorKind::HeavyTailMixture => heavy_tail_mixture(d, self.alpha, seed),
        }
    }

    fn spectrum(&self, k: usize, gap: f64) -> Vec<f64> {
        if k <= 1 {
            return vec![self.lambda1];
        }
        let step = (self.lambda1 - gap) / (k - 1) as f64;
        (0..k).map(|i| self.lambda1 - step * i as f64).collect()
    }
}

/// One row of the result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub generator: String,
    pub algorithm: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    pub gap: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    pub zeta2: Option<f64>,
    pub captured_energy: Option<f64>,
    pub optimal_energy: Option<f64>,
    pub sine: Option<f64>,
    pub frob_sq: Option<f64>,
    pub status: String,
    pub diag_retries: usize,
    pub diag_bottoms: usize,
    pub ms: f64,
}

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// `captured / optimal`, the increasing-is-better utility.
    pub fn utility(&self) -> Option<f64> {
        match (self.captured_energy, self.optimal_energy) {
            (Some(c), Some(o)) if o > 0.0 => Some(c / o),
            (Some(_), Some(_)) => Some(1.0),
            _ => None,
        }
    }
}

struct Estimate {
    basis: OrthoBasis,
    retries: usize,
    bottoms: usize,
}

fn run_algorithm(spec: &AlgorithmSpec, stream: &mut SampleStream, point: &GridPoint, cfg: &ExperimentConfig, seed: u64) -> Result<Estimate> {
    let samples = stream.take_samples(point.n);
    let budget = PrivacyBudget::new(point.epsilon, cfg.delta)?;
    let mut rng = substream(seed, &[ALGO_KEY]);
    let model = stream.model();
    let k = point.k;
    let deflation = |oracle: &dyn EPcaOracle, rng: &mut _| -> Result<Estimate> {
        let out = k_dp_pca(&samples, k, budget, oracle, rng)?;
        Ok(Estimate { retries: out.retries(), bottoms: out.bottoms(), basis: out.basis })
    };
    let clips = || ClipThresholds::new(model.lambda1(), model.noise_sigma, point.d, point.n, spec.confidence, spec.clip_c);
    let baseline = |b: crate::baselines::BaselineOutput| Estimate { basis: b.basis, retries: b.retries, bottoms: 0 };
    match spec.kind {
        AlgorithmKind::KDpPca => {
            let cfg = spec.oracle_config(stream);
            cfg.validate()?;
            deflation(&ModifiedDpPca { cfg }, &mut rng)
        }
        AlgorithmKind::KDpOjas => {
            let cfg = spec.oracle_config(stream);
            cfg.validate()?;
            deflation(&DpOjas { cfg }, &mut rng)
        }
        AlgorithmKind::Oja => deflation(&OjaOracle { cfg: spec.oracle_config(stream) }, &mut rng),
        AlgorithmKind::Exact => deflation(&ExactOracle { sigma: model.sigma_matrix.clone() }, &mut rng),
        AlgorithmKind::DpGauss1 => dp_gauss_1(&samples, k, budget, &clips()?, &mut rng).map(baseline),
        AlgorithmKind::DpGauss2 => dp_gauss_2(&samples, k, budget, &clips()?, spec.max_retries, &mut rng).map(baseline),
        AlgorithmKind::DpPowerMethod => {
            dp_power_method(&samples, k, budget, &clips()?, spec.iterations, spec.calibration, &mut rng).map(baseline)
        }
    }
}

/// Runs one cell of the sweep. Failures become rows with a non-`ok` status.
pub fn run_trial(cfg: &ExperimentConfig, point: &GridPoint, spec: &AlgorithmSpec, trial: usize) -> ResultRecord {
    let seed = cfg.trial_seed(point, spec.kind, trial);
    let mut record = ResultRecord {
        generator: cfg.generator.name().to_string(),
        algorithm: spec.kind.name().to_string(),
        n: point.n,
        d: point.d,
        k: point.k,
        sigma: point.sigma,
        gap: point.gap,
        epsilon: point.epsilon,
        delta: cfg.delta,
        trial,
        seed,
        zeta2: None,
        captured_energy: None,
        optimal_energy: None,
        sine: None,
        frob_sq: None,
        status: "ok".to_string(),
        diag_retries: 0,
        diag_bottoms: 0,
        ms: 0.0,
    };
    let start = Instant::now();
    let result = cfg.stream(point, hash_keys(&[seed, DATA_KEY])).and_then(|mut stream| {
        let est = run_algorithm(spec, &mut stream, point, cfg, seed)?;
        let report = zeta_utility(&est.basis, &stream.model().sigma_matrix, point.k)?;
        Ok((est, report))
    });
    record.ms = (start.elapsed().as_secs_f64() * 1e6).round() / 1e3;
    match result {
        Ok((est, report)) => {
            record.zeta2 = Some(report.zeta2);
            record.captured_energy = Some(report.captured_energy);
            record.optimal_energy = Some(report.optimal_energy);
            record.sine = report.sine;
            record.frob_sq = Some(report.frob_sq);
            record.diag_retries = est.retries;
            record.diag_bottoms = est.bottoms;
        }
        Err(e) => record.status = e.status_tag().to_string(),
    }
    record
}

/// Runs the whole sweep on the current rayon pool. Rows come back in sweep
/// order (grid point, then algorithm, then trial) regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let grid = cfg.grid();
    let mut jobs = Vec::with_capacity(cfg.row_count());
    for point in &grid {
        for spec in &cfg.algorithms {
            for trial in 0..cfg.trials {
                jobs.push((point, spec, trial));
            }
        }
    }
    Ok(jobs.into_par_iter().map(|(p, s, t)| run_trial(cfg, p, s, t)).collect())
}

/// Same as [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

pub fn write_csv(out: impl Write, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl std::io::Read) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&r.headers()?.iter().collect::<Vec<_>>(), &COLUMNS)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Checks that `header` contains every column in `required`.
pub fn check_header(header: &[&str], required: &[&str]) -> Result<()> {
    match required.iter().find(|c| !header.contains(c)) {
        Some(c) => Err(Error::InvalidInput(format!("CSV is missing column `{c}`"))),
        None => Ok(()),
    }
}

/// Mean of `values` and the half-width `1.96 · sd / √n` of its normal 95% interval.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// One-line summary per (grid point, algorithm): mean utility with its 95% half-width.
pub fn summarize(records: &[ResultRecord]) -> String {
    let mut groups: Vec<(String, Vec<f64>, usize)> = Vec::new();
    for r in records {
        let key = format!(
            "{:<16} n={:<6} d={:<4} k={} sigma={} gap={} eps={}",
            r.algorithm, r.n, r.d, r.k, r.sigma, r.gap, r.epsilon
        );
        if groups.last().map(|g| g.0 != key).unwrap_or(true) {
            groups.push((key, Vec::new(), 0));
        }
        let g = groups.last_mut().unwrap();
        match r.utility() {
            Some(u) if r.is_ok() => g.1.push(u),
            _ => g.2 += 1,
        }
    }
    let mut out = String::new();
    for (key, values, failed) in groups {
        let (m, h) = mean_ci95(&values);
        let _ = writeln!(out, "{key}  utility {m:.4} ± {h:.4}  failed {failed}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(algorithms: &[AlgorithmKind]) -> ExperimentConfig {
        ExperimentConfig {
            algorithms: algorithms.iter().copied().map(AlgorithmSpec::new).collect(),
            n: vec![400],
            d: vec![8],
            k: vec![2],
            trials: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn exact_oracle_row_is_exact() {
        let cfg = ExperimentConfig { trials: 1, ..tiny(&[AlgorithmKind::Exact]) };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].is_ok());
        assert!(rows[0].zeta2.unwrap() <= 1e-10);
    }

    #[test]
    fn presets_encode_captions() {
        assert_eq!(preset("fig1a").unwrap().sigma, vec![0.025]);
        assert_eq!(preset("fig1b").unwrap().sigma, vec![0.001]);
        let a = preset("fig1a").unwrap();
        assert_eq!((a.d.clone(), a.k.clone(), a.lambda1, a.epsilon.clone(), a.delta, a.trials), (vec![200], vec![2], 10.0, vec![1.0], 0.01, 50));
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        let err = preset("fig9").unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(err.to_string().contains("fig2c"));
    }

    #[test]
    fn spectrum_sets_kth_gap() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.spectrum(2, 4.0), vec![10.0, 4.0]);
        assert_eq!(cfg.spectrum(1, 4.0), vec![10.0]);
        let point = GridPoint { n: 10, d: 6, k: 2, sigma: 0.1, gap: 4.0, epsilon: 1.0 };
        let s = cfg.stream(&point, 3).unwrap();
        let l = &s.model().eigenvalues;
        assert!((l[1] - l[2] - 4.0).abs() < 1e-9, "{l:?}");
    }

    #[test]
    fn parse_config_with_sections() {
        let text = "\
# sweep
generator = spiked-rankk
algorithms = k-dp-pca, dp-gauss-2
n = 1000, 2000 # inline comment
sigma = 0.001
trials = 3
seed = 9

[k-dp-pca]
batch = 16
schedule = harmonic

[dp-gauss-2]
max_retries = 5
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.n, vec![1000, 2000]);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.base_seed, 9);
        assert_eq!(cfg.algorithms[0].batch, Some(BatchRule::Fixed(16)));
        assert_eq!(cfg.algorithms[0].schedule, Some(LrPolicy::Harmonic));
        assert_eq!(cfg.algorithms[1].max_retries, 5);
        assert_eq!(cfg.row_count(), 2 * 2 * 3);
    }

    #[test]
    fn parse_preset_then_override() {
        let cfg = ExperimentConfig::parse("preset = fig1b\ntrials = 2\n").unwrap();
        assert_eq!(cfg.sigma, vec![0.001]);
        assert_eq!(cfg.trials, 2);
        assert!(ExperimentConfig::parse("trials = 2\npreset = fig1b\n").is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [
            ("trials = 0\n", None),
            ("n = 10\nbogus = 1\n", Some(2)),
            ("\n\n[nope]\n", Some(3)),
            ("n = 1, x\n", Some(1)),
            ("[dp-gauss-1]\nbatch = 4\n", Some(2)),
            ("delta\n", Some(1)),
        ] {
            match (ExperimentConfig::parse(text), line) {
                (Err(Error::Config { line: l, .. }), Some(want)) => assert_eq!(l, want, "{text}"),
                (Err(Error::InvalidInput(_)), None) => {}
                (other, _) => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let cfg = ExperimentConfig::default();
        let p = GridPoint { n: 1000, d: 200, k: 2, sigma: 0.025, gap: 5.0, epsilon: 1.0 };
        let s = cfg.trial_seed(&p, AlgorithmKind::KDpPca, 0);
        assert_ne!(s, cfg.trial_seed(&p, AlgorithmKind::KDpPca, 1));
        assert_ne!(s, cfg.trial_seed(&p, AlgorithmKind::DpGauss1, 0));
        assert_ne!(s, cfg.trial_seed(&GridPoint { n: 2000, ..p }, AlgorithmKind::KDpPca, 0));
        let other = ExperimentConfig { base_seed: 1, ..ExperimentConfig::default() };
        assert_ne!(s, other.trial_seed(&p, AlgorithmKind::KDpPca, 0));
    }

    #[test]
    fn csv_round_trip_and_schema() {
        let cfg = tiny(&[AlgorithmKind::Exact, AlgorithmKind::DpGauss1]);
        let rows = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
        let k = rows.iter().find(|r| r.k == 2).unwrap();
        assert_eq!(k.sine, None);
    }

    #[test]
    fn empty_csv_still_has_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn missing_column_is_named() {
        let err = check_header(&["generator", "algorithm"], &COLUMNS).unwrap_err();
        assert!(err.to_string().contains("`n`"));
        let csv = "generator,algorithm\nx,y\n";
        assert!(read_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn failures_become_status_rows() {
        // n is too small for two ModifiedDP-PCA rounds.
        let cfg = ExperimentConfig { n: vec![6], trials: 1, ..tiny(&[AlgorithmKind::KDpPca]) };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows[0].status, "insufficient_data");
        assert_eq!(rows[0].zeta2, None);
    }

    #[test]
    fn ci_half_width_matches_hand_computation() {
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((h - 1.96 * sd / 2.0).abs() < 1e-15);
        assert_eq!(mean_ci95(&[0.7]), (0.7, 0.0));
    }
}
