//! Synthetic data generators and the statistical-power, β-sensitivity and
//! runtime experiments built on them.
//!
//! All randomness comes from ChaCha8 streams seeded from one master seed, so
//! every report is a pure function of its configuration.

use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discretizer::UdsParams;
use crate::error::{Error, Result};
use crate::scoring::uds_pr;

/// Response functions applied to the mixed latent dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    /// `2x + 1`
    F1,
    /// `x² − 2x`
    F2,
    /// `ln(|x| + 1)`
    F3,
    /// `sin(2x)`
    F4,
}

impl Generator {
    pub const ALL: [Generator; 4] = [Generator::F1, Generator::F2, Generator::F3, Generator::F4];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Generator::F1 => 2.0 * x + 1.0,
            Generator::F2 => x * x - 2.0 * x,
            Generator::F3 => (x.abs() + 1.0).ln(),
            Generator::F4 => (2.0 * x).sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Generator::F1 => "f1",
            Generator::F2 => "f2",
            Generator::F3 => "f3",
            Generator::F4 => "f4",
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Generator::F1),
            "f2" => Ok(Generator::F2),
            "f3" => Ok(Generator::F3),
            "f4" => Ok(Generator::F4),
            other => Err(Error::InvalidParameter(format!("unknown function {other:?}"))),
        }
    }
}

/// Standard deviation of the additive noise on response dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Absolute(f64),
    /// Multiple of the sample standard deviation of the latent input `W_i`.
    Relative(f64),
}

impl Noise {
    fn level(self) -> f64 {
        match self {
            Noise::Absolute(s) | Noise::Relative(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Dependent dimensionality; even, half latent mixes and half responses.
    pub n: usize,
    pub m: usize,
    pub f: Generator,
    pub noise: Noise,
    /// Independent standard Gaussian dimensions appended after the `n`.
    pub extra: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "dimensionality must be even and >= 2, got {}",
                self.n
            )));
        }
        if self.m < 2 {
            return Err(Error::TooFewRecords { found: self.m });
        }
        let s = self.noise.level();
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level {s} must be finite and >= 0")));
        }
        Ok(())
    }
}

fn column_names(count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("x{i}")).collect()
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Dependent data: `X = A·Z` with `Z ~ N(0, 1)` and `a_ij ~ U[0, 1]`,
/// `W = B·X` with `b_ij ~ U[0, 0.5]`, and responses `X_{i+l} = f(W_i) + e_i`.
/// `A` and `B` are drawn once per seed.
pub fn gen_correlated(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let l = config.n / 2;
    let m = config.m;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let half = Uniform::new(0.0, 0.5).expect("valid range");
    let a: Vec<f64> = (0..l * l).map(|_| unit.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..l * l).map(|_| half.sample(&mut rng)).collect();

    let mut x = vec![vec![0.0; m]; l];
    let mut w = vec![vec![0.0; m]; l];
    let mut z = vec![0.0; l];
    for r in 0..m {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..l {
            x[i][r] = (0..l).map(|j| a[i * l + j] * z[j]).sum();
        }
        for i in 0..l {
            w[i][r] = (0..l).map(|j| b[i * l + j] * x[j][r]).sum();
        }
    }

    let mut columns = x;
    for wi in &w {
        let sd = match config.noise {
            Noise::Absolute(s) => s,
            Noise::Relative(s) => s * sample_sd(wi),
        };
        let response: Vec<f64> = if sd > 0.0 {
            let noise = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            wi.iter().map(|&v| config.f.apply(v) + noise.sample(&mut rng)).collect()
        } else {
            wi.iter().map(|&v| config.f.apply(v)).collect()
        };
        columns.push(response);
    }
    for _ in 0..config.extra {
        columns.push((0..m).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    Dataset::new(column_names(columns.len()), columns)
}

/// Independent data: every column i.i.d. standard Gaussian.
pub fn gen_null(n: usize, m: usize, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::NoColumns);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    Dataset::new(column_names(n), columns)
}

/// How dimensionality is assigned to the null and dependent arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimCase {
    /// Both arms have `n` dimensions.
    Equal,
    /// Null datasets get `e` extra dimensions.
    NullExtra(usize),
    /// Dependent datasets get `e` extra independent dimensions.
    AltExtra(usize),
    /// Each dataset draws its dimensionality uniformly from `lo..=hi`.
    Mixed { lo: usize, hi: usize },
}

/// What the second arm is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Correlated(Generator),
    /// Another batch of independent data, for calibrating the test itself.
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub alternative: Alternative,
    pub n: usize,
    pub m: usize,
    pub noise: Noise,
    pub case: DimCase,
    pub alpha: f64,
    pub runs: usize,
    pub seed: u64,
    pub params: UdsParams,
}

impl PowerConfig {
    /// The headline setting: `m = 4000`, `n = 20`, α = 0.05, 100 runs per arm.
    pub fn new(f: Generator, seed: u64) -> Self {
        PowerConfig {
            alternative: Alternative::Correlated(f),
            n: 20,
            m: 4000,
            noise: Noise::Relative(0.1),
            case: DimCase::Equal,
            alpha: 0.05,
            runs: 100,
            seed,
            params: UdsParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.runs < 1 {
            return Err(Error::InvalidParameter("runs must be >= 1".into()));
        }
        if let DimCase::Mixed { lo, hi } = self.case {
            if lo < 2 || hi < lo {
                return Err(Error::InvalidParameter(format!("bad dimensionality range [{lo}, {hi}]")));
            }
        } else {
            GenConfig {
                n: self.n,
                m: self.m,
                f: Generator::F1,
                noise: self.noise,
                extra: 0,
                seed: 0,
            }
            .validate()?;
        }
        if self.m < 2 {
            return Err(Error::TooFewRecords { found: self.m });
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Null,
    Alt,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Null => "null",
            Arm::Alt => "alt",
        }
    }
}

/// Wall-clock seconds spent generating and scoring each arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmTiming {
    pub null_seconds: f64,
    pub alt_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub config: PowerConfig,
    pub cutoff: f64,
    pub power: f64,
    pub null_scores: Vec<f64>,
    pub alt_scores: Vec<f64>,
    pub null_dims: Vec<usize>,
    pub alt_dims: Vec<usize>,
    /// Kept out of serialized reports so they stay reproducible.
    #[serde(skip)]
    pub timing: ArmTiming,
}

/// Per-dataset seeds for one arm, drawn from its own ChaCha stream.
fn derive_seeds(master: u64, stream: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    (0..count).map(|_| rng.next_u64()).collect()
}

fn derive_dims(master: u64, stream: u64, count: usize, lo: usize, hi: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    (0..count).map(|_| rng.random_range(lo..=hi)).collect()
}

/// Index (1-based) of the order statistic used as the cutoff: `⌈(1 − α)·runs⌉`.
pub fn cutoff_rank(alpha: f64, runs: usize) -> usize {
    // the epsilon absorbs representation error in products such as 0.95 · 100
    let k = ((1.0 - alpha) * runs as f64 - 1e-9).ceil() as usize;
    k.clamp(1, runs)
}

/// The `⌈(1 − α)·runs⌉`-th smallest null score.
pub fn null_cutoff(null_scores: &[f64], alpha: f64) -> f64 {
    let mut sorted = null_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[cutoff_rank(alpha, sorted.len()) - 1]
}

/// Scores every column of a dataset jointly with the practical score.
pub fn uds_measure(params: UdsParams) -> impl Fn(&Dataset) -> Result<f64> + Sync {
    move |ds: &Dataset| {
        let dims: Vec<usize> = (0..ds.n()).collect();
        Ok(uds_pr(ds, &dims, &params)?.score)
    }
}

fn generate(config: &PowerConfig, arm: Arm, dims: usize, seed: u64) -> Result<Dataset> {
    match (arm, config.alternative) {
        (Arm::Null, _) | (Arm::Alt, Alternative::Null) => gen_null(dims, config.m, seed),
        (Arm::Alt, Alternative::Correlated(f)) => {
            let (n, extra) = match config.case {
                DimCase::AltExtra(e) => (config.n, e),
                DimCase::Mixed { .. } => (dims - dims % 2, dims % 2),
                _ => (config.n, 0),
            };
            gen_correlated(&GenConfig {
                n,
                m: config.m,
                f,
                noise: config.noise,
                extra,
                seed,
            })
        }
    }
}

fn arm_dims(config: &PowerConfig, arm: Arm) -> Vec<usize> {
    let runs = config.runs;
    match (config.case, arm) {
        (DimCase::Mixed { lo, hi }, Arm::Null) => derive_dims(config.seed, 2, runs, lo, hi),
        (DimCase::Mixed { lo, hi }, Arm::Alt) => derive_dims(config.seed, 3, runs, lo, hi),
        (DimCase::NullExtra(e), Arm::Null) => vec![config.n + e; runs],
        (DimCase::AltExtra(e), Arm::Alt) => vec![config.n + e; runs],
        _ => vec![config.n; runs],
    }
}

fn run_arm(
    measure: &(dyn Fn(&Dataset) -> Result<f64> + Sync),
    config: &PowerConfig,
    arm: Arm,
) -> Result<(Vec<f64>, Vec<usize>, Duration)> {
    let stream = match arm {
        Arm::Null => 0,
        Arm::Alt => 1,
    };
    let seeds = derive_seeds(config.seed, stream, config.runs);
    let dims = arm_dims(config, arm);
    let start = Instant::now();
    let scores = seeds
        .par_iter()
        .zip(dims.par_iter())
        .map(|(&seed, &d)| measure(&generate(config, arm, d, seed)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok((scores, dims, start.elapsed()))
}

/// Power of `measure` against independence: the share of dependent datasets
/// scoring strictly above the `(1 − α)` order statistic of null scores.
pub fn statistical_power(
    measure: &(dyn Fn(&Dataset) -> Result<f64> + Sync),
    config: &PowerConfig,
) -> Result<PowerReport> {
    config.validate()?;
    let (null_scores, null_dims, null_time) = run_arm(measure, config, Arm::Null)?;
    let (alt_scores, alt_dims, alt_time) = run_arm(measure, config, Arm::Alt)?;
    let cutoff = null_cutoff(&null_scores, config.alpha);
    let exceed = alt_scores.iter().filter(|&&s| s > cutoff).count();
    Ok(PowerReport {
        config: config.clone(),
        cutoff,
        power: exceed as f64 / config.runs as f64,
        null_scores,
        alt_scores,
        null_dims,
        alt_dims,
        timing: ArmTiming {
            null_seconds: null_time.as_secs_f64(),
            alt_seconds: alt_time.as_secs_f64(),
        },
    })
}

/// Power of the practical score under `config.params`.
pub fn uds_power(config: &PowerConfig) -> Result<PowerReport> {
    statistical_power(&uds_measure(config.params), config)
}

pub const DEFAULT_BETA_GRID: [usize; 8] = [5, 10, 15, 20, 25, 30, 35, 40];

/// Below this β the power curve is not expected to have settled.
pub const STABLE_BETA_ABOVE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub beta: usize,
    /// True for β at or below the range where power is expected to be stable.
    pub below_stable_range: bool,
    pub report: PowerReport,
}

/// Repeats the power protocol for each β; all points share the same seeds.
pub fn beta_sensitivity(config: &PowerConfig, grid: &[usize]) -> Result<Vec<BetaPoint>> {
    grid.iter()
        .map(|&beta| {
            let mut c = config.clone();
            c.params.beta = beta;
            Ok(BetaPoint {
                beta,
                below_stable_range: beta <= STABLE_BETA_ABOVE,
                report: uds_power(&c)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub m: usize,
    pub n: usize,
    /// Median wall-clock seconds of one practical score over all columns.
    pub seconds: f64,
}

/// Times the practical score on `f1` data for every `(m, n)` pair, taking
/// the median of `repeats` runs. An odd `n` gets one independent column. Runs sequentially on the calling thread.
pub fn runtime_bench(
    m_grid: &[usize],
    n_grid: &[usize],
    seed: u64,
    params: &UdsParams,
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(m_grid.len() * n_grid.len());
    for &m in m_grid {
        for &n in n_grid {
            let ds = gen_correlated(&GenConfig {
                n: n - n % 2,
                m,
                f: Generator::F1,
                noise: Noise::Relative(0.1),
                extra: n % 2,
                seed,
            })?;
            let dims: Vec<usize> = (0..ds.n()).collect();
            let mut times = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let start = Instant::now();
                std::hint::black_box(uds_pr(&ds, &dims, params)?);
                times.push(start.elapsed().as_secs_f64());
            }
            times.sort_by(f64::total_cmp);
            rows.push(TimingRow {
                m,
                n,
                seconds: times[times.len() / 2],
            });
        }
    }
    Ok(rows)
}
