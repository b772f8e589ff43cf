//! Monte Carlo campaigns over the coverage threshold, empirical CDFs,
//! Kolmogorov-Smirnov comparisons with the limit and corrected laws, and
//! report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{gamma_mc, gamma_quadrature, moat_bulk_expansion, predicted_probability, Mode, VacancyQuery};
use crate::error::{Error, Result};
use crate::geometry::{DomainPair, Region};
use crate::knn::coverage_threshold;
use crate::limits::{corrected_cdf, limit_cdf, median_shift, r_t, transform_statistic, BetaGrid, CdfModel, Regime, Setting};
use crate::sampler::{mix, sample_binomial, sample_poisson};

/// Smallest size accepted by a campaign: the corrected law needs `log log n > 1`.
pub const MIN_SIZE: f64 = 16.0;

/// Sampling region `a` and target region `b` (defaults to `a`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub a: Region,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Region>,
}

impl DomainSpec {
    pub fn pair(&self) -> Result<DomainPair> {
        match &self.b {
            None => Ok(DomainPair::same(self.a.clone())),
            Some(b) if *b == self.a => Ok(DomainPair::same(self.a.clone())),
            Some(b) => DomainPair::interior(self.a.clone(), b.clone()),
        }
    }
}

fn default_tau() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub k: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub mode: Mode,
    /// X-sample sizes in binomial mode; `m = ⌊τ n⌋`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_values: Vec<u64>,
    /// X-intensities in Poisson mode; the Y-intensity is `τ t`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_values: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub beta_grid: BetaGrid,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub publication: bool,
    /// `β` values for the vacancy table; defaults to `-2, -1, ..., 3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// Monte Carlo sample count for the vacancy table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if self.publication && self.replicates < 100 {
            return bad(format!("publication reports need at least 100 replicates, got {}", self.replicates));
        }
        self.beta_grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        match self.mode {
            Mode::Binomial => {
                if self.n_values.is_empty() || !self.t_values.is_empty() {
                    return bad("binomial mode takes n_values and no t_values".into());
                }
                for &n in &self.n_values {
                    if (n as f64) < MIN_SIZE {
                        return bad(format!("n = {n} is below the minimum {MIN_SIZE}"));
                    }
                    if (self.tau * n as f64).floor() < 1.0 {
                        return bad(format!("floor(tau * n) = 0 for n = {n}"));
                    }
                }
            }
            Mode::Poisson => {
                if self.t_values.is_empty() || !self.n_values.is_empty() {
                    return bad("poisson mode takes t_values and no n_values".into());
                }
                for &t in &self.t_values {
                    if !(t >= MIN_SIZE && t.is_finite()) {
                        return bad(format!("t = {t} is below the minimum {MIN_SIZE}"));
                    }
                }
            }
        }
        if let Some(betas) = &self.betas {
            if betas.is_empty() || betas.iter().any(|b| !b.is_finite()) {
                return bad("betas must be a non-empty list of finite numbers".into());
            }
        }
        if matches!(self.mc_samples, Some(s) if s < 1000) {
            return bad("mc_samples must be at least 1000".into());
        }
        let pair = self.domain.pair().map_err(|e| Error::Config(e.to_string()))?;
        Setting::from_domain(&pair, self.k, self.tau).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Sizes in campaign order: `n` values or `t` values.
    pub fn sizes(&self) -> Vec<f64> {
        match self.mode {
            Mode::Binomial => self.n_values.iter().map(|&n| n as f64).collect(),
            Mode::Poisson => self.t_values.clone(),
        }
    }

    pub fn setting(&self) -> Result<Setting> {
        Setting::from_domain(&self.domain.pair()?, self.k, self.tau)
    }
}

/// Seed of replicate `i` of the `j`-th size in a campaign.
pub fn replicate_seed(seed: u64, size_index: usize, replicate: usize) -> u64 {
    mix(mix(seed, size_index as u64), replicate as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub beta: f64,
    pub empirical: f64,
    pub limit: f64,
    pub corrected: f64,
}

/// Wall time in seconds; sampling and threshold times are summed over replicates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub sampling: f64,
    pub threshold: f64,
    pub wall: f64,
}

/// Translations applied by [`median_recenter`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Shifts {
    pub samples: f64,
    pub limit: f64,
    pub corrected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config: ExperimentConfig,
    /// `n` (binomial) or `t` (Poisson).
    pub size: f64,
    /// Sorted transformed statistics; failed replicates sit at the end as `+∞`.
    pub samples: Vec<f64>,
    pub failed: usize,
    pub limit: CdfModel,
    pub corrected: CdfModel,
    pub curves: Vec<CurveRow>,
    pub ks_limit: f64,
    pub ks_corrected: f64,
    pub median_sample: f64,
    pub shifts: Shifts,
    pub runtime: RuntimeStats,
}

impl Report {
    /// Fraction of replicates with `T ≤ β`.
    pub fn ecdf(&self, beta: f64) -> f64 {
        self.samples.partition_point(|&s| s <= beta) as f64 / self.samples.len() as f64
    }

    /// Directory name below the output directory, e.g. `n_10000`.
    pub fn label(&self) -> String {
        match self.config.mode {
            Mode::Binomial => format!("n_{}", self.size),
            Mode::Poisson => format!("t_{}", self.size),
        }
    }

    fn refresh(&mut self) -> Result<()> {
        let grid = self.config.beta_grid;
        self.curves = grid
            .points()
            .map(|beta| CurveRow {
                beta,
                empirical: self.ecdf(beta),
                limit: self.limit.eval(beta),
                corrected: self.corrected.eval(beta),
            })
            .collect();
        self.ks_limit = ks_distance(&self.samples, &self.limit)?;
        self.ks_corrected = ks_distance(&self.samples, &self.corrected)?;
        self.median_sample = median_sorted(&self.samples);
        Ok(())
    }
}

fn median_sorted(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// One-sample Kolmogorov-Smirnov distance `sup_x |F_N(x) − F(x)|` of sorted
/// samples against a model. `+∞` samples are compared with `F(+∞) = 1`.
pub fn ks_distance(samples: &[f64], model: &CdfModel) -> Result<f64> {
    check_sorted(samples)?;
    let n = samples.len() as f64;
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < samples.len() {
        let x = samples[i];
        let j = i + samples[i..].partition_point(|&s| s <= x);
        let limit_at_infinity = |v: f64| if v.is_nan() && x == f64::INFINITY { 1.0 } else { v };
        let f = limit_at_infinity(model.eval(x));
        let f_left = limit_at_infinity(model.left_limit(x));
        sup = sup.max((f - j as f64 / n).abs()).max((f_left - i as f64 / n).abs());
        i = j;
    }
    Ok(sup.min(1.0))
}

/// Two-sample Kolmogorov-Smirnov distance of sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sorted(a)?;
    check_sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

fn check_sorted(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    if samples.iter().any(|s| s.is_nan()) || samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("samples must be sorted and free of NaN"));
    }
    Ok(())
}

/// Translates samples and both models so that each passes through `(0, 1/2)`.
pub fn median_recenter(report: &Report) -> Result<Report> {
    if report.samples.len() < 2 {
        return Err(Error::invalid("recentering needs at least two samples"));
    }
    let m = median_sorted(&report.samples);
    if !m.is_finite() {
        return Err(Error::invalid("sample median is infinite; too many failed replicates"));
    }
    let limit_shift = median_shift(&report.limit)?;
    let corrected_shift = median_shift(&report.corrected)?;
    let mut out = report.clone();
    out.samples = report.samples.iter().map(|s| s - m).collect();
    out.limit = report.limit.clone().shifted(limit_shift);
    out.corrected = report.corrected.clone().shifted(corrected_shift);
    out.shifts = Shifts {
        samples: report.shifts.samples + m,
        limit: report.shifts.limit + limit_shift,
        corrected: report.shifts.corrected + corrected_shift,
    };
    out.refresh()?;
    Ok(out)
}

struct Replicate {
    t: f64,
    sampling: f64,
    threshold: f64,
}

fn run_replicate(pair: &DomainPair, setting: &Setting, config: &ExperimentConfig, size: f64, seed: u64) -> Result<Replicate> {
    let start = Instant::now();
    let process = match config.mode {
        Mode::Binomial => {
            let n = size as u64;
            sample_binomial(pair, n, (config.tau * size).floor() as u64, seed)?
        }
        Mode::Poisson => sample_poisson(pair, size, config.tau * size, seed)?,
    };
    let sampled = Instant::now();
    let r = coverage_threshold(&process, &pair.a, config.k)?;
    let t = if r.is_finite() {
        transform_statistic(r, size, setting)?
    } else {
        f64::INFINITY
    };
    Ok(Replicate {
        t,
        sampling: (sampled - start).as_secs_f64(),
        threshold: sampled.elapsed().as_secs_f64(),
    })
}

/// Runs every size of the campaign on a pool of `threads` workers (0 picks
/// the rayon default). Samples depend only on the config, never on the
/// worker count.
pub fn run_campaign(config: &ExperimentConfig, threads: usize) -> Result<Vec<Report>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let pair = config.domain.pair()?;
    let setting = config.setting()?;
    config
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(j, size)| {
            let wall = Instant::now();
            let results: Vec<Replicate> = pool.install(|| {
                (0..config.replicates)
                    .into_par_iter()
                    .map(|i| run_replicate(&pair, &setting, config, size, replicate_seed(config.seed, j, i)))
                    .collect::<Result<_>>()
            })?;
            let mut runtime = RuntimeStats::default();
            let mut samples = Vec::with_capacity(results.len());
            for rep in &results {
                runtime.sampling += rep.sampling;
                runtime.threshold += rep.threshold;
                samples.push(rep.t);
            }
            samples.sort_by(f64::total_cmp);
            let failed = samples.iter().filter(|s| **s == f64::INFINITY).count();
            let finite_setting = match config.mode {
                Mode::Binomial => setting.for_binomial(size as u64)?,
                Mode::Poisson => setting.clone(),
            };
            let mut report = Report {
                config: config.clone(),
                size,
                samples,
                failed,
                limit: limit_cdf(&setting),
                corrected: corrected_cdf(&finite_setting, size)?,
                curves: Vec::new(),
                ks_limit: 0.0,
                ks_corrected: 0.0,
                median_sample: 0.0,
                shifts: Shifts::default(),
                runtime,
            };
            report.refresh()?;
            report.runtime.wall = wall.elapsed().as_secs_f64();
            Ok(report)
        })
        .collect()
}

/// A size with its `(β, limit, corrected)` rows.
pub type ModelTable = (f64, Vec<(f64, f64, f64)>);

/// Model tables for every size of the config, without simulation.
pub fn model_curves(config: &ExperimentConfig) -> Result<Vec<ModelTable>> {
    config.validate()?;
    let setting = config.setting()?;
    let limit = limit_cdf(&setting);
    config
        .sizes()
        .into_iter()
        .map(|size| {
            let finite = match config.mode {
                Mode::Binomial => setting.for_binomial(size as u64)?,
                Mode::Poisson => setting.clone(),
            };
            let corrected = corrected_cdf(&finite, size)?;
            let rows = config
                .beta_grid
                .points()
                .map(|b| (b, limit.eval(b), corrected.eval(b)))
                .collect();
            Ok((size, rows))
        })
        .collect()
}

/// One row of the vacancy table. `gamma_quadrature` is `NaN` where no
/// quadrature rule exists; `expansion` is expressed per unit volume of `B`
/// like `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub t: f64,
    pub beta: f64,
    pub gamma_quadrature: f64,
    pub gamma_mc: f64,
    pub mc_stderr: f64,
    pub expansion: f64,
    pub predicted_probability: f64,
}

pub const GAMMA_HEADER: &str = "t,beta,gamma_quadrature,gamma_mc,mc_stderr,expansion,predicted_probability";

impl GammaRow {
    pub fn csv(&self) -> String {
        [
            self.t,
            self.beta,
            self.gamma_quadrature,
            self.gamma_mc,
            self.mc_stderr,
            self.expansion,
            self.predicted_probability,
        ]
        .map(format_number)
        .join(",")
    }
}

/// `γ_t(B)` at `r = r_t(β)` by quadrature and Monte Carlo, the asymptotic
/// expansion and `exp(−τγ)` for every size and `β` of the config.
pub fn gamma_table(config: &ExperimentConfig) -> Result<Vec<GammaRow>> {
    config.validate()?;
    let pair = config.domain.pair()?;
    let setting = config.setting()?;
    let betas = config.betas.clone().unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    let samples = config.mc_samples.unwrap_or(100_000);
    let mut rows = Vec::new();
    for t in config.sizes() {
        for &beta in &betas {
            let r = r_t(beta, t, &setting)?;
            let q = VacancyQuery::new(pair.clone(), t, r, config.k)?;
            let quad = match gamma_quadrature(&q) {
                Ok(g) => g,
                Err(Error::InvalidInput(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            let (mc, se) = gamma_mc(&q, samples, config.seed)?;
            let expansion = match setting.regime() {
                Regime::Interior => moat_bulk_expansion(&setting, t, beta)?,
                _ => moat_bulk_expansion(&setting, t, beta)? / pair.b.volume(),
            };
            let gamma = if quad.is_nan() { mc } else { quad };
            let prob = match config.mode {
                Mode::Poisson => (-setting.tau() * gamma).exp(),
                Mode::Binomial => predicted_probability(&pair, &setting, t, r, Mode::Binomial)?,
            };
            rows.push(GammaRow {
                t,
                beta,
                gamma_quadrature: quad,
                gamma_mc: mc,
                mc_stderr: se,
                expansion,
                predicted_probability: prob,
            });
        }
    }
    Ok(rows)
}

/// Shortest round-trip text of `x`, in exponent form outside `[1e-4, 1e15)`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub const CURVES_HEADER: &str = "beta,empirical,limit,corrected";

const PLOT_SCRIPT: &str = "set datafile separator ','
set key left top
set xlabel 'beta'
set ylabel 'CDF'
set yrange [0:1]
plot 'curves.csv' every ::1 using 1:2 with steps title 'empirical', \\
     '' every ::1 using 1:3 with lines dt 2 title 'limit', \\
     '' every ::1 using 1:4 with lines dt 3 title 'corrected'
";

/// Writes `curves.csv`, `samples.csv`, `meta.json` and `plot.gp` into `dir`.
pub fn emit(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut curves = String::from(CURVES_HEADER);
    curves.push('\n');
    for row in &report.curves {
        let _ = writeln!(
            curves,
            "{},{},{},{}",
            format_number(row.beta),
            format_number(row.empirical),
            format_number(row.limit),
            format_number(row.corrected)
        );
    }
    write_file(&dir.join("curves.csv"), &curves)?;

    let mut samples = String::with_capacity(report.samples.len() * 24);
    for s in &report.samples {
        let _ = writeln!(samples, "{}", format_number(*s));
    }
    write_file(&dir.join("samples.csv"), &samples)?;

    let meta = serde_json::json!({
        "config": report.config,
        "seed": report.config.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "size": report.size,
        "replicates": report.samples.len(),
        "failed_replicates": report.failed,
        "ks_limit": report.ks_limit,
        "ks_corrected": report.ks_corrected,
        "median_sample": report.median_sample,
        "limit_model": report.limit,
        "corrected_model": report.corrected,
        "shifts": report.shifts,
        "runtime_seconds": report.runtime,
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    write_file(&dir.join("meta.json"), &text)?;
    write_file(&dir.join("plot.gp"), PLOT_SCRIPT)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a `curves.csv` written by [`emit`].
pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CURVES_HEADER) {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    lines
        .map(|line| {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            match v[..] {
                [beta, empirical, limit, corrected] => Ok(CurveRow {
                    beta,
                    empirical,
                    limit,
                    corrected,
                }),
                _ => Err(Error::Config(format!("{}: expected 4 columns", path.display()))),
            }
        })
        .collect()
}
