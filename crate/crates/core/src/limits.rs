//! Regimes, centering constants, the radius schedule `r_t`, limiting laws
//! and finite-size corrected CDFs of the coverage threshold.
//!
//! All logarithms are natural. A statistic `R` is transformed to
//! `T = n θ_d f0 R^d − c1 log n − c2 log log n`; every CDF here is a
//! function of that `β`-scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{theta, DomainPair};

/// Which family of limit theorems applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Targets kept a positive distance inside the sampling region.
    Interior,
    Torus,
    SmoothBoundary,
    Polygon,
}

impl Regime {
    pub fn has_boundary(self) -> bool {
        matches!(self, Regime::SmoothBoundary | Regime::Polygon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    d: usize,
    k: usize,
    regime: Regime,
    tau: f64,
    tau_n: f64,
    f0: f64,
    sigma: Option<f64>,
    theta_d: f64,
    c_dk: f64,
}

/// `θ_d^{1−1/d}(1−1/d)^{k−2+1/d} / ((k−1)! 2^{1−1/d} θ_{d−1})`.
pub fn c_dk(d: usize, k: usize) -> Result<f64> {
    if d < 2 || k < 1 {
        return Err(Error::invalid(format!("c_dk needs d >= 2 and k >= 1, got d={d}, k={k}")));
    }
    let df = d as f64;
    let e = 1.0 - 1.0 / df;
    Ok(theta(d).powf(e) * e.powf(k as f64 - 2.0 + 1.0 / df)
        / (factorial(k - 1) * 2f64.powf(e) * theta(d - 1)))
}

/// `J(d, k) = 1` iff `d >= 3` or `k >= 2`.
pub fn j_indicator(d: usize, k: usize) -> bool {
    d >= 3 || k >= 2
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|i| i as f64).product()
}

impl Setting {
    pub fn new(d: usize, k: usize, regime: Regime, tau: f64, f0: f64, sigma: Option<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
        }
        if k < 1 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(Error::invalid(format!("f0 must be positive, got {f0}")));
        }
        if regime.has_boundary() {
            match sigma {
                Some(s) if s > 0.0 && s.is_finite() => {}
                _ => return Err(Error::invalid("boundary regimes need a positive sigma_A")),
            }
        }
        if regime == Regime::Polygon && d != 2 {
            return Err(Error::invalid("the polygon regime is planar"));
        }
        Ok(Setting {
            d,
            k,
            regime,
            tau,
            tau_n: tau,
            f0,
            sigma: if regime.has_boundary() { sigma } else { None },
            theta_d: theta(d),
            c_dk: c_dk(d, k)?,
        })
    }

    /// Setting implied by a domain pair: torus, interior (targets inside with
    /// clearance), polygon (squares and polygons) or smooth boundary.
    pub fn from_domain(pair: &DomainPair, k: usize, tau: f64) -> Result<Self> {
        let a = &pair.a;
        let regime = if a.is_torus() {
            Regime::Torus
        } else if pair.interior_flag {
            Regime::Interior
        } else if a.is_polygonal() {
            Regime::Polygon
        } else {
            Regime::SmoothBoundary
        };
        let sigma = if regime.has_boundary() { Some(a.sigma()?) } else { None };
        Setting::new(a.dim(), k, regime, tau, 1.0 / a.volume(), sigma)
    }

    /// Same setting with `τ_n = ⌊τ n⌋ / n`, the ratio realised by a binomial
    /// sample of `n` X-points.
    pub fn for_binomial(&self, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        let m = (self.tau * n as f64).floor();
        if m < 1.0 {
            return Err(Error::invalid(format!("floor(tau * n) = 0 for tau={}, n={n}", self.tau)));
        }
        Ok(Setting {
            tau_n: m / n as f64,
            ..self.clone()
        })
    }

    /// Same setting with an explicit finite-size ratio.
    pub fn with_tau_n(&self, tau_n: f64) -> Result<Self> {
        if !(tau_n > 0.0 && tau_n.is_finite()) {
            return Err(Error::invalid(format!("tau_n must be positive, got {tau_n}")));
        }
        Ok(Setting { tau_n, ..self.clone() })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_n(&self) -> f64 {
        self.tau_n
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn theta_d(&self) -> f64 {
        self.theta_d
    }

    pub fn c_dk(&self) -> f64 {
        self.c_dk
    }

    pub fn j(&self) -> bool {
        j_indicator(self.d, self.k)
    }

    fn sigma_or_zero(&self) -> f64 {
        self.sigma.unwrap_or(0.0)
    }

    /// True for the planar `k = 1` boundary case, whose centering has no
    /// `log log` term.
    fn planar_k1_boundary(&self) -> bool {
        self.regime.has_boundary() && self.d == 2 && self.k == 1
    }
}

/// `(c1, c2)` with `T = n θ_d f0 R^d − c1 log n − c2 log log n`.
pub fn centering(setting: &Setting) -> (f64, f64) {
    let d = setting.d as f64;
    let k = setting.k as f64;
    if !setting.regime.has_boundary() {
        (1.0, k - 1.0)
    } else if setting.planar_k1_boundary() {
        (1.0, 0.0)
    } else {
        (2.0 - 2.0 / d, 2.0 * k - 4.0 + 2.0 / d)
    }
}

fn check_scale(n: f64, min: f64, what: &str) -> Result<()> {
    if !(n > min && n.is_finite()) {
        return Err(Error::invalid(format!("{what} must exceed {min:.4}, got {n}")));
    }
    Ok(())
}

/// `T = n θ_d f0 R^d − c1 log n − c2 log log n`.
pub fn transform_statistic(r: f64, n: f64, setting: &Setting) -> Result<f64> {
    check_scale(n, std::f64::consts::E, "n")?;
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("threshold must be non-negative, got {r}")));
    }
    let (c1, c2) = centering(setting);
    let ln = n.ln();
    Ok(n * setting.theta_d * setting.f0 * r.powi(setting.d as i32) - c1 * ln - c2 * ln.ln())
}

/// Radius with `f0 t θ_d r^d = max(c1 log t + c2 log log t + β, 0)`, the
/// centering coefficients of the setting's regime.
pub fn r_t(beta: f64, t: f64, setting: &Setting) -> Result<f64> {
    check_scale(t, std::f64::consts::E, "t")?;
    let (c1, c2) = centering(setting);
    let ln = t.ln();
    let rhs = (c1 * ln + c2 * ln.ln() + beta).max(0.0);
    Ok((rhs / (setting.f0 * t * setting.theta_d)).powf(1.0 / setting.d as f64))
}

/// One term `e^{−rate·β}(c0 + c1 β)` of a CDF exponent.
///
/// Outside the range where the term is a nonincreasing function of `β` it
/// is frozen (or clipped at zero), so the resulting CDF stays monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub rate: f64,
    pub c0: f64,
    pub c1: f64,
}

impl ExpTerm {
    pub fn new(rate: f64, c0: f64, c1: f64) -> Self {
        ExpTerm { rate, c0, c1 }
    }

    pub fn eval(&self, beta: f64) -> f64 {
        if self.c1 > 0.0 {
            let peak = 1.0 / self.rate - self.c0 / self.c1;
            let b = beta.max(peak);
            (-self.rate * b).exp() * (self.c0 + self.c1 * b)
        } else {
            let lin = (self.c0 + self.c1 * beta).max(0.0);
            if lin == 0.0 {
                0.0
            } else {
                (-self.rate * beta).exp() * lin
            }
        }
    }
}

/// A CDF on the `β`-scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CdfModel {
    /// `exp(−e^{−(β−loc)/scale})`.
    Gumbel { loc: f64, scale: f64 },
    /// `exp(−(a e^{−β} + b e^{−β/2}))`: the law of the larger of two
    /// independent Gumbel variables with scales 1 and 2.
    Tcev { a: f64, b: f64 },
    /// `exp(−Σ terms)`.
    Corrected { terms: Vec<ExpTerm> },
    /// Right-continuous step function of sorted samples.
    Empirical { samples: Vec<f64> },
    /// `β ↦ base(β + offset)`: the base law moved left by `offset`.
    Shifted { base: Box<CdfModel>, offset: f64 },
}

impl CdfModel {
    pub fn gumbel(loc: f64, scale: f64) -> Self {
        CdfModel::Gumbel { loc, scale }
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical CDF of no samples"));
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::invalid("empirical CDF of NaN samples"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(CdfModel::Empirical { samples })
    }

    pub fn shifted(self, offset: f64) -> Self {
        match self {
            CdfModel::Shifted { base, offset: o } => CdfModel::Shifted {
                base,
                offset: o + offset,
            },
            other => CdfModel::Shifted {
                base: Box::new(other),
                offset,
            },
        }
    }

    pub fn eval(&self, beta: f64) -> f64 {
        match self {
            CdfModel::Gumbel { loc, scale } => (-(-(beta - loc) / scale).exp()).exp(),
            CdfModel::Tcev { a, b } => (-(a * (-beta).exp() + b * (-0.5 * beta).exp())).exp(),
            CdfModel::Corrected { terms } => (-terms.iter().map(|t| t.eval(beta)).sum::<f64>()).exp(),
            CdfModel::Empirical { samples } => {
                samples.partition_point(|&s| s <= beta) as f64 / samples.len() as f64
            }
            CdfModel::Shifted { base, offset } => base.eval(beta + offset),
        }
    }

    /// `F(β−)`; equals `eval` except at atoms of an empirical law.
    pub fn left_limit(&self, beta: f64) -> f64 {
        match self {
            CdfModel::Empirical { samples } => {
                samples.partition_point(|&s| s < beta) as f64 / samples.len() as f64
            }
            CdfModel::Shifted { base, offset } => base.left_limit(beta + offset),
            _ => self.eval(beta),
        }
    }

    /// The two Gumbel factors of a TCEV law: scale 1 and scale 2.
    pub fn tcev_factors(&self) -> Option<(CdfModel, CdfModel)> {
        match *self {
            CdfModel::Tcev { a, b } => Some((CdfModel::gumbel(a.ln(), 1.0), CdfModel::gumbel(2.0 * b.ln(), 2.0))),
            _ => None,
        }
    }

    /// `(β, F(β))` over a grid.
    pub fn curve(&self, grid: &BetaGrid) -> Vec<(f64, f64)> {
        grid.points().map(|b| (b, self.eval(b))).collect()
    }
}

/// Gumbel law with `exp(−c e^{−β/scale})`: location `scale · log c`.
fn gumbel_with_coefficient(c: f64, scale: f64) -> CdfModel {
    CdfModel::gumbel(scale * c.ln(), scale)
}

/// The `n → ∞` law of `T`.
pub fn limit_cdf(setting: &Setting) -> CdfModel {
    let tau = setting.tau;
    let k = setting.k;
    if !setting.regime.has_boundary() {
        return gumbel_with_coefficient(tau / factorial(k - 1), 1.0);
    }
    let sigma = setting.sigma_or_zero();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    match (setting.d, k) {
        (2, 1) => gumbel_with_coefficient(tau, 1.0),
        (2, 2) => CdfModel::Tcev {
            a: tau,
            b: tau * sqrt_pi * sigma / 4.0,
        },
        _ => gumbel_with_coefficient(setting.c_dk * tau * sigma, 2.0),
    }
}

/// Finite-size CDF of `T`: the theorem's right-hand side kept with its
/// vanishing factors, remainder terms dropped. Uses `τ_n` of the setting
/// (equal to `τ` unless set by [`Setting::for_binomial`]).
pub fn corrected_cdf(setting: &Setting, n: f64) -> Result<CdfModel> {
    check_scale(n, std::f64::consts::E.exp(), "n")?;
    let ln = n.ln();
    let lln = ln.ln();
    let tau = setting.tau_n;
    let d = setting.d as f64;
    let k = setting.k;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let sigma = setting.sigma_or_zero();

    let terms = if !setting.regime.has_boundary() {
        let j = (k - 1) as f64;
        let base = tau / factorial(k - 1);
        let mut c0 = base * (1.0 + j * j * lln / ln);
        let mut c1 = 0.0;
        if setting.d >= 3 {
            c0 += base * j / ln;
            c1 = base * j / ln;
        }
        vec![ExpTerm::new(1.0, c0, c1)]
    } else {
        match (setting.d, k) {
            (2, 1) => vec![
                ExpTerm::new(1.0, tau, 0.0),
                ExpTerm::new(0.5, tau * sqrt_pi * sigma / (2.0 * ln.sqrt()), 0.0),
            ],
            (2, 2) => vec![
                ExpTerm::new(1.0, tau, 0.0),
                ExpTerm::new(0.5, tau * sqrt_pi * sigma / 4.0 * (1.0 + lln / (2.0 * ln)), 0.0),
            ],
            (2, _) => {
                let g = k as f64 - 2.0 + 1.0 / d;
                let c = setting.c_dk * tau * sigma;
                vec![ExpTerm::new(0.5, c * (1.0 + g * g * lln / ((1.0 - 1.0 / d) * ln)), 0.0)]
            }
            _ => {
                let g = k as f64 - 2.0 + 1.0 / d;
                let c = setting.c_dk * tau * sigma;
                let denom = (2.0 - 2.0 / d) * ln;
                let c0 = c * (1.0 + g * g * lln / ((1.0 - 1.0 / d) * ln) + (4.0 * k as f64 - 4.0) / denom);
                vec![ExpTerm::new(0.5, c0, c * g / denom)]
            }
        }
    };
    Ok(CdfModel::Corrected { terms })
}

/// `β` with `F(β) = 1/2`.
pub fn median_shift(model: &CdfModel) -> Result<f64> {
    match model {
        CdfModel::Gumbel { loc, scale } => return Ok(loc - scale * std::f64::consts::LN_2.ln()),
        CdfModel::Empirical { .. } => {
            return Err(Error::invalid("median shift needs a continuous, strictly increasing model"))
        }
        CdfModel::Shifted { base, offset } => return Ok(median_shift(base)? - offset),
        _ => {}
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut steps = 0;
    while model.eval(lo) >= 0.5 || model.eval(hi) < 0.5 {
        if model.eval(lo) >= 0.5 {
            lo = 2.0 * lo - 1.0;
        }
        if model.eval(hi) < 0.5 {
            hi = 2.0 * hi + 1.0;
        }
        steps += 1;
        if steps > 60 {
            return Err(Error::numerical("could not bracket the median"));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if model.eval(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Evenly spaced `β` values `min, min + step, ...` up to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for BetaGrid {
    fn default() -> Self {
        BetaGrid {
            min: -5.0,
            max: 10.0,
            step: 0.01,
        }
    }
}

impl BetaGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let grid = BetaGrid { min, max, step };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.min.is_finite() && self.max.is_finite() && self.max >= self.min) {
            return Err(Error::invalid(format!(
                "bad beta grid: min={}, max={}, step={}",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.min + i as f64 * self.step)
    }
}
