//! Vacancy expectations `γ_t(B) = (t/|B|) ∫_B p_t(x) dx`, where
//! `p_t(x) = Pr[Poisson(μ_t(x)) ≤ k − 1]` and `μ_t(x) = t f0 |B_r(x) ∩ A|`,
//! computed by quadrature and by Monte Carlo, together with their
//! asymptotic expansions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circle_polygon_area, slice_volume, theta, unit_f64, DomainPair, Region, Shape};
use crate::limits::{Regime, Setting};
use crate::quad::Quadrature;
use crate::sampler::{ln_factorial, stream_rng};

/// `Pr[Poisson(mu) ≤ k − 1]`, summed in log space.
pub fn poisson_lower_tail(mu: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if mu <= 0.0 {
        return 1.0;
    }
    let lm = mu.ln();
    let logs: Vec<f64> = (0..k as u64).map(|j| j as f64 * lm - ln_factorial(j)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    (-mu + top + sum.ln()).exp().min(1.0)
}

/// Parameters of a vacancy computation.
#[derive(Debug, Clone, PartialEq)]
pub struct VacancyQuery {
    pub pair: DomainPair,
    pub t: f64,
    pub r: f64,
    pub k: usize,
}

impl VacancyQuery {
    pub fn new(pair: DomainPair, t: f64, r: f64, k: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("intensity must be positive, got {t}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if pair.a.is_torus() {
            let side = pair.a.side().expect("torus has a side");
            if 2.0 * r >= side {
                return Err(Error::invalid(format!("radius {r} reaches around the torus")));
            }
        }
        Ok(VacancyQuery { pair, t, r, k })
    }

    pub fn f0(&self) -> f64 {
        1.0 / self.pair.a.volume()
    }

    /// `μ_t(x) = t f0 |B_r(x) ∩ A|`.
    pub fn mu(&self, x: &[f64]) -> Result<f64> {
        Ok(self.t * self.f0() * self.pair.a.ball_intersection_volume(x, self.r)?)
    }

    fn mu_unchecked(&self, x: &[f64]) -> Result<f64> {
        Ok(self.t * self.f0() * self.pair.a.ball_volume_unchecked(x, self.r)?)
    }

    fn p_of_volume(&self, volume: f64) -> f64 {
        poisson_lower_tail(self.t * self.f0() * volume, self.k)
    }

    /// Vacancy probability away from `∂A`.
    fn p_bulk(&self) -> f64 {
        self.p_of_volume(theta(self.pair.dim()) * self.r.powi(self.pair.dim() as i32))
    }

    /// True when every ball `B_r(x)`, `x ∈ B`, stays inside `A`.
    fn constant_integrand(&self) -> bool {
        self.pair.a.is_torus() || (self.pair.interior_flag && self.r <= self.pair.clearance())
    }
}

/// `p_t(x)` for `x ∈ B`.
pub fn vacancy_probability(q: &VacancyQuery, x: &[f64]) -> Result<f64> {
    if !q.pair.b.contains(x) {
        return Err(Error::invalid(format!("point {x:?} is not in the target region")));
    }
    Ok(poisson_lower_tail(q.mu(x)?, q.k))
}

fn quadrature() -> Quadrature {
    Quadrature::with_tolerances(1e-12, 1e-10)
}

/// `γ_t(B)` by dimension-reduced quadrature: constant integrand on the torus
/// or deep inside `A`, a radial integral for disks and balls, and an
/// interior / edge-strip / corner split for squares.
pub fn gamma_quadrature(q: &VacancyQuery) -> Result<f64> {
    let t = q.t;
    if q.constant_integrand() {
        return Ok(t * q.p_bulk());
    }
    let a = &q.pair.a;
    let b = &q.pair.b;
    match (a.shape(), b.shape()) {
        (Shape::Disk { radius: ra } | Shape::Ball { radius: ra, .. }, Shape::Disk { radius: rb } | Shape::Ball { radius: rb, .. }) => {
            radial_gamma(q, *ra, *rb)
        }
        (Shape::Square { side }, Shape::Square { .. }) if !q.pair.interior_flag => square_gamma(q, *side),
        _ => Err(Error::invalid(format!(
            "no quadrature rule for {} inside {} at this radius; use gamma_mc",
            b.kind_name(),
            a.kind_name()
        ))),
    }
}

fn radial_gamma(q: &VacancyQuery, ra: f64, rb: f64) -> Result<f64> {
    let d = q.pair.dim();
    let r = q.r;
    let th = theta(d);
    let full = (ra - r).max(0.0).min(rb);
    let mut total = th * full.powi(d as i32) * q.t * q.p_bulk();
    if rb > full {
        let f = |s: f64| {
            let mut x = vec![0.0; d];
            x[0] = s;
            let p = q.mu_unchecked(&x).map(|mu| poisson_lower_tail(mu, q.k)).unwrap_or(f64::NAN);
            q.t * p * d as f64 * th * s.powi(d as i32 - 1)
        };
        let pieces: Vec<f64> = (0..=16).map(|i| full + (rb - full) * i as f64 / 16.0).collect();
        total += quadrature().integrate_pieces(f, &pieces)?.value;
    }
    Ok(total / (th * rb.powi(d as i32)))
}

fn square_gamma(q: &VacancyQuery, side: f64) -> Result<f64> {
    let r = q.r;
    if 2.0 * r > side {
        return Err(Error::invalid(format!(
            "square quadrature needs 2r <= side, got r={r}, side={side}"
        )));
    }
    let t = q.t;
    let quad = quadrature();
    let bulk = (side - 2.0 * r).powi(2) * t * q.p_bulk();
    // edge strip: distance a to one edge, the ball cut by that edge only
    let strip = quad
        .integrate(
            |a| t * q.p_of_volume(r * r * (0.5 * PI + slice_volume(a / r, 2).unwrap_or(f64::NAN))),
            0.0,
            r,
        )?
        .value;
    let verts = q.pair.a.vertices().to_vec();
    let inner = Quadrature::with_tolerances(1e-13, 1e-11);
    let corner = quad
        .integrate(
            |x| {
                inner
                    .integrate(|y| t * q.p_of_volume(circle_polygon_area(&verts, [x, y], r)), 0.0, r)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
            },
            0.0,
            r,
        )?
        .value;
    let total = bulk + 4.0 * (side - 2.0 * r) * strip + 4.0 * corner;
    Ok(total / (side * side))
}

/// Monte Carlo estimate of `γ_t(B)` and its standard error.
///
/// When `B = A` and the inner parallel body of `A` is known, the bulk
/// (where `p_t` is constant) is integrated exactly and all samples go to the
/// boundary strip; otherwise `x` is drawn uniformly from `B`.
pub fn gamma_mc(q: &VacancyQuery, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 1000 {
        return Err(Error::invalid(format!("gamma_mc needs at least 1000 samples, got {samples}")));
    }
    let t = q.t;
    if q.constant_integrand() {
        return Ok((t * q.p_bulk(), 0.0));
    }
    let a = &q.pair.a;
    let b = &q.pair.b;
    let mut rng = stream_rng(seed, 0);
    let d = q.pair.dim();
    let mut x = vec![0.0; d];
    let b_volume = b.volume();

    let stratified = if q.pair.interior_flag { None } else { a.inner_parallel_volume(q.r) };
    let (weight, constant) = match stratified {
        Some(bulk_volume) => {
            let moat = b_volume - bulk_volume;
            (moat / b_volume, bulk_volume / b_volume * t * q.p_bulk())
        }
        None => (1.0, 0.0),
    };
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        match stratified {
            Some(_) => sample_moat(a, q.r, &mut rng, &mut x),
            None => b.sample_into(&mut rng, &mut x),
        }
        let v = t * poisson_lower_tail(q.mu_unchecked(&x)?, q.k);
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((constant + weight * mean, weight * (var / n).sqrt()))
}

/// Uniform point of `{x ∈ A : dist(x, ∂A) < r}`.
fn sample_moat(a: &Region, r: f64, rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
    match *a.shape() {
        Shape::Disk { radius } | Shape::Ball { radius, .. } => {
            let d = a.dim();
            let lo = (radius - r).max(0.0).powi(d as i32);
            let hi = radius.powi(d as i32);
            let s = (lo + (hi - lo) * unit_f64(rng)).powf(1.0 / d as f64);
            loop {
                let mut n2 = 0.0;
                for c in out.iter_mut() {
                    *c = 2.0 * unit_f64(rng) - 1.0;
                    n2 += *c * *c;
                }
                if n2 > 1e-12 && n2 <= 1.0 {
                    let scale = s / n2.sqrt();
                    for c in out.iter_mut() {
                        *c *= scale;
                    }
                    return;
                }
            }
        }
        Shape::Square { side } => {
            // four r × (side − r) rectangles tiling the frame
            let u = (side - r) * unit_f64(rng);
            let v = r * unit_f64(rng);
            let (px, py) = match (4.0 * unit_f64(rng)) as usize {
                0 => (u, v),
                1 => (side - v, u),
                2 => (side - u, side - v),
                _ => (v, side - u),
            };
            out[0] = px;
            out[1] = py;
        }
        _ => loop {
            a.sample_into(rng, out);
            if a.boundary_distance_unchecked(out) < r {
                return;
            }
        },
    }
}

/// Asymptotic value of `t E|V_{t, r_t(β), k} ∩ B|` with `r_t(β)` from the
/// setting's radius schedule, remainder terms dropped. For boundary regimes
/// and the torus `B = A`; for the interior regime the value is per unit
/// volume of `B`.
pub fn moat_bulk_expansion(setting: &Setting, t: f64, beta: f64) -> Result<f64> {
    if !(t > std::f64::consts::E && t.is_finite()) {
        return Err(Error::invalid(format!("t must exceed e, got {t}")));
    }
    let ln = t.ln();
    let lln = ln.ln();
    let k = setting.k();
    let d = setting.d() as f64;
    let volume = 1.0 / setting.f0();
    let eb = (-beta).exp();
    let eb2 = (-0.5 * beta).exp();

    if !setting.regime().has_boundary() {
        let j = (k - 1) as f64;
        let fact = ln_factorial(k as u64 - 1).exp();
        let power = eb / fact * (1.0 + j * j * lln / ln + j * (1.0 + beta) / ln);
        return Ok(match setting.regime() {
            Regime::Torus => volume * power,
            _ => power,
        });
    }

    let sigma = setting.sigma().expect("boundary regimes carry sigma");
    let perimeter = sigma * volume.powf(1.0 - 1.0 / d);
    if setting.d() == 2 {
        let root = (PI / setting.f0()).sqrt();
        return Ok(match k {
            1 => volume * eb + perimeter * eb2 * root / 2.0 / ln.sqrt(),
            2 => volume * eb + perimeter * eb2 * root / 4.0 * (1.0 + lln / (2.0 * ln)) + volume * eb * lln / ln,
            _ => {
                let g = 2.0 * k as f64 - 3.0;
                perimeter * eb2 * root / (ln_factorial(k as u64 - 1).exp() * 2f64.powi(k as i32))
                    * (1.0 + g * g * lln / (2.0 * ln))
            }
        });
    }
    let g = k as f64 - 2.0 + 1.0 / d;
    Ok(eb2 * setting.c_dk() * setting.f0().powf(-1.0 / d) * perimeter
        * (1.0 + g * g * lln / ((1.0 - 1.0 / d) * ln) + (g * beta + 4.0 * k as f64 - 4.0) / ((2.0 - 2.0 / d) * ln)))
}

/// Which of the two boundary-layer integral identities to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLayerForm {
    /// `θ_{d−1}∫_0^1 e^{−s h}(α0 + h)^ℓ da ≈ α0^ℓ/s + ℓ α0^{ℓ−1}/s²`.
    Plain,
    /// Integrand times `1 + ℓ/(s(α0 + h))`; expansion `α0^ℓ/s + 2ℓ α0^{ℓ−1}/s²`.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayerCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Quadrature value, two-term expansion and their difference for the
/// boundary-layer integral with slice function `h` of dimension `d`.
pub fn boundary_layer_check(s: f64, alpha0: f64, ell: u32, d: usize, form: BoundaryLayerForm) -> Result<BoundaryLayerCheck> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::invalid(format!("scale must exceed 1, got {s}")));
    }
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::invalid(format!("alpha0 must be positive, got {alpha0}")));
    }
    if d < 2 {
        return Err(Error::invalid("dimension must be at least 2"));
    }
    let th = theta(d - 1);
    let l = ell as f64;
    let integrand = |a: f64| {
        let h = slice_volume(a, d).unwrap_or(f64::NAN);
        let base = th * (-s * h).exp() * (alpha0 + h).powi(ell as i32);
        match form {
            BoundaryLayerForm::Plain => base,
            BoundaryLayerForm::Weighted => base * (1.0 + l / (s * (alpha0 + h))),
        }
    };
    let mut pieces = vec![0.0];
    for c in [0.25, 1.0, 3.0, 10.0, 30.0, 100.0] {
        let p = c / (th * s);
        if p < 1.0 {
            pieces.push(p);
        }
    }
    pieces.push(1.0);
    let q = Quadrature::with_tolerances(1e-15 / s, 1e-14);
    let lhs = q.integrate_pieces(integrand, &pieces)?.value;
    let second = if ell == 0 { 0.0 } else { l * alpha0.powi(ell as i32 - 1) };
    let factor = match form {
        BoundaryLayerForm::Plain => 1.0,
        BoundaryLayerForm::Weighted => 2.0,
    };
    let rhs = alpha0.powi(ell as i32) / s + factor * second / (s * s);
    Ok(BoundaryLayerCheck {
        lhs,
        rhs,
        residual: lhs - rhs,
    })
}

/// Sampling scheme behind a probability or a sample of thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Binomial,
    Poisson,
}

/// `exp(−τ γ_t(B))` (Poisson) or `exp(−τ_n γ_n(B))` (binomial, `t = n`,
/// `τ_n = ⌊τ n⌋/n`). Polygons fall back to `gamma_mc` with 10⁵ samples.
pub fn predicted_probability(pair: &DomainPair, setting: &Setting, n_or_t: f64, r: f64, mode: Mode) -> Result<f64> {
    let tau = match mode {
        Mode::Poisson => setting.tau(),
        Mode::Binomial => {
            if n_or_t < 1.0 || n_or_t.fract() != 0.0 {
                return Err(Error::invalid(format!("binomial n must be a positive integer, got {n_or_t}")));
            }
            setting.for_binomial(n_or_t as u64)?.tau_n()
        }
    };
    let q = VacancyQuery::new(pair.clone(), n_or_t, r, setting.k())?;
    let gamma = match gamma_quadrature(&q) {
        Ok(g) => g,
        Err(Error::InvalidInput(_)) => gamma_mc(&q, 100_000, 0)?.0,
        Err(e) => return Err(e),
    };
    Ok((-tau * gamma).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::r_t;

    fn disk() -> DomainPair {
        DomainPair::same(Region::disk(1.0).unwrap())
    }

    #[test]
    fn tail_examples() {
        let t = 1e4f64;
        assert!((poisson_lower_tail(t.ln(), 1) - 1.0 / t).abs() < 1e-18);
        assert!((poisson_lower_tail(1.0, 2) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(poisson_lower_tail(0.0, 3), 1.0);
        let big = poisson_lower_tail(1e6, 5);
        assert!(big == 0.0 || big.is_normal());
        // direct summation where it is safe
        let mu = 7.3f64;
        let direct: f64 = (0..4).map(|j| (-mu).exp() * mu.powi(j) / ln_factorial(j as u64).exp()).sum();
        assert!((poisson_lower_tail(mu, 4) - direct).abs() < 1e-15);
    }

    #[test]
    fn torus_gamma_is_constant() {
        let pair = DomainPair::same(Region::torus(2, 1.0).unwrap());
        let q = VacancyQuery::new(pair, 1e4, 0.02, 2).unwrap();
        let g = gamma_quadrature(&q).unwrap();
        let mu = 1e4 * PI * 0.0004;
        assert!((g - 1e4 * poisson_lower_tail(mu, 2)).abs() < 1e-12 * g);
        let (mc, se) = gamma_mc(&q, 1000, 1).unwrap();
        assert_eq!(mc, g);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn interior_gamma_is_constant() {
        let pair = DomainPair::interior(Region::disk(1.0).unwrap(), Region::disk(0.5).unwrap()).unwrap();
        let t = 1e4;
        let r = 0.05;
        let q = VacancyQuery::new(pair, t, r, 1).unwrap();
        let g = gamma_quadrature(&q).unwrap();
        let expected = t * (-t / PI * PI * r * r).exp();
        assert!((g - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn interior_pair_with_large_radius_integrates_radially() {
        let pair = DomainPair::interior(Region::disk(1.0).unwrap(), Region::disk(0.95).unwrap()).unwrap();
        let q = VacancyQuery::new(pair, 1e3, 0.1, 1).unwrap();
        let g = gamma_quadrature(&q).unwrap();
        let (mc, se) = gamma_mc(&q, 200_000, 3).unwrap();
        assert!((g - mc).abs() < 4.0 * se, "{g} {mc} {se}");
    }

    #[test]
    fn quadrature_matches_monte_carlo() {
        let cases = [
            (disk(), 1),
            (DomainPair::same(Region::square(1.0).unwrap()), 2),
            (DomainPair::same(Region::ball(3, 1.0).unwrap()), 1),
        ];
        for (pair, k) in cases {
            let setting = Setting::from_domain(&pair, k, 1.0).unwrap();
            let t = 1e3;
            let r = r_t(0.0, t, &setting).unwrap();
            let q = VacancyQuery::new(pair, t, r, k).unwrap();
            let g = gamma_quadrature(&q).unwrap();
            let (mc, se) = gamma_mc(&q, 100_000, 9).unwrap();
            assert!((g - mc).abs() < 4.0 * se, "{}: {g} vs {mc} ± {se}", q.pair.a.kind_name());
        }
    }

    #[test]
    fn vacancy_probability_checks_membership() {
        let q = VacancyQuery::new(disk(), 1e3, 0.1, 1).unwrap();
        assert!(vacancy_probability(&q, &[2.0, 0.0]).is_err());
        let p = vacancy_probability(&q, &[0.0, 0.0]).unwrap();
        assert!((p - (-1e3 * 0.01f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mc_error_scales_with_samples() {
        let q = VacancyQuery::new(disk(), 1e3, 0.08, 2).unwrap();
        let (_, s1) = gamma_mc(&q, 20_000, 1).unwrap();
        let (_, s2) = gamma_mc(&q, 80_000, 2).unwrap();
        let ratio = s1 / s2;
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        assert!(gamma_mc(&q, 999, 1).is_err());
    }

    #[test]
    fn polygons_fall_back() {
        let pair = DomainPair::same(Region::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap());
        let q = VacancyQuery::new(pair, 1e3, 0.05, 1).unwrap();
        assert!(matches!(gamma_quadrature(&q), Err(Error::InvalidInput(_))));
        let (g, se) = gamma_mc(&q, 10_000, 5).unwrap();
        assert!(g > 0.0 && se > 0.0);
    }

    #[test]
    fn expansion_example_and_decay() {
        let s = Setting::from_domain(&disk(), 1, 1.0).unwrap();
        let t = 1e6f64;
        let e = moat_bulk_expansion(&s, t, 0.0).unwrap();
        let expected = PI + 2.0 * PI * PI / 2.0 / t.ln().sqrt();
        assert!((e - expected).abs() < 1e-12 * expected);
        for k in 1..=4 {
            let s = Setting::from_domain(&disk(), k, 1.0).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..40 {
                let v = moat_bulk_expansion(&s, t, i as f64).unwrap();
                assert!(v < prev && v > 0.0);
                prev = v;
            }
            assert!(moat_bulk_expansion(&s, t, 80.0).unwrap() < 1e-15);
        }
    }

    #[test]
    fn interior_expansion_has_no_boundary_term() {
        let s = Setting::new(3, 3, Regime::Interior, 1.0, 0.25, None).unwrap();
        let t = 1e5f64;
        let (l, ll) = (t.ln(), t.ln().ln());
        let beta = 0.4;
        let expected = (-beta as f64).exp() / 2.0 * (1.0 + 4.0 * ll / l + 2.0 * (1.0 + beta) / l);
        assert!((moat_bulk_expansion(&s, t, beta).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn boundary_layer_zero_power_ignores_alpha() {
        let a = boundary_layer_check(500.0, 0.3, 0, 2, BoundaryLayerForm::Plain).unwrap();
        let b = boundary_layer_check(500.0, 7.0, 0, 2, BoundaryLayerForm::Plain).unwrap();
        assert_eq!(a.lhs, b.lhs);
        assert!((a.lhs * 500.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn boundary_layer_residual_shrinks() {
        for form in [BoundaryLayerForm::Plain, BoundaryLayerForm::Weighted] {
            let mut prev = f64::INFINITY;
            for j in 0..6 {
                let s = 100.0 * 2f64.powi(j);
                let res = boundary_layer_check(s, PI / 2.0, 1, 2, form).unwrap().residual.abs();
                assert!(res < prev, "{form:?} s={s}");
                prev = res;
            }
        }
    }

    #[test]
    fn predicted_probability_edges() {
        let pair = DomainPair::same(Region::torus(2, 1.0).unwrap());
        let s = Setting::from_domain(&pair, 1, 1.0).unwrap();
        let p = predicted_probability(&pair, &s, 1e4, 0.45, Mode::Poisson).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        // γ = 1 when t p = 1, i.e. t θ r² = log t on the unit torus
        let t = 1e4f64;
        let r = (t.ln() / (PI * t)).sqrt();
        let p = predicted_probability(&pair, &s, t, r, Mode::Poisson).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
    }
}
