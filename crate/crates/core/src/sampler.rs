//! Binomial and Poisson realizations of the two point processes.
//!
//! Randomness is pinned so that a `(pair, mode, seed)` triple reproduces the
//! same points on every platform:
//!
//! * generator: ChaCha8 (`rand_chacha`), keyed by `seed_from_u64(seed)`;
//!   the X-sample reads stream 0 and the Y-sample stream 1;
//! * uniforms: `(next_u64() >> 11) · 2^-53`;
//! * Poisson counts: inversion for means below 30, Hörmann's PTRS
//!   transformed rejection otherwise;
//! * replicate seeds: [`mix`], one SplitMix64 step.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{unit_f64, DomainPair, Region};

/// Seed of replicate `index`: the SplitMix64 output for state
/// `seed + (index + 1) · 0x9E3779B97F4A7C15`.
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one stream of a seeded realization.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Points of one dimension stored contiguously, `dim` coordinates each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        PointSet {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        PointSet {
            dim,
            coords: Vec::with_capacity(dim * n),
        }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::invalid("coordinate count is not a multiple of the dimension"));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut set = PointSet::with_capacity(dim, points.len());
        for p in points {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, expected {}",
                p.len(),
                self.dim
            )));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> PointSet {
        PointSet {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * factor).collect(),
        }
    }

    fn fill_uniform(region: &Region, n: usize, rng: &mut ChaCha8Rng) -> PointSet {
        let dim = region.dim();
        let mut coords = vec![0.0; n * dim];
        for chunk in coords.chunks_exact_mut(dim) {
            region.sample_into(rng, chunk);
        }
        PointSet { dim, coords }
    }
}

/// How the sample sizes were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SampleMode {
    Binomial { n: u64, m: u64 },
    Poisson { t: f64, u: f64 },
}

/// One realization: X-points in `A`, Y-points in `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessPair {
    pub xs: PointSet,
    pub ys: PointSet,
    pub mode: SampleMode,
    pub seed: u64,
}

impl ProcessPair {
    /// CSV with columns `role,coord_1,...,coord_d`.
    pub fn to_csv(&self) -> String {
        let d = self.xs.dim();
        let mut out = String::from("role");
        for i in 1..=d {
            let _ = write!(out, ",coord_{i}");
        }
        out.push('\n');
        for (role, set) in [("X", &self.xs), ("Y", &self.ys)] {
            for p in set.iter() {
                out.push_str(role);
                for c in p {
                    let _ = write!(out, ",{c:e}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// `n` uniform points in `A` and `m` uniform points in `B`.
pub fn sample_binomial(pair: &DomainPair, n: u64, m: u64, seed: u64) -> Result<ProcessPair> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("binomial sample sizes must be at least 1"));
    }
    let mut rx = stream_rng(seed, 0);
    let mut ry = stream_rng(seed, 1);
    Ok(ProcessPair {
        xs: PointSet::fill_uniform(&pair.a, n as usize, &mut rx),
        ys: PointSet::fill_uniform(&pair.b, m as usize, &mut ry),
        mode: SampleMode::Binomial { n, m },
        seed,
    })
}

/// Poisson processes of total intensities `t` on `A` and `u` on `B`: the
/// counts are drawn first, then that many uniform points.
pub fn sample_poisson(pair: &DomainPair, t: f64, u: f64, seed: u64) -> Result<ProcessPair> {
    if !(t > 0.0 && t.is_finite() && u > 0.0 && u.is_finite()) {
        return Err(Error::invalid(format!("intensities must be positive, got t={t}, u={u}")));
    }
    let mut rx = stream_rng(seed, 0);
    let mut ry = stream_rng(seed, 1);
    let n = poisson_count(&mut rx, t);
    let m = poisson_count(&mut ry, u);
    Ok(ProcessPair {
        xs: PointSet::fill_uniform(&pair.a, n as usize, &mut rx),
        ys: PointSet::fill_uniform(&pair.b, m as usize, &mut ry),
        mode: SampleMode::Poisson { t, u },
        seed,
    })
}

/// Poisson(`mean`) variate: inversion below 30, PTRS above.
pub fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let mut p = (-mean).exp();
        let mut cdf = p;
        let u = unit_f64(rng);
        let mut k = 0u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return k;
    }
    // W. Hörmann, "The transformed rejection method for generating Poisson
    // random variables", Insurance: Mathematics and Economics 12 (1993).
    let smu = mean.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let log_mean = mean.ln();
    loop {
        let u = unit_f64(rng) - 0.5;
        let v = unit_f64(rng);
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        if lhs <= -mean + k * log_mean - ln_factorial(k as u64) {
            return k as u64;
        }
    }
}

/// `ln(k!)`: exact summation up to 256, Stirling series beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k <= 256 {
        return (2..=k).map(|j| (j as f64).ln()).sum();
    }
    let n = k as f64;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;

    fn unit_square() -> DomainPair {
        DomainPair::same(Region::square(1.0).unwrap())
    }

    #[test]
    fn binomial_is_deterministic() {
        let pair = unit_square();
        let a = sample_binomial(&pair, 3, 2, 99).unwrap();
        let b = sample_binomial(&pair, 3, 2, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.xs.len(), 3);
        assert_eq!(a.ys.len(), 2);
        assert_ne!(a, sample_binomial(&pair, 3, 2, 100).unwrap());
    }

    #[test]
    fn zero_sizes_rejected() {
        let pair = unit_square();
        assert!(sample_binomial(&pair, 0, 2, 1).is_err());
        assert!(sample_binomial(&pair, 2, 0, 1).is_err());
        assert!(sample_poisson(&pair, 0.0, 1.0, 1).is_err());
        assert!(sample_poisson(&pair, 1.0, -1.0, 1).is_err());
    }

    #[test]
    fn targets_stay_in_inner_disk() {
        let pair = DomainPair::interior(Region::disk(1.0).unwrap(), Region::disk(0.9).unwrap()).unwrap();
        let s = sample_binomial(&pair, 10_000, 10_000, 5).unwrap();
        assert!(s.ys.iter().all(|y| y[0].hypot(y[1]) <= 0.9));
        assert!(s.xs.iter().all(|x| x[0].hypot(x[1]) <= 1.0));
        assert!(s.xs.iter().any(|x| x[0].hypot(x[1]) > 0.9));
    }

    #[test]
    fn left_half_count_is_binomial() {
        let pair = unit_square();
        let reps = 1000;
        let total: usize = (0..reps)
            .map(|i| {
                let s = sample_binomial(&pair, 100, 1, mix(7, i)).unwrap();
                s.xs.iter().filter(|p| p[0] < 0.5).count()
            })
            .sum();
        let mean = total as f64 / reps as f64;
        // Binomial(100, 1/2): sd 5, standard error of the mean 5/sqrt(1000)
        assert!((mean - 50.0).abs() < 4.0 * 5.0 / (reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn poisson_counts_have_right_moments() {
        for &mean in &[3.5, 50.0, 1e4] {
            let mut rng = stream_rng(11, 0);
            let n = 20_000;
            let draws: Vec<f64> = (0..n).map(|_| poisson_count(&mut rng, mean) as f64).collect();
            let m = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((m - mean).abs() < 4.0 * (mean / n as f64).sqrt(), "mean {m} vs {mean}");
            // variance of the sample variance of a Poisson is about (2 mean^2 + mean)/n
            let sd_var = ((2.0 * mean * mean + mean) / n as f64).sqrt();
            assert!((var - mean).abs() < 4.0 * sd_var, "var {var} vs {mean}");
        }
    }

    #[test]
    fn poisson_pmf_matches_chi_square() {
        // mean 40 exercises the PTRS branch
        let mean = 40.0;
        let mut rng = stream_rng(12, 0);
        let n = 50_000usize;
        let mut counts = vec![0usize; 120];
        for _ in 0..n {
            counts[(poisson_count(&mut rng, mean) as usize).min(119)] += 1;
        }
        let pmf = |k: u64| (-mean + k as f64 * mean.ln() - ln_factorial(k)).exp();
        let (mut chi2, mut dof) = (0.0, 0usize);
        for k in 20..=60u64 {
            let e = pmf(k) * n as f64;
            chi2 += (counts[k as usize] as f64 - e).powi(2) / e;
            dof += 1;
        }
        // 41 cells; the 0.999 quantile of chi^2_41 is about 74.7
        assert!(chi2 < 74.7, "chi2 = {chi2} over {dof} cells");
    }

    #[test]
    fn poisson_sample_sizes_and_thinning() {
        let pair = unit_square();
        let reps = 2000;
        let t = 50.0;
        let mut sub_counts = vec![0usize; 20];
        let mut xs_total = 0usize;
        for i in 0..reps {
            let s = sample_poisson(&pair, t, t, mix(3, i)).unwrap();
            xs_total += s.xs.len();
            // subregion [0, 0.2] x [0, 1]: Poisson(10)
            let c = s.xs.iter().filter(|p| p[0] < 0.2).count();
            sub_counts[c.min(19)] += 1;
        }
        let mean = xs_total as f64 / reps as f64;
        assert!((mean - t).abs() < 4.0 * (t / reps as f64).sqrt());
        let sub_mean = 10.0;
        let mut chi2 = 0.0;
        for (k, &c) in sub_counts.iter().enumerate().take(19).skip(3) {
            let e = reps as f64 * (-sub_mean + k as f64 * f64::ln(sub_mean) - ln_factorial(k as u64)).exp();
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // 16 cells; 0.999 quantile of chi^2_16 is 39.25
        assert!(chi2 < 39.25, "chi2 {chi2}");
    }

    #[test]
    fn poisson_counts_independent() {
        let pair = unit_square();
        let n = 10_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let s = sample_poisson(&pair, 20.0, 20.0, mix(21, i)).unwrap();
            let (a, b) = (s.xs.len() as f64, s.ys.len() as f64);
            sx += a;
            sy += b;
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx * sy / nf / nf;
        let corr = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!(corr.abs() < 0.03, "corr {corr}");
    }

    #[test]
    fn replicate_streams_uncorrelated() {
        // first uniforms of neighbouring replicate seeds
        let n = 20_000;
        let a: Vec<f64> = (0..n).map(|i| unit_f64(&mut stream_rng(mix(5, i), 0))).collect();
        let b: Vec<f64> = (0..n).map(|i| unit_f64(&mut stream_rng(mix(5, i + 1), 0))).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        let corr = cov / (1.0 / 12.0);
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn mix_is_pinned() {
        // SplitMix64 reference output for state 0x9E3779B97F4A7C15
        assert_eq!(mix(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_ne!(mix(1, 0), mix(0, 1));
    }

    #[test]
    fn ln_factorial_branches_agree() {
        let direct: f64 = (2..=300u64).map(|j| (j as f64).ln()).sum();
        assert!((ln_factorial(300) - direct).abs() < 1e-10);
        assert_eq!(ln_factorial(0), 0.0);
    }

    #[test]
    fn csv_dump_layout() {
        let s = sample_binomial(&unit_square(), 2, 1, 1).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "role,coord_1,coord_2");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("Y,"));
    }
}
