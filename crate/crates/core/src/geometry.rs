//! Sampling domains and the exact geometry the rest of the crate relies on:
//! volumes, perimeters, boundary distance, and `|B(x, r) ∩ A|`.
//!
//! Disks and balls are centred at the origin, squares and tori occupy
//! `[0, side]^d`, and polygons are given by their vertices. Points are plain
//! coordinate slices whose length equals [`Region::dim`].

use std::f64::consts::PI;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Quadrature;

/// Uniform draw on `[0, 1)` from the top 53 bits of one `u64`.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Volume of the unit ball in `R^d`, `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    Ok(theta(d))
}

/// `θ_d` via `θ_d = θ_{d-2} · 2π / d`, `θ_0 = 1`, `θ_1 = 2`.
pub(crate) fn theta(d: usize) -> f64 {
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut j = if d % 2 == 0 { 2 } else { 3 };
    while j <= d {
        v *= 2.0 * PI / j as f64;
        j += 2;
    }
    v
}

/// `h(a) = |B_1(o) ∩ ([0, a] × R^{d-1})|`, the slab slice of the unit ball.
pub fn slice_volume(a: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::invalid(format!("slice fraction {a} outside [0, 1]")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    slice_unchecked(a, d)
}

fn slice_unchecked(a: f64, d: usize) -> Result<f64> {
    match d {
        1 => Ok(a),
        2 => Ok(a * (1.0 - a * a).max(0.0).sqrt() + a.asin()),
        3 => Ok(PI * (a - a * a * a / 3.0)),
        _ => {
            let half = 0.5 * (d as f64 - 1.0);
            let q = Quadrature::with_tolerances(1e-12, 1e-14);
            let est = q.integrate(|y| (1.0 - y * y).max(0.0).powf(half), 0.0, a)?;
            Ok(theta(d - 1) * est.value)
        }
    }
}

/// Volume (in units of `ρ^d`) of the cap of height `η·ρ` cut from a ball of
/// radius `ρ`, for `η ∈ [0, 2]`.
fn cap_by_height(eta: f64, d: usize) -> Result<f64> {
    let eta = eta.clamp(0.0, 2.0);
    if eta > 1.0 {
        return Ok(theta(d) - cap_by_height(2.0 - eta, d)?);
    }
    match d {
        1 => Ok(eta),
        2 => Ok(2.0 * (0.5 * eta).sqrt().asin() - (1.0 - eta) * (eta * (2.0 - eta)).sqrt()),
        3 => Ok(PI * eta * eta * (3.0 - eta) / 3.0),
        _ => {
            let half = 0.5 * (d as f64 - 1.0);
            let q = Quadrature::with_tolerances(0.0, 1e-14);
            let est = q.integrate(|z| (z * (2.0 - z)).max(0.0).powf(half), 0.0, eta)?;
            Ok(theta(d - 1) * est.value)
        }
    }
}

/// Half-space approximation `(θ_d/2 + h(a/r)) r^d` of `|B_r(x) ∩ A|` for a
/// point at distance `a` from a flat boundary.
pub fn cap_approx_volume(a: f64, r: f64, d: usize) -> Result<f64> {
    if !(r > 0.0) || a < 0.0 {
        return Err(Error::invalid("cap approximation needs r > 0 and a >= 0"));
    }
    if a >= r {
        return Err(Error::invalid(format!(
            "boundary distance {a} >= radius {r}; the ball is not cut"
        )));
    }
    Ok((0.5 * theta(d) + slice_unchecked(a / r, d)?) * r.powi(d as i32))
}

/// Input form of a region, also its JSON representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Square { side: f64 },
    Disk { radius: f64 },
    Ball { d: usize, radius: f64 },
    Torus { d: usize, side: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

/// A validated sampling domain with cached measures.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct Region {
    shape: Shape,
    dim: usize,
    volume: f64,
    perimeter: Option<f64>,
    reach: f64,
    // polygon data (squares included), counterclockwise
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[[f64; 2]; 3]>,
    cumulative_area: Vec<f64>,
}

impl TryFrom<Shape> for Region {
    type Error = Error;

    fn try_from(shape: Shape) -> Result<Self> {
        Region::new(shape)
    }
}

impl From<Region> for Shape {
    fn from(r: Region) -> Shape {
        r.shape
    }
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Region {
    pub fn new(shape: Shape) -> Result<Self> {
        let mut region = Region {
            shape: shape.clone(),
            dim: 2,
            volume: 0.0,
            perimeter: None,
            reach: 0.0,
            vertices: Vec::new(),
            triangles: Vec::new(),
            cumulative_area: Vec::new(),
        };
        match shape {
            Shape::Square { side } => {
                positive("side", side)?;
                region.volume = side * side;
                region.perimeter = Some(4.0 * side);
                region.set_polygon(vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]])?;
            }
            Shape::Disk { radius } => {
                positive("radius", radius)?;
                region.volume = PI * radius * radius;
                region.perimeter = Some(2.0 * PI * radius);
                region.reach = radius;
            }
            Shape::Ball { d, radius } => {
                positive("radius", radius)?;
                if d < 2 {
                    return Err(Error::invalid("ball dimension must be at least 2"));
                }
                region.dim = d;
                region.volume = theta(d) * radius.powi(d as i32);
                region.perimeter = Some(d as f64 * theta(d) * radius.powi(d as i32 - 1));
                region.reach = radius;
            }
            Shape::Torus { d, side } => {
                positive("side", side)?;
                if d < 2 {
                    return Err(Error::invalid("torus dimension must be at least 2"));
                }
                region.dim = d;
                region.volume = side.powi(d as i32);
                region.reach = f64::INFINITY;
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::invalid("polygon needs at least 3 vertices"));
                }
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("polygon vertices must be finite"));
                }
                let mut vs = vertices;
                if signed_area(&vs) < 0.0 {
                    vs.reverse();
                }
                if !is_simple(&vs) {
                    return Err(Error::invalid("polygon is not simple"));
                }
                region.shape = Shape::Polygon {
                    vertices: vs.clone(),
                };
                region.volume = signed_area(&vs);
                positive("polygon area", region.volume)?;
                region.perimeter = Some(edges(&vs).map(|(a, b)| dist2d(a, b)).sum());
                region.set_polygon(vs)?;
            }
        }
        Ok(region)
    }

    pub fn square(side: f64) -> Result<Self> {
        Region::new(Shape::Square { side })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Region::new(Shape::Disk { radius })
    }

    pub fn ball(d: usize, radius: f64) -> Result<Self> {
        Region::new(Shape::Ball { d, radius })
    }

    pub fn torus(d: usize, side: f64) -> Result<Self> {
        Region::new(Shape::Torus { d, side })
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Region::new(Shape::Polygon { vertices })
    }

    fn set_polygon(&mut self, vs: Vec<[f64; 2]>) -> Result<()> {
        self.triangles = triangulate(&vs)?;
        let mut acc = 0.0;
        self.cumulative_area = self
            .triangles
            .iter()
            .map(|t| {
                acc += triangle_area(t);
                acc
            })
            .collect();
        self.vertices = vs;
        Ok(())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `(d-1)`-dimensional boundary measure; `None` for the torus.
    pub fn perimeter(&self) -> Option<f64> {
        self.perimeter
    }

    /// Sphere-condition radius: the radius for disks and balls, 0 for
    /// polygons (corners), `+∞` for the torus.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.shape, Shape::Torus { .. })
    }

    pub fn is_polygonal(&self) -> bool {
        matches!(self.shape, Shape::Square { .. } | Shape::Polygon { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            Shape::Square { .. } => "square",
            Shape::Disk { .. } => "disk",
            Shape::Ball { .. } => "ball",
            Shape::Torus { .. } => "torus",
            Shape::Polygon { .. } => "polygon",
        }
    }

    /// Counterclockwise vertex list for squares and polygons.
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Radius of a disk or ball.
    pub fn radius(&self) -> Option<f64> {
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius, .. } => Some(radius),
            _ => None,
        }
    }

    /// Side of a square or torus.
    pub fn side(&self) -> Option<f64> {
        match self.shape {
            Shape::Square { side } | Shape::Torus { side, .. } => Some(side),
            _ => None,
        }
    }

    /// Axis-aligned box `(lo, hi)` containing the region (the fundamental
    /// domain for the torus).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius, .. } => {
                (vec![-radius; self.dim], vec![radius; self.dim])
            }
            Shape::Square { side } | Shape::Torus { side, .. } => {
                (vec![0.0; self.dim], vec![side; self.dim])
            }
            Shape::Polygon { .. } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in &self.vertices {
                    for i in 0..2 {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, region is {}-dimensional",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Closed-set membership (boundary points are inside).
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius, .. } => {
                norm2(x) <= radius * radius * (1.0 + 1e-14)
            }
            Shape::Square { side } | Shape::Torus { side, .. } => {
                x.iter().all(|&c| (0.0..=side).contains(&c))
            }
            Shape::Polygon { .. } => {
                let p = [x[0], x[1]];
                point_in_polygon(&self.vertices, p)
                    || polygon_boundary_distance(&self.vertices, p) <= 1e-12 * self.scale()
            }
        }
    }

    fn scale(&self) -> f64 {
        self.volume.powf(1.0 / self.dim as f64)
    }

    /// `σ_A = |∂A| / |A|^{1-1/d}`; scale invariant.
    pub fn sigma(&self) -> Result<f64> {
        let per = self
            .perimeter
            .ok_or_else(|| Error::invalid("the torus has no boundary; sigma is undefined"))?;
        let d = self.dim as f64;
        Ok(per / self.volume.powf(1.0 - 1.0 / d))
    }

    /// Euclidean distance from `x` to `∂A` (`+∞` on the torus).
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.contains(x) {
            return Err(Error::invalid(format!("point {x:?} lies outside the {}", self.kind_name())));
        }
        Ok(self.boundary_distance_unchecked(x))
    }

    pub(crate) fn boundary_distance_unchecked(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius, .. } => (radius - norm2(x).sqrt()).max(0.0),
            Shape::Square { side } => x[0].min(side - x[0]).min(x[1]).min(side - x[1]).max(0.0),
            Shape::Torus { .. } => f64::INFINITY,
            Shape::Polygon { .. } => polygon_boundary_distance(&self.vertices, [x[0], x[1]]),
        }
    }

    /// Distance under the region's metric: wrap-around on the torus,
    /// Euclidean otherwise.
    pub fn metric_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.metric().dist2(x, y).sqrt())
    }

    pub fn metric(&self) -> Metric {
        match self.shape {
            Shape::Torus { side, .. } => Metric::Toroidal { side },
            _ => Metric::Euclidean,
        }
    }

    /// Exact `|B(x, r) ∩ A|`.
    pub fn ball_intersection_volume(&self, x: &[f64], r: f64) -> Result<f64> {
        self.check_dim(x)?;
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        if !self.contains(x) {
            return Err(Error::invalid(format!("point {x:?} lies outside the {}", self.kind_name())));
        }
        self.ball_volume_unchecked(x, r)
    }

    pub(crate) fn ball_volume_unchecked(&self, x: &[f64], r: f64) -> Result<f64> {
        let full = theta(self.dim) * r.powi(self.dim as i32);
        match self.shape {
            Shape::Torus { side, .. } => {
                if 2.0 * r >= side {
                    return Err(Error::invalid(format!(
                        "radius {r} reaches around the torus of side {side}"
                    )));
                }
                Ok(full)
            }
            Shape::Disk { radius } | Shape::Ball { radius, .. } => {
                let c = norm2(x).sqrt();
                if c + r <= radius {
                    return Ok(full);
                }
                if r >= c + radius {
                    return Ok(self.volume);
                }
                lens_volume(radius, r, c, self.dim)
            }
            Shape::Square { .. } | Shape::Polygon { .. } => {
                let p = [x[0], x[1]];
                if self.boundary_distance_unchecked(x) >= r {
                    return Ok(full);
                }
                Ok(circle_polygon_area(&self.vertices, p, r).clamp(0.0, full))
            }
        }
    }

    /// Exact uniform draw from the region.
    pub fn sample_uniform<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }

    /// Writes one uniform point into `out` (length `dim`).
    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.shape {
            Shape::Square { side } | Shape::Torus { side, .. } => {
                for c in out.iter_mut() {
                    *c = side * unit_f64(rng);
                }
            }
            Shape::Disk { radius } => {
                let (sin, cos) = (2.0 * PI * unit_f64(rng)).sin_cos();
                let rad = radius * unit_f64(rng).sqrt();
                out[0] = rad * cos;
                out[1] = rad * sin;
            }
            Shape::Ball { d, radius } if d <= 3 => loop {
                // rejection from the cube; acceptance π/6 or better
                let mut n2 = 0.0;
                for c in out.iter_mut() {
                    *c = 2.0 * unit_f64(rng) - 1.0;
                    n2 += *c * *c;
                }
                if n2 <= 1.0 {
                    for c in out.iter_mut() {
                        *c *= radius;
                    }
                    break;
                }
            },
            Shape::Ball { d, radius } => loop {
                let mut n2 = 0.0;
                for c in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *c = z;
                    n2 += z * z;
                }
                if n2 > 0.0 {
                    let rad = radius * unit_f64(rng).powf(1.0 / d as f64) / n2.sqrt();
                    for c in out.iter_mut() {
                        *c *= rad;
                    }
                    break;
                }
            },
            Shape::Polygon { .. } => {
                let total = *self.cumulative_area.last().expect("triangulated");
                let target = total * unit_f64(rng);
                let idx = self
                    .cumulative_area
                    .partition_point(|&c| c <= target)
                    .min(self.triangles.len() - 1);
                let [a, b, c] = self.triangles[idx];
                let (mut u, mut v) = (unit_f64(rng), unit_f64(rng));
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                out[0] = a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]);
                out[1] = a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]);
            }
        }
    }

    /// Volume of `{x ∈ A : dist(x, ∂A) >= r}` when it has a closed form:
    /// disks, balls, squares, tori and convex polygons.
    pub fn inner_parallel_volume(&self, r: f64) -> Option<f64> {
        match self.shape {
            Shape::Torus { .. } => Some(self.volume),
            Shape::Disk { radius } | Shape::Ball { radius, .. } => {
                Some(theta(self.dim) * (radius - r).max(0.0).powi(self.dim as i32))
            }
            Shape::Square { side } => Some((side - 2.0 * r).max(0.0).powi(2)),
            Shape::Polygon { .. } => {
                if !is_convex(&self.vertices) {
                    return None;
                }
                let mut poly = self.vertices.clone();
                for (a, b) in edges(&self.vertices) {
                    let len = dist2d(a, b);
                    // inward normal of a counterclockwise edge
                    let n = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
                    let offset = n[0] * a[0] + n[1] * a[1] + r;
                    poly = clip_half_plane(&poly, n, offset);
                    if poly.len() < 3 {
                        return Some(0.0);
                    }
                }
                Some(signed_area(&poly).max(0.0))
            }
        }
    }
}

/// Distance functions used by the spatial index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    Toroidal { side: f64 },
}

impl Metric {
    /// Squared distance. Every component of the crate evaluates distances
    /// through this function so that equal pairs give bit-identical values.
    #[inline]
    pub fn dist2(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Metric::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            Metric::Toroidal { side } => x
                .iter()
                .zip(y)
                .map(|(a, b)| {
                    let d = (a - b).abs();
                    let d = d.min(side - d);
                    d * d
                })
                .sum(),
        }
    }

    #[inline]
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        self.dist2(x, y).sqrt()
    }
}

/// `|B(o, big) ∩ B(c·e_1, small)|` for partially overlapping balls.
fn lens_volume(big: f64, small: f64, c: f64, d: usize) -> Result<f64> {
    // cap heights beyond the radical hyperplane, written without cancellation
    let h_big = (small * small - (big - c) * (big - c)) / (2.0 * c);
    let h_small = (big * big - (c - small) * (c - small)) / (2.0 * c);
    let big_cap = big.powi(d as i32) * cap_by_height(h_big / big, d)?;
    let small_cap = small.powi(d as i32) * cap_by_height(h_small / small, d)?;
    Ok(big_cap + small_cap)
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum()
}

fn dist2d(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn edges(vs: &[[f64; 2]]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    (0..vs.len()).map(move |i| (vs[i], vs[(i + 1) % vs.len()]))
}

pub(crate) fn signed_area(vs: &[[f64; 2]]) -> f64 {
    0.5 * edges(vs).map(|(a, b)| a[0] * b[1] - a[1] * b[0]).sum::<f64>()
}

fn triangle_area(t: &[[f64; 2]; 3]) -> f64 {
    0.5 * cross(t[0], t[1], t[2]).abs()
}

fn is_convex(vs: &[[f64; 2]]) -> bool {
    let n = vs.len();
    (0..n).all(|i| cross(vs[i], vs[(i + 1) % n], vs[(i + 2) % n]) >= 0.0)
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2], d: f64| {
        d == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn is_simple(vs: &[[f64; 2]]) -> bool {
    let n = vs.len();
    if (0..n).any(|i| vs[i] == vs[(i + 1) % n]) {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(vs[i], vs[(i + 1) % n], vs[j], vs[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn point_in_polygon(vs: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    for (a, b) in edges(vs) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist2d(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn polygon_boundary_distance(vs: &[[f64; 2]], p: [f64; 2]) -> f64 {
    edges(vs)
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Ear clipping for a simple counterclockwise polygon.
fn triangulate(vs: &[[f64; 2]]) -> Result<Vec<[[f64; 2]; 3]>> {
    let mut idx: Vec<usize> = (0..vs.len()).collect();
    let mut out = Vec::with_capacity(vs.len() - 2);
    while idx.len() > 3 {
        let n = idx.len();
        let ear = (0..n).find(|&i| {
            let (a, b, c) = (vs[idx[(i + n - 1) % n]], vs[idx[i]], vs[idx[(i + 1) % n]]);
            if cross(a, b, c) <= 0.0 {
                return false;
            }
            idx.iter().all(|&j| {
                let p = vs[j];
                if p == a || p == b || p == c {
                    return true;
                }
                !(cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0)
            })
        });
        let Some(i) = ear else {
            return Err(Error::invalid("polygon could not be triangulated"));
        };
        out.push([vs[idx[(i + n - 1) % n]], vs[idx[i]], vs[idx[(i + 1) % n]]]);
        idx.remove(i);
    }
    out.push([vs[idx[0]], vs[idx[1]], vs[idx[2]]]);
    Ok(out)
}

/// Keeps the part of a convex polygon with `n·x >= offset`.
fn clip_half_plane(poly: &[[f64; 2]], n: [f64; 2], offset: f64) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| n[0] * p[0] + n[1] * p[1] - offset;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (a, b) in edges(poly) {
        let (sa, sb) = (side(a), side(b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Signed area of `disk(o, r) ∩ triangle(o, a, b)`, with `a`, `b` relative
/// to the disk centre. Splits the chord `ab` at its circle crossings; pieces
/// inside the disk contribute triangles, pieces outside contribute sectors.
fn disk_triangle_area(a: [f64; 2], b: [f64; 2], r: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    if qa == 0.0 {
        return 0.0;
    }
    let qb = a[0] * d[0] + a[1] * d[1];
    let qc = a[0] * a[0] + a[1] * a[1] - r * r;
    let disc = qb * qb - qa * qc;
    let mut cuts = [0.0, 1.0, 1.0, 1.0];
    let mut n = 1;
    if disc > 0.0 {
        let s = disc.sqrt();
        for t in [(-qb - s) / qa, (-qb + s) / qa] {
            if t > 0.0 && t < 1.0 {
                cuts[n] = t;
                n += 1;
            }
        }
    }
    cuts[n] = 1.0;
    let point = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
    let mut area = 0.0;
    for w in cuts[..=n].windows(2) {
        let (p, q) = (point(w[0]), point(w[1]));
        let m = point(0.5 * (w[0] + w[1]));
        let tri = 0.5 * (p[0] * q[1] - p[1] * q[0]);
        if m[0] * m[0] + m[1] * m[1] <= r * r {
            area += tri;
        } else {
            let angle = (p[0] * q[1] - p[1] * q[0]).atan2(p[0] * q[0] + p[1] * q[1]);
            area += 0.5 * r * r * angle;
        }
    }
    area
}

/// Exact area of `disk(x, r) ∩ P` for a simple counterclockwise polygon.
pub(crate) fn circle_polygon_area(vs: &[[f64; 2]], x: [f64; 2], r: f64) -> f64 {
    edges(vs)
        .map(|(a, b)| {
            disk_triangle_area([a[0] - x[0], a[1] - x[1]], [b[0] - x[0], b[1] - x[1]], r)
        })
        .sum()
}

/// Source (`A`) and target (`B`) domains of a two-sample experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPair {
    pub a: Region,
    pub b: Region,
    /// `true` iff `closure(B) ⊂ interior(A)`.
    pub interior_flag: bool,
}

impl DomainPair {
    /// `B = A`.
    pub fn same(a: Region) -> Self {
        DomainPair {
            b: a.clone(),
            a,
            interior_flag: false,
        }
    }

    /// `B` strictly inside `A`; rejected unless the closure of `B` lies in
    /// the interior of `A`.
    pub fn interior(a: Region, b: Region) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::invalid("regions have different dimensions"));
        }
        if a.is_torus() || b.is_torus() {
            return Err(Error::invalid("torus domains are only supported with B = A"));
        }
        let gap = clearance(&a, &b);
        let anchor = match b.shape() {
            Shape::Disk { .. } | Shape::Ball { .. } => vec![0.0; b.dim()],
            _ => b.vertices()[0].to_vec(),
        };
        if !(gap > 0.0) || !a.contains(&anchor) {
            return Err(Error::invalid(format!(
                "{} is not strictly inside {} (clearance {gap})",
                b.kind_name(),
                a.kind_name()
            )));
        }
        Ok(DomainPair {
            a,
            b,
            interior_flag: true,
        })
    }

    /// `dist(B, ∂A)` for an interior pair, 0 when `B = A`.
    pub fn clearance(&self) -> f64 {
        if self.interior_flag {
            clearance(&self.a, &self.b)
        } else {
            0.0
        }
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

/// Distance between `∂B` and `∂A`, assuming `B` is on the inside; negative or
/// zero values mean the boundaries touch or cross.
fn clearance(a: &Region, b: &Region) -> f64 {
    match (a.radius(), b.radius()) {
        (Some(ra), Some(rb)) => ra - rb,
        (Some(ra), None) => {
            ra - b
                .vertices()
                .iter()
                .map(|v| v[0].hypot(v[1]))
                .fold(0.0, f64::max)
        }
        (None, Some(rb)) => {
            if !a.contains(&[0.0, 0.0]) {
                return f64::NEG_INFINITY;
            }
            polygon_boundary_distance(a.vertices(), [0.0, 0.0]) - rb
        }
        (None, None) => {
            // nested polygons with disjoint boundaries: the gap is attained at a vertex
            let (va, vb) = (a.vertices(), b.vertices());
            if edges(va).any(|(p, q)| edges(vb).any(|(s, t)| segments_intersect(p, q, s, t))) {
                return 0.0;
            }
            if !vb.iter().all(|&v| point_in_polygon(va, v)) {
                return f64::NEG_INFINITY;
            }
            let ab = vb.iter().map(|&v| polygon_boundary_distance(va, v));
            let ba = va.iter().map(|&v| polygon_boundary_distance(vb, v));
            ab.chain(ba).fold(f64::INFINITY, f64::min)
        }
    }
}
