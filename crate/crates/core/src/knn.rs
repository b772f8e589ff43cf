//! Exact k-th nearest-neighbour distances on a uniform grid, and the
//! two-sample coverage threshold `max_y d_k(y)`.
//!
//! All distances go through [`Metric::dist2`] followed by `sqrt`, so a value
//! returned here is bit-identical to a brute-force recomputation of the same
//! pair.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{Metric, Region};
use crate::sampler::{PointSet, ProcessPair};

/// Largest dimension supported by the grid.
pub const MAX_DIM: usize = 8;

// Upper bound on the number of grid cells; the cell size is enlarged to fit.
const MAX_CELLS: usize = 1 << 24;

// Relative slack for bounds compared against computed distances.
const SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    metric: Metric,
    lo: [f64; MAX_DIM],
    cell_size: f64,
    dims: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    cell_start: Vec<usize>,
    points: Vec<f64>,
    ids: Vec<usize>,
}

/// Index over `points` with the default cell size
/// `(bounding-box volume / n)^(1/d)`.
pub fn build_index(points: &PointSet, region: &Region) -> Result<SpatialIndex> {
    SpatialIndex::new(points, region, None)
}

/// Index with an explicit cell size (a performance knob only).
pub fn build_index_with_cell_size(points: &PointSet, region: &Region, cell_size: f64) -> Result<SpatialIndex> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::invalid(format!("cell size must be positive, got {cell_size}")));
    }
    SpatialIndex::new(points, region, Some(cell_size))
}

impl SpatialIndex {
    fn new(points: &PointSet, region: &Region, cell_size: Option<f64>) -> Result<Self> {
        let dim = region.dim();
        if points.is_empty() {
            return Err(Error::invalid("cannot index an empty point set"));
        }
        if points.dim() != dim {
            return Err(Error::invalid(format!(
                "points are {}-dimensional, region is {dim}-dimensional",
                points.dim()
            )));
        }
        if dim > MAX_DIM {
            return Err(Error::invalid(format!("spatial index supports d <= {MAX_DIM}")));
        }
        let n = points.len();
        let metric = region.metric();
        let (rlo, rhi) = region.bounding_box();
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        lo[..dim].copy_from_slice(&rlo);
        hi[..dim].copy_from_slice(&rhi);
        for p in points.iter() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("point coordinates must be finite"));
            }
            for i in 0..dim {
                if let Metric::Toroidal { side } = metric {
                    if p[i] < 0.0 || p[i] > side {
                        return Err(Error::invalid("torus points must lie in [0, side]^d"));
                    }
                }
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let widths: Vec<f64> = (0..dim).map(|i| (hi[i] - lo[i]).max(f64::MIN_POSITIVE)).collect();
        let max_width = widths.iter().cloned().fold(0.0, f64::max);
        let box_volume: f64 = widths.iter().product();
        let mut cs = cell_size
            .unwrap_or_else(|| (box_volume / n as f64).powf(1.0 / dim as f64))
            .clamp(1e-6_f64.min(max_width), max_width);

        let mut dims = [1usize; MAX_DIM];
        loop {
            let mut total = 1usize;
            for i in 0..dim {
                dims[i] = match metric {
                    Metric::Toroidal { side } => ((side / cs).floor() as usize).max(1),
                    Metric::Euclidean => ((widths[i] / cs).ceil() as usize).max(1),
                };
                total = total.saturating_mul(dims[i]);
            }
            if total <= MAX_CELLS {
                break;
            }
            cs *= 2.0;
        }
        if let Metric::Toroidal { side } = metric {
            cs = side / dims[0] as f64;
        }

        let mut strides = [0usize; MAX_DIM];
        let mut stride = 1;
        for i in 0..dim {
            strides[i] = stride;
            stride *= dims[i];
        }
        let ncells = stride;

        let mut index = SpatialIndex {
            dim,
            metric,
            lo,
            cell_size: cs,
            dims,
            strides,
            cell_start: Vec::new(),
            points: Vec::new(),
            ids: Vec::new(),
        };
        let cells: Vec<usize> = points.iter().map(|p| index.cell_of(p)).collect();
        let mut start = vec![0usize; ncells + 1];
        for &c in &cells {
            start[c + 1] += 1;
        }
        for c in 0..ncells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut sorted = vec![0.0; n * dim];
        let mut ids = vec![0usize; n];
        for (i, (&c, p)) in cells.iter().zip(points.iter()).enumerate() {
            let slot = fill[c];
            fill[c] += 1;
            sorted[slot * dim..(slot + 1) * dim].copy_from_slice(p);
            ids[slot] = i;
        }
        index.cell_start = start;
        index.points = sorted;
        index.ids = ids;
        Ok(index)
    }

    pub fn point_count(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn cell_count(&self) -> usize {
        self.cell_start.len() - 1
    }

    /// Original indices of the points stored in cell `c`.
    pub fn cell_members(&self, c: usize) -> &[usize] {
        &self.ids[self.cell_start[c]..self.cell_start[c + 1]]
    }

    #[inline]
    fn axis_cell(&self, x: f64, i: usize) -> usize {
        let j = ((x - self.lo[i]) / self.cell_size).floor();
        if j <= 0.0 {
            0
        } else {
            (j as usize).min(self.dims[i] - 1)
        }
    }

    #[inline]
    fn cell_of(&self, p: &[f64]) -> usize {
        (0..self.dim).map(|i| self.axis_cell(p[i], i) * self.strides[i]).sum()
    }

    /// Cell containing `p`, or `None` outside the grid box.
    #[inline]
    fn grid_cell(&self, p: &[f64]) -> Option<usize> {
        let mut c = 0;
        for i in 0..self.dim {
            let x = (p[i] - self.lo[i]) / self.cell_size;
            if !(x >= 0.0 && x <= self.dims[i] as f64) {
                return None;
            }
            c += (x as usize).min(self.dims[i] - 1) * self.strides[i];
        }
        Some(c)
    }

    #[inline]
    fn cell_points(&self, c: usize) -> &[f64] {
        &self.points[self.cell_start[c] * self.dim..self.cell_start[c + 1] * self.dim]
    }

    /// Squared distance from `q` to the box of the cell with grid
    /// coordinates `g`.
    #[inline]
    fn box_dist2(&self, q: &[f64], g: &[usize]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let a = self.lo[i] + g[i] as f64 * self.cell_size;
            let b = a + self.cell_size;
            let x = q[i];
            if x >= a && x <= b {
                continue;
            }
            let gap = match self.metric {
                Metric::Euclidean => (a - x).max(x - b),
                Metric::Toroidal { side } => {
                    let da = (a - x).abs();
                    let db = (b - x).abs();
                    da.min(side - da).min(db).min(side - db).max(0.0)
                }
            };
            s += gap * gap;
        }
        s
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::invalid(format!(
                "query has {} coordinates, index is {}-dimensional",
                q.len(),
                self.dim
            )));
        }
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("query coordinates must be finite"));
        }
        Ok(())
    }

    /// Exact distance from `q` to its `k`-th nearest indexed point
    /// (coincident points counted with multiplicity).
    pub fn kth_nearest_distance(&self, q: &[f64], k: usize) -> Result<f64> {
        self.check_query(q)?;
        if k == 0 || k > self.point_count() {
            return Err(Error::invalid(format!(
                "k = {k} must lie in 1..={}",
                self.point_count()
            )));
        }
        let mut best = Vec::with_capacity(k);
        Ok(self.kth_search(q, k, -1.0, &mut best).sqrt())
    }

    /// Squared k-th neighbour distance. Stops early, returning some value
    /// `<= floor_d2`, once `k` points within `sqrt(floor_d2)` are known.
    fn kth_search(&self, q: &[f64], k: usize, floor_d2: f64, best: &mut Vec<f64>) -> f64 {
        best.clear();
        let dim = self.dim;
        let mut home = [0usize; MAX_DIM];
        let mut wall = f64::INFINITY;
        for i in 0..dim {
            home[i] = self.axis_cell(q[i], i);
            let a = self.lo[i] + home[i] as f64 * self.cell_size;
            let m = (q[i] - a).min(a + self.cell_size - q[i]).max(0.0);
            wall = wall.min(m);
        }
        let torus = matches!(self.metric, Metric::Toroidal { .. });
        let max_ring = if torus {
            (self.dims[0] - 1) / 2
        } else {
            (0..dim)
                .map(|i| home[i].max(self.dims[i] - 1 - home[i]))
                .max()
                .unwrap_or(0)
        };

        let mut off = [0isize; MAX_DIM];
        let mut g = [0usize; MAX_DIM];
        for ring in 0..=max_ring {
            let r = ring as isize;
            off[..dim].fill(-r);
            'cells: loop {
                if off[..dim].iter().any(|o| o.abs() == r) {
                    let mut valid = true;
                    for i in 0..dim {
                        let j = home[i] as isize + off[i];
                        let n = self.dims[i] as isize;
                        if torus {
                            g[i] = j.rem_euclid(n) as usize;
                        } else if j < 0 || j >= n {
                            valid = false;
                            break;
                        } else {
                            g[i] = j as usize;
                        }
                    }
                    if valid {
                        let full = best.len() == k;
                        if !full || self.box_dist2(q, &g[..dim]) * (1.0 - SLACK) <= best[k - 1] {
                            let c: usize = (0..dim).map(|i| g[i] * self.strides[i]).sum();
                            for p in self.cell_points(c).chunks_exact(dim) {
                                offer(best, k, self.metric.dist2(q, p));
                            }
                            if best.len() == k && best[k - 1] <= floor_d2 {
                                return best[k - 1];
                            }
                        }
                    }
                }
                let mut i = 0;
                loop {
                    if i == dim {
                        break 'cells;
                    }
                    if off[i] < r {
                        off[i] += 1;
                        break;
                    }
                    off[i] = -r;
                    i += 1;
                }
            }
            if best.len() == k {
                let reach = ring as f64 * self.cell_size + wall;
                if best[k - 1] < reach * reach * (1.0 - SLACK) {
                    return best[k - 1];
                }
            }
        }
        if torus && 2 * max_ring + 1 < self.dims[0] {
            // rings stopped before covering the whole torus
            best.clear();
            for p in self.points.chunks_exact(dim) {
                offer(best, k, self.metric.dist2(q, p));
            }
        }
        best[k - 1]
    }

    /// Number of indexed points `x` with `dist(q, x) <= r`.
    pub fn count_in_ball(&self, q: &[f64], r: f64) -> Result<usize> {
        self.check_query(q)?;
        if !(r >= 0.0) {
            return Err(Error::invalid(format!("radius must be non-negative, got {r}")));
        }
        let dim = self.dim;
        let mut start = [0isize; MAX_DIM];
        let mut len = [0isize; MAX_DIM];
        for i in 0..dim {
            let n = self.dims[i] as isize;
            match self.metric {
                Metric::Euclidean => {
                    let a = self.axis_cell(q[i] - r, i) as isize;
                    let b = self.axis_cell(q[i] + r, i) as isize;
                    start[i] = a;
                    len[i] = b - a + 1;
                }
                Metric::Toroidal { .. } => {
                    let a = ((q[i] - r - self.lo[i]) / self.cell_size).floor();
                    let b = ((q[i] + r - self.lo[i]) / self.cell_size).floor();
                    let span = b - a + 1.0;
                    if span >= n as f64 {
                        start[i] = 0;
                        len[i] = n;
                    } else {
                        start[i] = a as isize;
                        len[i] = span as isize;
                    }
                }
            }
        }
        let r2 = r * r;
        let mut count = 0;
        let mut off = [0isize; MAX_DIM];
        let mut g = [0usize; MAX_DIM];
        'cells: loop {
            for i in 0..dim {
                g[i] = (start[i] + off[i]).rem_euclid(self.dims[i] as isize) as usize;
            }
            if self.box_dist2(q, &g[..dim]) * (1.0 - SLACK) <= r2 {
                let c: usize = (0..dim).map(|i| g[i] * self.strides[i]).sum();
                count += self
                    .cell_points(c)
                    .chunks_exact(dim)
                    .filter(|p| self.metric.dist2(q, p).sqrt() <= r)
                    .count();
            }
            let mut i = 0;
            loop {
                if i == dim {
                    break 'cells;
                }
                if off[i] + 1 < len[i] {
                    off[i] += 1;
                    break;
                }
                off[i] = 0;
                i += 1;
            }
        }
        Ok(count)
    }

    /// `max_{y in ys} d_k(y)`, with the empty-set and `k > n` conventions of
    /// [`coverage_threshold`].
    ///
    /// Branch and bound: targets are binned into the grid, every cube of
    /// targets carries the bound `d_k(centre) + half-diagonal`, and the cube
    /// with the largest bound is split into orthants (or queried directly
    /// once small) until no bound exceeds the running maximum.
    pub fn max_kth_distance(&self, ys: &PointSet, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if ys.is_empty() {
            return Ok(0.0);
        }
        if ys.dim() != self.dim {
            return Err(Error::invalid("target and indexed points differ in dimension"));
        }
        if k > self.point_count() {
            return Ok(f64::INFINITY);
        }
        if ys.as_flat().iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("query coordinates must be finite"));
        }
        let mut best = Vec::with_capacity(k);
        let mut max_d2 = 0.0f64;
        let visit = |y: &[f64], max_d2: &mut f64, best: &mut Vec<f64>| {
            let d2 = self.kth_search(y, k, *max_d2, best);
            if d2 > *max_d2 {
                *max_d2 = d2;
            }
        };

        if ys.len() <= self.cell_count() {
            for y in ys.iter() {
                visit(y, &mut max_d2, &mut best);
            }
            return Ok(max_d2.sqrt());
        }

        let ncells = self.cell_count();
        let mut bins = vec![usize::MAX; ys.len()];
        let mut start = vec![0usize; ncells + 1];
        for (j, y) in ys.iter().enumerate() {
            match self.grid_cell(y) {
                Some(c) => {
                    bins[j] = c;
                    start[c + 1] += 1;
                }
                None => visit(y, &mut max_d2, &mut best),
            }
        }
        for c in 0..ncells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; start[ncells]];
        for (j, &c) in bins.iter().enumerate() {
            if c != usize::MAX {
                order[fill[c]] = j;
                fill[c] += 1;
            }
        }

        let dim = self.dim;
        let mut nodes: Vec<Node> = Vec::new();
        let mut heap = BinaryHeap::new();
        for c in 0..ncells {
            if start[c] == start[c + 1] {
                continue;
            }
            let mut lo = [0.0; MAX_DIM];
            let mut rem = c;
            for i in (0..dim).rev() {
                lo[i] = self.lo[i] + (rem / self.strides[i]) as f64 * self.cell_size;
                rem %= self.strides[i];
            }
            let bound = self.box_bound(&lo, self.cell_size, k, &mut best);
            heap.push(Ranked(bound, nodes.len()));
            nodes.push(Node {
                lo,
                size: self.cell_size,
                start: start[c],
                end: start[c + 1],
            });
        }

        // one exact query per cell gives a running maximum close to the final one
        for node in &nodes {
            visit(ys.get(order[node.start]), &mut max_d2, &mut best);
        }
        let mut child_of = Vec::new();
        let mut scratch = Vec::new();
        while let Some(Ranked(bound, id)) = heap.pop() {
            if bound * bound < max_d2 * (1.0 - SLACK) {
                break;
            }
            let node = nodes[id];
            if node.end - node.start <= LEAF_SIZE {
                for &j in &order[node.start..node.end] {
                    visit(ys.get(j), &mut max_d2, &mut best);
                }
                continue;
            }
            // split into 2^d children, partitioning the targets by orthant
            let half = 0.5 * node.size;
            let members = &mut order[node.start..node.end];
            child_of.clear();
            let mut counts = [0usize; 1 << MAX_DIM];
            for &j in members.iter() {
                let y = ys.get(j);
                let mut b = 0;
                for i in 0..dim {
                    if y[i] >= node.lo[i] + half {
                        b |= 1 << i;
                    }
                }
                child_of.push(b);
                counts[b] += 1;
            }
            let mut offsets = [0usize; (1 << MAX_DIM) + 1];
            for b in 0..1 << dim {
                offsets[b + 1] = offsets[b] + counts[b];
            }
            scratch.clear();
            scratch.resize(members.len(), 0);
            let mut fill = offsets;
            for (&j, &b) in members.iter().zip(&child_of) {
                scratch[fill[b]] = j;
                fill[b] += 1;
            }
            members.copy_from_slice(&scratch);
            for b in 0..1 << dim {
                if counts[b] == 0 {
                    continue;
                }
                let mut lo = node.lo;
                for i in 0..dim {
                    if b & (1 << i) != 0 {
                        lo[i] += half;
                    }
                }
                let child_bound = self.box_bound(&lo, half, k, &mut best).min(bound);
                heap.push(Ranked(child_bound, nodes.len()));
                nodes.push(Node {
                    lo,
                    size: half,
                    start: node.start + offsets[b],
                    end: node.start + offsets[b + 1],
                });
            }
        }
        Ok(max_d2.sqrt())
    }

    /// Upper bound on `d_k(y)` over the cube `[lo, lo + size]^d`.
    fn box_bound(&self, lo: &[f64; MAX_DIM], size: f64, k: usize, best: &mut Vec<f64>) -> f64 {
        let mut centre = [0.0; MAX_DIM];
        for i in 0..self.dim {
            centre[i] = lo[i] + 0.5 * size;
        }
        let dk = self.kth_search(&centre[..self.dim], k, -1.0, best).sqrt();
        (dk + 0.5 * size * (self.dim as f64).sqrt()) * (1.0 + SLACK)
    }
}

// Targets per node below which the branch-and-bound search queries directly.
const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: [f64; MAX_DIM],
    size: f64,
    start: usize,
    end: usize,
}

struct Ranked(f64, usize);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

#[inline]
fn offer(best: &mut Vec<f64>, k: usize, d2: f64) {
    if best.len() == k {
        if d2 >= best[k - 1] {
            return;
        }
        best.pop();
    }
    let pos = best.partition_point(|&b| b <= d2);
    best.insert(pos, d2);
}

/// Coverage threshold `R = max_{y in ys} d_k(y, xs)` under the metric of
/// `region`: the smallest `r` such that every closed ball `B(y, r)` holds at
/// least `k` X-points. `+∞` when `|xs| < k`; `0` when `ys` is empty.
pub fn coverage_threshold(pair: &ProcessPair, region: &Region, k: usize) -> Result<f64> {
    coverage_threshold_points(&pair.xs, &pair.ys, region, k)
}

pub fn coverage_threshold_points(xs: &PointSet, ys: &PointSet, region: &Region, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if ys.is_empty() {
        return Ok(0.0);
    }
    if xs.len() < k {
        return Ok(f64::INFINITY);
    }
    build_index(xs, region)?.max_kth_distance(ys, k)
}
