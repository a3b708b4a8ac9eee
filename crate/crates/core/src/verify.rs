//! Weighted Sobolev checks: finite differences, singularity-excluding
//! quadrature of `w^{2|α|}|∂^α u|²` over `{δ_F > ε, ‖x‖ < R}`, exponent fits
//! over an ε-ladder, and regularity verdicts.
//!
//! All rungs of a ladder share one set of quadrature nodes. Each node is
//! credited to the largest rung that keeps it, and the rung estimates are
//! prefix sums of those buckets, so they are nondecreasing as ε decreases.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distance::SmoothedDistanceSystem;
use crate::error::{GeomError, Result};
use crate::jet::{multi_indices_up_to, JetSpace, MultiIndex};
use crate::lattice::Semilattice;
use crate::potential::{ClosedForm, Eigenpair};
use crate::sampling::Halton;
use crate::subspace::Vector;

pub const DEFAULT_RADIUS: f64 = 40.0;
pub const FINITE_EXPONENT: f64 = 0.1;
pub const FINITE_CHANGE: f64 = 0.02;
pub const DIVERGENT_EXPONENT: f64 = -0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    Delta,
    Rho,
    None,
}

impl Weight {
    pub fn name(self) -> &'static str {
        match self {
            Weight::Delta => "delta",
            Weight::Rho => "rho",
            Weight::None => "none",
        }
    }
}

impl std::str::FromStr for Weight {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Weight::Delta),
            "rho" => Ok(Weight::Rho),
            "none" => Ok(Weight::None),
            _ => Err(GeomError::Config(format!("unknown weight `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Finite,
    Divergent,
    Inconclusive,
}

/// How the integral is discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Quadrature {
    /// Dyadic `2^n`-tree over `[−R, R]^n` with tensor Gauss–Legendre leaves.
    Grid {
        /// Gauss–Legendre points per axis; the error bar compares with `order − 1`.
        order: usize,
        /// Leaf size near the origin; far cells may grow linearly with `‖x‖`.
        h_max: f64,
        /// Cells closer than `grading × size` to `∪F` are split.
        grading: f64,
        /// Cells crossing a rung's surface `{δ_F = ε}` are split down to `ε / straddle`.
        straddle: f64,
        max_leaves: usize,
    },
    /// Seeded Halton points pushed through a mixture proposal concentrated
    /// near the members of `F`, with density `∝ d_Y^{-1}` in the normal radius.
    Sampling { points: usize, seed: u64 },
}

impl Quadrature {
    pub fn default_grid() -> Self {
        Quadrature::Grid {
            order: 4,
            h_max: 1.0,
            grading: 2.0,
            straddle: 8.0,
            max_leaves: 2_000_000,
        }
    }

    pub fn default_sampling(seed: u64) -> Self {
        Quadrature::Sampling {
            points: 400_000,
            seed,
        }
    }

    /// Grid for `n ≤ 3` when `∪F = {0}`, sampling otherwise. Refining a grid
    /// down to `ε` around a line or plane needs `~(R/ε)^{dim Y}` cells.
    pub fn default_for(f: &Semilattice, seed: u64) -> Self {
        if f.ambient().dim() <= 3 && f.members().iter().all(|m| m.subspace.dim() == 0) {
            Self::default_grid()
        } else {
            Self::default_sampling(seed)
        }
    }
}

/// One weighted seminorm `∫_{δ_F>ε, ‖x‖<R} W^{2|α|+2w} |∂^α u|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub alpha: MultiIndex,
    pub weight: Weight,
    /// Extra power `w` of the weight.
    #[serde(default)]
    pub extra: f64,
    pub eps: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub quadrature: Quadrature,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub nodes: usize,
    pub budget_exhausted: bool,
}

/// Refinement study for one `(α, weight)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub alpha: MultiIndex,
    pub weight: Weight,
    pub extra: f64,
    pub eps: Vec<f64>,
    pub estimates: Vec<f64>,
    pub errors: Vec<f64>,
    pub exponent: f64,
    pub relative_change: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub case: String,
    pub seed: u64,
    pub max_order: usize,
    pub weight: Weight,
    pub radius: f64,
    pub quadrature: Quadrature,
    pub nodes: usize,
    pub budget_exhausted: bool,
    pub entries: Vec<NormEntry>,
    /// Every entry with the requested weight came out finite.
    pub weighted_all_finite: bool,
}

/// Central-difference weights for `d^a/dt^a` on offsets `−2..=2`, `O(h²)`.
fn central_stencil(order: u8) -> Result<&'static [(i32, f64)]> {
    Ok(match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => {
            return Err(GeomError::DomainError(format!(
                "finite differences support orders ≤ 4 per axis, got {order}"
            )))
        }
    })
}

/// Tensor-product central difference of `g` at `x`; no singular-set check.
pub fn fd_partial_fn(g: impl Fn(&[f64]) -> f64, x: &[f64], alpha: &[u8], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(GeomError::DomainError(format!("step must be positive, got {h}")));
    }
    let stencils = alpha.iter().map(|&a| central_stencil(a)).collect::<Result<Vec<_>>>()?;
    let total: i32 = alpha.iter().map(|&a| a as i32).sum();
    let mut sum = 0.0;
    let mut idx = vec![0usize; alpha.len()];
    let mut point = x.to_vec();
    loop {
        let mut w = 1.0;
        for (i, s) in stencils.iter().enumerate() {
            let (off, c) = s[idx[i]];
            w *= c;
            point[i] = x[i] + off as f64 * h;
        }
        sum += w * g(&point);
        // odometer
        let mut i = 0;
        loop {
            if i == idx.len() {
                return Ok(sum / h.powi(total));
            }
            idx[i] += 1;
            if idx[i] < stencils[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// `∂^α u(x)` by central differences; the stencil ball of radius `|α|·h`
/// must stay off `∪F`.
pub fn fd_partial(u: &dyn ClosedForm, f: &Semilattice, x: &Vector, alpha: &[u8], h: f64) -> Result<f64> {
    if alpha.len() != x.len() {
        return Err(GeomError::AmbientMismatch {
            expected: x.len(),
            found: alpha.len(),
        });
    }
    let order: f64 = alpha.iter().map(|&a| a as f64).sum();
    if f.dist_to_union(x)? <= order * h {
        return Err(GeomError::StencilTooWide);
    }
    fd_partial_fn(|p| u.value(p).unwrap_or(f64::NAN), x.as_slice(), alpha, h)
}

/// Default step `min(1e-4, δ_F(x)/(4|α|))`.
pub fn default_step(f: &Semilattice, x: &Vector, alpha: &[u8]) -> Result<f64> {
    let order: usize = alpha.iter().map(|&a| a as usize).sum();
    let delta = f.delta(x)?;
    Ok(if order == 0 {
        1e-4
    } else {
        1e-4f64.min(delta / (4.0 * order as f64))
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Observed convergence order of `fd_partial` against the analytic partial
/// over the step ladder `hs`.
pub fn fd_convergence_order(
    u: &dyn ClosedForm,
    f: &Semilattice,
    x: &Vector,
    alpha: &[u8],
    hs: &[f64],
) -> Result<f64> {
    let space = JetSpace::new(x.len(), alpha.iter().map(|&a| a as usize).sum());
    let exact = u.jet(&space, x.as_slice())?.partial(alpha);
    let errs = hs
        .iter()
        .map(|&h| Ok((fd_partial(u, f, x, alpha, h)? - exact).abs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_log_slope(hs, &errs))
}

/// Verdict from the estimates of a decreasing ε-ladder.
pub fn classify(eps: &[f64], estimates: &[f64]) -> (f64, f64, Verdict) {
    if estimates.iter().all(|&e| e == 0.0) {
        return (0.0, 0.0, Verdict::Finite);
    }
    let exponent = log_log_slope(eps, estimates);
    let n = estimates.len();
    let relative_change = if n >= 2 {
        (estimates[n - 1] - estimates[n - 2]).abs() / estimates[n - 1].abs()
    } else {
        f64::INFINITY
    };
    let growing = estimates.windows(2).all(|w| w[1] > w[0]);
    let verdict = if exponent.abs() < FINITE_EXPONENT && relative_change < FINITE_CHANGE {
        Verdict::Finite
    } else if exponent < DIVERGENT_EXPONENT && growing {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    (exponent, relative_change, verdict)
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// The set of integrands evaluated together on shared nodes.
struct Integrands<'a> {
    u: &'a dyn ClosedForm,
    f: &'a Semilattice,
    system: SmoothedDistanceSystem<'a>,
    space: Arc<JetSpace>,
    alpha_pos: Vec<usize>,
    alpha_order: Vec<i32>,
    weights: Vec<(Weight, f64)>,
    eps: Vec<f64>,
    radius: f64,
    factors: Vec<f64>,
    distances: Vec<f64>,
}

impl<'a> Integrands<'a> {
    fn new(
        u: &'a dyn ClosedForm,
        f: &'a Semilattice,
        alphas: &[MultiIndex],
        weights: &[(Weight, f64)],
        eps: &[f64],
        radius: f64,
    ) -> Result<Self> {
        let n = f.ambient().dim();
        if u.dim() != n {
            return Err(GeomError::AmbientMismatch {
                expected: n,
                found: u.dim(),
            });
        }
        let order = alphas
            .iter()
            .map(|a| a.iter().map(|&v| v as usize).sum::<usize>())
            .max()
            .unwrap_or(0);
        if order > 4 {
            return Err(GeomError::DomainError("|α| must be at most 4".into()));
        }
        let space = JetSpace::new(n, order);
        let alpha_pos = alphas
            .iter()
            .map(|a| {
                if a.len() != n {
                    return Err(GeomError::AmbientMismatch {
                        expected: n,
                        found: a.len(),
                    });
                }
                Ok(space.position(a).expect("within order"))
            })
            .collect::<Result<Vec<_>>>()?;
        if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(GeomError::DomainError(
                "ε-ladder must be positive and strictly decreasing".into(),
            ));
        }
        Ok(Self {
            u,
            f,
            system: SmoothedDistanceSystem::new(f),
            space,
            alpha_pos,
            alpha_order: alphas.iter().map(|a| a.iter().map(|&v| v as i32).sum()).collect(),
            weights: weights.to_vec(),
            eps: eps.to_vec(),
            radius,
            factors: vec![0.0; f.len()],
            distances: vec![0.0; f.len()],
        })
    }

    fn width(&self) -> usize {
        self.alpha_pos.len() * self.weights.len()
    }

    /// Index of the largest rung keeping a point with weight `delta`, or
    /// `None` when every rung excludes it.
    fn rung(&self, delta: f64) -> Option<usize> {
        self.eps.iter().position(|&e| delta > e)
    }

    /// Adds `q × integrands(x)` into `out[bucket]`; returns false if the
    /// point is excluded.
    fn accumulate(&mut self, x: &[f64], q: f64, out: &mut [Vec<Sum>]) -> Result<bool> {
        if x.iter().map(|c| c * c).sum::<f64>() >= self.radius * self.radius {
            return Ok(false);
        }
        let v = Vector::from_column_slice(x);
        for (i, m) in self.f.members().iter().enumerate() {
            self.distances[i] = m.subspace.dist_to(&v)?;
        }
        let (rho, delta) = self
            .system
            .rho_delta_from_distances(&self.distances, &mut self.factors);
        let Some(bucket) = self.rung(delta) else {
            return Ok(false);
        };
        let jet = self.u.jet(&self.space, x)?;
        let partials = jet.partials();
        let row = &mut out[bucket];
        let na = self.alpha_pos.len();
        for (wi, &(w, extra)) in self.weights.iter().enumerate() {
            let base = match w {
                Weight::Delta => delta,
                Weight::Rho => rho,
                Weight::None => 1.0,
            };
            for (ai, &pos) in self.alpha_pos.iter().enumerate() {
                let p = partials[pos];
                let wt = if w == Weight::None {
                    1.0
                } else {
                    base.powf(2.0 * self.alpha_order[ai] as f64 + 2.0 * extra)
                };
                row[wi * na + ai].add(q * wt * p * p);
            }
        }
        Ok(true)
    }
}

/// Raw output of one quadrature pass: `[rung][weight × alpha]`.
struct PassResult {
    estimates: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
    nodes: usize,
    budget_exhausted: bool,
}

fn prefix(buckets: &[Vec<Sum>]) -> Vec<Vec<f64>> {
    let width = buckets.first().map_or(0, Vec::len);
    let mut acc = vec![Sum::default(); width];
    buckets
        .iter()
        .map(|row| {
            for (a, b) in acc.iter_mut().zip(row) {
                a.add(b.value());
            }
            acc.iter().map(Sum::value).collect()
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Cell {
    center: [f64; 3],
    half: f64,
}

fn grid_pass(
    ig: &mut Integrands<'_>,
    order: usize,
    h_max: f64,
    grading: f64,
    straddle: f64,
    max_leaves: usize,
) -> Result<PassResult> {
    let n = ig.f.ambient().dim();
    if n > 3 {
        return Err(GeomError::Config("grid quadrature supports dimensions ≤ 3".into()));
    }
    if order < 2 {
        return Err(GeomError::Config("grid order must be at least 2".into()));
    }
    let rungs = ig.eps.len();
    let eps_min = *ig.eps.last().expect("nonempty ladder");
    let width = ig.width();
    let mut hi = vec![vec![Sum::default(); width]; rungs];
    let mut lo = vec![vec![Sum::default(); width]; rungs];
    let (gh_x, gh_w) = gauss_legendre(order);
    let (gl_x, gl_w) = gauss_legendre(order - 1);
    let sqrt_n = (n as f64).sqrt();
    let radius = ig.radius;

    let mut stack = vec![Cell {
        center: [0.0; 3],
        half: radius,
    }];
    let mut leaves = 0usize;
    let mut nodes = 0usize;
    let mut exhausted = false;
    let mut point = vec![0.0; n];
    while let Some(cell) = stack.pop() {
        let c = Vector::from_column_slice(&cell.center[..n]);
        let norm = c.norm();
        let hd = cell.half * sqrt_n;
        if norm - hd >= radius {
            continue;
        }
        let d = ig.f.dist_to_union(&c)?;
        let (lower, upper) = ((d - hd).max(0.0), d + hd);
        if upper.min(1.0) <= eps_min {
            continue;
        }
        let size = 2.0 * cell.half;
        let split = size > h_max * (1.0 + norm / 2.0)
            || (lower < grading * size && size > eps_min / straddle)
            || ig
                .eps
                .iter()
                .any(|&e| lower < e && e < upper && size > e / straddle);
        if split && !exhausted {
            if leaves + stack.len() + (1 << n) > max_leaves {
                exhausted = true;
            } else {
                let q = cell.half / 2.0;
                for k in 0..(1usize << n) {
                    let mut center = cell.center;
                    for (i, ci) in center.iter_mut().enumerate().take(n) {
                        *ci += if k >> i & 1 == 1 { q } else { -q };
                    }
                    stack.push(Cell { center, half: q });
                }
                continue;
            }
        }
        leaves += 1;
        let vol = cell.half.powi(n as i32);
        for (xs, ws, out) in [(&gh_x, &gh_w, &mut hi), (&gl_x, &gl_w, &mut lo)] {
            let m = xs.len();
            let total = m.pow(n as u32);
            for flat in 0..total {
                let mut rest = flat;
                let mut q = vol;
                for i in 0..n {
                    let j = rest % m;
                    rest /= m;
                    point[i] = cell.center[i] + cell.half * xs[j];
                    q *= ws[j];
                }
                ig.accumulate(&point, q, out)?;
                nodes += 1;
            }
        }
    }
    let estimates = prefix(&hi);
    let coarse = prefix(&lo);
    let errors = estimates
        .iter()
        .zip(&coarse)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect())
        .collect();
    Ok(PassResult {
        estimates,
        errors,
        nodes,
        budget_exhausted: exhausted,
    })
}

/// Standard normal pair from two uniforms.
fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

fn ln_gamma_half_int(m: usize) -> f64 {
    // ln Γ(m/2)
    let mut v = if m.is_multiple_of(2) { 0.0 } else { 0.5 * std::f64::consts::PI.ln() };
    let mut k = if m.is_multiple_of(2) { 2 } else { 1 };
    while k < m {
        v += (k as f64 / 2.0).ln();
        k += 2;
    }
    v
}

/// `ln |S^{m−1}|`.
fn ln_sphere_area(m: usize) -> f64 {
    (2.0f64).ln() + m as f64 / 2.0 * std::f64::consts::PI.ln() - ln_gamma_half_int(m)
}

/// Mixture proposal: a Gaussian background plus, for each nonzero-codim
/// member `Y`, a Gaussian along `Y` and a log-uniform normal radius.
struct Proposal {
    n: usize,
    sigma: f64,
    background: f64,
    tubes: Vec<usize>,
    s_lo: f64,
    s_hi: f64,
}

impl Proposal {
    fn new(f: &Semilattice, eps_min: f64) -> Self {
        Self {
            n: f.ambient().dim(),
            sigma: 3.0,
            background: 0.4,
            tubes: (0..f.len()).collect(),
            s_lo: eps_min / 2.0,
            s_hi: 2.0,
        }
    }

    fn ln_gauss(&self, k: usize, r2: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        -0.5 * r2 / s2 - k as f64 / 2.0 * (2.0 * std::f64::consts::PI * s2).ln()
    }

    fn draws(&self) -> usize {
        1 + 2 * self.n.div_ceil(2) + 1 + 2 * self.n.div_ceil(2)
    }

    fn sample(&self, f: &Semilattice, u: &[f64]) -> Vector {
        let n = self.n;
        let gauss = |off: usize, k: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(k + 1);
            let mut i = 0;
            while out.len() < k {
                let (a, b) = box_muller(u[off + i], u[off + i + 1]);
                out.push(a);
                out.push(b);
                i += 2;
            }
            out.truncate(k);
            out
        };
        let pick = u[0];
        let g1 = gauss(1, n);
        let base = 1 + 2 * n.div_ceil(2);
        if pick < self.background || self.tubes.is_empty() {
            return Vector::from_iterator(n, g1.iter().map(|g| g * self.sigma));
        }
        let t = ((pick - self.background) / (1.0 - self.background) * self.tubes.len() as f64) as usize;
        let y = &f.member(self.tubes[t.min(self.tubes.len() - 1)]).subspace;
        let k = y.dim();
        let m = n - k;
        let along = Vector::from_iterator(k, g1.iter().take(k).map(|g| g * self.sigma));
        let foot = y.from_coords(&along).expect("coordinate length matches");
        let s = self.s_lo * (self.s_hi / self.s_lo).powf(u[base]);
        let normal = y.complement();
        let g2 = gauss(base + 1, m);
        let gn = Vector::from_vec(g2);
        let norm = gn.norm().max(1e-300);
        foot + normal.from_coords(&(gn / norm)).expect("coordinate length matches") * s
    }

    fn density(&self, f: &Semilattice, x: &Vector) -> Result<f64> {
        let n = self.n;
        let mut dens = self.background * self.ln_gauss(n, x.norm_squared()).exp();
        let share = (1.0 - self.background) / self.tubes.len() as f64;
        let ln_range = (self.s_hi / self.s_lo).ln();
        for &i in &self.tubes {
            let y = &f.member(i).subspace;
            let k = y.dim();
            let m = n - k;
            let s = y.dist_to(x)?;
            if s < self.s_lo || s > self.s_hi {
                continue;
            }
            let py = y.project(x)?.norm_squared();
            let ln_q = self.ln_gauss(k, py) - (s * ln_range).ln() - ln_sphere_area(m)
                - (m as f64 - 1.0) * s.ln();
            dens += share * ln_q.exp();
        }
        Ok(dens)
    }
}

fn sampling_pass(ig: &mut Integrands<'_>, points: usize, seed: u64) -> Result<PassResult> {
    let f = ig.f;
    let eps_min = *ig.eps.last().expect("nonempty ladder");
    let prop = Proposal::new(f, eps_min);
    let mut halton = Halton::new(prop.draws(), seed);
    let rungs = ig.eps.len();
    let width = ig.width();
    const BATCHES: usize = 8;
    let per_batch = points.div_ceil(BATCHES).max(1);
    let mut batch_means: Vec<Vec<Vec<f64>>> = Vec::with_capacity(BATCHES);
    let mut total = vec![vec![Sum::default(); width]; rungs];
    let mut done = 0;
    for _ in 0..BATCHES {
        let mut buckets = vec![vec![Sum::default(); width]; rungs];
        let count = per_batch.min(points - done);
        for _ in 0..count {
            let u = halton.next_point();
            let x = prop.sample(f, &u);
            let q = prop.density(f, &x)?;
            if !(q > 0.0) || !q.is_finite() {
                continue;
            }
            ig.accumulate(x.as_slice(), 1.0 / (q * points as f64), &mut buckets)?;
        }
        done += count;
        for (t, b) in total.iter_mut().zip(&buckets) {
            for (a, v) in t.iter_mut().zip(b) {
                a.add(v.value());
            }
        }
        let scale = points as f64 / count.max(1) as f64;
        batch_means.push(
            prefix(&buckets)
                .into_iter()
                .map(|r| r.into_iter().map(|v| v * scale).collect())
                .collect(),
        );
        if done >= points {
            break;
        }
    }
    let estimates = prefix(&total);
    let b = batch_means.len() as f64;
    let errors = (0..rungs)
        .map(|r| {
            (0..width)
                .map(|c| {
                    let mean = batch_means.iter().map(|bm| bm[r][c]).sum::<f64>() / b;
                    let var = batch_means.iter().map(|bm| (bm[r][c] - mean).powi(2)).sum::<f64>()
                        / (b - 1.0).max(1.0);
                    (var / b).sqrt()
                })
                .collect()
        })
        .collect();
    Ok(PassResult {
        estimates,
        errors,
        nodes: points,
        budget_exhausted: false,
    })
}

/// Runs one quadrature pass for every `(weight, α)` combination.
fn run_pass(
    u: &dyn ClosedForm,
    f: &Semilattice,
    alphas: &[MultiIndex],
    weights: &[(Weight, f64)],
    eps: &[f64],
    radius: f64,
    quad: &Quadrature,
) -> Result<PassResult> {
    let mut ig = Integrands::new(u, f, alphas, weights, eps, radius)?;
    match *quad {
        Quadrature::Grid {
            order,
            h_max,
            grading,
            straddle,
            max_leaves,
        } => grid_pass(&mut ig, order, h_max, grading, straddle, max_leaves),
        Quadrature::Sampling { points, seed } => sampling_pass(&mut ig, points, seed),
    }
}

/// Quadrature of one weighted seminorm at one exclusion radius.
pub fn weighted_seminorm(u: &dyn ClosedForm, f: &Semilattice, spec: &WeightedNormSpec) -> Result<Estimate> {
    let r = run_pass(
        u,
        f,
        std::slice::from_ref(&spec.alpha),
        &[(spec.weight, spec.extra)],
        &[spec.eps],
        spec.radius,
        &spec.quadrature,
    )?;
    Ok(Estimate {
        value: r.estimates[0][0],
        error: r.errors[0][0],
        nodes: r.nodes,
        budget_exhausted: r.budget_exhausted,
    })
}

/// Estimates for every `(weight, α)` over a decreasing ε-ladder, from a
/// single shared set of nodes.
pub fn refinement_studies(
    u: &dyn ClosedForm,
    f: &Semilattice,
    alphas: &[MultiIndex],
    weights: &[(Weight, f64)],
    eps: &[f64],
    radius: f64,
    quad: &Quadrature,
) -> Result<(Vec<NormEntry>, usize, bool)> {
    let pass = run_pass(u, f, alphas, weights, eps, radius, quad)?;
    let na = alphas.len();
    let mut entries = Vec::with_capacity(na * weights.len());
    for (wi, &(weight, extra)) in weights.iter().enumerate() {
        for (ai, alpha) in alphas.iter().enumerate() {
            let col = wi * na + ai;
            let estimates: Vec<f64> = pass.estimates.iter().map(|r| r[col]).collect();
            let errors: Vec<f64> = pass.errors.iter().map(|r| r[col]).collect();
            let (exponent, relative_change, mut verdict) = classify(eps, &estimates);
            if pass.budget_exhausted {
                verdict = Verdict::Inconclusive;
            }
            entries.push(NormEntry {
                alpha: alpha.clone(),
                weight,
                extra,
                eps: eps.to_vec(),
                estimates,
                errors,
                exponent,
                relative_change,
                verdict,
            });
        }
    }
    Ok((entries, pass.nodes, pass.budget_exhausted))
}

/// Exponent fit for one `(α, weight)` over a ladder of at least four rungs.
pub fn refinement_study(
    u: &dyn ClosedForm,
    f: &Semilattice,
    alpha: &[u8],
    weight: Weight,
    eps: &[f64],
    quad: &Quadrature,
) -> Result<NormEntry> {
    if eps.len() < 4 {
        return Err(GeomError::DomainError("the ε-ladder needs at least 4 rungs".into()));
    }
    let (mut entries, _, _) =
        refinement_studies(u, f, &[alpha.to_vec()], &[(weight, 0.0)], eps, DEFAULT_RADIUS, quad)?;
    Ok(entries.remove(0))
}

/// Refinement studies for all `|α| ≤ max_order`, with the requested weight
/// and unweighted.
pub fn regularity_report(
    pair: &Eigenpair,
    max_order: usize,
    weight: Weight,
    eps: &[f64],
    quad: &Quadrature,
) -> Result<NormReport> {
    if max_order > 4 {
        return Err(GeomError::DomainError("max order must be at most 4".into()));
    }
    if eps.len() < 4 {
        return Err(GeomError::DomainError("the ε-ladder needs at least 4 rungs".into()));
    }
    let f = pair.lattice();
    let alphas = multi_indices_up_to(pair.dim(), max_order);
    let mut weights = vec![(weight, 0.0)];
    if weight != Weight::None {
        weights.push((Weight::None, 0.0));
    }
    let (entries, nodes, budget_exhausted) =
        refinement_studies(pair.u().as_ref(), f, &alphas, &weights, eps, DEFAULT_RADIUS, quad)?;
    let weighted_all_finite = entries
        .iter()
        .filter(|e| e.weight == weight)
        .all(|e| e.verdict == Verdict::Finite);
    let seed = match quad {
        Quadrature::Sampling { seed, .. } => *seed,
        Quadrature::Grid { .. } => 0,
    };
    Ok(NormReport {
        case: pair.name().to_string(),
        seed,
        max_order,
        weight,
        radius: DEFAULT_RADIUS,
        quadrature: quad.clone(),
        nodes,
        budget_exhausted,
        entries,
        weighted_all_finite,
    })
}

impl NormReport {
    pub fn entry(&self, alpha: &[u8], weight: Weight) -> Option<&NormEntry> {
        self.entries
            .iter()
            .find(|e| e.alpha == alpha && e.weight == weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{hydrogen_pair, Gaussian};
    use crate::subspace::AmbientSpace;
    use approx::assert_abs_diff_eq;

    fn origin_lattice(n: usize) -> Semilattice {
        Semilattice::closure(AmbientSpace::new(n).unwrap(), Vec::new()).unwrap()
    }

    #[test]
    fn grid_only_around_the_origin() {
        assert!(matches!(Quadrature::default_for(&origin_lattice(3), 0), Quadrature::Grid { .. }));
        assert!(matches!(Quadrature::default_for(&origin_lattice(4), 0), Quadrature::Sampling { .. }));
        let amb = AmbientSpace::new(3).unwrap();
        let line = Semilattice::closure(
            amb,
            vec![("L".into(), crate::subspace::Subspace::coordinate(amb, &[0]).unwrap())],
        )
        .unwrap();
        assert!(matches!(Quadrature::default_for(&line, 0), Quadrature::Sampling { .. }));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            // ∫ t^{2n−2} = 2/(2n−1)
            let p = 2 * n as i32 - 2;
            let q: f64 = x.iter().zip(&w).map(|(t, w)| w * t.powi(p)).sum();
            assert_abs_diff_eq!(q, 2.0 / (p as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn fd_matches_analytic() {
        let p = hydrogen_pair();
        let x = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let d = fd_partial(p.u().as_ref(), p.lattice(), &x, &[1, 0, 0], 1e-4).unwrap();
        assert_abs_diff_eq!(d, -0.3678794, epsilon = 1e-7);
        assert_abs_diff_eq!(d, -(-1.0f64).exp(), epsilon = 1e-8);
        let v = fd_partial(p.u().as_ref(), p.lattice(), &x, &[0, 0, 0], 1e-4).unwrap();
        assert_eq!(v, (-1.0f64).exp());
    }

    #[test]
    fn fd_stencil_guard() {
        let p = hydrogen_pair();
        let x = Vector::from_vec(vec![1e-4, 0.0, 0.0]);
        let err = fd_partial(p.u().as_ref(), p.lattice(), &x, &[2, 0, 0], 1e-4);
        assert_eq!(err, Err(GeomError::StencilTooWide));
        let h = default_step(p.lattice(), &x, &[2, 0, 0]).unwrap();
        assert!(fd_partial(p.u().as_ref(), p.lattice(), &x, &[2, 0, 0], h).is_ok());
    }

    #[test]
    fn fd_second_order() {
        let p = hydrogen_pair();
        let x = Vector::from_vec(vec![0.7, -0.4, 0.5]);
        let hs = [0.04, 0.02, 0.01, 0.005];
        for alpha in [[1u8, 0, 0], [0, 2, 0], [1, 1, 0]] {
            let order = fd_convergence_order(p.u().as_ref(), p.lattice(), &x, &alpha, &hs).unwrap();
            assert!((1.8..=2.2).contains(&order), "{alpha:?}: {order}");
        }
    }

    #[test]
    fn classify_thresholds() {
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        assert_eq!(classify(&eps, &[1.0, 1.0, 1.0, 1.0]).2, Verdict::Finite);
        assert_eq!(classify(&eps, &[0.0; 4]).2, Verdict::Finite);
        let (e, _, v) = classify(&eps, &[10.0, 100.0, 1000.0, 10000.0]);
        assert_abs_diff_eq!(e, -1.0, epsilon = 1e-12);
        assert_eq!(v, Verdict::Divergent);
        assert_eq!(classify(&eps, &[1.0, 1.1, 1.2, 1.3]).2, Verdict::Inconclusive);
    }

    #[test]
    fn hydrogen_mass_is_pi() {
        let p = hydrogen_pair();
        let spec = WeightedNormSpec {
            alpha: vec![0, 0, 0],
            weight: Weight::None,
            extra: 0.0,
            eps: 1e-3,
            radius: DEFAULT_RADIUS,
            quadrature: Quadrature::default_grid(),
        };
        let est = weighted_seminorm(p.u().as_ref(), p.lattice(), &spec).unwrap();
        assert!((est.value - std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI, "{est:?}");
        assert!(!est.budget_exhausted);
    }

    #[test]
    fn gaussian_mass_by_sampling() {
        // ∫_{R^4} e^{−2|x|²} = (π/2)^2
        let u = Gaussian { dim: 4, scale: 1.0 };
        let f = origin_lattice(4);
        let spec = WeightedNormSpec {
            alpha: vec![0; 4],
            weight: Weight::None,
            extra: 0.0,
            eps: 1e-3,
            radius: DEFAULT_RADIUS,
            quadrature: Quadrature::Sampling {
                points: 100_000,
                seed: 1,
            },
        };
        let est = weighted_seminorm(&u, &f, &spec).unwrap();
        let exact = (std::f64::consts::PI / 2.0).powi(2);
        assert!((est.value - exact).abs() < 0.02 * exact, "{est:?} vs {exact}");
    }
}
