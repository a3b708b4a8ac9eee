//! Smoothed distance functions and their comparison with `δ_F`.
//!
//! The cutoff `φ₀` is the identity on `[0, 1/2]`, equal to `1` on `[1, ∞)`,
//! and a flat blend in between. For a semilattice `F` the factors
//!
//! ```text
//! t_Y(x) = φ₀(d_Y(x)) / ∏_{Z ∈ F, Z ⊊ Y} t_Z(x)
//! ```
//!
//! are evaluated bottom-up, and `ρ_F = ∏_Y t_Y`. For a chain the product
//! telescopes to `φ₀(d_top)`.

use serde::{Deserialize, Serialize};

use crate::charts::PointOrRay;
use crate::error::{GeomError, Result};
use crate::lattice::Semilattice;
use crate::sampling::StrataSampler;
use crate::subspace::Vector;

/// `exp(-1/u)` for `u > 0`, else `0`.
fn bump(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth step on `[1/2, 1]`: `1` at `1/2`, `0` at `1`, flat at both ends.
pub fn step_down(t: f64) -> f64 {
    let a = bump(2.0 * (1.0 - t));
    let b = bump(2.0 * t - 1.0);
    a / (a + b)
}

/// The cutoff profile `φ₀`.
pub fn phi0(t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(GeomError::DomainError(format!("φ₀ needs t ≥ 0, got {t}")));
    }
    Ok(phi0_unchecked(t))
}

#[inline]
pub(crate) fn phi0_unchecked(t: f64) -> f64 {
    if t <= 0.5 {
        t
    } else if t >= 1.0 {
        1.0
    } else {
        let h = step_down(t);
        t * h + (1.0 - h)
    }
}

/// `φ₀(d_Y(x))` for a single member.
pub fn smoothed_r(y: &crate::subspace::Subspace, x: &Vector) -> Result<f64> {
    Ok(phi0_unchecked(y.dist_to(x)?))
}

/// Radial profile `ρ̄` of the component metric on `(X/Z)‾`: `r` on `[0, 1]`,
/// `2 − 1/r` on `[2, ∞)`, blended with [`step_down`] on `[1, 2]`, `ρ̄(∞) = 2`.
pub fn true_metric_profile(r: f64) -> f64 {
    if r <= 1.0 {
        r
    } else if r.is_infinite() {
        2.0
    } else if r >= 2.0 {
        2.0 - 1.0 / r
    } else {
        let h = step_down(r / 2.0);
        h * r + (1.0 - h) * (2.0 - 1.0 / r)
    }
}

/// Distance from `z` to the origin of `(X/Z)‾` for the component metric.
pub fn gz_distance(z: &PointOrRay) -> f64 {
    match z {
        PointOrRay::Ray(_) => 2.0,
        PointOrRay::Interior(v) => true_metric_profile(v.iter().map(|c| c * c).sum::<f64>().sqrt()),
    }
}

/// Factors `t_Y(x)` and their product at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoEvaluation {
    /// `d_Y(x)`, member order.
    pub distances: Vec<f64>,
    /// `t_Y(x)`, member order.
    pub factors: Vec<f64>,
    pub rho: f64,
    pub delta: f64,
}

/// The system `(t_Y)_{Y∈F}` for a fixed semilattice.
#[derive(Debug, Clone)]
pub struct SmoothedDistanceSystem<'a> {
    f: &'a Semilattice,
    below: Vec<Vec<usize>>,
}

impl<'a> SmoothedDistanceSystem<'a> {
    pub fn new(f: &'a Semilattice) -> Self {
        let below = (0..f.len()).map(|i| f.strictly_below(i).collect()).collect();
        Self { f, below }
    }

    pub fn lattice(&self) -> &Semilattice {
        self.f
    }

    /// Evaluates the factors in member order (nondecreasing dimension).
    pub fn evaluate(&self, x: &Vector) -> Result<RhoEvaluation> {
        let order: Vec<usize> = (0..self.f.len()).collect();
        self.evaluate_in_order(x, &order)
    }

    /// Evaluates the factors following `order`, which must list every member
    /// after all members strictly below it.
    pub fn evaluate_in_order(&self, x: &Vector, order: &[usize]) -> Result<RhoEvaluation> {
        let distances = self.f.distances(x)?;
        if distances.contains(&0.0) || self.f.on_singular_set(x)? {
            return Err(GeomError::OnSingularSet);
        }
        let mut factors = vec![f64::NAN; self.f.len()];
        for &i in order {
            let mut denom = 1.0;
            for &j in &self.below[i] {
                let t = factors[j];
                if t.is_nan() {
                    return Err(GeomError::DomainError(format!(
                        "order lists `{}` before `{}`",
                        self.f.member(i).name,
                        self.f.member(j).name
                    )));
                }
                denom *= t;
            }
            factors[i] = phi0_unchecked(distances[i]) / denom;
        }
        if factors.iter().any(|t| t.is_nan()) {
            return Err(GeomError::DomainError("order does not list every member".into()));
        }
        let rho = factors.iter().product();
        let delta = distances.iter().fold(1.0f64, |m, &d| m.min(d));
        Ok(RhoEvaluation {
            distances,
            factors,
            rho,
            delta,
        })
    }

    /// `ρ_F(x)`, extended by its limit `0` on `∪F`.
    pub fn rho_total(&self, x: &Vector) -> Result<f64> {
        match self.evaluate(x) {
            Ok(e) => Ok(e.rho),
            Err(GeomError::OnSingularSet) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    /// `(ρ_F(x), δ_F(x))` from precomputed distances; no singular-set check.
    pub(crate) fn rho_delta_from_distances(&self, distances: &[f64], factors: &mut [f64]) -> (f64, f64) {
        let mut rho = 1.0;
        for i in 0..distances.len() {
            let denom: f64 = self.below[i].iter().map(|&j| factors[j]).product();
            factors[i] = phi0_unchecked(distances[i]) / denom;
            rho *= factors[i];
        }
        let delta = distances.iter().fold(1.0f64, |m, &d| m.min(d));
        (rho, delta)
    }
}

pub fn rho_system(f: &Semilattice, x: &Vector) -> Result<RhoEvaluation> {
    SmoothedDistanceSystem::new(f).evaluate(x)
}

/// Counts over fixed bins of `log10(value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(log10_lo: f64, log10_hi: f64, bins: usize) -> Self {
        Self {
            log10_lo,
            log10_hi,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn add(&mut self, value: f64) {
        let l = value.log10();
        if l < self.log10_lo {
            self.underflow += 1;
        } else if l >= self.log10_hi {
            self.overflow += 1;
        } else {
            let w = (self.log10_hi - self.log10_lo) / self.counts.len() as f64;
            let i = (((l - self.log10_lo) / w) as usize).min(self.counts.len() - 1);
            self.counts[i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub samples: usize,
    pub seed: u64,
}

/// Statistics of `ρ_F/δ_F` over strata-concentrated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceStats {
    pub samples: usize,
    pub seed: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub skipped: usize,
    pub histogram: Histogram,
}

pub fn equivalence_scan(f: &Semilattice, spec: SamplerSpec) -> Result<EquivalenceStats> {
    let system = SmoothedDistanceSystem::new(f);
    let mut sampler = StrataSampler::new(f, spec.seed);
    let mut factors = vec![0.0; f.len()];
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut skipped = 0;
    let mut histogram = Histogram::new(-3.0, 3.0, 60);
    for _ in 0..spec.samples {
        let x = sampler.sample();
        let distances = f.distances(&x)?;
        if distances.contains(&0.0) {
            skipped += 1;
            continue;
        }
        let (rho, delta) = system.rho_delta_from_distances(&distances, &mut factors);
        let ratio = rho / delta;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        histogram.add(ratio);
    }
    Ok(EquivalenceStats {
        samples: spec.samples,
        seed: spec.seed,
        min_ratio,
        max_ratio,
        skipped,
        histogram,
    })
}

/// A sampled path through `X`.
#[derive(Debug, Clone)]
pub struct Curve {
    pub points: Vec<Vector>,
}

impl Curve {
    /// `foot + ε·normal` for `ε = 10^{-1}, …` down to `10^{-decades}`,
    /// `per_decade` points per decade.
    pub fn approach(foot: &Vector, normal: &Vector, decades: u32, per_decade: u32) -> Self {
        let steps = decades * per_decade;
        let points = (0..=steps)
            .map(|i| {
                let e = 10f64.powf(-1.0 - i as f64 / per_decade as f64);
                foot + normal * e
            })
            .collect();
        Self { points }
    }

    /// `base + t·dir` for log-spaced `t` from `1` to `t_max`.
    pub fn outward(base: &Vector, dir: &Vector, t_max: f64, samples: usize) -> Self {
        let points = (0..samples)
            .map(|i| {
                let t = t_max.powf(i as f64 / (samples - 1).max(1) as f64);
                base + dir * t
            })
            .collect();
        Self { points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub values: Vec<f64>,
    pub sup: f64,
    /// Largest discrete second difference of the values along the path.
    pub second_difference: f64,
}

/// `ρ_F(x)/d_Y(x)` along a path avoiding `∪F`.
pub fn ratio_probe(f: &Semilattice, member: usize, path: &Curve) -> Result<ProbeReport> {
    let system = SmoothedDistanceSystem::new(f);
    let y = &f.member(member).subspace;
    let values = path
        .points
        .iter()
        .map(|x| Ok(system.evaluate(x)?.rho / y.dist_to(x)?))
        .collect::<Result<Vec<f64>>>()?;
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let second_difference = values
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0, f64::max);
    Ok(ProbeReport {
        values,
        sup,
        second_difference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCheck {
    pub checked: usize,
    pub violations: usize,
    pub max_violation: f64,
}

/// Checks `ρ̄(d_Z(x)) ≥ min{1, d_Z(x)}` for every member `Z` and sample.
pub fn metric_inequality_check(f: &Semilattice, samples: &[Vector]) -> Result<MetricCheck> {
    let mut checked = 0;
    let mut violations = 0;
    let mut max_violation: f64 = 0.0;
    for x in samples {
        for d in f.distances(x)? {
            let lhs = true_metric_profile(d);
            let rhs = d.min(1.0);
            checked += 1;
            if lhs < rhs {
                violations += 1;
                max_violation = max_violation.max(rhs - lhs);
            }
        }
    }
    Ok(MetricCheck {
        checked,
        violations,
        max_violation,
    })
}
