//! Inverse-square and Coulomb potentials singular on `∪F`, closed-form
//! eigenpairs of `Δ + V`, and residual checks.
//!
//! `Δ = Σ ∂ᵢ²` throughout, so the hydrogen ground state is `u = e^{−r}`
//! with `V = 2/r` and `λ = 1`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distance::SmoothedDistanceSystem;
use crate::error::{GeomError, Result};
use crate::jet::{exp_taylor, powf_taylor, radius_jet, taylor_product, Jet, JetSpace};
use crate::lattice::{collision_planes, Semilattice};
use crate::sampling::StrataSampler;
use crate::subspace::{AmbientSpace, Vector};

/// Coefficient function `a_Y`, `b_Y` or `c`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// A smooth callback together with a declared bound on `|f|`.
    Bounded {
        f: Arc<dyn Fn(&Vector) -> f64 + Send + Sync>,
        bound: f64,
    },
    Sum(Vec<Coefficient>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Bounded { bound, .. } => write!(f, "Bounded {{ bound: {bound} }}"),
            Coefficient::Sum(parts) => f.debug_tuple("Sum").field(parts).finish(),
        }
    }
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::Constant(0.0)
    }

    pub fn bounded(bound: f64, f: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Bounded {
            f: Arc::new(f),
            bound,
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        match self {
            Coefficient::Constant(c) => Ok(*c),
            Coefficient::Bounded { f, bound } => {
                let v = f(x);
                if !v.is_finite() || v.abs() > *bound {
                    return Err(GeomError::DomainError(format!(
                        "coefficient value {v} exceeds its declared bound {bound}"
                    )));
                }
                Ok(v)
            }
            Coefficient::Sum(parts) => parts.iter().map(|p| p.eval(x)).sum(),
        }
    }

    /// Global bound on `|coefficient|`.
    pub fn bound(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => c.abs(),
            Coefficient::Bounded { bound, .. } => *bound,
            Coefficient::Sum(parts) => parts.iter().map(Coefficient::bound).sum(),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            _ => None,
        }
    }

    fn plus(&self, other: &Coefficient) -> Coefficient {
        match (self, other) {
            (Coefficient::Constant(a), Coefficient::Constant(b)) => Coefficient::Constant(a + b),
            _ => Coefficient::Sum(vec![self.clone(), other.clone()]),
        }
    }
}

/// Term `a_Y/d_Y² + b_Y/d_Y` attached to member `member` of `F`.
#[derive(Debug, Clone)]
pub struct PotentialTerm {
    pub member: usize,
    pub a: Coefficient,
    pub b: Coefficient,
}

/// A term as named in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub member: String,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

#[derive(Debug, Clone)]
pub struct InverseSquarePotential {
    lattice: Arc<Semilattice>,
    terms: Vec<PotentialTerm>,
    c: Coefficient,
}

/// `V = Σ_Y (a_Y/d_Y² + b_Y/d_Y) + c`; terms name members of `f`.
pub fn make_inverse_square(
    f: Arc<Semilattice>,
    terms: Vec<(String, Coefficient, Coefficient)>,
    c: Coefficient,
) -> Result<InverseSquarePotential> {
    let terms = terms
        .into_iter()
        .map(|(name, a, b)| {
            Ok(PotentialTerm {
                member: f.index_of(&name)?,
                a,
                b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InverseSquarePotential {
        lattice: f,
        terms,
        c,
    })
}

impl InverseSquarePotential {
    pub fn zero(f: Arc<Semilattice>) -> Self {
        Self {
            lattice: f,
            terms: Vec::new(),
            c: Coefficient::zero(),
        }
    }

    pub fn from_specs(f: Arc<Semilattice>, terms: &[TermSpec], c: f64) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|t| {
                (
                    t.member.clone(),
                    Coefficient::Constant(t.a),
                    Coefficient::Constant(t.b),
                )
            })
            .collect();
        make_inverse_square(f, terms, Coefficient::Constant(c))
    }

    pub fn lattice(&self) -> &Arc<Semilattice> {
        &self.lattice
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    pub fn regular_part(&self) -> &Coefficient {
        &self.c
    }

    /// Constant terms as config records (callback terms are skipped).
    pub fn to_specs(&self) -> Vec<TermSpec> {
        self.terms
            .iter()
            .filter_map(|t| {
                Some(TermSpec {
                    member: self.lattice.member(t.member).name.clone(),
                    a: t.a.as_constant()?,
                    b: t.b.as_constant()?,
                })
            })
            .collect()
    }

    /// `V₁ + V₂` on the same semilattice: the term lists are concatenated.
    pub fn add(&self, other: &InverseSquarePotential) -> Result<InverseSquarePotential> {
        let same = Arc::ptr_eq(&self.lattice, &other.lattice)
            || (self.lattice.len() == other.lattice.len()
                && self
                    .lattice
                    .members()
                    .iter()
                    .zip(other.lattice.members())
                    .all(|(a, b)| a.subspace.fingerprint() == b.subspace.fingerprint()));
        if !same {
            return Err(GeomError::DegenerateInput(
                "potentials live on different semilattices".into(),
            ));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(InverseSquarePotential {
            lattice: self.lattice.clone(),
            terms,
            c: self.c.plus(&other.c),
        })
    }

    /// `V(x)`; fails on `∪F`.
    pub fn eval(&self, x: &Vector) -> Result<f64> {
        if self.lattice.on_singular_set(x)? {
            return Err(GeomError::OnSingularSet);
        }
        let mut v = self.c.eval(x)?;
        for t in &self.terms {
            let d = self.lattice.member(t.member).subspace.dist_to(x)?;
            v += t.a.eval(x)? / (d * d) + t.b.eval(x)? / d;
        }
        Ok(v)
    }
}

pub fn eval_potential(v: &InverseSquarePotential, x: &Vector) -> Result<f64> {
    v.eval(x)
}

/// Sup of `|ρ_F² V|` over strata-concentrated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundScan {
    pub samples: usize,
    pub seed: u64,
    /// Sup over the first half of the samples.
    pub sup_half: f64,
    pub sup: f64,
    pub relative_change: f64,
    pub bounded: bool,
    /// Samples that landed on `∪F` to working precision.
    pub skipped: usize,
}

pub fn rho2v_bound_scan(v: &InverseSquarePotential, samples: usize, seed: u64) -> Result<BoundScan> {
    let f = v.lattice.as_ref();
    let system = SmoothedDistanceSystem::new(f);
    let mut sampler = StrataSampler::new(f, seed);
    let mut sup: f64 = 0.0;
    let mut sup_half = 0.0;
    let mut skipped = 0;
    for k in 0..samples {
        if k == samples / 2 {
            sup_half = sup;
        }
        let x = sampler.sample();
        let rho = match system.evaluate(&x) {
            Ok(e) => e.rho,
            Err(GeomError::OnSingularSet) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        match v.eval(&x) {
            Ok(val) => sup = sup.max((rho * rho * val).abs()),
            Err(GeomError::OnSingularSet) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if samples < 2 {
        sup_half = sup;
    }
    let relative_change = if sup == 0.0 {
        0.0
    } else {
        (sup - sup_half).abs() / sup
    };
    Ok(BoundScan {
        samples,
        seed,
        sup_half,
        sup,
        relative_change,
        bounded: sup.is_finite() && relative_change < 0.05,
        skipped,
    })
}

/// A closed-form function on `R^n` whose Taylor jets are available.
pub trait ClosedForm: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    /// Jet of `u` at `x`, in the variables and order of `space`.
    fn jet(&self, space: &Arc<JetSpace>, x: &[f64]) -> Result<Jet>;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn label(&self) -> String;
}

/// `u = r^γ e^{−κ r}` with `r = ‖x‖` on `R^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialExp {
    pub dim: usize,
    pub gamma: f64,
    pub kappa: f64,
}

impl ClosedForm for RadialExp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, space: &Arc<JetSpace>, x: &[f64]) -> Result<Jet> {
        let r0 = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r0 == 0.0 {
            return Err(GeomError::OnSingularSet);
        }
        let k = space.order();
        let pow = powf_taylor(r0, self.gamma, k);
        // e^{−κ(r0+h)} = e^{−κ r0} Σ (−κ h)^j / j!
        let mut exp = exp_taylor(-self.kappa * r0, k);
        let mut s = 1.0;
        for c in exp.iter_mut() {
            *c *= s;
            s *= -self.kappa;
        }
        let g = taylor_product(&pow, &exp);
        Ok(radius_jet(space, x).compose(&g))
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r == 0.0 && self.gamma != 0.0 {
            return Err(GeomError::OnSingularSet);
        }
        Ok(r.powf(self.gamma) * (-self.kappa * r).exp())
    }

    fn label(&self) -> String {
        if self.gamma == 0.0 {
            format!("exp(-{}r)", self.kappa)
        } else {
            format!("r^{} exp(-{}r)", self.gamma, self.kappa)
        }
    }
}

/// `u = e^{−s‖x‖²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub dim: usize,
    pub scale: f64,
}

impl ClosedForm for Gaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, space: &Arc<JetSpace>, x: &[f64]) -> Result<Jet> {
        let mut r2 = Jet::constant(space, 0.0);
        for (i, &xi) in x.iter().enumerate() {
            let v = Jet::variable(space, i, xi);
            r2 = r2.add(&v.mul(&v));
        }
        Ok(r2.scale(-self.scale).exp())
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((-self.scale * x.iter().map(|c| c * c).sum::<f64>()).exp())
    }

    fn label(&self) -> String {
        format!("exp(-{}|x|^2)", self.scale)
    }
}

/// Probe radii used when admitting an eigenpair.
pub const PROBE_RADII: usize = 100;
pub const ADMISSION_TOL: f64 = 1e-8;

/// A fixed direction off every proper subspace used in practice.
pub fn probe_direction(n: usize) -> Vector {
    let v = Vector::from_fn(n, |i, _| (1.3 * i as f64 + 0.7).sin() + 0.05 * (i as f64 + 1.0));
    let norm = v.norm();
    v / norm
}

/// `k`-th of `count` log-spaced radii in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize, k: usize) -> f64 {
    if count <= 1 {
        return lo;
    }
    lo * (hi / lo).powf(k as f64 / (count - 1) as f64)
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    u: Arc<dyn ClosedForm>,
    potential: InverseSquarePotential,
    lambda: f64,
    name: String,
}

impl Eigenpair {
    /// Admits `(u, V, λ)` after checking the residual at
    /// [`PROBE_RADII`] log-spaced radii in `[0.1, 10]`.
    pub fn new(
        name: impl Into<String>,
        u: Arc<dyn ClosedForm>,
        potential: InverseSquarePotential,
        lambda: f64,
    ) -> Result<Self> {
        let n = potential.lattice.ambient().dim();
        if u.dim() != n {
            return Err(GeomError::AmbientMismatch {
                expected: n,
                found: u.dim(),
            });
        }
        let pair = Self {
            u,
            potential,
            lambda,
            name: name.into(),
        };
        let dir = probe_direction(n);
        let space = JetSpace::new(n, 2);
        for k in 0..PROBE_RADII {
            let radius = log_spaced(0.1, 10.0, PROBE_RADII, k);
            let x = &dir * radius;
            let res = pair.residual_with(&space, &x)?;
            if !(res < ADMISSION_TOL) {
                return Err(GeomError::InvalidEigenpair {
                    residual: res,
                    radius,
                });
            }
        }
        Ok(pair)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn u(&self) -> &Arc<dyn ClosedForm> {
        &self.u
    }

    pub fn potential(&self) -> &InverseSquarePotential {
        &self.potential
    }

    pub fn lattice(&self) -> &Arc<Semilattice> {
        &self.potential.lattice
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    fn residual_with(&self, space: &Arc<JetSpace>, x: &Vector) -> Result<f64> {
        let v = self.potential.eval(x)?;
        let jet = self.u.jet(space, x.as_slice())?;
        Ok((jet.laplacian() + (v - self.lambda) * jet.value()).abs())
    }

    /// `|(Δ + V)u − λu|(x)`.
    pub fn residual(&self, x: &Vector) -> Result<f64> {
        self.residual_with(&JetSpace::new(self.dim(), 2), x)
    }
}

pub fn residual(pair: &Eigenpair, x: &Vector) -> Result<f64> {
    pair.residual(x)
}

fn point_lattice(n: usize) -> Result<Arc<Semilattice>> {
    Ok(Arc::new(Semilattice::closure(AmbientSpace::new(n)?, Vec::new())?))
}

/// `u = e^{−r}`, `V = 2/r`, `λ = 1` on `R³` with `F = {{0}}`.
pub fn hydrogen_pair() -> Eigenpair {
    let f = point_lattice(3).expect("R^3 is valid");
    let v = InverseSquarePotential::from_specs(
        f,
        &[TermSpec {
            member: crate::lattice::ZERO_NAME.into(),
            a: 0.0,
            b: 2.0,
        }],
        0.0,
    )
    .expect("{0} is a member");
    let u = RadialExp {
        dim: 3,
        gamma: 0.0,
        kappa: 1.0,
    };
    Eigenpair::new("hydrogen", Arc::new(u), v, 1.0).expect("hydrogen ground state is exact")
}

/// `u = r^γ e^{−r}`, `V = −γ(γ+1)/r² + 2(γ+1)/r`, `λ = 1` on `R³`.
pub fn radial_invsq_pair(gamma: f64) -> Result<Eigenpair> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(GeomError::DomainError(format!("γ must lie in (0, 1), got {gamma}")));
    }
    let f = point_lattice(3)?;
    let v = InverseSquarePotential::from_specs(
        f,
        &[TermSpec {
            member: crate::lattice::ZERO_NAME.into(),
            a: -gamma * (gamma + 1.0),
            b: 2.0 * (gamma + 1.0),
        }],
        0.0,
    )?;
    let u = RadialExp {
        dim: 3,
        gamma,
        kappa: 1.0,
    };
    Eigenpair::new(format!("invsq:{gamma}"), Arc::new(u), v, 1.0)
}

/// Coulomb potential `Σ b_j/‖x_j‖ + Σ_{i<j} c_ij/‖x_i − x_j‖` on `R^{3N}`.
///
/// `c` lists the pair coefficients in the order `(1,2), (1,3), …, (N−1,N)`.
pub fn nbody_coulomb(
    particles: usize,
    b: &[f64],
    c: &[f64],
) -> Result<(Arc<Semilattice>, InverseSquarePotential)> {
    if particles == 0 {
        return Err(GeomError::DomainError("need at least one particle".into()));
    }
    let pairs = particles * (particles - 1) / 2;
    if b.len() != particles || c.len() != pairs {
        return Err(GeomError::Config(format!(
            "expected {particles} particle and {pairs} pair coefficients, got {} and {}",
            b.len(),
            c.len()
        )));
    }
    let planes = collision_planes(particles)?;
    let f = Arc::new(Semilattice::closure(AmbientSpace::new(3 * particles)?, planes)?);
    let mut terms = Vec::new();
    for (j, &bj) in b.iter().enumerate() {
        terms.push(TermSpec {
            member: format!("x{}=0", j + 1),
            a: 0.0,
            b: bj,
        });
    }
    let mut k = 0;
    for i in 0..particles {
        for j in i + 1..particles {
            // d_Y = ‖x_i − x_j‖/√2 on the diagonal {x_i = x_j}.
            terms.push(TermSpec {
                member: format!("x{}=x{}", i + 1, j + 1),
                a: 0.0,
                b: c[k] / std::f64::consts::SQRT_2,
            });
            k += 1;
        }
    }
    let v = InverseSquarePotential::from_specs(f.clone(), &terms, 0.0)?;
    Ok((f, v))
}

/// Potential entry of a lattice config: a built-in name or explicit terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Builtin(String),
    Terms {
        terms: Vec<TermSpec>,
        #[serde(default)]
        c: f64,
    },
}

impl PotentialSpec {
    /// Builds the potential on `f`. Built-ins: `hydrogen` and `invsq:γ`
    /// attach to `{0}`; `nbody:N` uses unit charges on the collision planes
    /// of `f`.
    pub fn build(&self, f: Arc<Semilattice>) -> Result<InverseSquarePotential> {
        match self {
            PotentialSpec::Terms { terms, c } => InverseSquarePotential::from_specs(f, terms, *c),
            PotentialSpec::Builtin(name) => {
                let zero = crate::lattice::ZERO_NAME.to_string();
                if name == "hydrogen" {
                    let t = TermSpec { member: zero, a: 0.0, b: 2.0 };
                    InverseSquarePotential::from_specs(f, &[t], 0.0)
                } else if let Some(g) = name.strip_prefix("invsq:") {
                    let gamma: f64 = g
                        .parse()
                        .map_err(|_| GeomError::Config(format!("bad γ in `{name}`")))?;
                    let t = TermSpec {
                        member: zero,
                        a: -gamma * (gamma + 1.0),
                        b: 2.0 * (gamma + 1.0),
                    };
                    InverseSquarePotential::from_specs(f, &[t], 0.0)
                } else if let Some(n) = name.strip_prefix("nbody:") {
                    let n: usize = n
                        .parse()
                        .map_err(|_| GeomError::Config(format!("bad particle count in `{name}`")))?;
                    let (g, v) = nbody_coulomb(n, &vec![1.0; n], &vec![1.0; n * (n - 1) / 2])?;
                    if g.ambient() != f.ambient() {
                        return Err(GeomError::AmbientMismatch {
                            expected: f.ambient().dim(),
                            found: g.ambient().dim(),
                        });
                    }
                    let specs: Vec<TermSpec> = v
                        .to_specs()
                        .into_iter()
                        .map(|mut t| {
                            let s = &g.member(g.index_of(&t.member).expect("own member")).subspace;
                            let idx = f.find(s)?.ok_or_else(|| GeomError::UnknownMember(t.member.clone()))?;
                            t.member = f.member(idx).name.clone();
                            Ok(t)
                        })
                        .collect::<Result<_>>()?;
                    InverseSquarePotential::from_specs(f, &specs, 0.0)
                } else {
                    Err(GeomError::Config(format!("unknown built-in potential `{name}`")))
                }
            }
        }
    }
}

/// Built-in eigenpairs: `hydrogen` and `invsq:γ`.
pub fn builtin_pair(name: &str) -> Result<Eigenpair> {
    if name == "hydrogen" {
        Ok(hydrogen_pair())
    } else if let Some(g) = name.strip_prefix("invsq:") {
        let gamma: f64 = g
            .parse()
            .map_err(|_| GeomError::Config(format!("bad γ in `{name}`")))?;
        radial_invsq_pair(gamma)
    } else {
        Err(GeomError::Config(format!("unknown eigenpair `{name}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::phi0;
    use approx::assert_abs_diff_eq;

    fn v3(a: f64, b: f64, c: f64) -> Vector {
        Vector::from_vec(vec![a, b, c])
    }

    #[test]
    fn hydrogen_values() {
        let p = hydrogen_pair();
        assert_abs_diff_eq!(p.potential().eval(&v3(1.0, 0.0, 0.0)).unwrap(), 2.0);
        assert!(p.residual(&v3(1.0, 0.0, 0.0)).unwrap() < 1e-10);
        let space = JetSpace::new(3, 1);
        let j = p.u().jet(&space, &[1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(j.partial(&[1, 0, 0]), -(-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(j.partial(&[1, 0, 0]), -0.3678794, epsilon = 1e-7);
    }

    #[test]
    fn hydrogen_laplacian_matches_radial_identity() {
        // Δe^{−r} = (1 − 2/r)e^{−r} in R³.
        let p = hydrogen_pair();
        let space = JetSpace::new(3, 2);
        let x = [0.3, -1.1, 0.4];
        let r = (0.09f64 + 1.21 + 0.16).sqrt();
        let j = p.u().jet(&space, &x).unwrap();
        assert_abs_diff_eq!(j.laplacian(), (1.0 - 2.0 / r) * (-r).exp(), epsilon = 1e-14);
    }

    #[test]
    fn invsq_family() {
        let p = radial_invsq_pair(0.3).unwrap();
        let t = &p.potential().terms()[0];
        assert_abs_diff_eq!(t.a.as_constant().unwrap(), -0.39, epsilon = 1e-15);
        assert_abs_diff_eq!(t.b.as_constant().unwrap(), 2.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p.potential().eval(&v3(0.0, 2.0, 0.0)).unwrap(), 1.2025, epsilon = 1e-14);
        assert!(p.residual(&v3(1.0, 0.0, 0.0)).unwrap() < 1e-10);
        assert!(p.u().value(&[1e-12, 0.0, 0.0]).unwrap() < 1e-3);
        assert!(matches!(radial_invsq_pair(1.0), Err(GeomError::DomainError(_))));
        assert!(matches!(radial_invsq_pair(0.0), Err(GeomError::DomainError(_))));
    }

    #[test]
    fn gaussian_is_refused() {
        let f = point_lattice(3).unwrap();
        let u = Gaussian { dim: 3, scale: 1.0 };
        let err = Eigenpair::new("gauss", Arc::new(u), InverseSquarePotential::zero(f), 1.0);
        assert!(matches!(err, Err(GeomError::InvalidEigenpair { .. })));
    }

    #[test]
    fn singular_set_and_unknown_member() {
        let p = hydrogen_pair();
        assert_eq!(p.potential().eval(&v3(0.0, 0.0, 0.0)), Err(GeomError::OnSingularSet));
        assert_eq!(p.residual(&v3(0.0, 0.0, 0.0)), Err(GeomError::OnSingularSet));
        let f = point_lattice(3).unwrap();
        let err = make_inverse_square(
            f,
            vec![("nope".into(), Coefficient::zero(), Coefficient::zero())],
            Coefficient::zero(),
        );
        assert!(matches!(err, Err(GeomError::UnknownMember(_))));
    }

    #[test]
    fn zero_potential() {
        let f = point_lattice(3).unwrap();
        let v = InverseSquarePotential::from_specs(
            f.clone(),
            &[TermSpec { member: "0".into(), a: 0.0, b: 0.0 }],
            0.0,
        )
        .unwrap();
        assert_eq!(v.eval(&v3(0.2, 0.1, 5.0)).unwrap(), 0.0);
        let scan = rho2v_bound_scan(&InverseSquarePotential::zero(f), 1000, 1).unwrap();
        assert_eq!(scan.sup, 0.0);
        assert!(scan.bounded);
    }

    #[test]
    fn nbody_two_particles() {
        let (f, v) = nbody_coulomb(2, &[1.0, 1.0], &[1.0]).unwrap();
        assert_eq!(f.len(), 4);
        let x = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(v.eval(&x).unwrap(), 2.0 + 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.eval(&x).unwrap(), 2.7071, epsilon = 1e-4);
        let (_, z) = nbody_coulomb(2, &[0.0, 0.0], &[0.0]).unwrap();
        assert_eq!(z.eval(&x).unwrap(), 0.0);
        assert!(nbody_coulomb(2, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn hydrogen_rho2v_sup_below_grid_oracle() {
        // Grid oracle for sup_r 2φ₀(r)²/r.
        let oracle = (1..200_000)
            .map(|k| {
                let r = k as f64 * 1e-5;
                2.0 * phi0(r).unwrap().powi(2) / r
            })
            .fold(0.0f64, f64::max);
        let scan = rho2v_bound_scan(hydrogen_pair().potential(), 20_000, 5).unwrap();
        assert!(scan.sup <= oracle + 1e-9, "{} vs {}", scan.sup, oracle);
        assert!(scan.sup > 0.8 * oracle);
        assert!(scan.bounded);
    }

    #[test]
    fn sum_is_linear() {
        let a = hydrogen_pair();
        let b = radial_invsq_pair(0.3).unwrap();
        let f = a.lattice().clone();
        let vb = InverseSquarePotential::from_specs(f, &b.potential().to_specs(), 0.5).unwrap();
        let s = a.potential().add(&vb).unwrap();
        let x = v3(0.4, -0.2, 0.9);
        let lhs = s.eval(&x).unwrap();
        let rhs = a.potential().eval(&x).unwrap() + vb.eval(&x).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn bounded_callback() {
        let f = point_lattice(3).unwrap();
        let c = Coefficient::bounded(1.0, |x: &Vector| x[0].sin());
        let v = make_inverse_square(f, vec![("0".into(), Coefficient::zero(), c)], Coefficient::zero())
            .unwrap();
        assert_abs_diff_eq!(v.eval(&v3(1.0, 0.0, 0.0)).unwrap(), 1f64.sin(), epsilon = 1e-15);
        let bad = Coefficient::bounded(0.1, |_: &Vector| 1.0);
        assert!(bad.eval(&v3(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn spec_builtins() {
        let f = point_lattice(3).unwrap();
        let s: PotentialSpec = serde_json::from_str("\"invsq:0.3\"").unwrap();
        let v = s.build(f.clone()).unwrap();
        assert_abs_diff_eq!(v.eval(&v3(2.0, 0.0, 0.0)).unwrap(), 1.2025, epsilon = 1e-14);
        let s: PotentialSpec =
            serde_json::from_str(r#"{"terms":[{"member":"0","b":2.0}],"c":0.5}"#).unwrap();
        assert_abs_diff_eq!(s.build(f).unwrap().eval(&v3(1.0, 0.0, 0.0)).unwrap(), 2.5);
        let (g, _) = nbody_coulomb(2, &[1.0, 1.0], &[1.0]).unwrap();
        let v = PotentialSpec::Builtin("nbody:2".into()).build(g).unwrap();
        let x = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(v.eval(&x).unwrap(), 2.0 + 0.5f64.sqrt(), epsilon = 1e-14);
    }
}
