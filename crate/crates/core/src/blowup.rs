//! Points of the blown-up spaces `[X̄ : S_Y]`, `X_GV` and `X_F`, and
//! clean-intersection checks for closures and spheres at infinity.
//!
//! Quotients `X/Y` are modelled by `Y⊥` with the canonical basis returned by
//! [`Subspace::complement`]; components over `X/Y` are stored in those
//! coordinates (for `Y = {0}` this is the standard basis of `X`).

use serde::Serialize;

use crate::charts::{theta, theta_inv, CompactPoint, PointOrRay};
use crate::error::{GeomError, Result};
use crate::lattice::Semilattice;
use crate::subspace::{adapted_basis, AmbientSpace, Subspace, Vector, RANK_TOL};

/// Image of an interior point under `Ψ_Y = (ψ_Y, χ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPoint {
    /// Point of `(X/Y)‾`, in the coordinates of `Y⊥`.
    pub quotient_part: CompactPoint,
    /// Point of `Ȳ`, in the coordinates of `Y`.
    pub fiber_part: CompactPoint,
}

fn proper(y: &Subspace) -> Result<()> {
    if y.is_zero() || y.is_full() {
        return Err(GeomError::DegenerateSubspace);
    }
    Ok(())
}

/// `Ψ_Y(x)`: with `x = v_Y + v_⊥`, the pair `(Θ(v_⊥), Θ(v_Y/√(1 + ‖v_⊥‖²)))`.
pub fn split_point(y: &Subspace, x: &Vector) -> Result<SplitPoint> {
    proper(y)?;
    let along = y.coords(x)?;
    let across = y.complement().coords(x)?;
    let scale = (1.0 + across.norm_squared()).sqrt();
    Ok(SplitPoint {
        quotient_part: theta(&across)?,
        fiber_part: theta(&(along / scale))?,
    })
}

/// `Ξ_Y(z, y) = z + √(1 + ⟨z, z⟩)·y` for interior `y`, and `y` itself for a
/// boundary ray of `Ȳ`. `z` is given in `Y⊥`-coordinates and `y` in
/// `Y`-coordinates; the result is in `X`.
pub fn blowdown_xi(y_space: &Subspace, z: &Vector, y: &PointOrRay) -> Result<PointOrRay> {
    proper(y_space)?;
    let complement = y_space.complement();
    match y {
        PointOrRay::Ray(dir) => {
            let d = y_space.from_coords(&Vector::from_vec(dir.clone()))?;
            Ok(PointOrRay::Ray(d.iter().copied().collect()))
        }
        PointOrRay::Interior(fiber) => {
            let zx = complement.from_coords(z)?;
            let yx = y_space.from_coords(&Vector::from_vec(fiber.clone()))?;
            let x = zx + yx * (1.0 + z.norm_squared()).sqrt();
            Ok(PointOrRay::Interior(x.iter().copied().collect()))
        }
    }
}

/// `Ξ_Y` applied to a split point with an interior quotient part.
pub fn blowdown_split(y_space: &Subspace, p: &SplitPoint) -> Result<PointOrRay> {
    match theta_inv(&p.quotient_part) {
        PointOrRay::Interior(z) => {
            blowdown_xi(y_space, &Vector::from_vec(z), &theta_inv(&p.fiber_part))
        }
        PointOrRay::Ray(_) => Err(GeomError::DomainError(
            "quotient part at infinity lies over the front face".into(),
        )),
    }
}

/// `Ψ(η, μ) = (η/|η|, (|η|, μ))` off the blown-up center `{0} × S`.
pub fn sphere_blowup_map(eta: &Vector, mu: &Vector) -> Result<(Vector, Vector)> {
    let r = eta.norm();
    let total = (r * r + mu.norm_squared()).sqrt();
    if (total - 1.0).abs() > 1e-12 {
        return Err(GeomError::DomainError("(η, μ) must be a unit vector".into()));
    }
    if r == 0.0 {
        return Err(GeomError::OnBlownCenter);
    }
    let mut second = Vector::zeros(mu.len() + 1);
    second[0] = r;
    second.rows_mut(1, mu.len()).copy_from(mu);
    Ok((eta / r, second))
}

/// Inverse of [`sphere_blowup_map`]: `(ω, (s, μ)) ↦ (sω, μ)`.
pub fn sphere_blowup_inv(omega: &Vector, radial: &Vector) -> (Vector, Vector) {
    let s = radial[0];
    (omega * s, radial.rows(1, radial.len() - 1).into_owned())
}

/// A point of `X_GV ⊂ ∏_{Y∈F} (X/Y)‾`, one component per member.
#[derive(Debug, Clone, PartialEq)]
pub struct GVPoint {
    pub components: Vec<CompactPoint>,
}

/// Per-member complements `Y⊥`, cached for repeated embeddings.
#[derive(Debug, Clone)]
pub struct QuotientCharts {
    complements: Vec<Subspace>,
}

impl QuotientCharts {
    pub fn new(f: &Semilattice) -> Self {
        Self {
            complements: f.members().iter().map(|m| m.subspace.complement()).collect(),
        }
    }

    pub fn complement(&self, i: usize) -> &Subspace {
        &self.complements[i]
    }

    /// Multi-diagonal map `δ(x) = (Θ(π_{Y⊥} x))_{Y∈F}`.
    pub fn embed(&self, x: &Vector) -> Result<GVPoint> {
        let components = self
            .complements
            .iter()
            .map(|c| theta(&c.coords(x)?))
            .collect::<Result<_>>()?;
        Ok(GVPoint { components })
    }

    /// Limit of `embed(base + t·dir)` as `t → ∞`.
    pub fn ray_limit(&self, base: &Vector, dir: &Vector) -> Result<GVPoint> {
        let scale = dir.norm();
        if scale == 0.0 {
            return Err(GeomError::DegenerateDirection);
        }
        let components = self
            .complements
            .iter()
            .map(|c| {
                let w = c.coords(dir)?;
                if w.norm() > RANK_TOL * scale {
                    CompactPoint::ray(&w)
                } else {
                    theta(&c.coords(base)?)
                }
            })
            .collect::<Result<_>>()?;
        Ok(GVPoint { components })
    }
}

pub fn gv_embed(f: &Semilattice, x: &Vector) -> Result<GVPoint> {
    QuotientCharts::new(f).embed(x)
}

pub fn ray_limit(f: &Semilattice, base: &Vector, dir: &Vector) -> Result<GVPoint> {
    QuotientCharts::new(f).ray_limit(base, dir)
}

/// Polar data of an interior point relative to one member `Y`:
/// `x = foot + radius · direction` with `direction ⟂ Y` a unit vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarTriple {
    pub member: String,
    pub foot: Vec<f64>,
    pub direction: Vec<f64>,
    pub radius: f64,
}

/// A point of `X_F` off the singular set: its `X_GV` image plus per-member
/// polar data, which locates it in the inward-pointing spherical normal
/// bundle fibers.
#[derive(Debug, Clone)]
pub struct XFPoint {
    pub gv: GVPoint,
    pub polar: Vec<PolarTriple>,
}

pub fn xf_coords(f: &Semilattice, x: &Vector) -> Result<XFPoint> {
    if f.on_singular_set(x)? {
        return Err(GeomError::OnSingularSet);
    }
    let gv = gv_embed(f, x)?;
    let polar = f
        .members()
        .iter()
        .map(|m| {
            let foot = m.subspace.project(x)?;
            let normal = x - &foot;
            let radius = normal.norm();
            Ok(PolarTriple {
                member: m.name.clone(),
                foot: foot.iter().copied().collect(),
                direction: (normal / radius).iter().copied().collect(),
                radius,
            })
        })
        .collect::<Result<_>>()?;
    Ok(XFPoint { gv, polar })
}

/// `Ȳ` (closure in `X̄`) or `S_Y` (sphere at infinity of `Y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumKind {
    Closure,
    Sphere,
}

#[derive(Debug, Clone)]
pub struct Stratum {
    pub kind: StratumKind,
    pub subspace: Subspace,
}

impl Stratum {
    pub fn closure(subspace: Subspace) -> Self {
        Self {
            kind: StratumKind::Closure,
            subspace,
        }
    }

    pub fn sphere(subspace: Subspace) -> Self {
        Self {
            kind: StratumKind::Sphere,
            subspace,
        }
    }

    /// Linear span `L ⊂ R^{n+1}` with `Θ(stratum) = S^n_1 ∩ L`:
    /// `R e_0 ⊕ Y` for `Ȳ`, `{0} ⊕ Y` for `S_Y`.
    fn cone(&self) -> Result<Subspace> {
        let n = self.subspace.ambient().dim();
        let lifted = AmbientSpace::new(n + 1)?;
        let mut gens: Vec<Vector> = self.subspace.basis().iter().map(pad).collect();
        if self.kind == StratumKind::Closure {
            gens.push(unit(n + 1, 0));
        }
        Subspace::span(lifted, &gens)
    }

    /// `T_p` of the stratum: `L ∩ p⊥`.
    fn tangent(&self, p: &Vector) -> Result<Subspace> {
        let normal = Subspace::span(self.cone()?.ambient(), std::slice::from_ref(p))?.complement();
        self.cone()?.intersect(&normal)
    }
}

fn pad(v: &Vector) -> Vector {
    let mut out = Vector::zeros(v.len() + 1);
    out.rows_mut(1, v.len()).copy_from(v);
    out
}

fn unit(n: usize, i: usize) -> Vector {
    Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CleanReport {
    /// Test point in sphere coordinates.
    pub point: Vec<f64>,
    pub description: String,
    pub dim_tangent_of_intersection: usize,
    pub dim_intersection_of_tangents: usize,
    pub clean: bool,
}

/// Compares `dim T_p(P∩Q)` with `dim(T_p P ∩ T_p Q)`.
///
/// Without a test point, `p` is the ray through the first adapted basis vector
/// of `Y∩Z` (or the origin when `Y∩Z = {0}` and both strata are closures).
/// There `T(P∩Q)` is read off the adapted basis: `span{e_0, e_2, …, e_m}` for a
/// closure and `span{e_2, …, e_m}` for a sphere. `T P` and `T Q` are computed
/// independently as `L ∩ p⊥`.
pub fn clean_check(p: &Stratum, q: &Stratum, test_point: Option<&CompactPoint>) -> Result<CleanReport> {
    let ambient = p.subspace.ambient();
    if q.subspace.ambient() != ambient {
        return Err(GeomError::AmbientMismatch {
            expected: ambient.dim(),
            found: q.subspace.ambient().dim(),
        });
    }
    let n = ambient.dim();
    let lifted = AmbientSpace::new(n + 1)?;
    let meet_kind = if p.kind == StratumKind::Sphere || q.kind == StratumKind::Sphere {
        StratumKind::Sphere
    } else {
        StratumKind::Closure
    };
    let meet = Stratum {
        kind: meet_kind,
        subspace: p.subspace.intersect(&q.subspace)?,
    };

    let (point, t_meet, description) = match test_point {
        Some(tp) => {
            if tp.dim() != n {
                return Err(GeomError::AmbientMismatch {
                    expected: n,
                    found: tp.dim(),
                });
            }
            let pt = tp.coords().clone();
            let on = |s: &Stratum| -> Result<bool> {
                s.cone()?.contains_point(&pt)
            };
            if !on(p)? || !on(q)? {
                return Err(GeomError::DomainError("test point is not in P ∩ Q".into()));
            }
            let t = meet.tangent(&pt)?;
            (pt, t, "supplied point".to_string())
        }
        None => {
            let ab = adapted_basis(&p.subspace, &q.subspace)?;
            if ab.m > 0 {
                let e1 = &ab.vectors[0];
                let pt = pad(e1);
                let mut gens: Vec<Vector> = ab.vectors[1..ab.m].iter().map(pad).collect();
                if meet_kind == StratumKind::Closure {
                    gens.push(unit(n + 1, 0));
                }
                (pt, Subspace::span(lifted, &gens)?, "ray through e_1 of Y∩Z".to_string())
            } else if meet_kind == StratumKind::Closure {
                (unit(n + 1, 0), Subspace::zero(lifted), "origin".to_string())
            } else {
                return Err(GeomError::EmptyIntersection);
            }
        }
    };

    let tp = p.tangent(&point)?;
    let tq = q.tangent(&point)?;
    let both = tp.intersect(&tq)?;
    let dim_meet = t_meet.dim();
    let dim_both = both.dim();
    Ok(CleanReport {
        point: point.iter().copied().collect(),
        description,
        dim_tangent_of_intersection: dim_meet,
        dim_intersection_of_tangents: dim_both,
        clean: dim_meet == dim_both && both.same_span(&t_meet)?,
    })
}
