//! Charts for the spherical compactification `X̄ ≅ S^n_1 ⊂ R^{n+1}`, the
//! one-point compactification via stereographic projection, extensions of
//! affine maps, and boundary depth in model corners `R^n_k`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::subspace::Vector;

/// Tolerance for unit-norm and sign checks on compact points.
pub const CHART_TOL: f64 = 1e-12;
/// Tolerance for vanishing corner coordinates.
pub const DEPTH_TOL: f64 = 1e-14;

/// A point of `X̄` as a unit vector `(y_0, …, y_n)` with `y_0 ≥ 0`;
/// `y_0 = 0` is a boundary ray in `S_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactPoint {
    coords: Vector,
}

/// Image of `Θ^{-1}`: an interior point or a boundary direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coords", rename_all = "snake_case")]
pub enum PointOrRay {
    Interior(Vec<f64>),
    Ray(Vec<f64>),
}

impl PointOrRay {
    pub fn is_ray(&self) -> bool {
        matches!(self, PointOrRay::Ray(_))
    }

    pub fn vector(&self) -> Vector {
        match self {
            PointOrRay::Interior(v) | PointOrRay::Ray(v) => Vector::from_vec(v.clone()),
        }
    }
}

impl CompactPoint {
    /// Validates raw sphere coordinates.
    pub fn from_coords(coords: Vector) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        if coords.len() < 2 {
            return Err(GeomError::DegenerateInput(
                "compact points live in R^{n+1}, n ≥ 1".into(),
            ));
        }
        if (coords.norm() - 1.0).abs() > CHART_TOL || coords[0] < -CHART_TOL {
            return Err(GeomError::DomainError(
                "compact point must be a unit vector with y0 ≥ 0".into(),
            ));
        }
        Ok(Self { coords })
    }

    /// The boundary point of `X̄` in the direction of `dir`.
    pub fn ray(dir: &Vector) -> Result<Self> {
        let norm = dir.norm();
        if !norm.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if norm == 0.0 {
            return Err(GeomError::DegenerateDirection);
        }
        let mut coords = Vector::zeros(dir.len() + 1);
        coords.rows_mut(1, dir.len()).copy_from(&(dir / norm));
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &Vector {
        &self.coords
    }

    /// Dimension `n` of the compactified space.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn y0(&self) -> f64 {
        self.coords[0]
    }

    pub fn is_boundary(&self) -> bool {
        self.coords[0] == 0.0
    }

    /// `(y_1, …, y_n)`.
    pub fn spatial(&self) -> Vector {
        self.coords.rows(1, self.dim()).into_owned()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.iter().copied().collect()
    }
}

/// `Θ_n(x) = (1, x)/√(1 + ‖x‖²)`.
pub fn theta(x: &Vector) -> Result<CompactPoint> {
    if x.iter().any(|c| !c.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let n = x.len();
    // Scale before normalizing so that huge ‖x‖ does not overflow.
    let big = x.amax().max(1.0);
    let mut coords = Vector::zeros(n + 1);
    coords[0] = 1.0 / big;
    coords.rows_mut(1, n).copy_from(&(x / big));
    let norm = coords.norm();
    coords /= norm;
    Ok(CompactPoint { coords })
}

/// `Θ_n^{-1}`: `(y_1,…,y_n)/y_0` for `y_0 > 0`, the direction `(y_1,…,y_n)`
/// for boundary points.
pub fn theta_inv(p: &CompactPoint) -> PointOrRay {
    let s = p.spatial();
    if p.y0() > 0.0 {
        PointOrRay::Interior((s / p.y0()).iter().copied().collect())
    } else {
        PointOrRay::Ray(s.iter().copied().collect())
    }
}

/// An invertible affine map `x ↦ Ax + V` of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub shift: Vector,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, shift: Vector) -> Result<Self> {
        let n = shift.len();
        if linear.nrows() != n || linear.ncols() != n {
            return Err(GeomError::AmbientMismatch {
                expected: n,
                found: linear.nrows(),
            });
        }
        let sv = linear.singular_values();
        let max = sv.max();
        let min = sv.min();
        if !(min > 1e-14 * max.max(f64::MIN_POSITIVE)) {
            return Err(GeomError::SingularMap);
        }
        Ok(Self { linear, shift })
    }

    pub fn translation(shift: Vector) -> Self {
        let n = shift.len();
        Self {
            linear: DMatrix::identity(n, n),
            shift,
        }
    }

    /// `self ∘ inner`: `(A, V) ∘ (A', V') = (AA', V + AV')`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: &self.linear * &inner.linear,
            shift: &self.shift + &self.linear * &inner.shift,
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.linear * x + &self.shift
    }

    /// Extension to `X̄`: `f(t, p) = F(t, p)/‖F(t, p)‖` with
    /// `F(t, p) = (t, Ap + tV)`.
    pub fn extend(&self, p: &CompactPoint) -> Result<CompactPoint> {
        let n = self.shift.len();
        if p.dim() != n {
            return Err(GeomError::AmbientMismatch {
                expected: n,
                found: p.dim(),
            });
        }
        let t = p.y0();
        // A translation fixes the sphere at infinity pointwise; skip the
        // renormalisation so boundary rays come back bit-for-bit.
        if t == 0.0 && self.linear == DMatrix::identity(n, n) {
            return Ok(p.clone());
        }
        let image = &self.linear * p.spatial() + &self.shift * t;
        let mut coords = Vector::zeros(n + 1);
        coords[0] = t;
        coords.rows_mut(1, n).copy_from(&image);
        let norm = coords.norm();
        coords /= norm;
        Ok(CompactPoint { coords })
    }
}

/// `f_{A,V}(p)`; fails with [`GeomError::SingularMap`] for singular `A`.
pub fn affine_extend(linear: &DMatrix<f64>, shift: &Vector, p: &CompactPoint) -> Result<CompactPoint> {
    AffineMap::new(linear.clone(), shift.clone())?.extend(p)
}

/// `ψ((cos α − 1, sin α · y)) = (cos 2α, sin 2α · y)`, a point of the unit
/// sphere `S_{R×X}`.
pub fn onepoint_psi(alpha: f64, y: &Vector) -> Result<Vector> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&alpha) {
        return Err(GeomError::DomainError(format!(
            "angle {alpha} outside [0, π/2]"
        )));
    }
    if (y.norm() - 1.0).abs() > CHART_TOL {
        return Err(GeomError::DomainError("direction must be a unit vector".into()));
    }
    let mut out = Vector::zeros(y.len() + 1);
    out[0] = (2.0 * alpha).cos();
    out.rows_mut(1, y.len()).copy_from(&(y * (2.0 * alpha).sin()));
    Ok(out)
}

/// Stereographic projection from the south pole `(−1, 0)`:
/// `σ((cos θ, sin θ · y)) = tan(θ/2) · y`, i.e. `σ(p_0, q) = q/(1 + p_0)`.
pub fn stereographic(p: &Vector) -> Result<Vector> {
    if p.len() < 2 {
        return Err(GeomError::DegenerateInput("sphere point needs n+1 ≥ 2 coordinates".into()));
    }
    let denom = 1.0 + p[0];
    if denom <= f64::EPSILON {
        return Err(GeomError::PoleError);
    }
    Ok(p.rows(1, p.len() - 1) / denom)
}

/// Inverse stereographic projection `x ↦ ((1 − ‖x‖²), 2x)/(1 + ‖x‖²)`.
pub fn stereographic_inv(x: &Vector) -> Vector {
    let r2 = x.norm_squared();
    let mut out = Vector::zeros(x.len() + 1);
    out[0] = (1.0 - r2) / (1.0 + r2);
    out.rows_mut(1, x.len()).copy_from(&(x * (2.0 / (1.0 + r2))));
    out
}

/// A point of the model corner `R^n_k = [0, ∞)^k × R^{n−k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelChartPoint {
    k: usize,
    coords: Vector,
}

impl ModelChartPoint {
    pub fn new(k: usize, coords: Vector) -> Result<Self> {
        if k > coords.len() {
            return Err(GeomError::DomainError(format!(
                "corner codimension {k} exceeds dimension {}",
                coords.len()
            )));
        }
        if coords.iter().take(k).any(|&c| c < 0.0) {
            return Err(GeomError::DomainError(
                "corner coordinates must be nonnegative".into(),
            ));
        }
        Ok(Self { k, coords })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coords(&self) -> &Vector {
        &self.coords
    }
}

/// Number of vanishing corner coordinates.
pub fn boundary_depth(p: &ModelChartPoint) -> usize {
    p.coords.iter().take(p.k).filter(|c| c.abs() <= DEPTH_TOL).count()
}
