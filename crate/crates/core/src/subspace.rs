//! Linear subspaces of a euclidean space `R^n`, held as orthonormal bases.
//!
//! Every constructor funnels through a canonicalization step: the span is
//! orthonormalized with re-orthogonalized Gram–Schmidt, and the basis is then
//! rebuilt from the orthogonal projections of the standard basis vectors. Two
//! numerically equal spans therefore carry (nearly) the same basis, which keeps
//! printed reports stable.
//!
//! The quotient `X/Y` is represented as the orthogonal complement `Y⊥`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Rank and containment tolerance.
pub const RANK_TOL: f64 = 1e-10;
/// Orthonormality tolerance for constructed bases.
pub const ORTHO_TOL: f64 = 1e-12;

/// Quantization used for span fingerprints.
const FINGERPRINT_SCALE: f64 = 1e8;

pub type Vector = DVector<f64>;

/// The euclidean space `R^n` housing every subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AmbientSpace {
    dim: usize,
}

impl AmbientSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GeomError::DegenerateInput(
                "ambient dimension must be positive".into(),
            ));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim {
            return Err(GeomError::AmbientMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// A linear subspace held as an orthonormal basis; the empty basis is `{0}`.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: AmbientSpace,
    basis: Vec<Vector>,
}

/// Orthogonalizes `v` against `basis` twice (classical Gram–Schmidt with one
/// re-orthogonalization pass).
fn orthogonalize(basis: &[Vector], v: &Vector) -> Vector {
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&w);
            w.axpy(-c, b, 1.0);
        }
    }
    w
}

/// Appends to `basis` the orthonormalized parts of `candidates` that are not
/// already in its span.
fn extend_orthonormal(basis: &mut Vec<Vector>, candidates: &[Vector]) {
    for g in candidates {
        let scale = g.norm();
        if scale == 0.0 {
            continue;
        }
        let w = orthogonalize(basis, g);
        let norm = w.norm();
        if norm > RANK_TOL * scale.max(1.0) {
            basis.push(w / norm);
        }
    }
}

impl Subspace {
    /// Orthonormalized span of `generators`; rank deficiency is reduced silently.
    pub fn span(ambient: AmbientSpace, generators: &[Vector]) -> Result<Self> {
        for g in generators {
            ambient.check(g)?;
            if g.iter().any(|c| !c.is_finite()) {
                return Err(GeomError::NonFinite);
            }
        }
        let mut raw = Vec::new();
        extend_orthonormal(&mut raw, generators);
        Ok(Self::canonical(ambient, raw))
    }

    /// Like [`Subspace::span`], but a nonempty generator list spanning only
    /// `{0}` is rejected.
    pub fn span_nonzero(ambient: AmbientSpace, generators: &[Vector]) -> Result<Self> {
        let s = Self::span(ambient, generators)?;
        if !generators.is_empty() && s.dim() == 0 {
            return Err(GeomError::DegenerateInput(
                "generators span only the zero subspace".into(),
            ));
        }
        Ok(s)
    }

    /// Convenience constructor from plain rows.
    pub fn from_rows(ambient: AmbientSpace, rows: &[Vec<f64>]) -> Result<Self> {
        let gens: Vec<Vector> = rows.iter().map(|r| Vector::from_vec(r.clone())).collect();
        Self::span(ambient, &gens)
    }

    pub fn zero(ambient: AmbientSpace) -> Self {
        Self {
            ambient,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient: AmbientSpace) -> Self {
        let basis = (0..ambient.dim())
            .map(|i| Vector::from_fn(ambient.dim(), |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        Self { ambient, basis }
    }

    /// Span of the standard basis vectors with the given indices.
    pub fn coordinate(ambient: AmbientSpace, axes: &[usize]) -> Result<Self> {
        let gens: Vec<Vector> = axes
            .iter()
            .map(|&i| {
                if i >= ambient.dim() {
                    Err(GeomError::AmbientMismatch {
                        expected: ambient.dim(),
                        found: i + 1,
                    })
                } else {
                    Ok(Vector::from_fn(ambient.dim(), |j, _| if i == j { 1.0 } else { 0.0 }))
                }
            })
            .collect::<Result<_>>()?;
        Self::span(ambient, &gens)
    }

    /// Rebuilds the basis from projections of the standard basis so that equal
    /// spans get equal bases. At each step the first axis whose residual carries
    /// at least half the average remaining weight is taken; such an axis always
    /// exists because the residual weights sum to the remaining rank.
    fn canonical(ambient: AmbientSpace, raw: Vec<Vector>) -> Self {
        let n = ambient.dim();
        let k = raw.len();
        if k == 0 || k == n {
            return if k == 0 {
                Self::zero(ambient)
            } else {
                Self::full(ambient)
            };
        }
        let proj = projector_of(n, &raw);
        let mut basis: Vec<Vector> = Vec::with_capacity(k);
        let mut used = vec![false; n];
        while basis.len() < k {
            let remaining = (k - basis.len()) as f64;
            let threshold = 0.5 * remaining / n as f64;
            let mut chosen = None;
            let mut best: Option<(usize, Vector, f64)> = None;
            for i in 0..n {
                if used[i] {
                    continue;
                }
                let w = orthogonalize(&basis, &proj.column(i).into_owned());
                let w2 = w.norm_squared();
                if w2 >= threshold {
                    chosen = Some((i, w));
                    break;
                }
                if best.as_ref().is_none_or(|b| w2 > b.2) {
                    best = Some((i, w, w2));
                }
            }
            let (i, w) = chosen.unwrap_or_else(|| {
                let (i, w, _) = best.expect("residual weights cannot all vanish");
                (i, w)
            });
            used[i] = true;
            let w = orthogonalize(&basis, &w);
            let norm = w.norm();
            basis.push(w / norm);
        }
        Self { ambient, basis }
    }

    pub fn ambient(&self) -> AmbientSpace {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.ambient.dim()
    }

    /// Orthogonal projector onto the subspace as an `n × n` matrix.
    pub fn projector(&self) -> DMatrix<f64> {
        projector_of(self.ambient.dim(), &self.basis)
    }

    /// Basis as the columns of an `n × dim` matrix.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let n = self.ambient.dim();
        DMatrix::from_fn(n, self.dim(), |i, j| self.basis[j][i])
    }

    fn same_ambient(&self, other: &Subspace) -> Result<()> {
        if self.ambient != other.ambient {
            return Err(GeomError::AmbientMismatch {
                expected: self.ambient.dim(),
                found: other.ambient.dim(),
            });
        }
        Ok(())
    }

    /// Nearest point of the subspace to `x`.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        self.ambient.check(x)?;
        let mut p = Vector::zeros(x.len());
        for b in &self.basis {
            p.axpy(b.dot(x), b, 1.0);
        }
        Ok(p)
    }

    /// Component of `x` orthogonal to the subspace, i.e. its image in `X/Y ≅ Y⊥`.
    pub fn reject(&self, x: &Vector) -> Result<Vector> {
        Ok(x - self.project(x)?)
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn dist_to(&self, x: &Vector) -> Result<f64> {
        Ok(self.reject(x)?.norm())
    }

    /// Coordinates of the projection of `x` in the stored basis.
    pub fn coords(&self, x: &Vector) -> Result<Vector> {
        self.ambient.check(x)?;
        Ok(Vector::from_iterator(
            self.dim(),
            self.basis.iter().map(|b| b.dot(x)),
        ))
    }

    /// Point of the subspace with the given coordinates in the stored basis.
    pub fn from_coords(&self, c: &Vector) -> Result<Vector> {
        if c.len() != self.dim() {
            return Err(GeomError::AmbientMismatch {
                expected: self.dim(),
                found: c.len(),
            });
        }
        let mut p = Vector::zeros(self.ambient.dim());
        for (ci, b) in c.iter().zip(&self.basis) {
            p.axpy(*ci, b, 1.0);
        }
        Ok(p)
    }

    /// True iff `inner ⊆ self`.
    pub fn contains(&self, inner: &Subspace) -> Result<bool> {
        self.same_ambient(inner)?;
        if inner.dim() > self.dim() {
            return Ok(false);
        }
        for v in &inner.basis {
            if self.dist_to(v)? > RANK_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn contains_point(&self, x: &Vector) -> Result<bool> {
        Ok(self.dist_to(x)? <= RANK_TOL * x.norm().max(1.0))
    }

    /// Same span (mutual containment).
    pub fn same_span(&self, other: &Subspace) -> Result<bool> {
        Ok(self.dim() == other.dim() && self.contains(other)?)
    }

    /// `self ∩ other`, computed as the null space of `(I − P_other)·B_self`.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        self.same_ambient(other)?;
        if self.dim() > other.dim() {
            return other.intersect(self);
        }
        if self.is_zero() || other.is_full() {
            return Ok(self.clone());
        }
        if other.is_zero() {
            return Ok(other.clone());
        }
        let n = self.ambient.dim();
        let a = self.basis_matrix();
        let residual = (DMatrix::identity(n, n) - other.projector()) * &a;
        // dim(self) ≤ n, so v_t is square and holds every right singular vector.
        let svd = residual.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut gens = Vec::new();
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s <= RANK_TOL {
                let coeffs = v_t.row(i).transpose();
                gens.push(&a * coeffs);
            }
        }
        Subspace::span(self.ambient, &gens)
    }

    /// `self + other`.
    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.same_ambient(other)?;
        let mut gens = self.basis.clone();
        gens.extend(other.basis.iter().cloned());
        Subspace::span(self.ambient, &gens)
    }

    /// Orthogonal complement `Y⊥`, the concrete model of `X/Y`.
    pub fn complement(&self) -> Subspace {
        let n = self.ambient.dim();
        let mut basis = self.basis.clone();
        let axes: Vec<Vector> = (0..n)
            .map(|i| Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        extend_orthonormal(&mut basis, &axes);
        let raw = basis.split_off(self.dim());
        Self::canonical(self.ambient, raw)
    }

    /// Span invariant used for deterministic ordering: the projector entries,
    /// quantized.
    pub fn fingerprint(&self) -> Vec<i64> {
        self.projector()
            .transpose()
            .iter()
            .map(|v| (v * FINGERPRINT_SCALE).round() as i64)
            .collect()
    }

    /// Ordering by dimension, then lexicographic fingerprint.
    pub fn canonical_cmp(&self, other: &Subspace) -> Ordering {
        self.dim()
            .cmp(&other.dim())
            .then_with(|| self.fingerprint().cmp(&other.fingerprint()))
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.basis.iter().map(|b| b.iter().copied().collect()).collect()
    }
}

fn projector_of(n: usize, basis: &[Vector]) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for b in basis {
        p.ger(1.0, b, b, 1.0);
    }
    p
}

/// An ordered basis of `X` adapted to a pair `(Y, Z)`.
///
/// Layout: `e_1..e_m` spans `Y∩Z`, `e_1..e_k` spans `Y`, and
/// `e_1..e_m, e_{k+1}..e_{k+ℓ−m}` spans `Z`; the rest completes `X`.
/// Each block is orthonormal and orthogonal to `Y∩Z`; the `Z`-block is in
/// general not orthogonal to the `Y`-block.
#[derive(Debug, Clone)]
pub struct AdaptedBasis {
    pub vectors: Vec<Vector>,
    /// `dim(Y∩Z)`
    pub m: usize,
    /// `dim Y`
    pub k: usize,
    /// `dim Z`
    pub l: usize,
}

impl AdaptedBasis {
    pub fn y_block(&self) -> &[Vector] {
        &self.vectors[..self.k]
    }

    pub fn meet_block(&self) -> &[Vector] {
        &self.vectors[..self.m]
    }

    /// The vectors spanning `Z` in layout order.
    pub fn z_vectors(&self) -> Vec<Vector> {
        self.vectors[..self.m]
            .iter()
            .chain(&self.vectors[self.k..self.k + self.l - self.m])
            .cloned()
            .collect()
    }
}

/// Builds an adapted basis: Gram–Schmidt on `Y∩Z`, then `Y`, then `Z`
/// (against `Y∩Z` only), then `X` (against everything).
pub fn adapted_basis(y: &Subspace, z: &Subspace) -> Result<AdaptedBasis> {
    y.same_ambient(z)?;
    let n = y.ambient.dim();
    let meet = y.intersect(z)?;
    let mut vectors = meet.basis.clone();
    let m = vectors.len();

    let mut y_part = meet.basis.clone();
    extend_orthonormal(&mut y_part, &y.basis);
    vectors.extend(y_part[m..].iter().cloned());
    let k = vectors.len();

    let mut z_part = meet.basis.clone();
    extend_orthonormal(&mut z_part, &z.basis);
    vectors.extend(z_part[m..].iter().cloned());
    let l = z_part.len();

    let sum = y.sum(z)?;
    let mut rest = sum.basis.clone();
    let axes: Vec<Vector> = (0..n)
        .map(|i| Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
        .collect();
    extend_orthonormal(&mut rest, &axes);
    vectors.extend(rest[sum.dim()..].iter().cloned());

    Ok(AdaptedBasis { vectors, m, k, l })
}

/// Serialized form: `{name, basis: [[row], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceRecord {
    pub name: String,
    pub basis: Vec<Vec<f64>>,
}

impl SubspaceRecord {
    pub fn from_subspace(name: impl Into<String>, s: &Subspace) -> Self {
        Self {
            name: name.into(),
            basis: s.rows(),
        }
    }

    pub fn to_subspace(&self, ambient: AmbientSpace) -> Result<Subspace> {
        Subspace::from_rows(ambient, &self.basis)
    }
}
