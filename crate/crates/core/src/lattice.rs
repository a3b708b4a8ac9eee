//! Finite intersection-closed families of subspaces and the weight `δ_F`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::subspace::{AmbientSpace, Subspace, SubspaceRecord, Vector};

/// Name given to the zero subspace when the closure has to add it.
pub const ZERO_NAME: &str = "0";

#[derive(Debug, Clone)]
pub struct Member {
    pub name: String,
    pub subspace: Subspace,
}

/// A finite semilattice `F`: closed under intersection, contains `{0}`,
/// excludes `X`, no two members with the same span.
///
/// Members are kept sorted by dimension and then by span fingerprint.
#[derive(Debug, Clone)]
pub struct Semilattice {
    ambient: AmbientSpace,
    members: Vec<Member>,
    /// `below[i][j]` is true iff member `j ⊆` member `i`.
    below: Vec<Vec<bool>>,
}

/// One violated semilattice invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    MissingZero,
    ContainsAmbient { member: String },
    MissingIntersection { left: String, right: String },
    Duplicate { left: String, right: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::MissingZero => write!(f, "{{0}} is not a member"),
            Diagnostic::ContainsAmbient { member } => {
                write!(f, "member `{member}` is the whole space")
            }
            Diagnostic::MissingIntersection { left, right } => {
                write!(f, "intersection of `{left}` and `{right}` is not a member")
            }
            Diagnostic::Duplicate { left, right } => {
                write!(f, "`{left}` and `{right}` have the same span")
            }
        }
    }
}

/// Checks a candidate family against the semilattice invariants.
pub fn validate_family(members: &[Member]) -> Result<Vec<Diagnostic>> {
    let mut report = Vec::new();
    if !members.iter().any(|m| m.subspace.is_zero()) {
        report.push(Diagnostic::MissingZero);
    }
    for m in members {
        if m.subspace.is_full() {
            report.push(Diagnostic::ContainsAmbient {
                member: m.name.clone(),
            });
        }
    }
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            if a.subspace.same_span(&b.subspace)? {
                report.push(Diagnostic::Duplicate {
                    left: a.name.clone(),
                    right: b.name.clone(),
                });
                continue;
            }
            let meet = a.subspace.intersect(&b.subspace)?;
            let mut found = false;
            for c in members {
                if c.subspace.same_span(&meet)? {
                    found = true;
                    break;
                }
            }
            if !found {
                report.push(Diagnostic::MissingIntersection {
                    left: a.name.clone(),
                    right: b.name.clone(),
                });
            }
        }
    }
    Ok(report)
}

impl Semilattice {
    /// Smallest intersection-closed family containing `inputs` and `{0}`.
    pub fn closure(ambient: AmbientSpace, inputs: Vec<(String, Subspace)>) -> Result<Self> {
        let mut members: Vec<Member> = Vec::new();
        for (name, s) in inputs {
            if s.ambient() != ambient {
                return Err(GeomError::AmbientMismatch {
                    expected: ambient.dim(),
                    found: s.ambient().dim(),
                });
            }
            if s.is_full() {
                return Err(GeomError::ContainsAmbient);
            }
            push_unique(&mut members, name, s)?;
        }
        push_unique(&mut members, ZERO_NAME.to_string(), Subspace::zero(ambient))?;

        // Pairwise-intersection fixpoint.
        let mut changed = true;
        while changed {
            changed = false;
            let snapshot = members.len();
            for i in 0..snapshot {
                for j in i + 1..snapshot {
                    let meet = members[i].subspace.intersect(&members[j].subspace)?;
                    let name = format!("{}∩{}", members[i].name, members[j].name);
                    if push_unique(&mut members, name, meet)? {
                        changed = true;
                    }
                }
            }
        }
        Self::from_members(ambient, members)
    }

    /// Wraps an already closed family; fails with the first diagnostic
    /// otherwise.
    pub fn from_closed(ambient: AmbientSpace, inputs: Vec<(String, Subspace)>) -> Result<Self> {
        let members: Vec<Member> = inputs
            .into_iter()
            .map(|(name, subspace)| Member { name, subspace })
            .collect();
        let report = validate_family(&members)?;
        if let Some(d) = report.first() {
            return Err(match d {
                Diagnostic::ContainsAmbient { .. } => GeomError::ContainsAmbient,
                other => GeomError::Config(other.to_string()),
            });
        }
        Self::from_members(ambient, members)
    }

    fn from_members(ambient: AmbientSpace, mut members: Vec<Member>) -> Result<Self> {
        members.sort_by(|a, b| a.subspace.canonical_cmp(&b.subspace));
        let k = members.len();
        let mut below = vec![vec![false; k]; k];
        for i in 0..k {
            for j in 0..k {
                below[i][j] = i == j || members[i].subspace.contains(&members[j].subspace)?;
            }
        }
        Ok(Self {
            ambient,
            members,
            below,
        })
    }

    pub fn ambient(&self) -> AmbientSpace {
        self.ambient
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &Member {
        &self.members[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.members
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| GeomError::UnknownMember(name.to_string()))
    }

    /// Index of the member with the same span as `s`, if any.
    pub fn find(&self, s: &Subspace) -> Result<Option<usize>> {
        for (i, m) in self.members.iter().enumerate() {
            if m.subspace.same_span(s)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    /// Member `inner ⊆` member `outer`.
    pub fn is_below(&self, inner: usize, outer: usize) -> bool {
        self.below[outer][inner]
    }

    /// Members strictly contained in member `i`.
    pub fn strictly_below(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| j != i && self.below[i][j])
    }

    /// Index of the member spanning `members[a] ∩ members[b]`.
    pub fn meet(&self, a: usize, b: usize) -> usize {
        // The family is closed, so the greatest common lower bound is a member
        // of maximal dimension among the common lower bounds.
        (0..self.len())
            .filter(|&c| self.below[a][c] && self.below[b][c])
            .max_by_key(|&c| self.members[c].subspace.dim())
            .expect("{0} lies below every member")
    }

    /// Hasse diagram edges `(child, parent)`: `child ⊊ parent` with nothing
    /// strictly between.
    pub fn hasse_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for p in 0..self.len() {
            for c in self.strictly_below(p) {
                let covered = self
                    .strictly_below(p)
                    .any(|m| m != c && self.below[m][c]);
                if !covered {
                    edges.push((c, p));
                }
            }
        }
        edges
    }

    pub fn validate(&self) -> Result<Vec<Diagnostic>> {
        validate_family(&self.members)
    }

    /// Euclidean distances `d_Y(x)` for every member, in member order.
    pub fn distances(&self, x: &Vector) -> Result<Vec<f64>> {
        self.members.iter().map(|m| m.subspace.dist_to(x)).collect()
    }

    /// `δ_F(x) = min{dist(x, ∪F), 1}`.
    pub fn delta(&self, x: &Vector) -> Result<f64> {
        let mut d: f64 = 1.0;
        for m in &self.members {
            d = d.min(m.subspace.dist_to(x)?);
        }
        Ok(d)
    }

    /// Untruncated distance to `∪F`.
    pub fn dist_to_union(&self, x: &Vector) -> Result<f64> {
        let mut d = f64::INFINITY;
        for m in &self.members {
            d = d.min(m.subspace.dist_to(x)?);
        }
        Ok(d)
    }

    pub fn on_singular_set(&self, x: &Vector) -> Result<bool> {
        for m in &self.members {
            if m.subspace.contains_point(x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn to_records(&self) -> Vec<SubspaceRecord> {
        self.members
            .iter()
            .map(|m| SubspaceRecord::from_subspace(m.name.clone(), &m.subspace))
            .collect()
    }
}

/// Adds `(name, s)` unless a member with the same span is present.
fn push_unique(members: &mut Vec<Member>, name: String, s: Subspace) -> Result<bool> {
    for m in members.iter() {
        if m.subspace.same_span(&s)? {
            return Ok(false);
        }
    }
    members.push(Member { name, subspace: s });
    Ok(true)
}

/// Lattice config file: `{ambient_dim, subspaces: [{name, basis}], auto_close}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub ambient_dim: usize,
    pub subspaces: Vec<SubspaceRecord>,
    #[serde(default = "default_true")]
    pub auto_close: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<serde_json::Value>,
}

fn default_true() -> bool {
    true
}

impl LatticeConfig {
    pub fn ambient(&self) -> Result<AmbientSpace> {
        AmbientSpace::new(self.ambient_dim)
    }

    /// The named subspaces exactly as listed.
    pub fn inputs(&self) -> Result<Vec<Member>> {
        let ambient = self.ambient()?;
        self.subspaces
            .iter()
            .map(|r| {
                Ok(Member {
                    name: r.name.clone(),
                    subspace: r.to_subspace(ambient)?,
                })
            })
            .collect()
    }

    /// Builds the semilattice, closing it first when `auto_close` is set.
    pub fn build(&self) -> Result<Semilattice> {
        let ambient = self.ambient()?;
        let inputs = self
            .inputs()?
            .into_iter()
            .map(|m| (m.name, m.subspace))
            .collect();
        if self.auto_close {
            Semilattice::closure(ambient, inputs)
        } else {
            Semilattice::from_closed(ambient, inputs)
        }
    }
}

/// The collision planes `{x_j = 0}` and `{x_i = x_j}` of `N` particles in
/// `R^3`, as `(name, subspace)` pairs in `R^{3N}`.
pub fn collision_planes(particles: usize) -> Result<Vec<(String, Subspace)>> {
    let n = 3 * particles;
    let ambient = AmbientSpace::new(n)?;
    let mut planes = Vec::new();
    let unit = |i: usize| Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
    for j in 0..particles {
        // {x_j = 0}: spanned by the coordinates of every other particle.
        let gens: Vec<Vector> = (0..n).filter(|&c| c / 3 != j).map(unit).collect();
        planes.push((format!("x{}=0", j + 1), Subspace::span(ambient, &gens)?));
    }
    for i in 0..particles {
        for j in i + 1..particles {
            let mut gens: Vec<Vector> = (0..n)
                .filter(|&c| c / 3 != i && c / 3 != j)
                .map(unit)
                .collect();
            for c in 0..3 {
                gens.push(unit(3 * i + c) + unit(3 * j + c));
            }
            planes.push((format!("x{}=x{}", i + 1, j + 1), Subspace::span(ambient, &gens)?));
        }
    }
    Ok(planes)
}
