//! Ordered tuples of closed sets, their pull-backs, and admissible orders.
//!
//! Tuple entries are finite unions of *atoms* (irreducible closed sets, e.g.
//! linear subspaces) or the empty set. Relations between atoms come from an
//! [`AtomRelations`] oracle. After a blow-up along a head `P`, an atom `a`
//! contained in `P` disappears from every entry; the surviving atoms keep
//! their names, since for lifts of atoms not inside the blown sets
//! `lift(a) ⊆ lift(b)` iff `a ⊆ b`. Two lifts are disjoint once the
//! intersection of their atoms is contained in a blown head.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::lattice::Semilattice;

pub type Atom = usize;

/// Containment and intersection data for atoms.
pub trait AtomRelations {
    /// `inner ⊆ outer`
    fn atom_below(&self, inner: Atom, outer: Atom) -> bool;
    /// The atom equal to `a ∩ b`, or `None` if the two are disjoint.
    fn atom_meet(&self, a: Atom, b: Atom) -> Option<Atom>;
    fn atom_name(&self, a: Atom) -> String;
}

impl AtomRelations for Semilattice {
    fn atom_below(&self, inner: Atom, outer: Atom) -> bool {
        self.is_below(inner, outer)
    }

    fn atom_meet(&self, a: Atom, b: Atom) -> Option<Atom> {
        Some(self.meet(a, b))
    }

    fn atom_name(&self, a: Atom) -> String {
        self.member(a).name.clone()
    }
}

/// A tuple entry: `∅` or a union of atoms stored as a sorted antichain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Entry {
    Empty,
    Union(Vec<Atom>),
}

impl Entry {
    pub fn atom(a: Atom) -> Self {
        Entry::Union(vec![a])
    }

    /// Union of the given atoms, reduced to the atoms maximal for inclusion.
    pub fn union<R: AtomRelations + ?Sized>(rel: &R, atoms: &[Atom]) -> Self {
        let mut kept: Vec<Atom> = Vec::new();
        for &a in atoms {
            if kept.contains(&a) {
                continue;
            }
            let dominated = atoms
                .iter()
                .any(|&b| b != a && rel.atom_below(a, b) && !(rel.atom_below(b, a) && b > a));
            if !dominated {
                kept.push(a);
            }
        }
        kept.sort_unstable();
        if kept.is_empty() {
            Entry::Empty
        } else {
            Entry::Union(kept)
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Entry::Empty)
    }

    pub fn atoms(&self) -> &[Atom] {
        match self {
            Entry::Empty => &[],
            Entry::Union(a) => a,
        }
    }

    pub fn subset_of<R: AtomRelations + ?Sized>(&self, rel: &R, other: &Entry) -> bool {
        self.atoms()
            .iter()
            .all(|&a| other.atoms().iter().any(|&b| rel.atom_below(a, b)))
    }

    pub fn strict_subset_of<R: AtomRelations + ?Sized>(&self, rel: &R, other: &Entry) -> bool {
        self.subset_of(rel, other) && !other.subset_of(rel, self)
    }

    pub fn label<R: AtomRelations + ?Sized>(&self, rel: &R) -> String {
        match self {
            Entry::Empty => EMPTY_MARKER.to_string(),
            Entry::Union(atoms) => atoms
                .iter()
                .map(|&a| rel.atom_name(a))
                .collect::<Vec<_>>()
                .join("∪"),
        }
    }
}

/// Marker for `∅` in order files.
pub const EMPTY_MARKER: &str = "EMPTY";

/// An ordered tuple `(P_1, …, P_k)`; repetitions are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OrderedTuple {
    pub entries: Vec<Entry>,
}

impl OrderedTuple {
    pub fn new(entries: Vec<Entry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels<R: AtomRelations + ?Sized>(&self, rel: &R) -> Vec<String> {
        self.entries.iter().map(|e| e.label(rel)).collect()
    }

    /// Parses member names (or [`EMPTY_MARKER`]) against a semilattice.
    /// A name of the form `A∪B` denotes a union.
    pub fn from_names<S: AsRef<str>>(f: &Semilattice, names: &[S]) -> Result<Self> {
        let entries = names
            .iter()
            .map(|n| {
                let n = n.as_ref().trim();
                if n == EMPTY_MARKER {
                    return Ok(Entry::Empty);
                }
                let atoms = n
                    .split('∪')
                    .map(|part| f.index_of(part.trim()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Entry::union(f, &atoms))
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    /// Parses an order file: one name per line (blank lines and `#` comments
    /// ignored), or a JSON list of names.
    pub fn parse_order_file(f: &Semilattice, text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let names: Vec<String> = if trimmed.starts_with('[') {
            serde_json::from_str(trimmed).map_err(|e| GeomError::Config(e.to_string()))?
        } else {
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect()
        };
        Self::from_names(f, &names)
    }
}

/// Removes repeated entries, keeping the first appearance.
pub fn reduce_tuple(t: &OrderedTuple) -> OrderedTuple {
    let mut out: Vec<Entry> = Vec::with_capacity(t.len());
    for e in &t.entries {
        if !out.contains(e) {
            out.push(e.clone());
        }
    }
    OrderedTuple { entries: out }
}

/// Result of pulling a tuple back along its head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pullback {
    pub tuple: OrderedTuple,
    /// Index pairs `(i, j)`, `i < j`, of nonempty entries whose lifts are
    /// disjoint.
    pub disjoint: Vec<(usize, usize)>,
}

/// Lift of a single entry after blowing up `head`.
fn lift_entry<R: AtomRelations + ?Sized>(rel: &R, head: &Entry, e: &Entry) -> Entry {
    if head.is_empty() {
        return e.clone();
    }
    if e.subset_of(rel, head) {
        return Entry::Empty;
    }
    let survivors: Vec<Atom> = e
        .atoms()
        .iter()
        .copied()
        .filter(|&a| !head.atoms().iter().any(|&h| rel.atom_below(a, h)))
        .collect();
    Entry::union(rel, &survivors)
}

fn lifts_disjoint<R: AtomRelations + ?Sized>(
    rel: &R,
    blown: &[Entry],
    a: &Entry,
    b: &Entry,
) -> bool {
    a.atoms().iter().all(|&x| {
        b.atoms().iter().all(|&y| match rel.atom_meet(x, y) {
            None => true,
            Some(m) => blown
                .iter()
                .any(|h| h.atoms().iter().any(|&ha| rel.atom_below(m, ha))),
        })
    })
}

/// Pull-back of `t` along its head, with `blown` the heads already blown up
/// before it (outermost first).
pub fn tuple_pullback_after<R: AtomRelations + ?Sized>(
    rel: &R,
    t: &OrderedTuple,
    blown: &[Entry],
) -> Pullback {
    let Some((head, rest)) = t.entries.split_first() else {
        return Pullback {
            tuple: OrderedTuple::default(),
            disjoint: Vec::new(),
        };
    };
    let entries: Vec<Entry> = rest.iter().map(|e| lift_entry(rel, head, e)).collect();
    let mut history: Vec<Entry> = blown.to_vec();
    history.push(head.clone());
    let mut disjoint = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            if !entries[i].is_empty()
                && !entries[j].is_empty()
                && lifts_disjoint(rel, &history, &entries[i], &entries[j])
            {
                disjoint.push((i, j));
            }
        }
    }
    Pullback {
        tuple: OrderedTuple { entries },
        disjoint,
    }
}

/// Pull-back of `t` along its head in the unblown space.
pub fn tuple_pullback<R: AtomRelations + ?Sized>(rel: &R, t: &OrderedTuple) -> Pullback {
    tuple_pullback_after(rel, t, &[])
}

/// Where an admissibility check failed: the entry at position `offending`
/// (0-based, in the original tuple) is strictly contained in the lifted head
/// at position `head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub head: usize,
    pub offending: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "entry {} is strictly contained in the earlier head at position {}",
            self.offending, self.head
        )
    }
}

/// Checks admissibility: recursively, no later entry is strictly contained in
/// the head, and the pull-back along the head is admissible.
pub fn check_admissible<R: AtomRelations + ?Sized>(
    rel: &R,
    t: &OrderedTuple,
) -> std::result::Result<(), Violation> {
    let mut entries: Vec<(usize, Entry)> = t.entries.iter().cloned().enumerate().collect();
    while let Some(((head_pos, head), rest)) = entries.split_first() {
        if let Some((pos, _)) = rest.iter().find(|(_, e)| e.strict_subset_of(rel, head)) {
            return Err(Violation {
                head: *head_pos,
                offending: *pos,
            });
        }
        let head = head.clone();
        entries = rest
            .iter()
            .map(|(p, e)| (*p, lift_entry(rel, &head, e)))
            .collect();
    }
    Ok(())
}

pub fn is_admissible<R: AtomRelations + ?Sized>(rel: &R, t: &OrderedTuple) -> bool {
    check_admissible(rel, t).is_ok()
}

/// Lists `(∅, P_1, …, P_k)` by repeatedly taking the first remaining member
/// that is minimal for inclusion. With `prefer = Y`, members inside `Y` are
/// exhausted before anything else, so everything listed before `Y` lies in `Y`.
pub fn generate_admissible_order(f: &Semilattice, prefer: Option<&str>) -> Result<OrderedTuple> {
    let preferred = prefer.map(|name| f.index_of(name)).transpose()?;
    let mut remaining: Vec<usize> = (0..f.len()).collect();
    let mut entries = vec![Entry::Empty];
    while !remaining.is_empty() {
        let minimal = |i: usize| {
            remaining
                .iter()
                .all(|&j| j == i || !(f.is_below(j, i) && !f.is_below(i, j)))
        };
        let pick = remaining
            .iter()
            .copied()
            .filter(|&i| preferred.is_none_or(|y| f.is_below(i, y)))
            .find(|&i| minimal(i))
            .or_else(|| remaining.iter().copied().find(|&i| minimal(i)))
            .expect("a finite poset has a minimal element");
        remaining.retain(|&i| i != pick);
        entries.push(Entry::atom(pick));
    }
    Ok(OrderedTuple { entries })
}

/// `(∅, members by nondecreasing dimension)`.
pub fn size_order(f: &Semilattice) -> OrderedTuple {
    let mut idx: Vec<usize> = (0..f.len()).collect();
    idx.sort_by_key(|&i| f.member(i).subspace.dim());
    let mut entries = vec![Entry::Empty];
    entries.extend(idx.into_iter().map(Entry::atom));
    OrderedTuple { entries }
}

/// Abstract atoms with declared containments and intersections; used for
/// set systems that are not subspace lattices.
#[derive(Debug, Clone, Default)]
pub struct AbstractRelations {
    names: Vec<String>,
    below: Vec<(Atom, Atom)>,
    meets: Vec<((Atom, Atom), Option<Atom>)>,
}

impl AbstractRelations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_atom(&mut self, name: &str) -> Atom {
        self.names.push(name.to_string());
        self.names.len() - 1
    }

    /// Declares `inner ⊆ outer`.
    pub fn declare_below(&mut self, inner: Atom, outer: Atom) {
        self.below.push((inner, outer));
    }

    pub fn declare_disjoint(&mut self, a: Atom, b: Atom) {
        self.meets.push(((a, b), None));
    }

    pub fn declare_meet(&mut self, a: Atom, b: Atom, m: Atom) {
        self.meets.push(((a, b), Some(m)));
    }
}

impl AtomRelations for AbstractRelations {
    fn atom_below(&self, inner: Atom, outer: Atom) -> bool {
        inner == outer || self.below.contains(&(inner, outer))
    }

    fn atom_meet(&self, a: Atom, b: Atom) -> Option<Atom> {
        if a == b {
            return Some(a);
        }
        if self.atom_below(a, b) {
            return Some(a);
        }
        if self.atom_below(b, a) {
            return Some(b);
        }
        self.meets
            .iter()
            .find(|((x, y), _)| (*x, *y) == (a, b) || (*x, *y) == (b, a))
            .and_then(|(_, m)| *m)
    }

    fn atom_name(&self, a: Atom) -> String {
        self.names[a].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::collision_planes;
    use crate::subspace::AmbientSpace;

    fn nbody2() -> Semilattice {
        Semilattice::closure(AmbientSpace::new(6).unwrap(), collision_planes(2).unwrap()).unwrap()
    }

    fn abstract_ab() -> (AbstractRelations, Atom, Atom) {
        let mut rel = AbstractRelations::new();
        let a = rel.add_atom("A");
        let b = rel.add_atom("B");
        rel.declare_disjoint(a, b);
        (rel, a, b)
    }

    #[test]
    fn reduce_keeps_first_appearance() {
        let (_, a, b) = abstract_ab();
        let t = OrderedTuple::new(vec![Entry::Empty, Entry::atom(a), Entry::atom(b), Entry::atom(a)]);
        assert_eq!(
            reduce_tuple(&t).entries,
            vec![Entry::Empty, Entry::atom(a), Entry::atom(b)]
        );
        let single = OrderedTuple::new(vec![Entry::atom(a)]);
        assert_eq!(reduce_tuple(&single), single);
        let triple = OrderedTuple::new(vec![Entry::atom(a); 3]);
        assert_eq!(reduce_tuple(&triple), single);
    }

    #[test]
    fn pullback_of_disjoint_union_repeats() {
        let (rel, a, b) = abstract_ab();
        let t = OrderedTuple::new(vec![
            Entry::atom(a),
            Entry::atom(b),
            Entry::union(&rel, &[a, b]),
        ]);
        let pb = tuple_pullback(&rel, &t);
        assert_eq!(pb.tuple.entries, vec![Entry::atom(b), Entry::atom(b)]);
        assert!(pb.disjoint.is_empty());
        assert_eq!(pb.tuple.labels(&rel), vec!["B", "B"]);
    }

    #[test]
    fn pullback_along_zero_separates_planes() {
        let f = nbody2();
        let t = size_order(&f);
        // Drop the leading ∅ first: its pull-back is the identity.
        let after_empty = tuple_pullback(&f, &t);
        assert_eq!(after_empty.tuple.entries, t.entries[1..].to_vec());
        let pb = tuple_pullback_after(&f, &after_empty.tuple, &[Entry::Empty]);
        assert_eq!(pb.tuple.len(), 3);
        assert!(pb.tuple.entries.iter().all(|e| !e.is_empty()));
        assert_eq!(pb.disjoint, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn pullback_along_maximal_member_keeps_others() {
        let f = nbody2();
        let t = OrderedTuple::new(vec![Entry::atom(3), Entry::atom(1), Entry::atom(2)]);
        let pb = tuple_pullback(&f, &t);
        assert_eq!(pb.tuple.entries, vec![Entry::atom(1), Entry::atom(2)]);
    }

    #[test]
    fn size_order_is_admissible() {
        let f = nbody2();
        let t = size_order(&f);
        assert_eq!(t.len(), 5);
        assert!(is_admissible(&f, &t));
    }

    #[test]
    fn nonminimal_head_fails_at_offending_index() {
        let f = nbody2();
        let t = OrderedTuple::new(vec![
            Entry::atom(1),
            Entry::atom(0),
            Entry::atom(2),
            Entry::atom(3),
        ]);
        assert_eq!(
            check_admissible(&f, &t),
            Err(Violation {
                head: 0,
                offending: 1
            })
        );
    }

    #[test]
    fn lone_empty_is_admissible() {
        let f = Semilattice::closure(AmbientSpace::new(2).unwrap(), vec![]).unwrap();
        assert!(is_admissible(&f, &OrderedTuple::new(vec![Entry::Empty])));
        let t = generate_admissible_order(&f, None).unwrap();
        assert_eq!(t.entries, vec![Entry::Empty, Entry::atom(0)]);
    }

    #[test]
    fn preference_puts_contained_members_first() {
        let f = nbody2();
        let y = f.member(2).name.clone();
        let t = generate_admissible_order(&f, Some(&y)).unwrap();
        assert_eq!(t.entries[1], Entry::atom(0));
        assert_eq!(t.entries[2], Entry::atom(2));
        assert!(is_admissible(&f, &t));
        assert!(matches!(
            generate_admissible_order(&f, Some("nope")),
            Err(GeomError::UnknownMember(_))
        ));
    }

    #[test]
    fn repeated_member_leaves_an_empty_entry() {
        let (rel, a, b) = abstract_ab();
        // After A is blown up its repetition lifts to ∅, which is strictly
        // inside the next head.
        let t = OrderedTuple::new(vec![Entry::Empty, Entry::atom(a), Entry::atom(b), Entry::atom(a)]);
        assert_eq!(
            check_admissible(&rel, &t),
            Err(Violation {
                head: 2,
                offending: 3
            })
        );
        assert!(is_admissible(&rel, &reduce_tuple(&t)));
    }

    #[test]
    fn order_file_parsing() {
        let f = nbody2();
        let names: Vec<String> = f.members().iter().map(|m| m.name.clone()).collect();
        let text = format!("EMPTY\n# comment\n{}\n\n{}\n", names[0], names[1]);
        let t = OrderedTuple::parse_order_file(&f, &text).unwrap();
        assert_eq!(t.entries, vec![Entry::Empty, Entry::atom(0), Entry::atom(1)]);
        let json = serde_json::to_string(&vec!["EMPTY", &names[2]]).unwrap();
        let t = OrderedTuple::parse_order_file(&f, &json).unwrap();
        assert_eq!(t.entries, vec![Entry::Empty, Entry::atom(2)]);
        assert!(matches!(
            OrderedTuple::parse_order_file(&f, "bogus"),
            Err(GeomError::UnknownMember(_))
        ));
    }
}
