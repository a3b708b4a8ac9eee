//! Seeded samplers: strata-concentrated points around a semilattice, and a
//! randomly shifted Halton sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lattice::Semilattice;
use crate::subspace::{Subspace, Vector};

/// Largest far-field radius produced by [`StrataSampler`].
pub const FAR_FIELD: f64 = 1e6;
/// Smallest scale produced by [`StrataSampler`].
pub const NEAR_FIELD: f64 = 1e-8;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly distributed unit vector of the subspace (zero for `{0}`).
pub fn random_unit_in<R: Rng>(rng: &mut R, s: &Subspace) -> Vector {
    if s.is_zero() {
        return Vector::zeros(s.ambient().dim());
    }
    loop {
        let c = Vector::from_fn(s.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = c.norm();
        if norm > 1e-12 {
            return s.from_coords(&(c / norm)).expect("coordinate length matches");
        }
    }
}

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Draws points concentrated near the members of `F` and their mutual
/// corners, plus generic points from `10^-8` to the far field `10^6`.
///
/// Three regimes, chosen with probabilities 0.4 / 0.3 / 0.3:
/// * near a member `Y`: a foot in `Y` at a log-uniform scale plus a normal
///   offset of length `10^{-k}·u`, `k ∈ 1..=8`, `u ∈ [1, 10)`;
/// * near a corner `Y ∩ Z`: a foot in the meet, a step inside `Y` away from
///   the meet, and a normal step off `Y`, each at its own `10^{-k}` scale;
/// * generic: a uniform direction at a log-uniform radius.
pub struct StrataSampler<'a> {
    f: &'a Semilattice,
    complements: Vec<Subspace>,
    /// `inside[i][j]`: the part of member `i` orthogonal to `members[i] ∩ members[j]`.
    inside: Vec<Vec<Subspace>>,
    full: Subspace,
    rng: ChaCha8Rng,
}

impl<'a> StrataSampler<'a> {
    pub fn new(f: &'a Semilattice, seed: u64) -> Self {
        let k = f.len();
        let complements: Vec<Subspace> =
            f.members().iter().map(|m| m.subspace.complement()).collect();
        let mut inside = Vec::with_capacity(k);
        for i in 0..k {
            let row = (0..k)
                .map(|j| {
                    let meet = &f.member(f.meet(i, j)).subspace;
                    f.member(i)
                        .subspace
                        .intersect(&meet.complement())
                        .expect("same ambient")
                })
                .collect();
            inside.push(row);
        }
        Self {
            f,
            complements,
            inside,
            full: Subspace::full(f.ambient()),
            rng: rng_from_seed(seed),
        }
    }

    fn decade(&mut self) -> f64 {
        let k: i32 = self.rng.gen_range(1..=8);
        10f64.powi(-k) * self.rng.gen_range(1.0..10.0)
    }

    pub fn sample(&mut self) -> Vector {
        let regime: f64 = self.rng.gen();
        let k = self.f.len();
        if regime < 0.4 {
            let i = self.rng.gen_range(0..k);
            let scale = log_uniform(&mut self.rng, NEAR_FIELD, FAR_FIELD);
            let foot = random_unit_in(&mut self.rng, &self.f.member(i).subspace) * scale;
            let step = self.decade();
            foot + random_unit_in(&mut self.rng, &self.complements[i]) * step
        } else if regime < 0.7 {
            let i = self.rng.gen_range(0..k);
            let j = self.rng.gen_range(0..k);
            let m = self.f.meet(i, j);
            let scale = log_uniform(&mut self.rng, NEAR_FIELD, FAR_FIELD);
            let foot = random_unit_in(&mut self.rng, &self.f.member(m).subspace) * scale;
            let along = self.decade();
            let across = self.decade();
            let inside = self.inside[i][j].clone();
            foot + random_unit_in(&mut self.rng, &inside) * along
                + random_unit_in(&mut self.rng, &self.complements[i]) * across
        } else {
            let r = log_uniform(&mut self.rng, NEAR_FIELD, FAR_FIELD);
            let full = self.full.clone();
            random_unit_in(&mut self.rng, &full) * r
        }
    }
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Halton sequence in `[0, 1)^d` with a seeded Cranley–Patterson shift.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports up to {} dimensions", PRIMES.len());
        let mut rng = rng_from_seed(seed);
        Self {
            shift: (0..dim).map(|_| rng.gen()).collect(),
            index: 1,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, b)| {
                let u = radical_inverse(i, b) + s;
                u - u.floor()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::collision_planes;
    use crate::subspace::AmbientSpace;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(1, 3), 1.0 / 3.0);
    }

    #[test]
    fn halton_points_in_unit_cube_and_seeded() {
        let mut a = Halton::new(4, 7);
        let mut b = Halton::new(4, 7);
        for _ in 0..100 {
            let p = a.next_point();
            assert!(p.iter().all(|&u| (0.0..1.0).contains(&u)));
            assert_eq!(p, b.next_point());
        }
    }

    #[test]
    fn strata_sampler_is_deterministic_and_reaches_small_distances() {
        let f = Semilattice::closure(AmbientSpace::new(6).unwrap(), collision_planes(2).unwrap())
            .unwrap();
        let mut a = StrataSampler::new(&f, 3);
        let mut b = StrataSampler::new(&f, 3);
        let mut smallest = f64::INFINITY;
        let mut largest: f64 = 0.0;
        for _ in 0..2000 {
            let x = a.sample();
            assert_eq!(x, b.sample());
            let d = f.dist_to_union(&x).unwrap();
            smallest = smallest.min(d);
            largest = largest.max(x.norm());
        }
        assert!(smallest < 1e-6);
        assert!(largest > 1e4);
    }
}
