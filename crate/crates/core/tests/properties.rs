use blowup_core::blowup::{
    blowdown_split, clean_check, gv_embed, ray_limit, split_point, xf_coords, Stratum,
};
use blowup_core::charts::{
    affine_extend, onepoint_psi, stereographic, stereographic_inv, theta, theta_inv, PointOrRay,
};
use blowup_core::distance::{phi0, SmoothedDistanceSystem};
use blowup_core::jet::JetSpace;
use blowup_core::lattice::Semilattice;
use blowup_core::potential::{
    hydrogen_pair, make_inverse_square, ClosedForm, Coefficient, RadialExp,
};
use blowup_core::verify::{fd_partial, refinement_studies, Quadrature, Weight};
use blowup_core::order::{
    check_admissible, generate_admissible_order, reduce_tuple, size_order, Entry, OrderedTuple,
};
use blowup_core::subspace::{AmbientSpace, Subspace, Vector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn amb(n: usize) -> AmbientSpace {
    AmbientSpace::new(n).unwrap()
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

/// `(n, generators)` for a random subspace of `R^n`, `n ≤ max_n`.
fn subspace_in(max_n: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(vector(n), 0..=n)))
}

fn build(n: usize, gens: &[Vec<f64>]) -> Subspace {
    let gens: Vec<Vector> = gens.iter().map(|g| Vector::from_vec(g.clone())).collect();
    Subspace::span(amb(n), &gens).unwrap()
}

/// Random pair of subspaces of the same `R^n`.
fn subspace_pair(min_n: usize, max_n: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (min_n..=max_n).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(vector(n), 1..n),
            prop::collection::vec(vector(n), 1..n),
        )
    })
}

/// Random lattice generated by up to three proper coordinate subspaces.
fn coordinate_lattice(max_n: usize) -> impl Strategy<Value = Semilattice> {
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(prop::collection::vec(any::<bool>(), n), 1..=3)))
        .prop_map(|(n, masks)| {
            let inputs = masks
                .iter()
                .enumerate()
                .filter_map(|(k, m)| {
                    let axes: Vec<usize> = (0..n).filter(|&i| m[i]).collect();
                    (axes.len() < n).then(|| (format!("C{k}"), Subspace::coordinate(amb(n), &axes).unwrap()))
                })
                .collect();
            Semilattice::closure(amb(n), inputs).unwrap()
        })
}

fn rank(cols: &[Vector]) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let m = DMatrix::from_columns(cols);
    let sv = m.svd(false, false).singular_values;
    let tol = 1e-9 * sv.max().max(1.0);
    sv.iter().filter(|&&s| s > tol).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn subspace_basis_is_orthonormal((n, gens) in subspace_in(6)) {
        let s = build(n, &gens);
        prop_assert!(s.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_and_pythagorean((n, gens) in subspace_in(6), x in vector(6)) {
        let s = build(n, &gens);
        let x = Vector::from_vec(x[..n].to_vec());
        let p = s.project(&x).unwrap();
        let pp = s.project(&p).unwrap();
        prop_assert!((&pp - &p).norm() < 1e-12 * (1.0 + x.norm()));
        let d = s.dist_to(&x).unwrap();
        prop_assert!((d * d + p.norm_squared() - x.norm_squared()).abs() < 1e-10 * (1.0 + x.norm_squared()));
    }

    #[test]
    fn intersection_dimension_formula((n, a, b) in subspace_pair(2, 6)) {
        let sa = build(n, &a);
        let sb = build(n, &b);
        let mut cols: Vec<Vector> = sa.basis().to_vec();
        cols.extend(sb.basis().iter().cloned());
        let expected = sa.dim() + sb.dim() - rank(&cols);
        prop_assert_eq!(sa.intersect(&sb).unwrap().dim(), expected);
    }

    #[test]
    fn theta_roundtrip_and_unit_norm(x in vector(6), k in 1usize..=6, scale in -6.0..6.0f64) {
        let x = Vector::from_vec(x[..k].to_vec()) * 10f64.powf(scale);
        let p = theta(&x).unwrap();
        prop_assert!((p.coords().norm() - 1.0).abs() < 1e-12);
        match theta_inv(&p) {
            PointOrRay::Interior(v) => {
                let back = Vector::from_vec(v);
                prop_assert!((back - &x).norm() <= 1e-12 * x.norm().max(1.0));
            }
            PointOrRay::Ray(_) => prop_assert!(false, "finite point became a ray"),
        }
    }

    #[test]
    fn theta_commutes_with_coordinate_padding(y in vector(4), extra in 1usize..=3) {
        let p = y.len();
        let n = p + extra;
        let mut padded = y.clone();
        padded.resize(n, 0.0);
        let small = theta(&Vector::from_vec(y)).unwrap();
        let big = theta(&Vector::from_vec(padded)).unwrap();
        let mut lifted = small.to_vec();
        lifted.resize(n + 1, 0.0);
        for (a, b) in lifted.iter().zip(big.to_vec()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_affine_extension_is_identity(x in vector(3), ray in any::<bool>()) {
        let n = 3;
        let v = Vector::from_vec(x);
        prop_assume!(v.norm() > 1e-6);
        let p = if ray {
            blowup_core::charts::CompactPoint::ray(&v).unwrap()
        } else {
            theta(&v).unwrap()
        };
        let q = affine_extend(&DMatrix::identity(n, n), &Vector::zeros(n), &p).unwrap();
        prop_assert!((q.coords() - p.coords()).norm() < 1e-15);
    }

    #[test]
    fn stereographic_of_doubled_angle_is_identity(x in vector(4)) {
        let x = Vector::from_vec(x);
        let r = x.norm();
        prop_assume!(r > 1e-9);
        let alpha = r.atan();
        let psi = onepoint_psi(alpha, &(&x / r)).unwrap();
        let back = stereographic(&psi).unwrap();
        prop_assert!((back - &x).norm() < 1e-12 * r.max(1.0));
        let q = stereographic_inv(&x);
        prop_assert!((stereographic(&q).unwrap() - &x).norm() < 1e-12 * r.max(1.0));
    }

    #[test]
    fn splitting_roundtrip((n, gens, _) in subspace_pair(2, 6), x in vector(6)) {
        let y = build(n, &gens);
        prop_assume!(!y.is_zero() && !y.is_full());
        let x = Vector::from_vec(x[..n].to_vec());
        let sp = split_point(&y, &x).unwrap();
        match blowdown_split(&y, &sp).unwrap() {
            PointOrRay::Interior(v) => {
                prop_assert!((Vector::from_vec(v) - &x).norm() < 1e-10 * x.norm().max(1.0));
            }
            PointOrRay::Ray(_) => prop_assert!(false),
        }
    }

    #[test]
    fn gv_embedding_separates_points(f in coordinate_lattice(5), a in vector(5), b in vector(5)) {
        let n = f.ambient().dim();
        let a = Vector::from_vec(a[..n].to_vec());
        let b = Vector::from_vec(b[..n].to_vec());
        prop_assume!((&a - &b).norm() > 1e-6);
        let ga = gv_embed(&f, &a).unwrap();
        let gb = gv_embed(&f, &b).unwrap();
        let zero = f.find(&Subspace::zero(f.ambient())).unwrap().unwrap();
        prop_assert!((ga.components[zero].coords() - gb.components[zero].coords()).norm() > 0.0);
    }

    #[test]
    fn ray_limit_is_translation_and_scale_invariant(
        f in coordinate_lattice(5), base in vector(5), dir in vector(5), s in 0.1..10.0f64
    ) {
        let n = f.ambient().dim();
        let base = Vector::from_vec(base[..n].to_vec());
        let dir = Vector::from_vec(dir[..n].to_vec());
        prop_assume!(dir.norm() > 1e-3);
        let a = ray_limit(&f, &base, &dir).unwrap();
        let b = ray_limit(&f, &(&base + &dir), &(&dir * s)).unwrap();
        for (p, q) in a.components.iter().zip(&b.components) {
            prop_assert!((p.coords() - q.coords()).norm() < 1e-9);
        }
    }

    #[test]
    fn strata_intersect_cleanly((n, a, b) in subspace_pair(3, 6)) {
        let y = build(n, &a);
        let z = build(n, &b);
        let strata = [
            Stratum::closure(y.clone()),
            Stratum::closure(z.clone()),
            Stratum::sphere(y),
            Stratum::sphere(z),
        ];
        for i in 0..4 {
            for j in i + 1..4 {
                match clean_check(&strata[i], &strata[j], None) {
                    Ok(r) => prop_assert!(r.clean, "{:?}", r),
                    Err(blowup_core::GeomError::EmptyIntersection) => {}
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }

    #[test]
    fn polar_triples_reconstruct_the_point(f in coordinate_lattice(5), x in vector(5)) {
        let n = f.ambient().dim();
        let x = Vector::from_vec(x[..n].to_vec());
        prop_assume!(f.dist_to_union(&x).unwrap() > 1e-6);
        let p = xf_coords(&f, &x).unwrap();
        for t in &p.polar {
            let u = Vector::from_vec(t.direction.clone());
            prop_assert!((u.norm() - 1.0).abs() < 1e-12);
            let rebuilt = Vector::from_vec(t.foot.clone()) + u * t.radius;
            prop_assert!((rebuilt - &x).norm() < 1e-12 * x.norm().max(1.0));
        }
    }

    #[test]
    fn closure_is_a_fixpoint(f in coordinate_lattice(8)) {
        let inputs = f.members().iter().map(|m| (m.name.clone(), m.subspace.clone())).collect();
        let again = Semilattice::closure(f.ambient(), inputs).unwrap();
        prop_assert_eq!(again.len(), f.len());
        for (a, b) in f.members().iter().zip(again.members()) {
            prop_assert_eq!(a.subspace.fingerprint(), b.subspace.fingerprint());
        }
    }

    #[test]
    fn generated_orders_are_admissible(f in coordinate_lattice(8), prefer in any::<prop::sample::Index>()) {
        prop_assert!(check_admissible(&f, &generate_admissible_order(&f, None).unwrap()).is_ok());
        let name = f.member(prefer.index(f.len())).name.clone();
        prop_assert!(check_admissible(&f, &generate_admissible_order(&f, Some(&name)).unwrap()).is_ok());
        prop_assert!(check_admissible(&f, &size_order(&f)).is_ok());
    }

    #[test]
    fn later_strict_subsets_are_rejected(f in coordinate_lattice(6), perm in Just(()).prop_perturb(|_, mut rng| rng.next_u64())) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut idx: Vec<usize> = (0..f.len()).collect();
        idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm));
        let violated = (0..idx.len()).any(|i| {
            (i + 1..idx.len()).any(|j| f.is_below(idx[j], idx[i]) && !f.is_below(idx[i], idx[j]))
        });
        let t = OrderedTuple::new(idx.iter().map(|&i| Entry::atom(i)).collect());
        prop_assert_eq!(check_admissible(&f, &t).is_err(), violated);
    }

    #[test]
    fn reduce_is_idempotent(f in coordinate_lattice(6), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..10)) {
        let entries = picks.iter().map(|p| {
            let k = p.index(f.len() + 1);
            if k == f.len() { Entry::Empty } else { Entry::atom(k) }
        }).collect();
        let t = OrderedTuple::new(entries);
        let once = reduce_tuple(&t);
        prop_assert_eq!(reduce_tuple(&once), once);
    }

    #[test]
    fn delta_is_one_lipschitz(f in coordinate_lattice(6), a in vector(6), b in vector(6)) {
        let n = f.ambient().dim();
        let a = Vector::from_vec(a[..n].to_vec());
        let b = Vector::from_vec(b[..n].to_vec());
        let gap = (f.delta(&a).unwrap() - f.delta(&b).unwrap()).abs();
        prop_assert!(gap <= (&a - &b).norm() + 1e-12);
    }

    #[test]
    fn rho_factors_do_not_depend_on_the_order(f in coordinate_lattice(6), x in vector(6), s in -4.0..1.0f64) {
        let n = f.ambient().dim();
        let x = Vector::from_vec(x[..n].to_vec()) * 10f64.powf(s);
        prop_assume!(f.dist_to_union(&x).unwrap() > 0.0);
        let system = SmoothedDistanceSystem::new(&f);
        let a = generate_admissible_order(&f, None).unwrap();
        let b = size_order(&f);
        let order = |t: &OrderedTuple| -> Vec<usize> {
            t.entries.iter().filter_map(|e| e.atoms().first().copied()).collect()
        };
        let mut rev_b = order(&b);
        // reverse within equal dimensions to get a genuinely different order
        rev_b.sort_by_key(|&i| (f.member(i).subspace.dim(), std::cmp::Reverse(i)));
        let ta = system.evaluate_in_order(&x, &order(&a)).unwrap();
        let tb = system.evaluate_in_order(&x, &rev_b).unwrap();
        prop_assert_eq!(ta.factors, tb.factors);
        prop_assert!(ta.rho > 0.0);
    }

    #[test]
    fn chains_telescope(n in 2usize..=6, x in vector(6), s in -4.0..1.0f64) {
        // Y_1 ⊊ … ⊊ Y_{n-1} coordinate chain
        let inputs = (1..n)
            .map(|k| (format!("Y{k}"), Subspace::coordinate(amb(n), &(0..k).collect::<Vec<_>>()).unwrap()))
            .collect();
        let f = Semilattice::closure(amb(n), inputs).unwrap();
        let x = Vector::from_vec(x[..n].to_vec()) * 10f64.powf(s);
        prop_assume!(f.dist_to_union(&x).unwrap() > 0.0);
        let e = SmoothedDistanceSystem::new(&f).evaluate(&x).unwrap();
        let top = f.index_of(&format!("Y{}", n - 1)).unwrap();
        let expected = phi0(e.distances[top]).unwrap();
        prop_assert!((e.rho - expected).abs() <= 1e-12 * expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potentials_add_linearly(x in vector(3), a1 in -2.0..2.0f64, b1 in -2.0..2.0f64, a2 in -2.0..2.0f64, c in -1.0..1.0f64) {
        let f = hydrogen_pair().lattice().clone();
        let x = Vector::from_vec(x);
        prop_assume!(x.norm() > 1e-6);
        let term = |a: f64, b: f64| vec![("0".to_string(), Coefficient::Constant(a), Coefficient::Constant(b))];
        let v1 = make_inverse_square(f.clone(), term(a1, b1), Coefficient::Constant(c)).unwrap();
        let v2 = make_inverse_square(f, term(a2, 0.0), Coefficient::zero()).unwrap();
        let sum = v1.add(&v2).unwrap().eval(&x).unwrap();
        let parts = v1.eval(&x).unwrap() + v2.eval(&x).unwrap();
        prop_assert!((sum - parts).abs() <= 1e-12 * parts.abs().max(1.0));
    }

    #[test]
    fn finite_differences_match_jets(x in vector(3), gamma in 0.05..0.95f64, pick in 0usize..20) {
        let x = Vector::from_vec(x);
        prop_assume!(x.norm() > 0.3);
        let u = RadialExp { dim: 3, gamma, kappa: 1.0 };
        let space = JetSpace::new(3, 3);
        let alpha = space.monomials()[pick].clone();
        let exact = u.jet(&space, x.as_slice()).unwrap().partial(&alpha);
        let f = hydrogen_pair().lattice().clone();
        let approx = fd_partial(&u, &f, &x, &alpha, 1e-3).unwrap();
        prop_assert!((approx - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{alpha:?}: {approx} vs {exact}");
    }
}

#[test]
fn sampling_is_deterministic_and_monotone() {
    let pair = hydrogen_pair();
    let f = pair.lattice().clone();
    let quad = Quadrature::Sampling { points: 20_000, seed: 11 };
    let alphas = vec![vec![0, 0, 0], vec![1, 0, 0]];
    let weights = [(Weight::Delta, 0.0), (Weight::None, 0.0)];
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let run = || refinement_studies(pair.u().as_ref(), &f, &alphas, &weights, &eps, 40.0, &quad).unwrap();
    let (a, _, _) = run();
    let (b, _, _) = run();
    assert_eq!(a, b);
    for e in &a {
        assert!(e.estimates.windows(2).all(|w| w[1] >= w[0]), "{e:?}");
    }
}

#[test]
fn phi0_bracket_on_grid() {
    let mut prev = 0.0;
    for k in 0..=10_000 {
        let t = 0.5 + 0.5 * k as f64 / 10_000.0;
        let v = phi0(t).unwrap();
        assert!(t - 1e-15 <= v && v <= 1.0 + 1e-15, "t = {t}: {v}");
        assert!(v >= prev - 1e-15);
        prev = v;
    }
}
