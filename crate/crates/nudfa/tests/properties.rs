//! Structural invariants over the fixture registry, and randomized
//! properties over generated programs, circuits and formulas.

mod common;

use std::collections::BTreeSet;

use nudfa::algebra::{
    prime_power_decomposition, quotient_algebra, unary_polynomial_clone, FiniteAlgebra,
    DEFAULT_CLONE_BUDGET,
};
use nudfa::congruence::{
    all_congruences, charr_set, commutator, is_pupi, solvability_class, Congruence,
};
use nudfa::fieldpoly::{multilinear_interpolate, pseudo_and};
use nudfa::fixtures;
use nudfa::hardness::{beta_interpolate, cnf_to_lattice_program, find_beta_configs};
use nudfa::localizer::{minimal_set_through, minimal_sets, traces};
use nudfa::lowering::{boolean_table, run_pass};
use nudfa::program::{decompose_program, quotient_program, word};
use nudfa::solvers::{progcsat_exhaustive, Status};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n.pow(k as u32)).map(move |idx| {
        (0..k)
            .map(|i| idx / n.pow((k - 1 - i) as u32) % n)
            .collect()
    })
}

fn nilpotent(alg: &FiniteAlgebra) -> bool {
    solvability_class(alg, &Congruence::total(alg.size))
        .unwrap()
        .is_nilpotent()
}

#[test]
fn clone_witnesses_evaluate_to_their_tables() {
    for name in fixtures::NAMES {
        let alg = fixtures::by_name(name).unwrap();
        for f in unary_polynomial_clone(&alg, DEFAULT_CLONE_BUDGET).unwrap() {
            let w = f.witness.as_ref().expect("clone members carry witnesses");
            for x in 0..alg.size {
                assert_eq!(w.eval(&alg, &[x]).unwrap(), f.apply(x), "{name}");
            }
        }
    }
}

#[test]
fn malcev_identities_hold() {
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        let Some(d) = &f.malcev else { continue };
        for x in 0..f.algebra.size {
            for y in 0..f.algebra.size {
                assert_eq!(d.eval(&f.algebra, &[x, x, y]).unwrap(), y, "{name}");
                assert_eq!(d.eval(&f.algebra, &[x, y, y]).unwrap(), x, "{name}");
            }
        }
    }
}

#[test]
fn quotient_maps_are_surjective_homomorphisms() {
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        let alg = &f.algebra;
        for theta in &f.lattice.elements {
            let (q, proj) = quotient_algebra(alg, theta).unwrap();
            let image: BTreeSet<usize> = proj.iter().copied().collect();
            assert_eq!(image.len(), q.size);
            for (op, qop) in alg.ops.iter().zip(&q.ops) {
                for args in tuples(alg.size, op.arity) {
                    let cls: Vec<usize> = args.iter().map(|&x| proj[x]).collect();
                    assert_eq!(
                        proj[op.apply(alg.size, &args)],
                        qop.apply(q.size, &cls),
                        "{name}/{}",
                        theta.label()
                    );
                }
            }
        }
    }
}

#[test]
fn decompositions_reconstruct_the_algebra() {
    for alg in [
        fixtures::z6(),
        fixtures::cyclic(12),
        fixtures::cyclic(10),
        fixtures::z6mod2(),
    ] {
        let lat = all_congruences_bounded(&alg);
        let Some(d) = prime_power_decomposition(&alg, &lat) else {
            continue;
        };
        assert!(d.is_valid(alg.size));
        assert_eq!(d.factor_sizes.iter().product::<usize>(), alg.size);
        let key = |x: usize| {
            d.factors
                .iter()
                .map(|eta| eta.class_of(x))
                .collect::<Vec<_>>()
        };
        let keys: BTreeSet<Vec<usize>> = (0..alg.size).map(key).collect();
        assert_eq!(keys.len(), alg.size, "{}: not injective", alg.name);
        for op in &alg.ops {
            for args in tuples(alg.size, op.arity) {
                for (i, eta) in d.factors.iter().enumerate() {
                    // each coordinate of f(x) depends only on the coordinates of x
                    let moved: Vec<usize> = args
                        .iter()
                        .map(|&x| eta.representatives()[eta.class_indices()[x]])
                        .collect();
                    assert_eq!(
                        key(op.apply(alg.size, &args))[i],
                        key(op.apply(alg.size, &moved))[i],
                        "{}: op {} does not act coordinatewise",
                        alg.name,
                        op.name
                    );
                }
            }
        }
    }
}

fn all_congruences_bounded(alg: &FiniteAlgebra) -> nudfa::congruence::CongruenceLattice {
    nudfa::congruence::all_congruences_bounded(
        alg,
        alg.size.max(nudfa::congruence::DEFAULT_CON_BOUND),
    )
    .unwrap()
}

#[test]
fn lattice_order_meets_joins_and_modularity() {
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        let l = &f.lattice;
        let k = l.elements.len();
        for i in 0..k {
            for j in 0..k {
                let (a, b) = (&l.elements[i], &l.elements[j]);
                assert_eq!(l.leq[i][j], a.le(b));
                assert_eq!(l.elements[l.meet_idx(i, j)], a.meet(b));
                assert_eq!(l.elements[l.join_idx(i, j)], a.join(b));
            }
        }
        for &(i, j) in &l.covers {
            assert!(l.leq[i][j] && i != j);
            assert!((0..k).all(|m| m == i || m == j || !(l.leq[i][m] && l.leq[m][j])));
        }
        // pentagon N5 by a scan over 5-element chains 0 < a < b < 1 with c off to the side
        let mut pentagon = false;
        for (a, b, c) in
            (0..k).flat_map(|a| (0..k).flat_map(move |b| (0..k).map(move |c| (a, b, c))))
        {
            if a != b && l.leq[a][b] && !l.leq[a][c] && !l.leq[c][b] && !l.leq[c][a] && !l.leq[b][c]
            {
                if l.meet_idx(b, c) == l.meet_idx(a, c) && l.join_idx(a, c) == l.join_idx(b, c) {
                    pentagon = true;
                }
            }
        }
        assert_eq!(l.modular, !pentagon, "{name}");
    }
}

#[test]
fn commutator_is_below_the_meet() {
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        for a in &f.lattice.elements {
            for b in &f.lattice.elements {
                let c = commutator(&f.algebra, a, b).unwrap();
                assert!(
                    c.le(&a.meet(b)),
                    "{name}: [{}, {}] = {}",
                    a.label(),
                    b.label(),
                    c.label()
                );
            }
        }
    }
}

#[test]
fn nilpotent_congruences_have_equal_class_sizes() {
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        if !nilpotent(&f.algebra) {
            continue;
        }
        for theta in &f.lattice.elements {
            let sizes: BTreeSet<usize> = theta.blocks().iter().map(Vec::len).collect();
            assert_eq!(sizes.len(), 1, "{name}: {}", theta.label());
        }
    }
}

/// Atoms of nilpotent fixtures: each β-class is a simple piece (any two
/// distinct members generate the whole class) and carries an elementary
/// abelian p-group under x + y = d(x, e, y).
#[test]
fn atom_classes_are_elementary_abelian() {
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        let (alg, Some(d)) = (&f.algebra, &f.malcev) else {
            continue;
        };
        if !nilpotent(alg) {
            continue;
        }
        for &atom in &f.lattice.atoms {
            let beta = &f.lattice.elements[atom];
            let p = f
                .lattice
                .cover_char(f.lattice.bottom(), atom)
                .unwrap()
                .characteristic as usize;
            for e in 0..alg.size {
                let class = beta.class_members(e);
                for &x in &class {
                    for &y in &class {
                        if x != y {
                            let cg = nudfa::congruence::principal_congruence(alg, x, y);
                            assert!(
                                class.iter().all(|&z| cg.related(z, e)),
                                "{name}: class of {e} is not simple"
                            );
                        }
                    }
                }
                let add = |x: usize, y: usize| d.eval(alg, &[x, e, y]).unwrap();
                for &x in &class {
                    assert_eq!(add(x, e), x);
                    let mut acc = e;
                    for _ in 0..p {
                        acc = add(acc, x);
                    }
                    assert_eq!(acc, e, "{name}: order of {x} does not divide {p}");
                    for &y in &class {
                        assert!(class.contains(&add(x, y)));
                        assert_eq!(add(x, y), add(y, x));
                        for &z in &class {
                            assert_eq!(add(add(x, y), z), add(x, add(y, z)));
                        }
                    }
                }
                let mut s = class.len();
                while s % p == 0 {
                    s /= p;
                }
                assert_eq!(s, 1, "{name}: |e/β| is not a power of {p}");
            }
        }
    }
}

#[test]
fn join_irreducibles_of_pupi_intervals_have_one_characteristic() {
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        let l = &f.lattice;
        for lo in 0..l.elements.len() {
            for hi in 0..l.elements.len() {
                if lo == hi || !l.leq[lo][hi] || is_pupi(l, lo, hi).is_none() {
                    continue;
                }
                for g in l.interval(lo, hi) {
                    let downs = l
                        .covers
                        .iter()
                        .filter(|&&(a, b)| b == g && l.leq[lo][a])
                        .count();
                    if g != lo && downs == 1 {
                        assert_eq!(charr_set(l, lo, g).unwrap().len(), 1, "{name}");
                    }
                }
            }
        }
    }
}

#[test]
fn minimal_sets_are_minimal_ranges() {
    for name in ["Z2", "Z4", "Z6", "Z6mod2", "S3", "LAT2"] {
        let f = fixtures::load(name).unwrap();
        let alg = &f.algebra;
        let clone = unary_polynomial_clone(alg, DEFAULT_CLONE_BUDGET).unwrap();
        for &(i, j) in &f.lattice.covers {
            let (a, b) = (&f.lattice.elements[i], &f.lattice.elements[j]);
            let separating: Vec<_> = clone
                .iter()
                .filter(|g| {
                    b.pairs()
                        .iter()
                        .any(|&(x, y)| !a.related(g.apply(x), g.apply(y)))
                })
                .collect();
            for u in minimal_sets(alg, a, b).unwrap() {
                let set: BTreeSet<usize> = u.universe_subset.iter().copied().collect();
                assert_eq!(u.witness.range().into_iter().collect::<BTreeSet<_>>(), set);
                for g in &separating {
                    let r: BTreeSet<usize> = g.range().into_iter().collect();
                    assert!(
                        !(r.is_subset(&set) && r != set),
                        "{name}: smaller range exists"
                    );
                }
                if let Some(e) = &u.idempotent {
                    assert!(e.is_idempotent());
                    assert_eq!(e.range().into_iter().collect::<BTreeSet<_>>(), set);
                }
                assert!(!traces(&u, a, b).is_empty());
            }
            if nilpotent(alg) {
                for e in 0..alg.size {
                    let m = minimal_set_through(alg, a, b, e).unwrap();
                    assert!(
                        m.universe_subset.contains(&e),
                        "{name}: no minimal set through {e}"
                    );
                }
            }
        }
    }
}

#[test]
fn program_size_is_additive_and_stable_under_quotients() {
    let alg = fixtures::z6mod2();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let p = random_program(&mut rng, &alg, 5, 6);
        assert_eq!(p.size(), p.circuit.size() + p.instructions.len());
        let (_, q) = quotient_program(
            &alg,
            &p,
            &Congruence::from_blocks(6, &[vec![0, 2, 4], vec![1, 3, 5]]),
        )
        .unwrap();
        assert_eq!(q.size(), p.size());
    }
}

fn fixture_index() -> impl Strategy<Value = usize> {
    0..fixtures::NAMES.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quotient_program_square_commutes(seed in any::<u64>(), fi in fixture_index(), n in 1usize..6) {
        let f = fixtures::load(fixtures::NAMES[fi]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng, &f.algebra, n, 6);
        let inner = p.inner_table(&f.algebra).unwrap();
        for theta in &f.lattice.elements {
            let (q, pq) = quotient_program(&f.algebra, &p, theta).unwrap();
            let qi = pq.inner_table(&q).unwrap();
            let proj = theta.class_indices();
            for (b, &v) in inner.iter().enumerate() {
                prop_assert_eq!(proj[v], qi[b]);
            }
        }
    }

    #[test]
    fn decomposed_programs_accept_jointly(seed in any::<u64>(), n in 1usize..7, acc in 0usize..6) {
        let alg = fixtures::z6();
        let lat = all_congruences(&alg).unwrap();
        let d = prime_power_decomposition(&alg, &lat).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng, &alg, n, 5).with_accepting(vec![acc]);
        let parts = decompose_program(&alg, &p, &d).unwrap();
        let t = p.truth_table(&alg).unwrap();
        for (b, &v) in t.iter().enumerate() {
            let all = parts.iter().all(|(q, pq)| pq.truth_table(q).unwrap()[b]);
            prop_assert_eq!(v, all);
        }
    }

    #[test]
    fn multiplicities_expand_to_parallel_wires(seed in any::<u64>(), n in 1usize..8, inner in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_mod_mod(&mut rng, n, 3, 5, inner);
        let e = c.expand_multiplicities();
        prop_assert!(e.gates.iter().all(|g| g.inputs.iter().all(|w| w.mult == 1)));
        prop_assert_eq!(c.truth_table().unwrap(), e.truth_table().unwrap());
    }

    #[test]
    fn interpolation_round_trips(seed in any::<u64>(), n in 0usize..7, pi in 0usize..3) {
        let p = [2u64, 3, 5][pi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<u64> = (0..1usize << n).map(|_| rand::Rng::gen_range(&mut rng, 0..p)).collect();
        let w = multilinear_interpolate(&f, n, p).unwrap();
        prop_assert!(w.terms.values().all(|&c| c != 0 && c < p));
        let back: Vec<u64> = (0..1usize << n).map(|m| w.eval_mask(m as u64)).collect();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(multilinear_interpolate(&back, n, p).unwrap(), w);
    }

    #[test]
    fn pseudo_and_counts_unsatisfied_clauses(seed in any::<u64>(), n in 1usize..7, l in 0usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_cnf(&mut rng, n, l, 3);
        let w = pseudo_and(&phi, 2, 2).unwrap();
        prop_assert!(w.degree() <= 9);
        for i in 0..1usize << n {
            let b = word(i, n);
            prop_assert_eq!(w.eval(&b).unwrap() == 0, phi.unsat_count(&b) % 4 == 0);
        }
    }

    #[test]
    fn passes_preserve_tables(seed in any::<u64>(), n in 1usize..11, which in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, pass, p) = match which {
            0 => (random_mod_mod(&mut rng, n, 2, 3, 3), "unmod", None),
            1 => (random_mod_and(&mut rng, n, 2, 2), "modm_andd_to_sum", Some(3)),
            _ => (five_layer(&mut rng, n, 1), "collapse_5to3", None),
        };
        let (out, rep) = run_pass(pass, &c, p, 10).unwrap();
        prop_assert!(rep.verified);
        prop_assert_eq!(boolean_table(&out).unwrap(), c.truth_table().unwrap());
        let shape = nudfa::cc::LayerShape::parse(&out.declared_shape).unwrap();
        prop_assert!(nudfa::cc::validate_shape(&out, &shape).ok);
    }

    #[test]
    fn solver_answers_re_verify(seed in any::<u64>(), fi in fixture_index(), n in 1usize..7) {
        let alg = fixtures::by_name(fixtures::NAMES[fi]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng, &alg, n, 5);
        let t = p.truth_table(&alg).unwrap();
        match progcsat_exhaustive(&alg, &p).unwrap().status {
            Status::Sat { witness } => {
                let b: Vec<bool> = witness.iter().map(|&x| x == 1).collect();
                prop_assert!(p.eval(&alg, &b).unwrap().1);
            }
            Status::Unsat { certain } => prop_assert!(certain && t.iter().all(|&x| !x)),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn lattice_gadget_matches_formula(seed in any::<u64>(), n in 1usize..13, l in 0usize..10, width in 1usize..4) {
        let lat2 = fixtures::lat2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_cnf(&mut rng, n, l, width);
        let t = cnf_to_lattice_program(&phi).unwrap().truth_table(&lat2).unwrap();
        for (i, &v) in t.iter().enumerate() {
            prop_assert_eq!(v, phi.eval(&word(i, n)));
        }
    }

    #[test]
    fn beta_interpolation_on_random_tables(mask in any::<u64>(), s in 0usize..5) {
        let alg = fixtures::z6mod2();
        let lat = all_congruences(&alg).unwrap();
        let cfg = find_beta_configs(&alg, &lat, None).unwrap().remove(0);
        let f: Vec<bool> = (0..1usize << s).map(|i| mask >> (i % 64) & 1 == 1).collect();
        let w = beta_interpolate(&alg, &cfg, &f).unwrap();
        for (m, &want) in f.iter().enumerate() {
            let x: Vec<usize> = (0..s).map(|i| if m >> i & 1 == 1 { cfg.d } else { cfg.c }).collect();
            let got = w.eval(&alg, &x).unwrap();
            let target = if want { cfg.a } else { cfg.e };
            prop_assert!(cfg.beta_eq(got, target));
        }
    }
}
