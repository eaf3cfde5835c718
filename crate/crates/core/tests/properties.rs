use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use qrg::coherent::{self, click_model, ideal_winning, imperfect_winning, CoherentGameParams, Variant};
use qrg::game::{
    build_oa, count_consistent, hm_state, parity_closure, AnswerSpace, BitString, HiddenMatchingGame, OaMode,
};
use qrg::matchings::{
    canonical_family, double, enumerate_matchings, find_distinct_label_cycle, is_independent, join, Family,
    Matching,
};
use qrg::montecarlo::run_trials;
use qrg::numerics::{self, ComplexVector, HermitianOperator};
use qrg::sdp::{physical_value, DiscriminationProblem, SolverOptions};

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols)
        .prop_map(move |v| DMatrix::from_iterator(rows, cols, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

fn hermitian(max_d: usize) -> impl Strategy<Value = HermitianOperator> {
    (1..=max_d).prop_flat_map(|d| complex_matrix(d, d)).prop_map(|a| {
        let h = &a + a.adjoint();
        HermitianOperator::new(h).unwrap()
    })
}

/// `A A^dagger` with `A` of shape `d x r`, so rank at most `r`.
fn psd(max_d: usize) -> impl Strategy<Value = HermitianOperator> {
    (1..=max_d, 1..=max_d)
        .prop_flat_map(|(d, r)| complex_matrix(d, r))
        .prop_map(|a| HermitianOperator::new(&a * a.adjoint()).unwrap())
}

/// Families of up to three matchings on `n <= 8` nodes, picked by index.
fn small_family() -> impl Strategy<Value = Family> {
    prop::sample::select(vec![4usize, 6, 8]).prop_flat_map(|n| {
        let all = enumerate_matchings(n).unwrap();
        let len = all.len();
        prop::collection::vec(0..len, 1..=3).prop_map(move |idx| {
            Family::from_matchings(idx.iter().map(|&i| all[i].clone()).collect()).unwrap()
        })
    })
}

fn independent_family() -> impl Strategy<Value = Family> {
    small_family().prop_filter("independent", |f| is_independent(f.matchings()).unwrap().independent)
}

fn answer_index(f: &Family) -> impl Strategy<Value = u128> {
    0..AnswerSpace::new(f).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigensystem_reconstructs(h in hermitian(24)) {
        let es = numerics::eigensystem(&h).unwrap();
        let scale = h.max_abs().max(1e-300);
        prop_assert!((es.reconstruct() - h.matrix()).norm() <= 1e-10 * scale * h.dim() as f64);
        prop_assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn pinv_sqrt_whitens_onto_support(h in psd(12)) {
        let w = numerics::pinv_sqrt(&h, numerics::DEFAULT_SUPPORT_TOL).unwrap();
        let p = numerics::support_projector(&h, numerics::DEFAULT_SUPPORT_TOL).unwrap();
        let whitened = w.matrix() * h.matrix() * w.matrix();
        prop_assert!((whitened - p.matrix()).norm() < 1e-9 * h.dim() as f64);
    }

    #[test]
    fn gram_embedding_round_trips(g in psd(16)) {
        let vs = numerics::gram_embed(&g, 1e-14).unwrap();
        let scale = g.max_abs().max(1.0);
        for x in 0..g.dim() {
            for y in 0..g.dim() {
                let ip = numerics::inner(&vs[x], &vs[y]);
                prop_assert!((ip - g.matrix()[(x, y)]).norm() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn signal_states_are_normalized(n in 1usize..=12, bits in any::<u64>()) {
        let x = BitString::new(n, bits & ((1u64 << n) - 1));
        prop_assert!((hm_state(&x).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oa_closed_form_matches_numeric((f, idx) in independent_family().prop_flat_map(|f| { let s = answer_index(&f); (Just(f), s) })) {
        let game = HiddenMatchingGame::new(f.clone()).unwrap();
        let ans = AnswerSpace::new(&f).answer(idx);
        let closed = build_oa(&game, &ans, OaMode::ClosedForm).unwrap();
        let numeric = build_oa(&game, &ans, OaMode::Numeric).unwrap();
        prop_assert!((closed.matrix() - numeric.matrix()).norm() < 1e-10);
    }

    #[test]
    fn oa_is_block_diagonal_over_components((f, idx) in independent_family().prop_flat_map(|f| { let s = answer_index(&f); (Just(f), s) })) {
        let game = HiddenMatchingGame::new(f.clone()).unwrap();
        let ans = AnswerSpace::new(&f).answer(idx);
        let o = build_oa(&game, &ans, OaMode::Numeric).unwrap();
        let comps = parity_closure(f.n(), &ans).components();
        let label = |i: usize| comps.iter().position(|c| c.contains(&i)).unwrap_or(usize::MAX - i);
        for i in 1..=f.n() {
            for j in 1..=f.n() {
                if label(i) != label(j) {
                    prop_assert!(o.matrix()[(i - 1, j - 1)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn flipping_every_bit_keeps_the_norm((f, idx) in independent_family().prop_flat_map(|f| { let s = answer_index(&f); (Just(f), s) })) {
        let game = HiddenMatchingGame::new(f.clone()).unwrap();
        let ans = AnswerSpace::new(&f).answer(idx);
        let a = numerics::spectral_norm(&build_oa(&game, &ans, OaMode::ClosedForm).unwrap()).unwrap();
        let b = numerics::spectral_norm(&build_oa(&game, &ans.flipped(), OaMode::ClosedForm).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn consistent_strings_halve_per_matching((f, idx) in independent_family().prop_flat_map(|f| { let s = answer_index(&f); (Just(f), s) })) {
        let game = HiddenMatchingGame::new(f.clone()).unwrap();
        let ans = AnswerSpace::new(&f).answer(idx);
        prop_assert_eq!(count_consistent(&game, &ans).unwrap(), 1u64 << (f.n() - f.k()));
    }

    #[test]
    fn witnesses_replay(f in small_family()) {
        let g = join(f.matchings()).unwrap();
        match find_distinct_label_cycle(&g) {
            Some(w) => {
                prop_assert!(w.verify(&g));
                prop_assert!(!is_independent(f.matchings()).unwrap().independent);
            }
            None => prop_assert!(is_independent(f.matchings()).unwrap().independent),
        }
    }

    #[test]
    fn doubling_restricts_to_input(f in independent_family()) {
        let d = double(&f).unwrap();
        prop_assert!(is_independent(d.matchings()).unwrap().independent);
        let n = f.n();
        for (orig, copy) in f.matchings().iter().zip(d.matchings()) {
            let first: Vec<(usize, usize)> = copy.pairs().iter().copied().filter(|&(_, j)| j <= n).collect();
            prop_assert_eq!(first.as_slice(), orig.pairs());
        }
    }

    #[test]
    fn p0_factorizes(alpha in 0.0f64..4.0, eta in 0.0f64..=1.0, nu in 0.0f64..=1.0, k in 1usize..=4) {
        let p = CoherentGameParams::new(canonical_family(k).unwrap(), alpha, eta, nu).unwrap();
        let half = (p.n() / 2) as i32;
        for v in Variant::ALL {
            let m = click_model(&p, v);
            prop_assert!(((1.0 - m.p_c).powi(half) * (1.0 - m.p_w).powi(half) - m.p_0).abs() < 1e-12);
            for q in [m.p_c, m.p_w, m.p_0, m.p_1] {
                prop_assert!((0.0..=1.0).contains(&q));
            }
        }
    }

    #[test]
    fn perfect_setup_reduces_to_ideal(alpha in 0.0f64..5.0) {
        let p = CoherentGameParams::ideal(canonical_family(2).unwrap(), alpha).unwrap();
        for v in Variant::ALL {
            prop_assert_eq!(imperfect_winning(&p, v), ideal_winning(alpha));
        }
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(n in 1usize..=10, x in any::<u64>(), y in any::<u64>(), alpha in 0.0f64..3.0) {
        let mask = (1u64 << n) - 1;
        let (bx, by) = (BitString::new(n, x & mask), BitString::new(n, y & mask));
        let o = coherent::overlap(&bx, &by, alpha).unwrap();
        prop_assert_eq!(o, coherent::overlap(&by, &bx, alpha).unwrap());
        prop_assert!(o > 0.0 && o <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sdp_value_is_unitarily_invariant(
        states in prop::collection::vec(complex_matrix(3, 1), 4),
        gen in complex_matrix(3, 3),
    ) {
        let targets: Vec<HermitianOperator> = states
            .iter()
            .map(|s| {
                let v: ComplexVector = s.column(0).into_owned();
                HermitianOperator::projector(&v).scale(0.25)
            })
            .collect();
        let h = HermitianOperator::new(&gen + gen.adjoint()).unwrap();
        let es = numerics::eigensystem(&h).unwrap();
        let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, es.values.iter().map(|&l| Complex64::from_polar(1.0, l))));
        let u = &es.vectors * phases * es.vectors.adjoint();
        let rotated: Vec<HermitianOperator> = targets.iter().map(|r| HermitianOperator::new(&u * r.matrix() * u.adjoint()).unwrap()).collect();
        let opts = SolverOptions::default();
        let a = physical_value(&DiscriminationProblem::new(targets.clone()).unwrap(), &opts).unwrap();
        let b = physical_value(&DiscriminationProblem::new(rotated).unwrap(), &opts).unwrap();
        prop_assert!((a.primal_value - b.primal_value).abs() < 1e-6);
        prop_assert!(a.gap <= 1e-6 && b.gap <= 1e-6);

        let mut padded = targets;
        padded.push(HermitianOperator::zeros(3));
        let c = physical_value(&DiscriminationProblem::new(padded).unwrap(), &opts).unwrap();
        prop_assert!((a.primal_value - c.primal_value).abs() < 1e-6);
    }

    #[test]
    fn simulation_replays_exactly(seed in any::<u64>(), eta in 0.0f64..=1.0, nu in 0.5f64..=1.0) {
        let p = CoherentGameParams::new(canonical_family(2).unwrap(), 1.0, eta, nu).unwrap();
        let a = run_trials(&p, 0, 2000, seed).unwrap();
        prop_assert_eq!(&a, &run_trials(&p, 0, 2000, seed).unwrap());
        prop_assert!((0.0..=1.0).contains(&a.estimate));
    }
}

#[test]
fn single_matchings_of_small_n_have_no_cycles() {
    for n in [2usize, 4, 6] {
        for m in enumerate_matchings(n).unwrap() {
            let f: Vec<Matching> = vec![m];
            assert!(is_independent(&f).unwrap().independent);
        }
    }
}
