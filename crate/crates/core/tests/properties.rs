use num_complex::Complex64;
use proptest::prelude::*;

use sympinf::algebra::{
    canonical_basis, drift_d, generator_image, is_in_sp, project_pi, sum_xi_oracle,
    CovarianceOverride, CovarianceSpec, GenKind, SpElement,
};
use sympinf::diffeo::{CircleMap, Diffeo};
use sympinf::fourier::{analyze, hilbert_j, inner_omega, modes, omega, synthesize, FourierVector};
use sympinf::operator::{Involution, Operator};

const N: usize = 3;

fn op_strategy() -> impl Strategy<Value = Operator> {
    prop::collection::vec(-1.0f64..1.0, 2 * (2 * N) * (2 * N)).prop_map(|v| {
        let mut it = v.chunks(2).map(|c| Complex64::new(c[0], c[1]));
        Operator::from_fn(N, |_, _| it.next().unwrap())
    })
}

fn vec_strategy() -> impl Strategy<Value = FourierVector> {
    prop::collection::vec(-1.0f64..1.0, 4 * N).prop_map(|v| {
        let coeffs = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        FourierVector::from_coeffs(N, coeffs).unwrap()
    })
}

fn sp_strategy() -> impl Strategy<Value = Operator> {
    let dim = N * (2 * N + 1);
    prop::collection::vec(-1.0f64..1.0, dim).prop_map(|c| {
        let basis = canonical_basis(N).unwrap();
        SpElement::from_coords(&basis, &c).into_operator()
    })
}

fn cov_strategy() -> impl Strategy<Value = CovarianceSpec> {
    let ov = (
        any::<bool>(),
        1i64..=N as i64,
        1i64..=N as i64,
        any::<bool>(),
        0.0f64..3.0,
    )
        .prop_map(|(re, m, k, neg, q)| {
            let tag = if re { GenKind::Re } else { GenKind::Im };
            let n = if neg || (re && k == m) { -k } else { k };
            CovarianceOverride { tag, m, n, q }
        });
    (0.0f64..3.0, 0.0f64..2.0, prop::collection::vec(ov, 0..4))
        .prop_map(|(p, c, overrides)| CovarianceSpec { p, c, overrides })
}

proptest! {
    #[test]
    fn involutions_are_involutive(a in op_strategy()) {
        for inv in Involution::ALL {
            prop_assert!(a.involution(inv).involution(inv).max_abs_diff(&a) < 1e-15);
        }
    }

    #[test]
    fn sharp_reverses_products(a in op_strategy(), b in op_strategy()) {
        let lhs = (&a * &b).sharp();
        let rhs = &b.sharp() * &a.sharp();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn sharp_is_bar_dagger_conjugated_by_j(a in op_strategy()) {
        // A^# = -J A^T J in the ω-basis
        let j = Operator::hilbert_j(N);
        let via_j = (&(&j * &a.transpose()) * &j).scale(-1.0);
        prop_assert!(a.sharp().max_abs_diff(&via_j) < 1e-14);
    }

    #[test]
    fn projection_is_orthogonal(e in op_strategy(), f in op_strategy()) {
        let pe = project_pi(&e).into_operator();
        let pf = project_pi(&f).into_operator();
        prop_assert!(project_pi(&pe).as_operator().max_abs_diff(&pe) < 1e-14);
        prop_assert!((pe.hs_inner(&f) - e.hs_inner(&pf)).abs() < 1e-12);
        prop_assert!(is_in_sp(&pe, 1e-13).pass);
        prop_assert!(generator_image(&e).max_abs_diff(&pe.scale(2.0)) < 1e-14);
    }

    #[test]
    fn bracket_closes(x in sp_strategy(), y in sp_strategy()) {
        let c = &(&x * &y) - &(&y * &x);
        prop_assert!(is_in_sp(&c, 1e-10).pass);
        prop_assert!(is_in_sp(&x, 1e-13).pass);
    }

    #[test]
    fn exp_of_sp_is_symplectic(x in sp_strategy()) {
        let g = x.scale(0.3).exp();
        prop_assert!(g.predicates(1e-10).all_pass());
    }

    #[test]
    fn omega_antisymmetric_and_compatible(u in vec_strategy(), v in vec_strategy()) {
        prop_assert!((omega(&u, &v).unwrap() + omega(&v, &u).unwrap()).norm() < 1e-13);
        // (u,v)_ω = -ω(u, J v̄)
        let rhs = -omega(&u, &hilbert_j(&v.conj_fn())).unwrap();
        prop_assert!((inner_omega(&u, &v).unwrap() - rhs).norm() < 1e-13);
        let jj = hilbert_j(&hilbert_j(&u));
        prop_assert!(jj.add(&u).unwrap().coeffs().iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn analysis_inverts_synthesis(u in vec_strategy(), extra in 0usize..8) {
        let grid = 4 * N + extra;
        let back = analyze(&synthesize(&u, grid).unwrap(), N).unwrap();
        prop_assert!(back.max_abs_diff(&u) < 1e-13);
    }

    #[test]
    fn drift_matches_oracle(q in cov_strategy()) {
        let basis = canonical_basis(N).unwrap();
        let d = drift_d(&q, &basis).unwrap();
        let o = sum_xi_oracle(&q, &basis).unwrap();
        prop_assert!((&d.to_operator() + &o).max_abs() < 1e-12);
        prop_assert!(d.symmetry_residual() < 1e-14);
    }

    #[test]
    fn diffeo_inverse_round_trips(a in -0.2f64..0.2, b in -0.2f64..0.2, c in -0.1f64..0.1, s in -4.0f64..4.0, t in -7.0f64..7.0) {
        let g = Diffeo::with_shift(s, vec![a, c], vec![b]).unwrap();
        let x = g.inverse(t).unwrap();
        prop_assert!((g.eval(x) - t).abs() < 1e-12);
    }
}

#[test]
fn sp_dimension_up_to_sixteen() {
    for n in 1..=16 {
        assert_eq!(canonical_basis(n).unwrap().len(), n * (2 * n + 1));
    }
    let b = canonical_basis(8).unwrap();
    assert!(b.gram_residual() < 1e-12);
    for xi in b.iter() {
        let m = xi.matrix();
        assert!((&m.sharp() + &m).max_abs() < 1e-15);
    }
    assert!(modes(2).eq([-2, -1, 1, 2]));
}
