use cwsoc::expansion::{apply_hn, apply_hn_exact, check_cancellation, hamiltonian_jet, ExactScale};
use cwsoc::jet::Jet2;
use cwsoc::model::{reduced_coefficients, FluctuationScale};
use cwsoc::poly::{from_f64, int, ratio, to_f64, Poly2, Rational};
use cwsoc::{ModelParams, ReducedState};
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=16).prop_map(|(p, q)| ratio(p, q))
}

fn univariate(max_degree: usize) -> impl Strategy<Value = Poly2> {
    prop::collection::vec(rational(), 1..=max_degree + 1).prop_map(|c| Poly2::univariate(&c))
}

#[test]
fn moderate_generator_is_rescaled_reduced_generator() {
    // X = b x, Y = b y, time sped up by b^2: drift picks up b^3, diffusion b^4.
    for &(sigma, n, b) in &[(1.0, 1000u64, 2.5), (0.7, 50_000, 4.0), (1.8, 10_000_000, 11.0)] {
        let p = ModelParams::new(sigma, n).unwrap();
        let scale = FluctuationScale::with_b(p, b).unwrap();
        for &(x, y) in &[(0.3, -0.2), (-1.7, 0.9), (2.0, 1.5), (0.0, -0.5)] {
            let m = scale.coefficients(ReducedState::moderate(x, y)).unwrap().as_diffusion();
            let r = reduced_coefficients(&p, ReducedState::raw(x / b, y / b)).unwrap();
            let rel = |a: f64, e: f64| (a - e).abs() / e.abs().max(1e-300);
            for i in 0..2 {
                let e = b * b * b * r.drift[i];
                assert!(rel(m.drift[i], e) < 1e-12 || (m.drift[i] - e).abs() < 1e-12, "drift {i}: {} vs {e}", m.drift[i]);
                for j in 0..2 {
                    let e = b.powi(4) * r.diffusion[i][j];
                    assert!(rel(m.diffusion[i][j], e) < 1e-12, "diffusion {i}{j}");
                }
            }
        }
    }
}

#[test]
fn hamiltonian_float_matches_exact() {
    let f = Poly2::univariate(&[int(0), ratio(1, 3), int(1), ratio(-1, 5), ratio(1, 7)]);
    let g = &f + &Poly2::monomial(ratio(2, 3), 1, 2);
    for &(sigma, n, b) in &[(1.0, 10_000u64, 3.0), (0.8, 1_000_000, 5.0)] {
        let p = ModelParams::new(sigma, n).unwrap();
        let scale = FluctuationScale::with_b(p, b).unwrap();
        let exact = ExactScale::new(from_f64(sigma * sigma), from_f64(b), n);
        for poly in [&f, &g] {
            for &(x, y) in &[(0.5, 0.25), (-1.25, -0.75), (1.5, 1.0)] {
                let fl = apply_hn(poly, &scale, x, y).unwrap();
                let ex = to_f64(&apply_hn_exact(poly, &exact, &from_f64(x), &from_f64(y)).unwrap());
                assert!((fl - ex).abs() <= 1e-10 * ex.abs().max(1.0), "{fl} vs {ex}");
            }
        }
    }
}

#[test]
fn hamiltonian_of_sum_of_coordinates() {
    // f = x + y: no second derivatives, unit gradient.
    let p = ModelParams::new(1.3, 20_000).unwrap();
    let scale = FluctuationScale::with_b(p, 3.5).unwrap();
    let s2 = 1.3f64 * 1.3;
    for &(x, y) in &[(0.4, -0.3), (-2.0, 1.0)] {
        let c = scale.coefficients(ReducedState::moderate(x, y)).unwrap();
        let expect = c.drift_x + c.drift_y + 0.5 + 2.0 * s2 + 2.0 * x / 3.5 + 2.0 * y / 3.5;
        let jet = Jet2::var_x(x) + Jet2::var_y(y);
        let got = hamiltonian_jet(&scale, x, y, &jet).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cancellation_holds_for_univariate(f in univariate(8), s in (1i64..=9, 1i64..=9)) {
        let sigma2 = ratio(s.0, s.1);
        prop_assert!(check_cancellation(&f, &sigma2).is_zero());
    }

    #[test]
    fn taylor_identity_is_exact(y in rational(), s in (1i64..=9, 1i64..=4), b in 2i64..=40, n in 10u64..1_000_000) {
        let sigma2 = ratio(s.0, s.1);
        let b = int(b);
        let scale = ExactScale::new(sigma2.clone(), b.clone(), n);
        prop_assume!(scale.h(&y).is_ok());
        let (h, eps) = scale.taylor_h(&y).unwrap();
        let one = int(1);
        let rebuilt = &one - &y / (&b * &sigma2) + &y * &y / (&b * &b * &sigma2 * &sigma2) + &eps / (&b * &b);
        prop_assert_eq!(h, rebuilt);
    }
}
