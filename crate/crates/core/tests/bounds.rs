// SPDX-License-Identifier: Apache-2.0

use delta_interp_core::bounds::{
    erm_a_rhs, erm_b_identity, exact_error, exact_error_of_predictions, kl_binary, mle_rhs, pinsker_check,
    pseudo_confidence, pseudo_confidence_gap, random_instance, verify_bounds, DomainPoint, FiniteDomain,
    VerifyOptions,
};
use delta_interp_core::rng;
use delta_interp_core::Error;
use rand::Rng as _;

fn point(x: f64, px: f64, p0: f64) -> DomainPoint {
    DomainPoint {
        x: vec![x],
        px,
        cm: [p0, 1.0 - p0],
    }
}

fn two_points() -> FiniteDomain {
    FiniteDomain::new(vec![point(0.0, 0.25, 0.9), point(1.0, 0.75, 0.3)]).unwrap()
}

#[test]
fn exact_error_by_hand() {
    let d = two_points();
    // predict 0 then 1: 0.25 * 0.1 + 0.75 * 0.3
    let e = exact_error_of_predictions(&d, &[0, 1]).unwrap();
    assert!((e - 0.25).abs() < 1e-15);
    let e = exact_error_of_predictions(&d, &[1, 0]).unwrap();
    assert!((e - (0.25 * 0.9 + 0.75 * 0.7)).abs() < 1e-15);
    assert!(exact_error_of_predictions(&d, &[0]).is_err());
    assert!(exact_error_of_predictions(&d, &[0, 2]).is_err());
}

#[test]
fn rhs_by_hand() {
    let d = FiniteDomain::new(vec![point(0.0, 1.0, 0.8)]).unwrap();
    let r = [[0.2, 0.6]];
    let z: f64 = 0.4;
    let want = 0.8 * 0.2 + 0.2 * 0.6 + (-z).exp().ln_1p() + 2.0 * (-2.0 * z).exp();
    assert!((erm_a_rhs(&d, &r, 1.0).unwrap() - want).abs() < 1e-15);

    let q = [[0.7, 0.3]];
    let want = -0.8 * 0.7f64.ln() - 0.2 * 0.3f64.ln() + 2.0 * (-2.0 * (0.3f64.ln() - 0.7f64.ln()).abs()).exp();
    assert!((mle_rhs(&d, &q).unwrap() - want).abs() < 1e-15);
}

#[test]
fn single_point_domain_satisfies_bounds() {
    for p0 in [0.0, 0.3, 0.5, 1.0] {
        let d = FiniteDomain::new(vec![point(0.5, 1.0, p0)]).unwrap();
        for r in [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.4, 0.45]] {
            let pred = usize::from(r[1] < r[0]);
            let e = exact_error_of_predictions(&d, &[pred]).unwrap();
            for c in [0.5, 1.0, 2.0] {
                assert!(e * e <= erm_a_rhs(&d, &[r], c).unwrap() + 1e-12);
            }
            let (l, rhs) = erm_b_identity(&d, &[r]).unwrap();
            assert!((l - rhs).abs() <= 1e-15, "{l} vs {rhs}");
        }
    }
}

#[test]
fn invalid_inputs() {
    assert!(matches!(FiniteDomain::new(vec![]), Err(Error::InvalidDomain(_))));
    assert!(FiniteDomain::new(vec![point(0.0, 0.5, 0.5)]).is_err());
    assert!(FiniteDomain::new(vec![point(0.0, 1.0, 1.2)]).is_err());
    let d = two_points();
    assert!(erm_a_rhs(&d, &[[0.0, 1.5], [0.0, 0.0]], 1.0).is_err());
    assert!(erm_a_rhs(&d, &[[0.0, 0.5], [0.0, 0.0]], 0.0).is_err());
    assert!(matches!(
        mle_rhs(&d, &[[1.0, 0.0], [0.5, 0.5]]),
        Err(Error::InfiniteDivergence(_))
    ));
    assert!(matches!(kl_binary([0.5, 0.5], [1.0, 0.0]), Err(Error::InfiniteDivergence(_))));
}

#[test]
fn kl_known_values() {
    assert_eq!(kl_binary([0.3, 0.7], [0.3, 0.7]).unwrap(), 0.0);
    let kl = kl_binary([1.0, 0.0], [0.5, 0.5]).unwrap();
    assert!((kl - 2f64.ln()).abs() < 1e-15);
    let (tv, b) = pinsker_check([1.0, 0.0], [0.5, 0.5]).unwrap();
    assert!(tv <= b);
}

#[test]
fn pseudo_confidence_matches_closed_form() {
    let p = pseudo_confidence([0.2, 0.6], 2.0);
    let want = 1.0 / (1.0 + (-0.8f64).exp());
    assert!((p[0] - want).abs() < 1e-15);
    for i in 0..20 {
        let (d, r, _) = random_instance(3, i);
        for c in [0.5, 1.0, 2.0] {
            assert!(pseudo_confidence_gap(&d, &r, c).unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn exact_error_agrees_with_monte_carlo() {
    let (d, _, tm) = random_instance(11, 0);
    let e = exact_error(&d, &tm).unwrap();
    let mut r = rng::rng(5);
    let n = 200_000;
    let cum: Vec<f64> = d
        .points()
        .iter()
        .scan(0.0, |s, p| {
            *s += p.px;
            Some(*s)
        })
        .collect();
    let mut wrong = 0usize;
    for _ in 0..n {
        let u: f64 = r.random();
        let i = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
        let p = &d.points()[i];
        let y = usize::from(r.random::<f64>() >= p.cm[0]);
        wrong += usize::from(tm.predict_row(&p.x) != y);
    }
    let est = wrong as f64 / n as f64;
    let se = (e * (1.0 - e) / n as f64).sqrt();
    assert!((est - e).abs() <= 3.0 * se + 1e-12, "estimate {est}, exact {e}, se {se}");
}

#[test]
fn verification_passes_and_negative_control_fails() {
    let ok = verify_bounds(50, 1, VerifyOptions::default()).unwrap();
    assert!(ok.passed);
    assert_eq!(ok.violations, 0);
    assert_eq!(ok.identity_max_gap, 0.0);
    assert_eq!(ok.instances, 50);
    let bad = verify_bounds(
        50,
        1,
        VerifyOptions {
            rhs_scale: 0.01,
            ..VerifyOptions::default()
        },
    )
    .unwrap();
    assert!(!bad.passed);
    assert!(bad.violations > 0 && bad.max_violation > 0.0);
    assert!(verify_bounds(0, 1, VerifyOptions::default()).is_err());
}

#[test]
fn verification_is_deterministic() {
    let a = verify_bounds(30, 9, VerifyOptions::default()).unwrap();
    let b = verify_bounds(30, 9, VerifyOptions::default()).unwrap();
    assert_eq!(a, b);
}
