use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use roughflow::permanent::*;

fn random_times(rng: &mut ChaCha12Rng, m: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
    s.sort_by(f64::total_cmp);
    // keep strictly increasing
    for j in 1..m {
        if s[j] <= s[j - 1] {
            s[j] = s[j - 1] + 1e-6;
        }
    }
    if s[0] <= 0.0 {
        s[0] = 1e-6;
    }
    s
}

#[test]
fn recursion_matches_ryser_for_random_tuples() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for m in 1..=8 {
        for _ in 0..100 {
            let spec = TridiagSpec::new(random_times(&mut rng, m), 0.25).unwrap();
            let f = f_m_recursive(&spec);
            let brute = brute_permanent(&spec.matrix()).unwrap();
            assert!((f - brute).abs() <= 1e-12 * brute.abs(), "m={m}: {f} vs {brute}");
        }
    }
}

#[test]
fn expanded_polynomial_evaluates_to_recursion() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for m in 1..=12 {
        let p = p_m_expand(m).unwrap();
        for _ in 0..20 {
            let spec = TridiagSpec::new(random_times(&mut rng, m), 0.2).unwrap();
            let f = f_m_recursive(&spec);
            let v = p.evaluate(&spec.variables());
            assert!((f - v).abs() <= 1e-12 * f, "m={m}: {f} vs {v}");
        }
    }
}

#[test]
fn term_counts_follow_gamma() {
    for m in 1..=12 {
        let p = p_m_expand(m).unwrap();
        assert_eq!(p.raw_terms, gamma_m(m), "m={m}");
        assert!(p.terms.len() as u64 <= gamma_m(m));
    }
}

#[test]
fn bounds_hold_up_to_twelve() {
    let rows = bounds_check(1..=12).unwrap();
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert!(r.ok, "{r:?}");
    }
}

#[test]
fn one_point_integral_against_quadrature() {
    let (h, t) = (0.2, 2.0);
    // substitute s = t u^{1/(1-2H)} to remove the endpoint singularity
    let q = 1.0 / (1.0 - 2.0 * h);
    let n = 20_000;
    let exact: f64 = (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            let s = t * u.powf(q);
            s.powf(-2.0 * h) * t * q * u.powf(q - 1.0) / n as f64
        })
        .sum();
    let mc = simplex_integral(1, h, t, 40_000, 9).unwrap().estimate.mean;
    assert!((mc - exact).abs() < 0.01 * exact, "{mc} vs {exact}");
}

#[test]
fn small_hurst_approaches_simplex_volume() {
    let ratio = |h: f64, m: usize| {
        let v = simplex_integral(m, h, 1.0, 50_000, 2).unwrap().estimate.mean;
        let p = p_m_expand(m).unwrap().evaluate(&vec![1.0; m]);
        v / (p.sqrt() / (1..=m).product::<usize>() as f64)
    };
    for m in 1..=4 {
        let coarse = ratio(0.01, m);
        let fine = ratio(0.001, m);
        assert!((coarse - 1.0).abs() < 0.25, "m={m}: {coarse}");
        assert!((fine - 1.0).abs() < (coarse - 1.0).abs(), "m={m}: {fine} vs {coarse}");
    }
}

#[test]
fn envelope_dominates_at_quarter_hurst() {
    let rep = integral_estimate_check(&[3, 4, 5, 6], 0.25, 1.0, 100_000, 7).unwrap();
    assert!(rep.dominated, "{rep:?}");
}

#[test]
fn integral_is_seed_deterministic() {
    let a = simplex_integral(3, 0.2, 1.0, 10_000, 4).unwrap();
    let b = simplex_integral(3, 0.2, 1.0, 10_000, 4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn integral_rejects_bad_parameters() {
    assert!(simplex_integral(2, 0.4, 1.0, 100, 0).is_err());
    assert!(simplex_integral(9, 0.2, 1.0, 100, 0).is_err());
    assert!(matches!(simplex_integral(2, 0.25, 1.0, 3, 0), Err(roughflow::Error::Resolution(_))));
}

proptest! {
    #[test]
    fn permanent_is_positive(gaps in prop::collection::vec(1e-3f64..2.0, 1..10), h in 0.01f64..0.5) {
        let s: Vec<f64> = gaps.iter().scan(0.0, |acc, g| { *acc += g; Some(*acc) }).collect();
        let spec = TridiagSpec::new(s, h).unwrap();
        prop_assert!(f_m_recursive(&spec) > 0.0);
    }

    #[test]
    fn recursion_equals_ryser(gaps in prop::collection::vec(1e-2f64..2.0, 1..9), h in 0.05f64..0.45) {
        let s: Vec<f64> = gaps.iter().scan(0.0, |acc, g| { *acc += g; Some(*acc) }).collect();
        let spec = TridiagSpec::new(s, h).unwrap();
        let f = f_m_recursive(&spec);
        let b = brute_permanent(&spec.matrix()).unwrap();
        prop_assert!((f - b).abs() <= 1e-12 * b);
    }
}
