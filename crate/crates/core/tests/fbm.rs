use proptest::prelude::*;
use roughflow::fbm::{covariance, estimate_hurst, girsanov_weight, FbmConfig, FbmSampler, Sampler};
use roughflow::rough::dyadic_lags;
use roughflow::stats::Estimate;
use roughflow::TimeGrid;

#[test]
fn measured_holder_exponent_matches_hurst() {
    let grid = TimeGrid::new(1.0, 1 << 14).unwrap();
    let lags = dyadic_lags(1, 256);
    for hurst in [0.1, 0.2, 0.3] {
        let s = FbmSampler::new(FbmConfig::new(hurst, grid, 17, Sampler::Circulant).unwrap()).unwrap();
        let mean = (0..100).map(|id| estimate_hurst(&s.sample(id).values, &lags)).sum::<f64>() / 100.0;
        assert!((mean - hurst).abs() <= 0.05, "H = {hurst}: measured {mean}");
    }
}

fn weight_moments(amp: f64) -> (Estimate, f64, f64) {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let s = FbmSampler::new(FbmConfig::new(0.3, grid, 4, Sampler::CovarianceFactor).unwrap()).unwrap();
    let u = vec![amp; grid.len()];
    let w: Vec<f64> = (0..20_000).map(|id| girsanov_weight(&s, &s.sample(id), &u).unwrap().weight()).collect();
    let m2 = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
    let m4 = w.iter().map(|x| x.powi(4)).sum::<f64>() / w.len() as f64;
    (Estimate::from_samples(&w), m2, m4)
}

#[test]
fn weights_have_unit_mean_and_growing_moments() {
    let rows: Vec<_> = [0.5, 1.0, 2.0].iter().map(|&a| weight_moments(a)).collect();
    for (e, m2, m4) in &rows {
        assert!(e.within(1.0, 3.0), "mean {} ± {}", e.mean, e.stderr);
        assert!(m2.is_finite() && m4.is_finite());
    }
    assert!(rows.windows(2).all(|w| w[1].1 > w[0].1 && w[1].2 > w[0].2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn covariance_is_symmetric_and_bounded(t in 0.0f64..2.0, s in 0.0f64..2.0, hurst in 0.05f64..0.95) {
        let c = covariance(t, s, hurst);
        prop_assert!((c - covariance(s, t, hurst)).abs() <= 1e-15);
        prop_assert!(c * c <= covariance(t, t, hurst) * covariance(s, s, hurst) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn samplers_start_at_zero_and_repeat(seed in 0u64..1000, id in 0u64..100, hurst in 0.1f64..0.5) {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        for sampler in [Sampler::Circulant, Sampler::CovarianceFactor] {
            let s = FbmSampler::new(FbmConfig::new(hurst, grid, seed, sampler).unwrap()).unwrap();
            let a = s.sample(id);
            prop_assert_eq!(a.values[0], 0.0);
            prop_assert_eq!(&a.values, &s.sample(id).values);
        }
    }
}
