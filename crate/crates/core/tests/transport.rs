use proptest::prelude::*;
use roughflow::fbm::{FbmConfig, FbmSampler, Sampler};
use roughflow::flow::DriftSpec;
use roughflow::transport::{classical_residual, solve_transport, test_function_suite, subsample, weak_residual, InitialDatum, WeakSolver};
use roughflow::{SmoothFn, TimeGrid};

fn smooth_driver(grid: &TimeGrid) -> Vec<f64> {
    grid.times().iter().map(|t| 0.5 * (3.0 * t).sin()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_stay_in_the_range_of_the_datum(
        steps in prop::collection::vec(-0.2f64..0.2, 32),
        amp in 0.1f64..2.0,
        center in -1.0f64..1.0,
    ) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let mut driver = vec![0.0];
        for s in &steps {
            driver.push(driver.last().unwrap() + s);
        }
        let datum = InitialDatum::gaussian(center, 0.4);
        let x: Vec<f64> = (0..81).map(|j| -4.0 + 0.1 * j as f64).collect();
        let sol = solve_transport(&datum, &DriftSpec::Tanh { amp }, &grid, &driver, &x, &[0, 8, 16, 32]).unwrap();
        let (lo, hi) = sol.range();
        prop_assert!(lo >= 0.0 && hi <= 1.0 + 1e-15);
    }
}

#[test]
fn constant_data_are_stationary() {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let driver = smooth_driver(&grid);
    let datum = InitialDatum::constant(2.5);
    let drift = DriftSpec::Cos { amp: 1.0 };
    for eta in test_function_suite() {
        let r = weak_residual(&datum, &drift, &grid, &driver, 0.3, &eta, (-3.0, 3.0)).unwrap();
        assert!(r.residual <= 1e-10, "{r:?}");
    }
}

#[test]
fn classical_residual_vanishes_for_smooth_drivers() {
    let datum = InitialDatum::gaussian(0.0, 0.5);
    let drift = DriftSpec::Tanh { amp: 1.0 };
    let res: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&n| {
            let dx = 6.4 / n as f64;
            let x: Vec<f64> = (0..=n).map(|j| -3.2 + dx * j as f64).collect();
            let grid = TimeGrid::new(1.0, n).unwrap();
            classical_residual(&datum, &drift, &grid, &smooth_driver(&grid), &x, n / 2).unwrap()
        })
        .collect();
    assert!(res.windows(2).all(|w| (3.0..5.0).contains(&(w[0] / w[1]))), "{res:?}");
}

#[test]
fn weak_and_classical_solutions_agree() {
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let driver = smooth_driver(&grid);
    let datum = InitialDatum::gaussian(0.0, 0.5);
    let drift = DriftSpec::Tanh { amp: 1.0 };
    let solver = WeakSolver::new(&datum, &drift, &grid, &driver, 0.4, (-4.0, 4.0)).unwrap();
    for eta in test_function_suite() {
        let r = solver.residual(&eta, 512).unwrap();
        assert!(r.residual <= 1e-3, "{r:?}");
    }
}

#[test]
fn duality_identity_holds_on_rough_drivers() {
    let fine = TimeGrid::new(1.0, 2048).unwrap();
    let path = FbmSampler::new(FbmConfig::new(0.25, fine, 3, Sampler::Circulant).unwrap()).unwrap().sample(0).values;
    let datum = InitialDatum::gaussian(0.2, 0.4);
    let drift = DriftSpec::Cos { amp: 1.0 };
    let mut worst = Vec::new();
    for n in [512, 1024, 2048] {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let solver = WeakSolver::new(&datum, &drift, &grid, &subsample(&path, 2048 / n), 0.2, (-4.0, 4.0)).unwrap();
        let gap = test_function_suite()
            .into_iter()
            .chain([SmoothFn::bump(0.3, 0.5)])
            .map(|eta| solver.residual(&eta, n).unwrap().duality_gap)
            .fold(0.0, f64::max);
        worst.push(gap);
    }
    assert!(worst[0] <= 1e-4, "{worst:?}");
    assert!(worst.windows(2).all(|w| w[1] < w[0]), "{worst:?}");
}
