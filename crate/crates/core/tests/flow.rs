use proptest::prelude::*;
use roughflow::fbm::{FbmConfig, FbmSampler, Sampler};
use roughflow::flow::{composition_defect, flow_derivative, solve_flow, solve_inverse_flow, Drift, DriftSpec};
use roughflow::transport::subsample;
use roughflow::TimeGrid;

fn walk(steps: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    for s in steps {
        out.push(out.last().unwrap() + s);
    }
    out
}

fn drifts() -> impl Strategy<Value = DriftSpec> {
    prop_oneof![
        (0.1f64..2.0).prop_map(|amp| DriftSpec::Cos { amp }),
        (0.1f64..2.0).prop_map(|amp| DriftSpec::Tanh { amp }),
        (0.1f64..2.0).prop_map(|amp| DriftSpec::Sign { amp }),
        (-1.0f64..1.0, 0.2f64..2.0).prop_map(|(center, radius)| DriftSpec::Bump { center, radius, amp: 1.0 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zero_drift_is_exact(steps in prop::collection::vec(-1.0f64..1.0, 1..200), x in -5.0f64..5.0) {
        let driver = walk(&steps);
        let grid = TimeGrid::new(1.0, steps.len()).unwrap();
        let f = solve_flow(&DriftSpec::Zero, &grid, &driver, &[x]).unwrap();
        for (p, d) in f.phi[0].iter().zip(&driver) {
            prop_assert!((p - (x + d)).abs() <= 1e-12 * (1.0 + x.abs() + d.abs()));
        }
    }

    #[test]
    fn drift_record_is_bounded(drift in drifts(), steps in prop::collection::vec(-0.2f64..0.2, 64), x in -2.0f64..2.0) {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let f = solve_flow(&drift, &grid, &walk(&steps), &[x, x + 0.5]).unwrap();
        prop_assert!(f.drift_bound_excess(drift.sup_norm()) <= 0.0);
    }

    #[test]
    fn flows_preserve_order(drift in drifts(), steps in prop::collection::vec(-0.2f64..0.2, 64)) {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let nodes: Vec<f64> = (0..21).map(|j| -2.0 + 0.2 * j as f64).collect();
        let f = solve_flow(&drift, &grid, &walk(&steps), &nodes).unwrap();
        let fin = f.final_values();
        prop_assert!(fin.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn composition_defect_halves_with_the_mesh() {
    let fine = TimeGrid::new(1.0, 2048).unwrap();
    let path = FbmSampler::new(FbmConfig::new(0.1, fine, 12, Sampler::Circulant).unwrap()).unwrap().sample(0).values;
    let nodes: Vec<f64> = (0..21).map(|j| -1.0 + 0.1 * j as f64).collect();
    let defect = |n: usize| {
        let grid = TimeGrid::new(1.0, n).unwrap();
        composition_defect(&DriftSpec::Cos { amp: 1.0 }, &grid, &subsample(&path, 2048 / n), &nodes).unwrap()
    };
    let (a, b) = (defect(1024), defect(2048));
    let ratio = a / b;
    assert!((1.4..=2.6).contains(&ratio), "{a:e} {b:e}");
}

#[test]
fn inverse_flow_obeys_the_chain_rule() {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let driver = FbmSampler::new(FbmConfig::new(0.3, grid, 2, Sampler::Circulant).unwrap()).unwrap().sample(0).values;
    let drift = DriftSpec::Tanh { amp: 1.5 };
    let f = |x: f64| (2.0 * x).sin();
    let df = |x: f64| 2.0 * (2.0 * x).cos();
    let h = 1e-4;
    let n = grid.steps();
    for x in [-1.0, -0.3, 0.4, 1.2] {
        let inv = solve_inverse_flow(&drift, &grid, &driver, n, &[x - h, x, x + h]).unwrap().endpoint();
        let lhs = (f(inv[2]) - f(inv[0])) / (2.0 * h);
        let dphi = flow_derivative(&drift, &grid, &driver, inv[1]).unwrap()[n];
        let rhs = df(inv[1]) / dphi;
        assert!((lhs - rhs).abs() <= 1e-3, "x = {x}: {lhs} vs {rhs}");
    }
}
