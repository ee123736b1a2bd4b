use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use roughflow::controlled::{integrand_germ, lift_composition, rough_integral};
use roughflow::fbm::{covariance, empirical_covariance, estimate_hurst, girsanov_weight, FbmConfig, FbmSampler, Sampler};
use roughflow::flow::{composition_defect, mollify, solve_flow, Drift};
use roughflow::io::{self, NormRecord};
use roughflow::localtime::{ibp_check, lambda_truncated, moment_experiment, running_max};
use roughflow::permanent::{
    bounds_check, brute_permanent, f_m_recursive, gamma_m, integral_estimate_check, p_m_expand, TridiagSpec,
};
use roughflow::rough::{dyadic_lags, holder_norm, remainder_profile};
use roughflow::stats::{loglog_slope, Estimate};
use roughflow::transport::{solve_transport, subsample, WeakSolver};
use roughflow::{chen_defect, geometric_lift, sewing_integrate, Smooth, SmoothFn, TimeGrid};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::RunReport;
use crate::CliError;

/// Relative tolerance on the duality identity.
const DUALITY_TOL: f64 = 1e-4;

/// Names accepted by `run`, in the order `all` executes them.
pub const SUBCOMMANDS: [&str; 11] = [
    "sample-fbm",
    "lift",
    "integrate",
    "flow",
    "inverse",
    "transport",
    "weak-residual",
    "ibp",
    "moments",
    "girsanov",
    "permanent",
];

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    report: RunReport,
}

impl Ctx<'_> {
    fn artifact(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        std::fs::create_dir_all(&self.cfg.out)?;
        let path: PathBuf = self.cfg.out.join(name);
        let f = File::create(&path)?;
        self.report.artifacts.push(path);
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let w = self.artifact(name)?;
        io::write_json(w, value)?;
        Ok(())
    }
}

fn driver(cfg: &ExperimentConfig, grid: &TimeGrid) -> Result<Vec<f64>, CliError> {
    let sampler = FbmSampler::new(FbmConfig::new(cfg.hurst, *grid, cfg.seed, cfg.sampler)?)?;
    Ok(sampler.sample(0).values)
}

/// Runs one named experiment.
pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let mut ctx = Ctx { cfg, report: RunReport::new(name, cfg) };
    match name {
        "sample-fbm" => sample_fbm(&mut ctx)?,
        "lift" => lift(&mut ctx)?,
        "integrate" => integrate(&mut ctx)?,
        "flow" => flow(&mut ctx)?,
        "inverse" => inverse(&mut ctx)?,
        "transport" => transport(&mut ctx)?,
        "weak-residual" => weak(&mut ctx)?,
        "ibp" => ibp(&mut ctx)?,
        "moments" => moments(&mut ctx)?,
        "girsanov" => girsanov(&mut ctx)?,
        "permanent" => permanent(&mut ctx)?,
        "all" => {
            for sub in SUBCOMMANDS {
                let r = run(sub, cfg)?;
                ctx.report.absorb(r);
            }
        }
        other => return Err(CliError::Usage(format!("unknown subcommand {other:?}"))),
    }
    ctx.report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(ctx.report)
}

fn sample_fbm(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let batch = FbmSampler::new(FbmConfig::new(cfg.hurst, grid, cfg.seed, cfg.sampler)?)?.sample_batch(cfg.n_paths);
    io::write_fbm(ctx.artifact("fbm.csv")?, &grid, &batch)?;
    let stride = (cfg.steps / 8).max(1);
    let idx: Vec<usize> = (1..=8).map(|k| (k * stride).min(cfg.steps)).collect();
    let mut worst = 0.0f64;
    for &a in &idx {
        for &b in &idx {
            let e = empirical_covariance(&batch, a, b);
            let target = covariance(grid.time(a), grid.time(b), cfg.hurst);
            worst = worst.max((e.mean - target).abs() / e.stderr);
        }
    }
    let lags = dyadic_lags(1, (cfg.steps / 16).max(1));
    let hs: Vec<f64> = batch.iter().take(20).map(|s| estimate_hurst(&s.values, &lags)).collect();
    let h = hs.iter().sum::<f64>() / hs.len() as f64;
    ctx.report.metric("covariance_max_z", worst);
    ctx.report.metric("hurst_estimate", h);
    ctx.report.check("covariance_within_4se", worst <= 4.0, format!("largest deviation {worst:.2} SE on an 8x8 sub-grid"));
    ctx.report.check("hurst_estimate", (h - cfg.hurst).abs() <= 0.1, format!("mean estimate {h:.3}"));
    Ok(())
}

fn lift(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let path = driver(cfg, &grid)?;
    let x = geometric_lift(&grid, &path, cfg.gamma)?;
    let defect = chen_defect(&x);
    let mut norms = Vec::new();
    for n in 1..=x.p() {
        let v = holder_norm(x.level(n), &grid, n as f64 * cfg.gamma)?;
        norms.push(NormRecord { name: format!("level{n}"), gamma: n as f64 * cfg.gamma, value: v });
    }
    // full triangular arrays grow quadratically; the artifact uses at most 64 steps
    let factor = (cfg.steps / 64).max(1);
    let coarse = grid.coarsen(factor)?;
    let small = geometric_lift(&coarse, &subsample(&path, factor), cfg.gamma)?;
    io::write_rough_path(ctx.artifact("lift.csv")?, &small)?;
    ctx.json("lift_norms.json", &norms)?;
    ctx.report.metric("chen_defect", defect);
    ctx.report.metric("p", x.p() as f64);
    ctx.report.check("chen_exact", defect <= 1e-12, format!("defect {defect:.2e}"));
    ctx.report.check("norms_finite", norms.iter().all(|n| n.value.is_finite()), "level-wise Hölder norms");
    Ok(())
}

fn integrate(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let path = driver(cfg, &grid)?;
    let x = Arc::new(geometric_lift(&grid, &path, cfg.gamma)?);
    let flow = solve_flow(&cfg.drift, &grid, &path, &[cfg.x0])?;
    let y = lift_composition(&SmoothFn::Sin, flow.trajectory(0), x)?;
    let integral = rough_integral(&y)?;
    let xi = integrand_germ(&y);
    let sewn = sewing_integrate(&xi)?;
    let lags = dyadic_lags(2, (cfg.steps / 32).max(4));
    let (h, r): (Vec<f64>, Vec<f64>) = remainder_profile(&xi, &sewn, &lags).into_iter().unzip();
    let slope = loglog_slope(&h, &r);
    let target = (y.p() + 1) as f64 * cfg.gamma - 0.1;
    io::write_controlled(ctx.artifact("controlled.csv")?, &y)?;
    ctx.report.metric("integral", integral.path[cfg.steps]);
    ctx.report.metric("sewing_constant", integral.constant);
    ctx.report.metric("remainder_slope", slope);
    ctx.report.check("delta_identity", integral.delta_defect <= 1e-10, format!("defect {:.2e}", integral.delta_defect));
    ctx.report.check("well_controlled", integral.warnings.is_empty(), integral.warnings.join("; "));
    ctx.report.check("remainder_rate", slope >= target, format!("slope {slope:.3}, need >= {target:.2}"));
    Ok(())
}

fn flow(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let path = driver(cfg, &grid)?;
    let nodes = cfg.nodes(41);
    let field = solve_flow(&cfg.drift, &grid, &path, &nodes)?;
    io::write_flow(ctx.artifact("flow.csv")?, &field)?;
    let fin = field.final_values();
    let ordered = fin.windows(2).all(|w| w[1] > w[0]);
    let excess = field.drift_bound_excess(cfg.drift.sup_norm());
    ctx.report.metric("drift_bound_excess", excess);
    ctx.report.check("order_preserving", ordered, "final positions increase with the starting point");
    ctx.report.check("drift_bound", excess <= 1e-9, format!("excess {excess:.2e}"));
    Ok(())
}

fn inverse(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let path = driver(cfg, &grid)?;
    let d = composition_defect(&cfg.drift, &grid, &path, &cfg.nodes(41))?;
    ctx.report.metric("composition_defect", d);
    ctx.report.check("composition_defect", d <= 5e-3, format!("max defect {d:.2e}"));
    Ok(())
}

fn transport(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let path = driver(cfg, &grid)?;
    let x = cfg.nodes(201);
    let sol = solve_transport(&cfg.u0, &cfg.drift, &grid, &path, &x, &[0, cfg.steps / 2, cfg.steps])?;
    io::write_transport(ctx.artifact("transport.csv")?, &sol)?;
    let (lo, hi) = sol.range();
    let (s0, s1) = cfg.u0.support;
    let probe: Vec<f64> = (0..=2000).map(|j| cfg.u0.u0.value(s0 - 1.0 + (s1 - s0 + 2.0) * j as f64 / 2000.0)).collect();
    let ulo = probe.iter().cloned().fold(f64::INFINITY, f64::min);
    let uhi = probe.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ctx.report.metric("u_min", lo);
    ctx.report.metric("u_max", hi);
    ctx.report.check(
        "maximum_principle",
        lo >= ulo - 1e-9 && hi <= uhi + 1e-9,
        format!("range [{lo:.4}, {hi:.4}] within [{ulo:.4}, {uhi:.4}]"),
    );
    Ok(())
}

#[derive(Serialize)]
struct ResidualRecord {
    seed: u64,
    path_id: u64,
    n: usize,
    #[serde(rename = "N")]
    steps: usize,
    eta: usize,
    residual: f64,
    terms: [f64; 4],
    duality_gap: f64,
}

fn weak(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let sampler = FbmSampler::new(FbmConfig::new(cfg.hurst, grid, cfg.seed, cfg.sampler)?)?;
    let drifts: Vec<(usize, Arc<dyn Drift>)> = if cfg.drift.is_smooth() {
        vec![(0, Arc::new(cfg.drift.clone()))]
    } else {
        cfg.levels
            .iter()
            .map(|&n| Ok((n, Arc::new(mollify(Arc::new(cfg.drift.clone()), n)?) as Arc<dyn Drift>)))
            .collect::<Result<_, CliError>>()?
    };
    let etas = cfg.eta_functions()?;
    let mut rows = Vec::new();
    for id in 0..cfg.weak_paths as u64 {
        let path = sampler.sample(id).values;
        for (n, d) in &drifts {
            let solver = WeakSolver::new(&cfg.u0, d.as_ref(), &grid, &path, cfg.gamma, cfg.domain)?;
            for (k, eta) in etas.iter().enumerate() {
                let r = solver.residual(eta, cfg.steps)?;
                rows.push(ResidualRecord {
                    seed: cfg.seed,
                    path_id: id,
                    n: *n,
                    steps: cfg.steps,
                    eta: k,
                    residual: r.residual,
                    terms: [r.t1, r.t2, r.t3, r.t4],
                    duality_gap: r.duality_gap,
                });
            }
        }
    }
    ctx.json("weak_residual.json", &rows)?;
    let mean = rows.iter().map(|r| r.residual).sum::<f64>() / rows.len() as f64;
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let gap = rows.iter().map(|r| r.duality_gap).fold(0.0, f64::max);
    ctx.report.metric("residual_mean", mean);
    ctx.report.metric("residual_max", worst);
    ctx.report.metric("duality_gap_max", gap);
    ctx.report.check("duality_identity", gap <= DUALITY_TOL, format!("largest relative gap {gap:.2e}"));
    ctx.report.check("residual_finite", worst.is_finite(), format!("mean {mean:.2e}, largest {worst:.2e}"));
    Ok(())
}

fn ibp(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let rep = ibp_check(&cfg.ibp_drift, cfg.hurst, &grid, cfg.n_paths, cfg.cutoff, cfg.ibp_window, cfg.y_nodes, cfg.seed)
        .map_err(|e| match e {
            roughflow::Error::Input(m) => CliError::Usage(format!("invalid config: {m}")),
            other => other.into(),
        })?;
    ctx.json("ibp.json", &rep.samples)?;
    ctx.report.metric("mean_relative_gap", rep.mean_relative_gap);
    ctx.report.check("ibp_gap", rep.mean_relative_gap <= 0.05, format!("mean relative gap {:.2e}", rep.mean_relative_gap));
    Ok(())
}

fn moments(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let rows = moment_experiment(
        &cfg.drift,
        cfg.hurst,
        &grid,
        0.0,
        cfg.domain,
        cfg.y_nodes,
        &[2, 4],
        cfg.n_paths,
        cfg.cutoff,
        cfg.seed,
    )?;
    let sampler = FbmSampler::new(FbmConfig::new(cfg.hurst, grid, cfg.seed, Sampler::Circulant)?)?;
    let y = cfg.nodes(cfg.y_nodes.min(401));
    let fields = (0..cfg.n_paths.min(5) as u64)
        .map(|id| Ok((id, lambda_truncated(&cfg.drift, &grid, &sampler.sample(id).values, cfg.steps, &y, cfg.cutoff)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let refs: Vec<(u64, &_)> = fields.iter().map(|(id, f)| (*id, f)).collect();
    io::write_lambda(ctx.artifact("lambda.csv")?, &refs)?;
    ctx.json("moments.json", &rows)?;
    for r in &rows {
        ctx.report.metric(&format!("fitted_c_m{}", r.m), r.fitted_c);
    }
    let finite = rows.iter().all(|r| r.pointwise.mean.is_finite() && r.integral.mean.is_finite() && r.fitted_c.is_finite());
    ctx.report.check("moments_finite", finite, "pointwise and integrated moments");
    let bstar = running_max(&sampler.sample(0).values)[cfg.steps];
    ctx.report.metric("running_max_path0", bstar);
    Ok(())
}

fn girsanov(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = cfg.grid();
    let sampler = FbmSampler::new(FbmConfig::new(cfg.hurst, grid, cfg.seed, Sampler::CovarianceFactor)?)?;
    let u: Vec<f64> = grid.times().iter().map(|t| 1.0 + t).collect();
    let shift = cfg.horizon + 0.5 * cfg.horizon * cfg.horizon;
    let vals = (0..cfg.n_paths as u64)
        .map(|id| {
            let s = sampler.sample(id);
            Ok(girsanov_weight(&sampler, &s, &u)?.weight() * s.values[cfg.steps])
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let e = Estimate::from_samples(&vals);
    let z = (e.mean + shift).abs() / e.stderr;
    ctx.report.metric("reweighted_mean", e.mean);
    ctx.report.metric("z", z);
    ctx.report.check("reweighted_mean_3se", z <= 3.0, format!("mean {:.4} vs {:.4}, {z:.2} SE", e.mean, -shift));
    Ok(())
}

#[derive(Serialize)]
struct EnvelopeRecord {
    m: usize,
    #[serde(rename = "H")]
    hurst: f64,
    lhs: f64,
    envelope: f64,
    #[serde(rename = "fitted_C")]
    fitted_c: f64,
}

fn permanent(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let mut worst = 0.0f64;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut uniform = || rng.random_range(0.01..1.0);
    for m in 1..=8 {
        for _ in 0..100 {
            let s: Vec<f64> = (0..m).map(|_| uniform()).scan(0.0, |a, g| { *a += g; Some(*a) }).collect();
            let spec = TridiagSpec::new(s, cfg.hurst)?;
            let f = f_m_recursive(&spec);
            let b = brute_permanent(&spec.matrix())?;
            worst = worst.max((f - b).abs() / b);
        }
    }
    let counts = (1..=12).map(|m| Ok(p_m_expand(m)?.raw_terms == gamma_m(m))).collect::<Result<Vec<bool>, CliError>>()?;
    let bounds = bounds_check(1..=12)?;
    io::write_polynomial(ctx.artifact("permanent_p6.csv")?, &p_m_expand(6)?)?;
    ctx.report.metric("oracle_max_relative_gap", worst);
    ctx.report.check("oracle_equivalence", worst <= 1e-12, format!("max relative gap {worst:.1e}"));
    ctx.report.check("term_counts", counts.iter().all(|&c| c), "raw term counts follow the gamma recursion");
    ctx.report.check("coefficient_bounds", bounds.iter().all(|r| r.ok), "degrees and coefficients for m <= 12");
    if cfg.hurst < 1.0 / 3.0 {
        let rep = integral_estimate_check(&[3, 4, 5, 6], cfg.hurst, cfg.horizon, 50_000, cfg.seed)?;
        let records: Vec<EnvelopeRecord> = rep
            .rows
            .iter()
            .map(|&(m, lhs, envelope)| EnvelopeRecord { m, hurst: cfg.hurst, lhs, envelope, fitted_c: rep.fitted_c })
            .collect();
        ctx.json("permanent_envelope.json", &records)?;
        ctx.report.metric("fitted_c", rep.fitted_c);
        let detail: Vec<String> = rep.rows.iter().map(|(m, l, e)| format!("m={m}: {l:.3e} <= {e:.3e}")).collect();
        ctx.report.check("envelope_dominates", rep.dominated, detail.join(", "));
    }
    Ok(())
}
