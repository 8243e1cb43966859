//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskeig::discretize::{assemble_operator, GridDomain, MarkovPolicy};
use riskeig::eigen::{
    expanding_domain_limit, hjb_policy_iteration, principal_eigenpair, Stability, DEFAULT_EIGEN_TOL, DEFAULT_EXPANDING_TOL,
    DEFAULT_POLICY_TOL,
};
use riskeig::exitrate::exit_rate_problem;
use riskeig::maxproblem::max_value_problem;
use riskeig::model::catalog::{CatalogModel, CostSpec, MODEL_NAMES};
use riskeig::model::{check_lyapunov_drift, Action, ActionSet, Atom, JumpKernel, ModelSpec, Sense};
use riskeig::simulate::{estimate_exit_survival, estimate_risk_value, simulate_paths, Control, SimConfig};
use riskeig::stats::{ks_critical_1pct, ks_exponential};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: riskeig::Error) -> String {
    format!("error: {e}")
}

fn lambda_fixed(model: &ModelSpec, grid: &GridDomain) -> Result<riskeig::EigenPair, String> {
    let op = assemble_operator(model, grid, &MarkovPolicy::constant(grid, 0), true).map_err(err)?;
    principal_eigenpair(&op, DEFAULT_EIGEN_TOL, 10_000).map_err(err)
}

/// Lyapunov certificate on `r_min < |x| < 40` with the compact set of radius `r_min`.
fn certify(cat: &CatalogModel, r_min: f64) -> Result<Stability, String> {
    let mut cat = cat.clone();
    cat.lyapunov.k_radius = Some(r_min);
    let model = cat.build().map_err(err)?;
    let lyap = cat.lyapunov().map_err(err)?;
    let samples = shell_samples(cat.dim, r_min, 40.0, 200, 17);
    let report = check_lyapunov_drift(&model, &lyap, &samples).map_err(err)?;
    Ok(Stability::Verified(report))
}

fn shell_samples(dim: usize, r_min: f64, r_max: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
            let r = rng.random_range(r_min * 1.0001..r_max);
            dir.iter().map(|v| v / norm * r).collect()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let model = CatalogModel::new("bm").build().map_err(err)?;
    let grid = GridDomain::new(&[(-1.0, 1.0)], &[400]).map_err(err)?;
    let pair = lambda_fixed(&model, &grid)?;
    let elapsed = start.elapsed().as_secs_f64();
    let exact = -PI * PI / 8.0;
    let gap = (pair.lambda - exact).abs();
    check(
        gap <= 5e-3 && elapsed < 5.0,
        format!("lambda_h = {:.8}, |lambda_h + pi^2/8| = {gap:.2e} (<= 5e-3), {elapsed:.2} s (< 5 s)", pair.lambda),
    )
}

/// Random single-action model with nonconstant drift, diffusion, jumps and cost.
fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> ModelSpec {
    let (p, q): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-2.0..0.5));
    let a0: f64 = rng.random_range(0.2..1.5);
    let (c0, c1, c2): (f64, f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.5..3.0));
    let atoms: Vec<Atom> = (0..rng.random_range(0..3))
        .map(|_| Atom { mark: (0..dim).map(|_| rng.random_range(-0.8..0.8)).collect(), weight: rng.random_range(0.1..1.5) })
        .collect();
    let mut b = ModelSpec::builder(dim)
        .drift(move |x, _, out| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = p + q * xi;
            }
        })
        .diffusion(move |x, out| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = a0 * (1.0 + 0.3 * xi.sin().powi(2));
            }
        })
        .cost(move |x, _| c0 + c1 * (c2 * x[0]).sin());
    if !atoms.is_empty() {
        b = b.kernel(JumpKernel::translation(atoms).unwrap());
    }
    b.build().unwrap()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_l, mut worst_psi) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let dim = rng.random_range(1..=2);
        let model = random_model(&mut rng, dim);
        let cells = if dim == 1 { 60 } else { 16 };
        let grid = GridDomain::new(&vec![(-1.5, 1.5); dim], &vec![cells; dim]).map_err(err)?;
        let k = rng.random_range(-5.0..5.0);
        let base = lambda_fixed(&model, &grid)?;
        let shifted = lambda_fixed(&model.shifted_cost(k), &grid)?;
        worst_l = worst_l.max((shifted.lambda - base.lambda - k).abs());
        let dpsi = base.psi.iter().zip(&shifted.psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_psi = worst_psi.max(dpsi);
    }
    check(
        worst_l <= 1e-9 && worst_psi <= 1e-8,
        format!("20 assemblies: max |dlambda - k| = {worst_l:.2e} (<= 1e-9), max |dpsi| = {worst_psi:.2e} (<= 1e-8)"),
    )
}

fn criterion_3() -> Outcome {
    let model = CatalogModel::new("bm").build().map_err(err)?;
    let inner = lambda_fixed(&model, &GridDomain::new(&[(-1.0, 1.0)], &[200]).map_err(err)?)?;
    let outer = lambda_fixed(&model, &GridDomain::new(&[(-2.0, 2.0)], &[400]).map_err(err)?)?;
    let margin = outer.lambda - inner.lambda;
    let mut detail =
        format!("nested intervals: lambda(-1,1) = {:.6}, lambda(-2,2) = {:.6}, margin {margin:.4} (> 1e-3)", inner.lambda, outer.lambda);
    let mut ok = margin > 1e-3;
    let radii = [1.0, 1.5, 2.0, 2.5, 3.0];
    for name in MODEL_NAMES {
        let cat = CatalogModel::new(name);
        let model = cat.build().map_err(err)?;
        let stability = if name == "bm" { Stability::Override } else { certify(&cat, 8.0)? };
        let report = expanding_domain_limit(&model, &radii, 10, DEFAULT_EXPANDING_TOL, &stability).map_err(err)?;
        let increasing = report.entries.windows(2).all(|w| w[1].lambda > w[0].lambda);
        ok &= increasing;
        detail.push_str(&format!("; {name}: {}", if increasing { "increasing" } else { "NOT increasing" }));
    }
    check(ok, detail)
}

fn criterion_4() -> Outcome {
    let base = CatalogModel::new("ou").build().map_err(err)?;
    let grid = GridDomain::new(&[(-2.0, 2.0)], &[80]).map_err(err)?;
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lambda_of = |values: Vec<f64>| -> Result<f64, String> {
        let g = grid.clone();
        let model = base.with_cost(move |x, _| values[g.nearest_node(x)]);
        Ok(lambda_fixed(&model, &grid)?.lambda)
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c2: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let theta: f64 = rng.random_range(0.0..1.0);
        let mix: Vec<f64> = c.iter().zip(&c2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        let gap = lambda_of(mix)? - (theta * lambda_of(c)? + (1.0 - theta) * lambda_of(c2)?);
        worst = worst.max(gap);
    }
    check(worst <= 1e-8, format!("50 triples: max lambda(mix) - mix(lambda) = {worst:.3e} (<= 1e-8)"))
}

/// Spectral abscissa of a dense matrix.
fn perron(n: usize, dense: &[f64]) -> f64 {
    DMatrix::from_row_slice(n, n, dense).complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let interior: usize = rng.random_range(3..=8);
        let half: f64 = rng.random_range(0.5..2.0);
        let grid = GridDomain::new(&[(-half, half)], &[interior + 1]).map_err(err)?;
        let n_actions: usize = rng.random_range(1..=3);
        // payload: drift offset, drift slope, cost level, cost amplitude
        let actions = ActionSet::new(
            (0..n_actions)
                .map(|i| {
                    let payload = vec![
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..1.0),
                        rng.random_range(1.0..2.0),
                        rng.random_range(-1.0..1.0),
                    ];
                    Action::new(format!("u{i}"), payload)
                })
                .collect(),
        )
        .map_err(err)?;
        let a0: f64 = rng.random_range(0.05..1.0);
        let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
        let mut builder = ModelSpec::builder(1)
            .actions(actions)
            .sense(sense)
            .constant_diffusion(a0)
            .drift(|x, z, out| out[0] = z[0] + z[1] * x[0])
            .cost(|x, z| z[2] + z[3] * (3.0 * x[0]).sin());
        if rng.random_bool(0.5) {
            let atoms = (0..rng.random_range(1..=2))
                .map(|_| Atom { mark: vec![rng.random_range(-1.0..1.0)], weight: rng.random_range(0.1..2.0) })
                .collect();
            builder = builder.kernel(JumpKernel::translation(atoms).map_err(err)?);
        }
        let model = builder.build().map_err(err)?;
        let solved = hjb_policy_iteration(&model, &grid, DEFAULT_POLICY_TOL).map_err(err)?.eigenpair.lambda;

        let nodes = grid.len();
        let total = n_actions.pow(nodes as u32);
        let mut best = match sense {
            Sense::Minimize => f64::INFINITY,
            Sense::Maximize => f64::NEG_INFINITY,
        };
        for code in 0..total {
            let mut assignment = vec![0; nodes];
            let mut rest = code;
            for slot in assignment.iter_mut() {
                *slot = rest % n_actions;
                rest /= n_actions;
            }
            let policy = MarkovPolicy::new(assignment, &grid, n_actions).map_err(err)?;
            let op = assemble_operator(&model, &grid, &policy, true).map_err(err)?;
            let l = perron(nodes, &op.to_dense());
            best = match sense {
                Sense::Minimize => best.min(l),
                Sense::Maximize => best.max(l),
            };
        }
        worst = worst.max((solved - best).abs());
    }
    check(worst <= 1e-10, format!("100 instances: max |lambda_PI - lambda_exhaustive| = {worst:.2e} (<= 1e-10)"))
}

fn criterion_6() -> Outcome {
    let cat = CatalogModel::new("ou").with_cost(CostSpec::Constant { value: 0.7 });
    let model = cat.build().map_err(err)?;
    let stability = certify(&cat, 8.0)?;
    let report = expanding_domain_limit(&model, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 10, DEFAULT_EXPANDING_TOL, &stability).map_err(err)?;
    let limit = report.lambda_star.unwrap_or(f64::NAN);
    let pde_gap = (limit - 0.7).abs();

    let cfg = SimConfig { dt: 1e-2, horizons: vec![1.0, 2.0, 4.0, 8.0], n_paths: 2000, master_seed: 6, x0: vec![0.0] };
    let mc = estimate_risk_value(&model, &Control::Constant(0), &cfg).map_err(err)?;
    let mc_gap = (mc.slope - 0.7).abs();
    check(
        report.converged && pde_gap <= 1e-2 && mc_gap <= 1e-12,
        format!(
            "expanding limit {limit:.6} (converged {}), |lambda* - 0.7| = {pde_gap:.2e} (<= 1e-2); MC slope {:.15}, |slope - 0.7| = {mc_gap:.1e} (<= 1e-12)",
            report.converged, mc.slope
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let model = CatalogModel::new("bm").build().map_err(err)?;
    let grid = GridDomain::new(&[(-1.0, 1.0)], &[400]).map_err(err)?;
    let theta = exit_rate_problem(&model, &grid, DEFAULT_POLICY_TOL).map_err(err)?.theta;
    let cfg = SimConfig { dt: 1e-3, horizons: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0], n_paths: 100_000, master_seed: 7, x0: vec![0.0] };
    let surv = estimate_exit_survival(&model, &Control::Constant(0), &[(-1.0, 1.0)], &cfg).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let rel = ((surv.slope - theta) / theta).abs();
    check(
        rel <= 0.10 && elapsed < 60.0,
        format!(
            "Theta = {theta:.5}, MC slope = {:.5} (CI {:.4}..{:.4}), rel err {:.3} (<= 0.10), {elapsed:.1} s (< 60 s)",
            surv.slope, surv.slope_ci.0, surv.slope_ci.1, rel
        ),
    )
}

fn criterion_8() -> Outcome {
    let cat = CatalogModel::new("ou-controlled").with_cost(CostSpec::Gaussian { height: 1.0, width: 1.0 });
    let model = cat.build().map_err(err)?;
    let stability = certify(&cat, 8.0)?;
    let report = expanding_domain_limit(&model, &[2.0, 3.0, 4.0, 5.0], 20, DEFAULT_EXPANDING_TOL, &stability).map_err(err)?;
    let lambda = report.entries.last().map(|e| e.lambda).unwrap_or(f64::NAN);
    let control = Control::Feedback { grid: report.grid.clone(), policy: report.solution.policy.clone() };
    let cfg = SimConfig { dt: 1e-2, horizons: vec![2.0, 4.0, 6.0, 8.0], n_paths: 20_000, master_seed: 8, x0: vec![0.0] };
    let mc = estimate_risk_value(&model, &control, &cfg).map_err(err)?;
    let rel = ((mc.slope - lambda) / lambda).abs();
    let ess = mc.per_horizon.last().map(|h| h.ess / mc.n_paths as f64).unwrap_or(0.0);
    check(
        report.converged && rel <= 0.15 && ess >= 0.05 && !mc.degenerate,
        format!(
            "lambda* = {lambda:.5} (converged {}), MC slope = {:.5}, rel err {rel:.3} (<= 0.15), ESS fraction at T = 8: {ess:.3} (>= 0.05)",
            report.converged, mc.slope
        ),
    )
}

fn criterion_9() -> Outcome {
    let radius = 6.0;
    let cat = |kappa: f64| {
        let mut c =
            CatalogModel::new("ex1.1").param("kappa", kappa).param("alpha", 2.0).param("a", 1.0).param("eta", 0.5).param("theta", 0.1);
        c.lyapunov.gamma = 0.5;
        c.lyapunov.k_radius = Some(radius);
        c
    };
    let samples = shell_samples(1, radius, 50.0, 200, 9);
    let run = |kappa: f64| -> Result<f64, String> {
        let c = cat(kappa);
        let report = check_lyapunov_drift(&c.build().map_err(err)?, &c.lyapunov().map_err(err)?, &samples).map_err(err)?;
        Ok(report.max_violation)
    };
    let stable = run(1.0)?;
    let flipped = run(-1.0)?;
    check(
        stable <= 0.0 && flipped > 0.0,
        format!("200 samples with |x| > {radius}: max violation {stable:.4e} (<= 0); flipped drift {flipped:.4e} (> 0)"),
    )
}

fn criterion_10() -> Outcome {
    let rate = 2.0;
    let model = CatalogModel::new("ex1.1").param("jump_rate", rate).build().map_err(err)?;
    let horizon = 10.0;
    let cfg = SimConfig { dt: 0.05, horizons: vec![horizon], n_paths: 10_000, master_seed: 10, x0: vec![0.0] };
    let paths = simulate_paths(&model, &Control::Constant(0), &cfg).map_err(err)?;
    let counts: Vec<f64> = paths.iter().map(|p| p.jump_epochs.len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let sigma = (rate * horizon / counts.len() as f64).sqrt();
    let z = (mean - rate * horizon) / sigma;
    // first epochs are exact Exp(rate) draws up to a censoring probability of e^{-20}
    let first: Vec<f64> = paths.iter().filter_map(|p| p.jump_epochs.first().copied()).collect();
    let ks = ks_exponential(&first, rate);
    let crit = ks_critical_1pct(first.len());

    let small = SimConfig { n_paths: 64, ..cfg.clone() };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let paths = simulate_paths(&model, &Control::Constant(0), &small).unwrap();
            let risk = estimate_risk_value(&model.shifted_cost(0.3), &Control::Constant(0), &small).unwrap();
            (paths, risk.slope.to_bits(), risk.slope_ci.0.to_bits())
        })
    };
    let one = run_with(1);
    let identical = [2, 4, 7].iter().all(|&t| run_with(t) == one);
    check(
        z.abs() <= 3.0 && ks < crit && identical,
        format!("mean jumps {mean:.4} vs {:.1} (z = {z:.2}, |z| <= 3); KS {ks:.4} < {crit:.4}; bit-identical across 1/2/4/7 threads: {identical}", rate * horizon),
    )
}

fn criterion_11() -> Outcome {
    let radii = [1.0, 2.0, 3.0, 4.0, 5.0];
    let flat = CatalogModel::new("ou").with_cost(CostSpec::Constant { value: 0.4 }).build().map_err(err)?;
    let flat = max_value_problem(&flat, &radii, 10, DEFAULT_EXPANDING_TOL).map_err(err)?;
    let bump = CatalogModel::new("ou").with_cost(CostSpec::Gaussian { height: 1.0, width: 1.0 }).build().map_err(err)?;
    let bump = max_value_problem(&bump, &radii, 10, DEFAULT_EXPANDING_TOL).map_err(err)?;
    let rho = bump.rho_star();
    let increasing = bump.entries.windows(2).all(|w| w[1].lambda > w[0].lambda);
    check(
        !flat.hypothesis_ok && flat.margin.abs() <= DEFAULT_EXPANDING_TOL && bump.hypothesis_ok && rho > 0.0 && rho < 1.0 && increasing,
        format!(
            "constant reward: hypothesis_ok = {}, margin = {:.2e}; bump: hypothesis_ok = {}, rho* = {rho:.5}, margin = {:.4}, rho_n increasing: {increasing}",
            flat.hypothesis_ok, flat.margin, bump.hypothesis_ok, bump.margin
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("Dirichlet eigenvalue of the half-Laplacian", criterion_1),
        ("shift invariance", criterion_2),
        ("domain monotonicity", criterion_3),
        ("convexity in the potential", criterion_4),
        ("controlled eigenvalue vs exhaustive selectors", criterion_5),
        ("constant-cost value", criterion_6),
        ("exit-rate cross-validation", criterion_7),
        ("risk-value cross-validation", criterion_8),
        ("Lyapunov drift check", criterion_9),
        ("simulator statistical laws", criterion_10),
        ("near-monotone report", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS [{secs:.1}s] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL [{secs:.1}s] {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
