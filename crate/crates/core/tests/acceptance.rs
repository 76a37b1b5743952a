//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the report is always printed; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use continuity_core::bounds::{
    bias_experiment, boundary_coefficient, certify, gain_experiment, Trajectory, Verdict,
};
use continuity_core::characteristics::{flow, Characteristics};
use continuity_core::continuity::{equilibrium_profile, solve_continuity, ContinuityProblem};
use continuity_core::expr::Expression;
use continuity_core::fields::{BoundarySignal, InitialProfile, VelocityField};
use continuity_core::manufacturing::{
    certify_closed_loop, envelope_check, simulate_closed_loop, terminal_time, ProductionScenario,
};
use continuity_core::norms::{sup_log_norm, NormOrder};
use continuity_core::oracle::upwind_solve;
use continuity_core::transport::solve_field;
use continuity_core::{Grid, ScalarProfile, ScalarSignal, SpaceTimeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_expression, RandomContinuity, RandomTransport};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const ORDERS: [NormOrder; 3] = [NormOrder::Finite(2.0), NormOrder::Finite(4.0), NormOrder::Infinity];

fn characteristic_exactness() -> Outcome {
    const TOL: f64 = 1e-10;
    let grid = Grid::new(100, 1e-3, 2.0).unwrap();
    let mut worst = 0.0f64;
    for vs in [0.5, 1.0, 2.0] {
        let v = VelocityField::new(SpaceTimeField::constant(vs), &grid).unwrap();
        for &(t0, x0) in &[(0.0, 0.0), (0.0, 0.3), (0.25, 0.0), (0.1, 0.7)] {
            let path = flow(&v, t0, x0, 2.0, grid.dt());
            for &(s, x) in &path.samples {
                worst = worst.max((x - (x0 + vs * s)).abs());
            }
        }
        let chars = Characteristics::new(&v, &grid);
        for k in (0..grid.rows()).step_by(100) {
            let t = grid.t(k);
            for x in grid.xs().step_by(2) {
                if x > chars.r0(t) {
                    worst = worst.max((chars.backtrace_x0(t, x).map_err(|e| e.to_string())? - (x - vs * t)).abs());
                } else {
                    worst = worst.max((chars.backtrace_t0(t, x).map_err(|e| e.to_string())? - (t - x / vs)).abs());
                }
            }
        }
    }
    ensure(worst <= TOL, || format!("max residual {worst:e} > {TOL:e}"))?;
    Ok(format!("max residual {worst:.1e} (tol {TOL:e})"))
}

fn oracle_equivalence() -> Outcome {
    const TOL: f64 = 2e-2;
    let discrepancy = |s: &RandomTransport, nx: usize| -> Result<f64, String> {
        // Courant number 0.5 against the scenario's sup v.
        let grid = Grid::new(nx, 0.5 / (nx as f64 * s.v.sup()), 1.0).unwrap();
        let p = s.problem(&grid);
        let upwind = upwind_solve(&p, &grid).map_err(|e| e.to_string())?;
        Ok(solve_field(&p, &grid).max_abs_diff(&upwind))
    };
    let (mut worst, mut lo, mut hi) = (0.0f64, f64::INFINITY, 0.0f64);
    for seed in 0..20 {
        let s = RandomTransport::generate(1000 + seed);
        let coarse = discrepancy(&s, 500)?;
        let fine = discrepancy(&s, 1000)?;
        let ratio = coarse / fine;
        ensure(fine <= TOL, || format!("seed {seed}: discrepancy {fine:e} at nx=1000"))?;
        ensure((1.5..=2.5).contains(&ratio), || format!("seed {seed}: refinement ratio {ratio:.3}"))?;
        worst = worst.max(fine);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok(format!("20 scenarios, max discrepancy {worst:.2e} at nx=1000, ratios in [{lo:.3}, {hi:.3}]"))
}

fn estimate_soundness() -> Outcome {
    let mus = [0.1, 1.0];
    let grid = Grid::new(400, 1.0 / 400.0, 2.0).unwrap();
    let coarse_grid = grid.coarsened().unwrap();
    let (mut passed, mut skipped, mut worst) = (0usize, 0usize, f64::INFINITY);
    let mut tally = |certs: Vec<continuity_core::bounds::BoundCertificate>, seed: u64| -> Result<(), String> {
        for c in certs {
            match c.verdict {
                Verdict::Pass => passed += 1,
                Verdict::NotApplicable => skipped += 1,
                Verdict::Fail => {
                    return Err(format!(
                        "seed {seed}: {} p={} mu={} worst margin {:?}",
                        c.estimate.label(),
                        c.order,
                        c.mu,
                        c.worst_margin()
                    ))
                }
            }
            if let Some(m) = c.worst_margin() {
                worst = worst.min(m);
            }
        }
        Ok(())
    };
    for seed in 0..100u64 {
        let s = RandomContinuity::generate(2000 + seed);
        let p = s.problem(&grid);
        let rho = solve_continuity(&p, &grid);
        let rho_coarse = solve_continuity(&s.problem(&coarse_grid), &coarse_grid);
        let traj = Trajectory::continuity(&p, &rho, Some(&rho_coarse));
        tally(certify(&traj, &ORDERS, &mus).map_err(|e| e.to_string())?, seed)?;

        let s = RandomTransport::generate(3000 + seed);
        let p = s.problem(&grid);
        let w = solve_field(&p, &grid);
        let w_coarse = solve_field(&s.problem(&coarse_grid), &coarse_grid);
        let traj = Trajectory::transport(&p, &w, Some(&w_coarse));
        tally(certify(&traj, &ORDERS, &mus).map_err(|e| e.to_string())?, seed)?;
    }
    Ok(format!(
        "{passed} certificates passed, {skipped} not applicable, worst margin {worst:.3e}"
    ))
}

fn finite_time_stability() -> Outcome {
    const TOL: f64 = 1e-6;
    let grid = Grid::new(200, 0.005, 2.0).unwrap();
    // ρ0(0) = 1 and ρ0′(0) = 0 make each profile compatible with b ≡ 0, v ≡ 1.
    let profiles = [
        "1 + 0.3*x^2",
        "exp(0.5*x^2*sin(3*x))",
        "2 - cos(2*x)",
        "1 + x^2*(1 - x)",
        "exp(-0.4*x^3)",
    ];
    let mut worst = 0.0f64;
    for src in profiles {
        let p = ContinuityProblem::new(
            1.0,
            InitialProfile::density(ScalarProfile::parse(src).unwrap(), &grid).unwrap(),
            BoundarySignal::new(ScalarSignal::zero(), &grid).unwrap(),
            VelocityField::new(SpaceTimeField::constant(1.0), &grid).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let rho = solve_continuity(&p, &grid);
        for k in 0..grid.rows() {
            if grid.t(k) >= 1.0 + 2.0 * grid.dt() - 1e-12 {
                let n = sup_log_norm(rho.row(k), 1.0).map_err(|e| e.to_string())?;
                ensure(n <= TOL, || format!("{src}: sup log norm {n:e} at t={}", grid.t(k)))?;
                worst = worst.max(n);
            }
        }
    }
    Ok(format!("5 profiles, max sup log norm after 1+2dt: {worst:.1e}"))
}

fn gain_optimality() -> Outcome {
    let grid = Grid::new(200, 0.005, 1.5).unwrap();
    for order in ORDERS {
        let c = boundary_coefficient(order, 1e-4, 0.0, 1.0);
        ensure((1.0..=1.001).contains(&c), || format!("coefficient {c} for p={order}"))?;
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for c in [0.1, 0.5] {
        let p = ContinuityProblem::new(
            1.0,
            InitialProfile::density(ScalarProfile::constant(libm::exp(c)), &grid).unwrap(),
            BoundarySignal::new(ScalarSignal::constant(c), &grid).unwrap(),
            VelocityField::new(SpaceTimeField::constant(1.0), &grid).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let rho = solve_continuity(&p, &grid);
        for k in 0..grid.rows() {
            let n = sup_log_norm(rho.row(k), 1.0).map_err(|e| e.to_string())?;
            ensure((n - c).abs() <= 1e-12, || format!("LHS {n} differs from |c| = {c}"))?;
        }
        for row in gain_experiment(1.0, c, 1.0, &ORDERS, &[1e-4], &grid).map_err(|e| e.to_string())? {
            ensure((1.0..=1.01).contains(&row.ratio), || {
                format!("c={c} p={}: RHS/LHS = {}", row.order, row.ratio)
            })?;
            lo = lo.min(row.ratio);
            hi = hi.max(row.ratio);
        }
    }
    Ok(format!("RHS/LHS in [{lo:.6}, {hi:.6}]"))
}

fn bias_ordering() -> Outcome {
    let grid = Grid::new(200, 0.005, 2.5).unwrap();
    let mut gap = f64::INFINITY;
    for theta in [0.25, 0.5, 0.75] {
        for p in [2.0, 4.0] {
            let r = bias_experiment(theta, p, &grid).map_err(|e| e.to_string())?;
            ensure(r.gamma2 > r.gamma1, || format!("theta={theta} p={p}: gamma2 {} <= gamma1 {}", r.gamma2, r.gamma1))?;
            let err = r.gamma1_error.max(r.gamma2_error);
            ensure(err <= 1e-6, || format!("theta={theta} p={p}: Richardson check {err:e}"))?;
            gap = gap.min(r.gamma2 - r.gamma1);
        }
    }
    Ok(format!("6 cases, smallest gamma2 - gamma1 = {gap:.4}"))
}

fn equilibrium_shaping() -> Outcome {
    const TOL: f64 = 1e-6;
    let grid = Grid::new(200, 0.005, 2.5).unwrap();
    let v = VelocityField::new(SpaceTimeField::parse("1 + x").unwrap(), &grid).unwrap();
    let target = equilibrium_profile(1.0, 0.0, &v).map_err(|e| e.to_string())?;
    // The x² perturbation leaves ρ0(0) and ρ0′(0) of the equilibrium intact.
    let p = ContinuityProblem::new(
        1.0,
        InitialProfile::density(ScalarProfile::parse("1/(1+x) + 0.3*x^2*(1 - x)").unwrap(), &grid).unwrap(),
        BoundarySignal::new(ScalarSignal::zero(), &grid).unwrap(),
        v,
    )
    .map_err(|e| e.to_string())?;
    let rho = solve_continuity(&p, &grid);
    let mut worst = 0.0f64;
    for k in 0..grid.rows() {
        if grid.t(k) >= 1.0 + 2.0 * grid.dt() - 1e-12 {
            for (j, x) in grid.xs().enumerate() {
                worst = worst.max((rho.value(k, j) - target.eval(x)).abs());
            }
        }
    }
    ensure(worst <= TOL, || format!("distance {worst:e}"))?;
    Ok(format!("sup distance after 1+2dt: {worst:.1e}"))
}

fn manufacturing_fixed_point() -> Outcome {
    let grid = Grid::new(200, 0.005, 3.0).unwrap();
    let build = |grid: &Grid| {
        ProductionScenario::new(
            1.0,
            InitialProfile::density(ScalarProfile::constant(1.0), grid).unwrap(),
            BoundarySignal::new(ScalarSignal::zero(), grid).unwrap(),
            ScalarSignal::parse_in("1/(1+W)", "W").unwrap(),
            grid,
        )
    };
    let s = build(&grid).map_err(|e| e.to_string())?;
    let run = simulate_closed_loop(&s, &grid).map_err(|e| e.to_string())?;
    ensure(run.velocity.iter().all(|&v| (v - 0.5).abs() <= 1e-12), || "velocity differs from 0.5".into())?;
    for w in &run.windows {
        ensure(w.residual <= 1e-12 && w.iterations <= 3, || format!("window {:?}", w.window))?;
        ensure(w.contraction_bound < 1.0, || format!("contraction bound {}", w.contraction_bound))?;
        if let Some(o) = w.observed_contraction {
            ensure(o <= w.contraction_bound, || format!("observed contraction {o}"))?;
        }
    }
    let env = envelope_check(&s, &run);
    ensure(env.holds(), || format!("{} envelope violations", env.violations))?;
    let coarse_grid = grid.coarsened().unwrap();
    let coarse = simulate_closed_loop(&build(&coarse_grid).map_err(|e| e.to_string())?, &coarse_grid)
        .map_err(|e| e.to_string())?;
    let certs = certify_closed_loop(&s, &run, Some(&coarse), &ORDERS, &[0.1, 1.0]).map_err(|e| e.to_string())?;
    ensure(certs.iter().all(|c| c.verdict != Verdict::Fail), || "a closed-loop certificate failed".into())?;
    let r = terminal_time(&s);
    let mut worst = 0.0f64;
    for k in 0..grid.rows() {
        if grid.t(k) >= r + 2.0 * grid.dt() - 1e-12 {
            worst = worst.max(sup_log_norm(run.rho.row(k), 1.0).map_err(|e| e.to_string())?);
        }
    }
    ensure(worst <= 1e-6, || format!("sup log norm {worst:e} after r + 2dt"))?;
    let iterations = run.windows.iter().map(|w| w.iterations).max().unwrap_or(0);
    Ok(format!(
        "{} windows, <= {iterations} iterations each, r = {r}, {} certificates",
        run.windows.len(),
        certs.len()
    ))
}

fn terminal_time_formula() -> Outcome {
    let grid = Grid::new(100, 0.01, 1.0).unwrap();
    let s = ProductionScenario::new(
        1.0,
        InitialProfile::density(ScalarProfile::parse("1 + x").unwrap(), &grid).unwrap(),
        BoundarySignal::new(ScalarSignal::zero(), &grid).unwrap(),
        ScalarSignal::parse_in("1/(1+W)", "W").unwrap(),
        &grid,
    )
    .map_err(|e| e.to_string())?;
    let r = terminal_time(&s);
    ensure((r - 3.0).abs() <= 1e-9, || format!("r = {r}"))?;
    Ok(format!("r = {r}"))
}

fn expression_parser() -> Outcome {
    let eval = |src: &str| Expression::parse(src, &[]).unwrap().evaluate(&[]).unwrap();
    for (src, want) in [("2^3^2", 512.0), ("-2^2", -4.0), ("1-2-3", -4.0), ("exp(0)", 1.0)] {
        let got = eval(src);
        ensure(got == want, || format!("{src} = {got}, expected {want}"))?;
    }
    let v = Expression::parse("1 + (0.5 - 1)*x", &["x"]).map_err(|e| e.to_string())?;
    ensure(v.evaluate(&[("x", 1.0)]) == Ok(0.5), || "1 + (0.5-1)*x at x=1".into())?;
    let lam = Expression::parse("1/(1+W)", &["W"]).map_err(|e| e.to_string())?;
    ensure(lam.evaluate(&[("W", 2.0)]) == Ok(1.0 / 3.0), || "1/(1+W) at W=2".into())?;
    ensure(
        Expression::parse("0", &["t"]).map(|z| z.evaluate(&[("t", 1.0)]) == Ok(0.0)) == Ok(true),
        || "constant zero".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let vars = ["t", "x"];
    let mut compared = 0usize;
    for _ in 0..100 {
        let src = random_expression(&mut rng, &vars, 4);
        let e = Expression::parse(&src, &vars).map_err(|e| format!("{src}: {e}"))?;
        let printed = e.to_string();
        let back = Expression::parse(&printed, &vars).map_err(|e| format!("{printed}: {e}"))?;
        ensure(back.to_string() == printed, || format!("printing is not stable for {src}"))?;
        for _ in 0..100 {
            let point = [("t", rng.gen_range(-3.0..3.0)), ("x", rng.gen_range(-3.0..3.0))];
            match (e.evaluate(&point), back.evaluate(&point)) {
                (Ok(a), Ok(b)) => {
                    let same = a == b || (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12;
                    ensure(same, || format!("{src}: {a} vs {b} at {point:?}"))?;
                    compared += 1;
                }
                (Err(a), Err(b)) => ensure(a == b, || format!("{src}: errors {a} vs {b}"))?,
                (a, b) => return Err(format!("{src}: {a:?} vs {b:?} at {point:?}")),
            }
        }
    }
    Ok(format!("grammar vectors exact, 100 round-trips, {compared} finite comparisons"))
}

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, Option<f64>);

fn main() -> ExitCode {
    // (name, check, wall-clock budget in seconds)
    let criteria: [Criterion; 10] = [
        ("characteristic exactness", characteristic_exactness, Some(1.0)),
        ("oracle equivalence", oracle_equivalence, Some(60.0)),
        ("estimate soundness", estimate_soundness, Some(300.0)),
        ("finite-time stability", finite_time_stability, None),
        ("gain optimality", gain_optimality, None),
        ("bias ordering", bias_ordering, None),
        ("equilibrium shaping", equilibrium_shaping, None),
        ("manufacturing fixed point", manufacturing_fixed_point, None),
        ("terminal-time formula", terminal_time_formula, None),
        ("expression parser", expression_parser, None),
    ];
    // Criterion numbers given as arguments restrict the run.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    let mut ran = 0;
    let mut total = Duration::ZERO;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        total += elapsed;
        let secs = elapsed.as_secs_f64();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(limit)) if secs >= *limit => Err(format!("runtime {secs:.2} s exceeds the {limit} s budget")),
            (outcome, _) => outcome,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed in {:.1} s", ran - failures, total.as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
