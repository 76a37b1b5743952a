//! The run modes. Every mode writes its files into the output directory
//! and reports whether its checks passed.

use std::fs;
use std::path::{Path, PathBuf};

use continuity_core::bounds::{bias_experiment, certify, gain_experiment, BoundCertificate, Trajectory, Verdict};
use continuity_core::continuity::{solve_continuity, ContinuityProblem};
use continuity_core::fields::{check_compatibility_continuity, check_compatibility_transport, COMPATIBILITY_TOL};
use continuity_core::manufacturing::{certify_closed_loop, simulate_closed_loop, ClosedLoopRun};
use continuity_core::norms::{lp_norm, NormOrder};
use continuity_core::oracle::upwind_solve;
use continuity_core::transport::{solve_field, TransportProblem};
use continuity_core::{Grid, SolutionField};

use crate::campaign;
use crate::error::{Error, Result};
use crate::report::{self, artifact, num, opt, CertificateReport, Compatibility, GridSummary};
use crate::scenario::{Problem, ProblemKind, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Solve on the grid and write the field.
    Simulate,
    /// Certify the requested estimates along the solution.
    Certify,
    /// Compare with the upwind scheme and refine the grid.
    OracleCompare,
    /// Boundary-gain and velocity-bias tables.
    Experiments,
    /// One verdict per estimate, order and `μ`.
    Sweep,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    /// Seed of a campaign. Required when the scenario sets `campaign`.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

/// Result of running one scenario.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub artifacts: Vec<PathBuf>,
    pub passed: bool,
    /// Steps skipped and why.
    pub notes: Vec<String>,
}

/// Runs `scenario`, or each scenario of its campaign.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<RunReport>> {
    fs::create_dir_all(&opts.out_dir).map_err(|source| Error::Io {
        action: "create",
        path: opts.out_dir.clone(),
        source,
    })?;
    match scenario.campaign {
        Some(count) => {
            let seed = opts
                .seed
                .ok_or_else(|| Error::Unsupported("campaign scenarios need --seed".into()))?;
            campaign::generate(scenario, seed, count)
                .iter()
                .map(|s| run_one(s, opts.mode, &opts.out_dir))
                .collect()
        }
        None => Ok(vec![run_one(scenario, opts.mode, &opts.out_dir)?]),
    }
}

/// A solved problem on one grid.
struct Solved {
    field: SolutionField,
    closed_loop: Option<ClosedLoopRun>,
}

fn solve(problem: &Problem, grid: &Grid) -> Result<Solved> {
    Ok(match problem {
        Problem::Continuity(p) => Solved {
            field: solve_continuity(p, grid),
            closed_loop: None,
        },
        Problem::Transport(p) => Solved {
            field: solve_field(p, grid),
            closed_loop: None,
        },
        Problem::Manufacturing(p) => {
            let run = simulate_closed_loop(p, grid)?;
            Solved {
                field: run.rho.clone(),
                closed_loop: Some(run),
            }
        }
    })
}

fn column(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Transport => "w",
        _ => "rho",
    }
}

fn run_one(scenario: &Scenario, mode: Mode, dir: &Path) -> Result<RunReport> {
    let grid = scenario.grid()?;
    let problem = scenario.build(&grid)?;
    let mut report = RunReport {
        scenario: scenario.name.clone(),
        artifacts: Vec::new(),
        passed: true,
        notes: Vec::new(),
    };
    match mode {
        Mode::Simulate => simulate(scenario, &problem, &grid, dir, &mut report)?,
        Mode::Certify => {
            let certs = certificates(scenario, &problem, &grid)?;
            let path = artifact(dir, &scenario.name, "cert.csv");
            report::write_certificate_cells(&path, &certs)?;
            report.artifacts.push(path);
            let summary = CertificateReport::new(
                &scenario.name,
                scenario.problem.label(),
                GridSummary {
                    nx: grid.nx(),
                    dt: grid.dt(),
                    horizon: grid.horizon(),
                },
                compatibility(&problem, &grid),
                &certs,
            );
            report.passed = summary.all_passed;
            let path = artifact(dir, &scenario.name, "cert.json");
            report::write_json(&path, &summary)?;
            report.artifacts.push(path);
        }
        Mode::Sweep => {
            let certs = certificates(scenario, &problem, &grid)?;
            report.passed = certs.iter().all(|c| c.verdict != Verdict::Fail);
            let path = artifact(dir, &scenario.name, "sweep.csv");
            let rows = certs.iter().map(|c| {
                let s = report::CertificateSummary::new(c);
                vec![s.estimate, s.p, num(s.mu), num(s.valid_fraction), opt(s.worst_margin), s.verdict]
            });
            report::write_csv(&path, &["estimate", "p", "mu", "valid_fraction", "worst_margin", "verdict"], rows)?;
            report.artifacts.push(path);
        }
        Mode::OracleCompare => oracle_compare(scenario, &problem, &grid, dir, &mut report)?,
        Mode::Experiments => experiments(scenario, &problem, &grid, dir, &mut report)?,
    }
    Ok(report)
}

fn simulate(scenario: &Scenario, problem: &Problem, grid: &Grid, dir: &Path, report: &mut RunReport) -> Result<()> {
    let solved = solve(problem, grid)?;
    let path = artifact(dir, &scenario.name, "field.csv");
    report::write_field(&path, &solved.field, column(scenario.problem))?;
    report.artifacts.push(path);
    if let Some(run) = &solved.closed_loop {
        let path = artifact(dir, &scenario.name, "loop.csv");
        report::write_loop(&path, run)?;
        report.artifacts.push(path);
    }
    Ok(())
}

/// Certificates on `grid`, with an `nx/2` companion run for the slack.
fn certificates(scenario: &Scenario, problem: &Problem, grid: &Grid) -> Result<Vec<BoundCertificate>> {
    let orders = scenario.certified_orders();
    if orders.is_empty() {
        return Err(Error::Unsupported(format!(
            "no requested estimate applies to a {} problem with the given p list",
            scenario.problem
        )));
    }
    let solved = solve(problem, grid)?;
    let coarse = match grid.coarsened() {
        Some(g) => Some(solve(&scenario.build(&g)?, &g)?),
        None => None,
    };
    let coarse_field = coarse.as_ref().map(|c| &c.field);
    Ok(match problem {
        Problem::Continuity(p) => certify(
            &Trajectory::continuity(p, &solved.field, coarse_field),
            &orders,
            &scenario.mus,
        )?,
        Problem::Transport(p) => certify(
            &Trajectory::transport(p, &solved.field, coarse_field),
            &orders,
            &scenario.mus,
        )?,
        Problem::Manufacturing(p) => {
            let run = solved.closed_loop.as_ref().expect("closed-loop solve");
            let coarse_run = coarse.as_ref().and_then(|c| c.closed_loop.as_ref());
            certify_closed_loop(p, run, coarse_run, &orders, &scenario.mus)?
        }
    })
}

fn compatibility(problem: &Problem, grid: &Grid) -> Compatibility {
    match problem {
        Problem::Continuity(p) => {
            let r = check_compatibility_continuity(p.rho_s, &p.rho0, &p.b, &p.v, COMPATIBILITY_TOL);
            Compatibility {
                value_residual: r.value_residual,
                slope_residual: r.slope_residual,
                tolerance: r.tolerance,
                passes: r.passes(),
                regularity: None,
            }
        }
        Problem::Transport(p) => {
            let r = check_compatibility_transport(&p.phi, &p.b, &p.v, &p.coeffs, COMPATIBILITY_TOL);
            Compatibility {
                value_residual: r.value_residual,
                slope_residual: r.slope_residual,
                tolerance: r.tolerance,
                passes: r.passes(),
                regularity: Some(format!("{:?}", r.regularity)),
            }
        }
        Problem::Manufacturing(p) => {
            let r = p.compatibility(grid);
            Compatibility {
                value_residual: r.value_residual,
                slope_residual: r.slope_residual,
                tolerance: r.tolerance,
                passes: r.passes(),
                regularity: None,
            }
        }
    }
}

/// The transport problem solved by the upwind scheme, and how to map its
/// state onto the characteristic solution's quantity.
fn oracle_problem(problem: &Problem) -> Result<(TransportProblem, Option<f64>)> {
    match problem {
        Problem::Transport(p) => Ok((p.clone(), None)),
        Problem::Continuity(p) => Ok((p.to_transport(), Some(p.rho_s))),
        Problem::Manufacturing(_) => Err(Error::Unsupported(
            "oracle-compare needs a continuity or transport problem".into(),
        )),
    }
}

/// Per-row sup and L² distances between the two solutions.
fn distances(a: &SolutionField, b: &SolutionField) -> Vec<(f64, f64)> {
    (0..a.grid().rows())
        .map(|k| {
            let diff: Vec<f64> = a.row(k).iter().zip(b.row(k)).map(|(x, y)| x - y).collect();
            let sup = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            (sup, lp_norm(&diff, 2.0))
        })
        .collect()
}

fn upwind(problem: &Problem, grid: &Grid) -> Result<SolutionField> {
    let (transport, rho_s) = oracle_problem(problem)?;
    let w = upwind_solve(&transport, grid)?;
    Ok(match rho_s {
        Some(rho_s) => w.map(continuity_core::transport::Quantity::Density { rho_s }, |w| rho_s * w.exp()),
        None => w,
    })
}

fn characteristic(problem: &Problem, grid: &Grid) -> SolutionField {
    match problem {
        Problem::Continuity(p) => solve_continuity(p, grid),
        Problem::Transport(p) => solve_field(p, grid),
        Problem::Manufacturing(_) => unreachable!("rejected by oracle_problem"),
    }
}

fn oracle_compare(scenario: &Scenario, problem: &Problem, grid: &Grid, dir: &Path, report: &mut RunReport) -> Result<()> {
    let oracle = upwind(problem, grid)?;
    let solution = characteristic(problem, grid);
    let path = artifact(dir, &scenario.name, "oracle.csv");
    let rows = distances(&solution, &oracle)
        .into_iter()
        .enumerate()
        .map(|(k, (sup, l2))| vec![num(grid.t(k)), num(sup), num(l2)]);
    report::write_csv(&path, &["t", "max_abs", "l2"], rows)?;
    report.artifacts.push(path);

    // Refinement keeps the Courant number fixed.
    let mut levels = Vec::new();
    if grid.nx() >= 2 {
        levels.push(grid.nx() / 2);
    }
    levels.extend([grid.nx(), 2 * grid.nx()]);
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for nx in levels {
        let g = Grid::new(nx, grid.dt() * grid.nx() as f64 / nx as f64, grid.horizon())?;
        let p = scenario.build(&g)?;
        let d = distances(&characteristic(&p, &g), &upwind(&p, &g)?);
        let sup = d.iter().fold(0.0f64, |m, r| m.max(r.0));
        let l2 = d.iter().fold(0.0f64, |m, r| m.max(r.1));
        let ratio = prev.map(|p| p / sup);
        rows.push(vec![nx.to_string(), num(g.dt()), num(sup), num(l2), opt(ratio)]);
        prev = Some(sup);
    }
    let path = artifact(dir, &scenario.name, "refinement.csv");
    report::write_csv(&path, &["nx", "dt", "max_abs", "l2_max", "ratio"], rows)?;
    report.artifacts.push(path);
    Ok(())
}

fn experiments(scenario: &Scenario, problem: &Problem, grid: &Grid, dir: &Path, report: &mut RunReport) -> Result<()> {
    let Problem::Continuity(p) = problem else {
        return Err(Error::Unsupported("experiments need a continuity problem".into()));
    };
    match gain_inputs(p) {
        Ok((vs, c)) => {
            let rows = gain_experiment(vs, c, p.rho_s, &scenario.orders, &scenario.mus, grid)?;
            // The coefficient bounds rhs/lhs from above and rhs ≥ lhs.
            report.passed &= rows
                .iter()
                .all(|r| r.ratio.is_nan() || (r.ratio >= 1.0 - 1e-9 && r.ratio <= r.coefficient * (1.0 + 1e-9)));
            let path = artifact(dir, &scenario.name, "gain.csv");
            let cells = rows.iter().map(|r| {
                vec![
                    r.order.to_string(),
                    num(r.mu),
                    num(r.c),
                    num(r.lhs),
                    opt((!r.rhs.is_nan()).then_some(r.rhs)),
                    num(r.coefficient),
                    opt((!r.ratio.is_nan()).then_some(r.ratio)),
                ]
            });
            report::write_csv(&path, &["p", "mu", "c", "lhs", "rhs", "coefficient", "ratio"], cells)?;
            report.artifacts.push(path);
        }
        Err(why) => report.notes.push(format!("gain table skipped: {why}")),
    }

    let mut rows = Vec::new();
    for &theta in &scenario.thetas {
        for order in &scenario.orders {
            let NormOrder::Finite(p) = *order else { continue };
            let b = bias_experiment(theta, p, grid)?;
            let ordered = b.gamma1 < b.gamma2;
            report.passed &= ordered;
            rows.push(vec![
                num(theta),
                num(p),
                num(b.gamma1),
                num(b.gamma2),
                num(b.gamma1_error),
                num(b.gamma2_error),
                num(b.measured1),
                num(b.measured2),
                ordered.to_string(),
            ]);
        }
    }
    if rows.is_empty() {
        report.notes.push("bias table skipped: no finite p requested".into());
    } else {
        let path = artifact(dir, &scenario.name, "bias.csv");
        let header = [
            "theta", "p", "gamma1", "gamma2", "gamma1_error", "gamma2_error", "measured1", "measured2", "ordered",
        ];
        report::write_csv(&path, &header, rows)?;
        report.artifacts.push(path);
    }
    Ok(())
}

/// Constant speed and nonzero constant boundary value of `p`.
fn gain_inputs(p: &ContinuityProblem) -> std::result::Result<(f64, f64), &'static str> {
    let vs = p.v.field().as_constant().ok_or("the velocity is not constant")?;
    let c = p.b.signal().as_constant().ok_or("the boundary value is not constant")?;
    if c == 0.0 {
        return Err("the boundary value is zero");
    }
    Ok((vs, c))
}
