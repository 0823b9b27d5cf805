use serde::Serialize;

use mixreg_core::kernels::{FractionalOrder, KernelSpec};
use mixreg_core::regularity::{dist, fit_blowup_exponent, full_report, NormParams, NormReport};
use mixreg_core::solver1d::{
    comparison_check, linear_growth_check, solve_direct, solve_fixed_point, Grid1D, LinearGrowth, Problem1D, Solution1D,
    SolverStats,
};

use super::{parse_order, positive};
use crate::config::{ExperimentConfig, GridChoice, Method, SolveConfig};
use crate::manifest::{num, Check, RunContext};
use crate::registry;
use crate::CliError;

pub const RESIDUAL_TOL: f64 = 1e-10;

pub struct Plan {
    pub order: FractionalOrder,
    pub problem: Problem1D,
    pub grid: Grid1D,
    pub refined: Option<Grid1D>,
    pub settings: SolveConfig,
    pub seed: u64,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct StatsRecord<'a> {
    s: String,
    kernel: &'a str,
    grid: &'a Grid1DSummary,
    direct: Option<&'a SolverStats>,
    fixed_point: Option<&'a SolverStats>,
    linear_growth: Option<LinearGrowth>,
    linear_growth_refined: Option<LinearGrowth>,
    norm_report: Option<&'a NormReport>,
}

#[derive(Serialize)]
struct Grid1DSummary {
    kind: GridChoice,
    nodes: usize,
    h_min: f64,
    h_max: f64,
}

fn make_grid(choice: GridChoice, n: usize, grading: f64) -> Result<Grid1D, CliError> {
    match choice {
        GridChoice::Uniform => Grid1D::uniform(n),
        GridChoice::Graded => Grid1D::graded(n, grading),
    }
    .map_err(|e| CliError::Config(format!("solve grid: {e}")))
}

pub fn prepare(config: &ExperimentConfig) -> Result<Plan, CliError> {
    let c = &config.solve;
    let mut notes = Vec::new();
    let order = parse_order(&c.s, "solve", &mut notes)?;
    let kernel = KernelSpec::from_registry(&c.kernel, order).map_err(|e| CliError::Config(format!("solve.kernel: {e}")))?;
    let params = config.quadrature.params()?;
    let p = registry::coefficient(&c.p)?;
    let q = registry::coefficient(&c.q)?;
    let g = registry::coefficient(&c.g)?;
    let f = registry::rhs(&c.f, &kernel, &p, &q, &g, params)?;
    let problem = Problem1D::new(kernel, p, q, g, f, c.p_min).map_err(|e| CliError::Config(format!("solve: {e}")))?;
    let grid = make_grid(c.grid, c.n, c.grading)?;
    let refined = if c.growth_refinement { Some(make_grid(c.grid, 2 * c.n, c.grading)?) } else { None };
    if !(c.damping > 0.0 && c.damping <= 1.0) {
        return Err(CliError::Config(format!("solve.damping = {} not in (0, 1]", c.damping)));
    }
    if c.max_iter == 0 {
        return Err(CliError::Config("solve.max_iter must be positive".into()));
    }
    for (v, what) in [(c.beta, "solve.beta"), (c.gamma, "solve.gamma")] {
        if !(v > 0.0 && v < 1.0) {
            return Err(CliError::Config(format!("{what} = {v} not in (0, 1)")));
        }
    }
    positive(c.agreement_tol, "solve.agreement_tol")?;
    positive(c.growth_tol, "solve.growth_tol")?;
    positive(c.slope_tol, "solve.slope_tol")?;
    positive(c.manufactured_tol, "solve.manufactured_tol")?;
    if !(c.slope_window_top > 0.0 && c.slope_window_top <= 0.5) {
        return Err(CliError::Config("solve.slope_window_top must lie in (0, 1/2]".into()));
    }
    Ok(Plan {
        order,
        problem,
        grid,
        refined,
        settings: c.clone(),
        seed: config.seed,
        notes,
    })
}

/// (d, |u''|) on the left half with d ∈ [10 h_min, top].
pub fn blowup_pairs(sol: &Solution1D, h_min: f64, top: f64) -> Vec<(f64, f64)> {
    sol.nodes
        .iter()
        .zip(&sol.d2u)
        .filter(|(x, m)| **x <= 0.5 && **x >= 10.0 * h_min && **x <= top && m.abs() > 0.0)
        .map(|(x, m)| (*x, m.abs()))
        .collect()
}

impl Plan {
    pub fn list(&self) -> Vec<String> {
        let c = &self.settings;
        let mut v = vec![format!(
            "solve s={} kernel={} p={} q={} g={} f={} on a {:?} grid with {} interior nodes, method {:?}",
            self.order,
            self.problem.kernel.name,
            c.p,
            c.q,
            c.g,
            c.f,
            c.grid,
            self.grid.len(),
            c.method
        )];
        v.push(format!("direct residual <= {RESIDUAL_TOL:e}"));
        if c.method == Method::Both {
            v.push(format!("fixed point vs direct <= {:e}", c.agreement_tol));
        }
        if c.comparison_trials > 0 {
            v.push(format!("{} seeded comparison trials (seed {})", c.comparison_trials, self.seed));
        }
        if let Some(r) = &self.refined {
            v.push(format!("linear growth ratio stable within {} at {} nodes", c.growth_tol, r.len()));
        }
        if let Some(e) = c.expected_slope {
            v.push(format!("|u''| slope over [10h, {}] = {e} +- {}", c.slope_window_top, c.slope_tol));
        }
        if c.f == "manufactured" {
            v.push(format!("manufactured error <= {:e}", c.manufactured_tol));
        }
        v.push(format!("norm report beta={} gamma={}", c.beta, c.gamma));
        v
    }

    fn primary_solve(&self, grid: &Grid1D) -> mixreg_core::error::Result<Solution1D> {
        match self.settings.method {
            Method::FixedPoint => solve_fixed_point(&self.problem, grid, self.settings.damping, self.settings.max_iter),
            _ => solve_direct(&self.problem, grid),
        }
    }

    pub fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        for n in &self.notes {
            ctx.note(n.clone());
        }
        let c = &self.settings;
        let direct = match c.method {
            Method::Direct | Method::Both => match solve_direct(&self.problem, &self.grid) {
                Ok(s) => Some(s),
                Err(e) => {
                    ctx.check(Check::failed("direct_solve", e.to_string()));
                    None
                }
            },
            Method::FixedPoint => None,
        };
        let fixed = match c.method {
            Method::FixedPoint | Method::Both => match solve_fixed_point(&self.problem, &self.grid, c.damping, c.max_iter) {
                Ok(s) => Some(s),
                Err(e) => {
                    ctx.check(Check::failed("fixed_point_solve", e.to_string()));
                    None
                }
            },
            Method::Direct => None,
        };
        if let Some(d) = &direct {
            ctx.check(Check::at_most(
                "direct_residual",
                d.stats.residual_norm,
                RESIDUAL_TOL,
                format!("max |Au - f|, condition estimate {:.3e}", d.stats.condition_estimate),
            ));
        }
        if let Some(fp) = &fixed {
            ctx.note(format!("fixed point converged in {} iterations (damping {})", fp.stats.iterations, c.damping));
        }
        if let (Some(d), Some(fp)) = (&direct, &fixed) {
            ctx.check(Check::at_most(
                "method_agreement",
                d.max_abs_diff(&fp.values),
                c.agreement_tol,
                "max |u_direct - u_fixed_point| over nodes",
            ));
        }
        let Some(sol) = direct.as_ref().or(fixed.as_ref()) else {
            return Ok(());
        };

        if c.comparison_trials > 0 {
            match comparison_check(&self.problem, &self.grid, c.comparison_trials, self.seed) {
                Ok(r) => ctx.check(Check::new(
                    "comparison",
                    r.all_nonnegative,
                    Some(r.min_over_trials),
                    Some(-mixreg_core::solver1d::NONNEGATIVE_TOL),
                    format!("min u over {} random non-negative f must be >= tol; {} violations", r.trials, r.violations.len()),
                )),
                Err(e) => ctx.check(Check::failed("comparison", e.to_string())),
            }
        }

        let f_at = |grid: &Grid1D| grid.nodes.iter().map(|x| (self.problem.f_fn)(*x)).collect::<Vec<f64>>();
        let growth = linear_growth_check(sol, &f_at(&self.grid));
        ctx.note(format!("||u_+||_C01 / ||f_+||_inf = {:.6}", growth.c01_norm_over_fplus));
        if growth.inconsistent {
            ctx.check(Check::failed("linear_growth", "u_+ > 0 with f_+ = 0"));
        }
        let mut refined_growth = None;
        if let Some(grid2) = &self.refined {
            match self.primary_solve(grid2) {
                Ok(sol2) => {
                    let g2 = linear_growth_check(&sol2, &f_at(grid2));
                    let rel = (growth.c01_norm_over_fplus - g2.c01_norm_over_fplus).abs() / g2.c01_norm_over_fplus.abs().max(f64::MIN_POSITIVE);
                    ctx.check(Check::at_most(
                        "linear_growth_refinement",
                        rel,
                        c.growth_tol,
                        format!(
                            "ratio {:.6} at {} nodes vs {:.6} at {} nodes",
                            growth.c01_norm_over_fplus,
                            self.grid.len(),
                            g2.c01_norm_over_fplus,
                            grid2.len()
                        ),
                    ));
                    refined_growth = Some(g2);
                }
                Err(e) => ctx.check(Check::failed("linear_growth_refinement", e.to_string())),
            }
        }

        let pairs = blowup_pairs(sol, self.grid.h_min, c.slope_window_top);
        let fit = fit_blowup_exponent(&pairs);
        match (&fit, c.expected_slope) {
            (Ok(f), Some(e)) => ctx.check(Check::at_most(
                "boundary_slope",
                (f.slope - e).abs(),
                c.slope_tol,
                format!(
                    "|u''| ~ d^{:.4} (r^2 {:.4}, {} points on [{:.2e}, {}]), expected {e}",
                    f.slope,
                    f.r_squared,
                    pairs.len(),
                    10.0 * self.grid.h_min,
                    c.slope_window_top
                ),
            )),
            (Err(err), Some(_)) => ctx.check(Check::failed("boundary_slope", err.to_string())),
            (Ok(f), None) => ctx.note(format!("|u''| ~ d^{:.4} (r^2 {:.4})", f.slope, f.r_squared)),
            (Err(err), None) => ctx.note(format!("no boundary slope: {err}")),
        }
        let rows = pairs.iter().map(|(d, m)| {
            let line = fit.as_ref().map(|f| (f.intercept + f.slope * d.ln()).exp()).unwrap_or(f64::NAN);
            vec![num(*d), num(*m), num(line)]
        });
        ctx.write_csv("blowup.csv", &["d", "abs_u_xx", "fitted"], rows)?;

        if c.f == "manufactured" {
            let exact: Vec<f64> = sol.nodes.iter().map(|x| x * (1.0 - x)).collect();
            ctx.check(Check::at_most(
                "manufactured_error",
                sol.max_abs_diff(&exact),
                c.manufactured_tol,
                "max |u_h - x(1 - x)| over nodes",
            ));
        }

        let report = sol
            .sampled()
            .and_then(|s| full_report(&s, &NormParams::new(c.beta, c.gamma)));
        let report = match report {
            Ok(r) => Some(r),
            Err(e) => {
                ctx.check(Check::failed("norm_report", e.to_string()));
                None
            }
        };

        let rows = sol
            .nodes
            .iter()
            .enumerate()
            .map(|(i, x)| vec![num(*x), num(sol.values[i]), num(sol.du[i]), num(sol.d2u[i]), num(dist(*x))]);
        ctx.write_csv("solution.csv", &["x", "u", "u_x", "u_xx", "d"], rows)?;
        let grid = Grid1DSummary {
            kind: c.grid,
            nodes: self.grid.len(),
            h_min: self.grid.h_min,
            h_max: self.grid.h_max,
        };
        ctx.write_json(
            "stats.json",
            &StatsRecord {
                s: self.order.to_string(),
                kernel: &self.problem.kernel.name,
                grid: &grid,
                direct: direct.as_ref().map(|d| &d.stats),
                fixed_point: fixed.as_ref().map(|d| &d.stats),
                linear_growth: Some(growth),
                linear_growth_refined: refined_growth,
                norm_report: report.as_ref(),
            },
        )
    }
}
