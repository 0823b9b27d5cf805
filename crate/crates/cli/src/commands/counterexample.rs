use mixreg_core::counterexample::{
    assemble, build, leading_ratios, residual_check, sharpness_exponent, CounterexampleResult, NextTerm, SharpnessReport,
};
use mixreg_core::kernels::{FractionalOrder, Regime};
use mixreg_core::powerlog::DEFAULT_TRUNC_TOL;
use mixreg_core::pv_quadrature::QuadratureParams;
use mixreg_core::util::geometric_points;

use super::{parse_order, positive, window};
use crate::config::ExperimentConfig;
use crate::manifest::{num, Check, RunContext};
use crate::CliError;

pub struct Plan {
    pub order: FractionalOrder,
    pub k: i64,
    pub points: Vec<f64>,
    pub residual_tol: f64,
    pub sharpness_window: [f64; 2],
    pub slope_tol: f64,
    pub log_ratio_points: [f64; 2],
    pub log_ratio_tol: f64,
    pub leading_points: Vec<f64>,
    pub leading_tol: f64,
    pub params: QuadratureParams,
    notes: Vec<String>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Plan, CliError> {
    let c = &config.counterexample;
    let mut notes = Vec::new();
    let order = parse_order(&c.s, "counterexample", &mut notes)?;
    if c.k < 1 {
        return Err(CliError::Config(format!("counterexample.k = {} must be at least 1", c.k)));
    }
    let w = window(c.window, "counterexample.window")?;
    if w[0] < 1e-5 || w[1] > 0.45 {
        return Err(CliError::Config("counterexample.window must lie in [1e-5, 0.45]".into()));
    }
    if c.points < 2 {
        return Err(CliError::Config("counterexample.points must be at least 2".into()));
    }
    let sw = window(c.sharpness_window, "counterexample.sharpness_window")?;
    let lw = window(c.log_ratio_points, "counterexample.log_ratio_points")?;
    if sw[1] > 0.05 || lw[1] > 0.05 {
        return Err(CliError::Config("sharpness windows must lie below 0.05".into()));
    }
    let mut leading_points = c.leading_points.clone();
    if leading_points.len() < 2 || leading_points.iter().any(|x| !(*x > 0.0 && *x < 0.05)) {
        return Err(CliError::Config("counterexample.leading_points needs at least two points in (0, 0.05)".into()));
    }
    leading_points.sort_by(|a, b| b.total_cmp(a));
    Ok(Plan {
        order,
        k: c.k,
        points: geometric_points(w[0], w[1], c.points),
        residual_tol: positive(c.residual_tol, "counterexample.residual_tol")?,
        sharpness_window: sw,
        slope_tol: positive(c.slope_tol, "counterexample.slope_tol")?,
        log_ratio_points: lw,
        log_ratio_tol: positive(c.log_ratio_tol, "counterexample.log_ratio_tol")?,
        leading_points,
        leading_tol: positive(c.leading_tol, "counterexample.leading_tol")?,
        params: config.quadrature.params()?,
        notes,
    })
}

/// Relative errors of the leading ratio along decreasing x, and the
/// estimate compared against the target. At s = 1/2 the ratio converges
/// like A + B/log x, so the last two points are extrapolated in 1/log x.
pub fn leading_errors(result: &CounterexampleResult, xs: &[f64]) -> (Vec<(f64, f64)>, Vec<f64>, f64) {
    let ratios = leading_ratios(result, xs);
    let target = result.leading.next_coeff;
    let errors: Vec<f64> = ratios.iter().map(|(_, r)| ((r - target) / target).abs()).collect();
    let estimate = match result.leading.next {
        NextTerm::Power(_) => ratios[ratios.len() - 1].1,
        NextTerm::SquareLog => {
            let (x1, r1) = ratios[ratios.len() - 2];
            let (x2, r2) = ratios[ratios.len() - 1];
            let (l1, l2) = (x1.ln(), x2.ln());
            (r1 * l1 - r2 * l2) / (l1 - l2)
        }
    };
    (ratios, errors, ((estimate - target) / target).abs())
}

impl Plan {
    pub fn list(&self) -> Vec<String> {
        let regime = self.order.regime();
        let mut v = vec![
            format!("build s={} k={} ({} branch)", self.order, self.k, if self.order.ratio().is_some() { "rational" } else { "irrational" }),
            format!("residual on {} points in [{}, {}] <= {:e}", self.points.len(), self.points[0], self.points[self.points.len() - 1], self.residual_tol),
        ];
        v.push(match regime {
            Regime::Half => format!("log ratio u''/log x at {:?} within {}", self.log_ratio_points, self.log_ratio_tol),
            Regime::Below => format!("slope of |u'''| on {:?} = -2s +- {}", self.sharpness_window, self.slope_tol),
            Regime::Above => format!("slope of |u''| on {:?} = 1-2s +- {}", self.sharpness_window, self.slope_tol),
        });
        v.push(format!("leading ratio along {:?} within {}", self.leading_points, self.leading_tol));
        v
    }

    pub fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        for n in &self.notes {
            ctx.note(n.clone());
        }
        let construction = match build(&self.order, self.k, DEFAULT_TRUNC_TOL) {
            Ok(c) => c,
            Err(e) => {
                ctx.check(Check::failed("build", e.to_string()));
                return Ok(());
            }
        };
        let result = assemble(construction);
        let record = result.construction.record();
        ctx.note(format!("s={} k={} branch={} m={}", record.s, record.k_target, record.branch, record.m));
        ctx.check(Check::at_most(
            "recursion_defect",
            result.construction.recursion_defect(),
            1e-10,
            "cancellation of the non-top terms in the forcing",
        ));
        ctx.write_json("coefficients.json", &record)?;

        match residual_check(&result, &self.points, &self.params) {
            Ok(report) => {
                let skipped = report.per_point.iter().filter(|p| p.residual.is_none()).count();
                let mut check = Check::at_most(
                    "residual",
                    report.max_abs_residual,
                    self.residual_tol,
                    format!("max |-u'' + L u - f| over {} points", report.per_point.len()),
                );
                if skipped > 0 {
                    check.passed = false;
                    check.detail = format!("{skipped} points had no oracle value");
                }
                ctx.check(check);
                let rows = report.per_point.iter().map(|p| {
                    vec![
                        num(p.x),
                        num(p.u),
                        num(p.d2u),
                        num(p.f),
                        p.residual.map(num).unwrap_or_default(),
                        num(p.error_estimate),
                    ]
                });
                ctx.write_csv("residual.csv", &["x", "u", "u_xx", "f", "residual", "oracle_error"], rows)?;
            }
            Err(e) => ctx.check(Check::failed("residual", e.to_string())),
        }

        let s = self.order.value();
        let sharp = match self.order.regime() {
            Regime::Half => sharpness_exponent(&result, self.log_ratio_points, 2),
            Regime::Below => sharpness_exponent(&result, self.sharpness_window, 3),
            Regime::Above => sharpness_exponent(&result, self.sharpness_window, 2),
        };
        match sharp {
            Ok(SharpnessReport::Slope { slope, stderr, samples }) => {
                let (expected, what) = if self.order.regime() == Regime::Below { (-2.0 * s, "|u'''|") } else { (1.0 - 2.0 * s, "|u''|") };
                ctx.check(Check::at_most(
                    "sharpness_slope",
                    (slope - expected).abs(),
                    self.slope_tol,
                    format!("slope of {what} = {slope:.5} (stderr {stderr:.1e}, {samples} samples), expected {expected:.5}"),
                ));
            }
            Ok(SharpnessReport::LogRatio { x_lo, x_hi, ratio_lo, ratio_hi, rel_diff }) => {
                ctx.check(Check::at_most(
                    "sharpness_log_ratio",
                    rel_diff,
                    self.log_ratio_tol,
                    format!("u''/log x = {ratio_lo:.6} at {x_lo:e}, {ratio_hi:.6} at {x_hi:e}"),
                ));
            }
            Err(e) => ctx.check(Check::failed("sharpness", e.to_string())),
        }

        let (ratios, errors, final_err) = leading_errors(&result, &self.leading_points);
        let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
        let errs = errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ");
        let detail = match result.leading.next {
            NextTerm::Power(e) => format!("(u - x)/x^{e:.4} errors [{errs}] toward {:.8}", result.leading.next_coeff),
            NextTerm::SquareLog => format!(
                "(u - x)/(x^2 log x) errors [{errs}], 1/log x extrapolation toward {:.8}",
                result.leading.next_coeff
            ),
        };
        let mut check = Check::at_most("leading_coefficient", final_err, self.leading_tol, detail);
        if !monotone {
            check.passed = false;
            check.detail.push_str("; errors not decreasing");
        }
        ctx.check(check);
        let rows = ratios.iter().zip(&errors).map(|((x, r), e)| vec![num(*x), num(*r), num(result.leading.next_coeff), num(*e)]);
        ctx.write_csv("leading.csv", &["x", "ratio", "target", "rel_error"], rows)
    }
}
