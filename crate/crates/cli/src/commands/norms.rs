use std::sync::Arc;

use serde::Serialize;

use mixreg_core::regularity::{dist, NormReport};
use mixreg_core::solver1d::{solve_weighted_poisson_1d, Coef};
use mixreg_core::util::geometric_points;

use super::positive;
use crate::config::{ExperimentConfig, NormsConfig, PoissonRhs};
use crate::manifest::{num, Check, RunContext};
use crate::CliError;

pub struct Plan {
    pub settings: NormsConfig,
}

#[derive(Serialize)]
struct ReportEntry<'a> {
    rhs: &'a str,
    samples: usize,
    f_norm: f64,
    ratio: f64,
    report: &'a NormReport,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Plan, CliError> {
    let c = &config.norms;
    for (v, what) in [(c.gamma, "norms.gamma"), (c.beta, "norms.beta")] {
        if !(v > 0.0 && v < 1.0) {
            return Err(CliError::Config(format!("{what} = {v} not in (0, 1)")));
        }
    }
    positive(c.envelope_m, "norms.envelope_m")?;
    positive(c.stability_tol, "norms.stability_tol")?;
    positive(c.closed_form_tol, "norms.closed_form_tol")?;
    if c.resolutions.iter().any(|n| *n < 8) || c.resolutions[0] == c.resolutions[1] {
        return Err(CliError::Config("norms.resolutions must be two distinct sample counts of at least 8".into()));
    }
    if c.closed_form_points < 2 {
        return Err(CliError::Config("norms.closed_form_points must be at least 2".into()));
    }
    Ok(Plan { settings: c.clone() })
}

/// u = (x - x^{2-γ})/((1-γ)(2-γ)) solves -u'' = x^{-γ} with zero boundary values.
pub fn power_solution(gamma: f64, x: f64) -> (f64, f64) {
    let k = (1.0 - gamma) * (2.0 - gamma);
    ((x - x.powf(2.0 - gamma)) / k, (1.0 - (2.0 - gamma) * x.powf(1.0 - gamma)) / k)
}

fn rhs(kind: PoissonRhs, gamma: f64) -> Coef {
    match kind {
        PoissonRhs::Perturbed => Arc::new(move |x: f64| dist(x).powf(-gamma) * (1.0 + 0.3 * (7.0 * x).sin())),
        PoissonRhs::Power => Arc::new(move |x: f64| dist(x).powf(-gamma)),
    }
}

impl Plan {
    pub fn list(&self) -> Vec<String> {
        let c = &self.settings;
        vec![
            format!("closed form f = x^-{} on {} points within {:e}", c.gamma, c.closed_form_points, c.closed_form_tol),
            format!(
                "{:?} rhs: C2beta_gamma_star / Cbeta_gamma ratio stable within {} across {:?} samples",
                c.rhs, c.stability_tol, c.resolutions
            ),
        ]
    }

    pub fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let c = &self.settings;
        let gamma = c.gamma;
        let power: Coef = Arc::new(move |x: f64| x.powf(-gamma));
        let mut reports = Vec::new();
        match solve_weighted_poisson_1d(power, gamma, c.beta, c.envelope_m, c.resolutions[0]) {
            Ok(r) => {
                let mut xs = geometric_points(1e-6, 0.5, c.closed_form_points / 2);
                xs.extend(geometric_points(1e-6, 0.5, c.closed_form_points - c.closed_form_points / 2).iter().map(|t| 1.0 - t));
                let err = xs
                    .iter()
                    .map(|x| {
                        let (u, du) = power_solution(gamma, *x);
                        (r.solution.u(*x) - u).abs().max((r.solution.du(*x) - du).abs())
                    })
                    .fold(0.0f64, f64::max);
                ctx.check(Check::at_most("closed_form", err, c.closed_form_tol, "max |u - u_exact|, |u' - u'_exact|"));
                reports.push(("power_closed_form", r));
            }
            Err(e) => ctx.check(Check::failed("closed_form", e.to_string())),
        }

        let label = match c.rhs {
            PoissonRhs::Perturbed => "perturbed",
            PoissonRhs::Power => "power",
        };
        let mut ratios = Vec::new();
        for n in c.resolutions {
            match solve_weighted_poisson_1d(rhs(c.rhs, gamma), gamma, c.beta, c.envelope_m, n) {
                Ok(r) => {
                    ratios.push((n, r.ratio));
                    reports.push((label, r));
                }
                Err(e) => ctx.check(Check::failed(format!("ratio[n={n}]"), e.to_string())),
            }
        }
        if let [(n1, r1), (n2, r2)] = ratios[..] {
            ctx.check(Check::new(
                "ratio_finite",
                r1.is_finite() && r2.is_finite() && r1 > 0.0 && r2 > 0.0,
                Some(r2),
                None,
                "C2beta_gamma_star norm of u over Cbeta_gamma norm of f",
            ));
            ctx.check(Check::at_most(
                "ratio_stability",
                (r1 - r2).abs() / r2.abs(),
                c.stability_tol,
                format!("ratio {r1:.6} at {n1} samples vs {r2:.6} at {n2} samples"),
            ));
        }

        if let Some((_, r)) = reports.iter().filter(|(l, _)| *l == label).last() {
            let s = &r.samples;
            let f = rhs(c.rhs, gamma);
            let du = s.du.as_deref().unwrap_or_default();
            let d2u = s.d2u.as_deref().unwrap_or_default();
            let rows = (0..s.xs.len()).map(|i| {
                vec![
                    num(s.xs[i]),
                    num(s.d[i]),
                    num(s.values[i]),
                    du.get(i).copied().map(num).unwrap_or_default(),
                    d2u.get(i).copied().map(num).unwrap_or_default(),
                    num(f(s.xs[i])),
                ]
            });
            ctx.write_csv("weighted_poisson.csv", &["x", "d", "u", "u_x", "u_xx", "f"], rows)?;
        }
        let entries: Vec<ReportEntry> = reports
            .iter()
            .map(|(l, r)| ReportEntry {
                rhs: l,
                samples: r.samples.xs.len(),
                f_norm: r.f_norm,
                ratio: r.ratio,
                report: &r.norm_report,
            })
            .collect();
        ctx.write_json("norm_reports.json", &entries)
    }
}
