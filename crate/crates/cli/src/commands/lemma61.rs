use mixreg_core::kernels::{FractionalOrder, KernelSpec};
use mixreg_core::powerlog::{atom_function, expansion_eval, fractional_expansion, PowerLogAtom, DEFAULT_TRUNC_TOL};
use mixreg_core::pv_quadrature::{lk_apply_batch, QuadratureParams};
use mixreg_core::util::geometric_points;
use num_rational::Ratio;

use super::{parse_order, positive, window};
use crate::config::ExperimentConfig;
use crate::manifest::{num, Check, RunContext};
use crate::CliError;

pub struct Case {
    pub label: String,
    pub order: FractionalOrder,
    pub atom: PowerLogAtom,
}

pub struct Plan {
    pub cases: Vec<Case>,
    pub points: Vec<f64>,
    pub rel_tol: f64,
    pub params: QuadratureParams,
    notes: Vec<String>,
}

/// "num/den", an integer, or a finite decimal, as an exact fraction.
pub fn parse_ratio(text: &str) -> Option<Ratio<i64>> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let (n, d): (i64, i64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (d != 0).then(|| Ratio::new(n, d));
    }
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let digits: i64 = format!("{int}{frac}").parse().ok()?;
    Some(Ratio::new(digits, den))
}

pub fn prepare(config: &ExperimentConfig) -> Result<Plan, CliError> {
    let c = &config.verify_lemma61;
    let w = window(c.window, "verify_lemma61.window")?;
    if w[1] >= 0.5 {
        return Err(CliError::Config("verify_lemma61.window must stay below 1/2".into()));
    }
    if c.points < 2 {
        return Err(CliError::Config("verify_lemma61.points must be at least 2".into()));
    }
    let rel_tol = positive(c.rel_tol, "verify_lemma61.rel_tol")?;
    let mut notes = Vec::new();
    let mut cases = Vec::new();
    for s_text in &c.orders {
        let order = parse_order(s_text, "verify_lemma61", &mut notes)?;
        let mut atoms = Vec::new();
        for a in &c.atoms {
            let r = parse_ratio(&a.alpha).ok_or_else(|| CliError::Config(format!("cannot parse atom exponent '{}'", a.alpha)))?;
            let atom = PowerLogAtom::exact(r, a.j).map_err(|e| CliError::Config(format!("atom ({}, {}): {e}", a.alpha, a.j)))?;
            atoms.push(atom);
        }
        if c.include_step_atom {
            let atom = match order.ratio() {
                Some(sr) => PowerLogAtom::exact(Ratio::from_integer(3) - sr * 2, 0),
                None => PowerLogAtom::new(3.0 - 2.0 * order.value(), 0),
            }
            .map_err(|e| CliError::Config(e.to_string()))?;
            atoms.push(atom);
        }
        for atom in atoms {
            cases.push(Case {
                label: format!("s={order},alpha={},j={}", atom.alpha, atom.j),
                order,
                atom,
            });
        }
    }
    Ok(Plan {
        cases,
        points: geometric_points(w[0], w[1], c.points),
        rel_tol,
        params: config.quadrature.params()?,
        notes,
    })
}

impl Plan {
    pub fn list(&self) -> Vec<String> {
        self.cases
            .iter()
            .map(|c| format!("{} on {} points in [{}, {}]", c.label, self.points.len(), self.points[0], self.points[self.points.len() - 1]))
            .collect()
    }

    pub fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        for n in &self.notes {
            ctx.note(n.clone());
        }
        let mut rows = Vec::new();
        let mut records = Vec::new();
        for case in &self.cases {
            let exp = match fractional_expansion(&case.order, &case.atom, DEFAULT_TRUNC_TOL) {
                Ok(e) => e,
                Err(e) => {
                    ctx.check(Check::failed(format!("lemma61[{}]", case.label), e.to_string()));
                    continue;
                }
            };
            records.push(exp.record());
            let kernel = KernelSpec::fractional(case.order);
            let oracle = lk_apply_batch(&kernel, &atom_function(&case.atom), &self.points, &self.params);
            let mut worst = 0.0f64;
            let mut failures = 0;
            for (x, o) in self.points.iter().zip(oracle) {
                let e = expansion_eval(&exp, *x);
                match (e, o) {
                    (Ok(e), Ok(o)) => {
                        let metric = (e - o.value).abs() / (1.0 + o.value.abs());
                        worst = worst.max(metric);
                        rows.push(vec![
                            case.order.to_string(),
                            num(case.atom.alpha),
                            case.atom.j.to_string(),
                            num(*x),
                            num(e),
                            num(o.value),
                            num(o.error_estimate),
                            num(metric),
                            (metric <= self.rel_tol).to_string(),
                        ]);
                    }
                    (e, o) => {
                        failures += 1;
                        let msg = e.err().or(o.err()).map(|e| e.to_string()).unwrap_or_default();
                        log::warn!("{} at x = {x}: {msg}", case.label);
                    }
                }
            }
            let detail = format!("resonant={} max |expansion - oracle|/(1+|oracle|)", exp.resonant);
            let mut check = Check::at_most(format!("lemma61[{}]", case.label), worst, self.rel_tol, detail);
            if failures > 0 {
                check.passed = false;
                check.detail = format!("{failures} points failed to evaluate");
            }
            ctx.check(check);
        }
        ctx.write_csv(
            "lemma61_points.csv",
            &["s", "alpha", "j", "x", "expansion", "oracle", "oracle_error", "rel_discrepancy", "passed"],
            rows,
        )?;
        ctx.write_json("lemma61_expansions.json", &records)
    }
}
