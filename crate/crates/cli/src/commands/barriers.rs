use mixreg_core::barriers::{
    exp_barrier_check, find_delta, poisson_barrier_check, two_sided_samples, BarrierRow, DistanceBarrier, ExponentialBarrier,
    MixedCoefficients, PoissonBarrier,
};
use mixreg_core::kernels::{FractionalOrder, KernelSpec};
use mixreg_core::pv_quadrature::QuadratureParams;

use super::{parse_order, positive};
use crate::config::ExperimentConfig;
use crate::manifest::{num, Check, RunContext};
use crate::CliError;

pub struct Plan {
    pub exp_order: FractionalOrder,
    pub r: f64,
    pub barriers: Vec<ExponentialBarrier>,
    pub exp_samples: usize,
    pub stabilization_tol: f64,
    pub distance_orders: Vec<FractionalOrder>,
    pub r0: f64,
    pub sigma: f64,
    pub coeffs: MixedCoefficients,
    pub annulus_samples: usize,
    pub poisson: PoissonBarrier,
    pub poisson_m: f64,
    pub poisson_samples: usize,
    pub params: QuadratureParams,
    notes: Vec<String>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Plan, CliError> {
    let c = &config.barriers;
    let mut notes = Vec::new();
    let exp_order = parse_order(&c.exp_s, "barriers.exp_s", &mut notes)?;
    let r = positive(c.r, "barriers.r")?;
    let mut lambdas = c.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let barriers = lambdas
        .iter()
        .map(|l| ExponentialBarrier::new(*l, r).map_err(|e| CliError::Config(format!("barriers.lambdas: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if c.exp_samples == 0 || c.annulus_samples < 2 || c.poisson_samples < 4 {
        return Err(CliError::Config("barriers: sample counts too small".into()));
    }
    let distance_orders = c
        .distance_orders
        .iter()
        .map(|s| parse_order(s, "barriers.distance_orders", &mut notes))
        .collect::<Result<Vec<_>, _>>()?;
    for o in &distance_orders {
        DistanceBarrier::new(o.value(), c.r0, c.sigma, 0.5).map_err(|e| CliError::Config(format!("barriers: {e}")))?;
    }
    if !(c.p >= 0.0 && c.q >= 0.0 && c.g.is_finite()) {
        return Err(CliError::Config("barriers: need p, q >= 0".into()));
    }
    let poisson = PoissonBarrier::for_target(c.poisson_gamma, c.poisson_m).map_err(|e| CliError::Config(format!("barriers: {e}")))?;
    Ok(Plan {
        exp_order,
        r,
        barriers,
        exp_samples: c.exp_samples,
        stabilization_tol: positive(c.stabilization_tol, "barriers.stabilization_tol")?,
        distance_orders,
        r0: c.r0,
        sigma: c.sigma,
        coeffs: MixedCoefficients { p: c.p, q: c.q, g: c.g },
        annulus_samples: c.annulus_samples,
        poisson,
        poisson_m: c.poisson_m,
        poisson_samples: c.poisson_samples,
        params: config.quadrature.params()?,
        notes,
    })
}

/// x_i = -R + 2R i/(n + 1), i = 1..n.
pub fn interior_samples(r: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| -r + 2.0 * r * i as f64 / (n + 1) as f64).collect()
}

fn row_csv(rows: &[BarrierRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                num(r.x),
                num(r.local_part),
                num(r.nonlocal_part),
                num(r.gradient_part),
                num(r.total),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

const ROW_HEADER: &[&str] = &["x", "local", "nonlocal", "gradient", "total", "error"];

impl Plan {
    pub fn list(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .barriers
            .iter()
            .map(|b| format!("exponential barrier s={} lambda={} R={} on {} samples", self.exp_order, b.lambda, b.r, self.exp_samples))
            .collect();
        v.push(format!("empirical C stabilizes within {}", self.stabilization_tol));
        v.extend(
            self.distance_orders
                .iter()
                .map(|o| format!("distance barrier s={o} sigma={} r0={}: find delta > 0", self.sigma, self.r0)),
        );
        v.push(format!(
            "Poisson barrier gamma={} M={} on {} samples",
            self.poisson.gamma, self.poisson_m, self.poisson_samples
        ));
        v
    }

    pub fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        for n in &self.notes {
            ctx.note(n.clone());
        }
        let kernel = KernelSpec::fractional(self.exp_order);
        let xs = interior_samples(self.r, self.exp_samples);
        let mut table = Vec::new();
        let mut stable_cs = Vec::new();
        for b in &self.barriers {
            let name = format!("exp_barrier[lambda={}]", b.lambda);
            match exp_barrier_check(&kernel, b, &xs, &self.params) {
                Ok(rep) => {
                    if rep.hypothesis_met {
                        ctx.check(Check::new(
                            &name,
                            rep.all_negative,
                            Some(rep.rows.iter().map(|r| r.total).fold(f64::NEG_INFINITY, f64::max)),
                            Some(0.0),
                            format!("max L v over {} samples must be negative; empirical C {:.6e}", xs.len(), rep.empirical_c),
                        ));
                        stable_cs.push((b.lambda, rep.empirical_c));
                    } else {
                        ctx.note(format!(
                            "lambda R = {} below 10: all_negative = {}, reported without a pass/fail verdict",
                            b.lambda * b.r,
                            rep.all_negative
                        ));
                    }
                    table.push(vec![
                        num(b.lambda),
                        num(b.r),
                        rep.hypothesis_met.to_string(),
                        rep.all_negative.to_string(),
                        num(rep.empirical_c),
                    ]);
                    ctx.write_csv(&format!("exp_barrier_lambda{}.csv", b.lambda), ROW_HEADER, row_csv(&rep.rows))?;
                }
                Err(e) => ctx.check(Check::failed(name, e.to_string())),
            }
        }
        ctx.write_csv("empirical_c.csv", &["lambda", "R", "hypothesis_met", "all_negative", "empirical_c"], table)?;
        if stable_cs.len() >= 2 {
            let worst = stable_cs.windows(2).map(|w| w[1].1 / w[0].1 - 1.0).fold(f64::NEG_INFINITY, f64::max);
            let cs = stable_cs.iter().map(|(l, c)| format!("{l}: {c:.5e}")).collect::<Vec<_>>().join(", ");
            ctx.check(Check::at_most(
                "empirical_c_stabilization",
                worst,
                self.stabilization_tol,
                format!("largest successive growth C_next/C - 1 as lambda R increases; C = [{cs}]"),
            ));
        }

        for order in &self.distance_orders {
            let name = format!("distance_barrier[s={order}]");
            let kernel = KernelSpec::fractional(*order);
            match find_delta(&kernel, self.r0, self.sigma, self.coeffs, self.annulus_samples, &self.params) {
                Ok(search) => {
                    let delta = search.delta.unwrap_or(0.0);
                    let min = search.report.as_ref().map(|r| r.min_value);
                    ctx.check(Check::new(
                        &name,
                        search.delta.is_some_and(|d| d > 0.0),
                        Some(delta),
                        Some(0.0),
                        format!(
                            "delta from bisection ({} checks); min p(-psi'') + q L psi + g psi' = {}",
                            search.steps,
                            min.map(|m| format!("{m:.6}")).unwrap_or_else(|| "n/a".into())
                        ),
                    ));
                    let rows = search.report.map(|r| row_csv(&r.rows)).unwrap_or_default();
                    ctx.write_csv(&format!("distance_barrier_s{}.csv", order.value()), ROW_HEADER, rows)?;
                }
                Err(e) => ctx.check(Check::failed(name, e.to_string())),
            }
        }

        let rep = poisson_barrier_check(&self.poisson, self.poisson_m, &two_sided_samples(self.poisson_samples));
        ctx.check(Check::new(
            "poisson_barrier",
            rep.holds && rep.min_value >= 0.0,
            Some(rep.min_ratio),
            Some(1.0),
            format!("min -phi'' d^gamma / M must be >= 1; min phi = {:.6}", rep.min_value),
        ));
        ctx.write_csv("poisson_barrier.csv", ROW_HEADER, row_csv(&rep.rows))
    }
}
