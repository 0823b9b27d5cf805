//! Explicit barriers for the mixed operator in one dimension and sampled
//! checks of their supersolution inequalities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::pv_quadrature::{lk_apply, GlobalFunction, QuadratureParams, Support};
use crate::util::geometric_points;

pub const DEFAULT_SAMPLES: usize = 50;

/// A_s(r): 1, -log r or r^{1-2s} according to the regime.
pub fn as_factor(s: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("A_s needs r in (0, 1), got {r}")));
    }
    Ok(if s < 0.5 {
        1.0
    } else if s == 0.5 {
        -r.ln()
    } else {
        r.powf(1.0 - 2.0 * s)
    })
}

/// One sampled evaluation of an operator applied to a barrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierRow {
    pub x: f64,
    pub local_part: f64,
    pub nonlocal_part: f64,
    pub gradient_part: f64,
    pub total: f64,
    pub error: Option<String>,
}

/// v(x) = e^{λx} on |x| < 2R, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialBarrier {
    pub lambda: f64,
    pub r: f64,
}

impl ExponentialBarrier {
    pub fn new(lambda: f64, r: f64) -> Result<Self> {
        if !(lambda > 0.0 && r > 0.0) {
            return Err(Error::domain(format!("need lambda, R > 0, got {lambda}, {r}")));
        }
        Ok(ExponentialBarrier { lambda, r })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() < 2.0 * self.r {
            (self.lambda * x).exp()
        } else {
            0.0
        }
    }

    /// v'' = λ² v away from ±2R.
    pub fn second_derivative(&self, x: f64) -> f64 {
        self.lambda * self.lambda * self.eval(x)
    }

    pub fn global(&self) -> GlobalFunction {
        let b = *self;
        let two_r = 2.0 * self.r;
        GlobalFunction::new(move |x| b.eval(x))
            .with_support(Support {
                lo: -two_r,
                hi: two_r,
                left: 0.0,
                right: 0.0,
            })
            .with_deriv(move |x, n| b.lambda.powi(n as i32) * b.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpBarrierReport {
    pub lambda: f64,
    pub r: f64,
    /// λR ≥ 10; below that the inequality is not expected and the report is informational.
    pub hypothesis_met: bool,
    pub all_negative: bool,
    pub empirical_c: f64,
    pub rows: Vec<BarrierRow>,
}

/// Samples L_k v and the smallest C with L_k v ≤ -(1/C) e^{λR/2}/(λR^{1+2s}) v.
pub fn exp_barrier_check(
    kernel: &KernelSpec,
    barrier: &ExponentialBarrier,
    samples: &[f64],
    params: &QuadratureParams,
) -> Result<ExpBarrierReport> {
    let (lambda, r) = (barrier.lambda, barrier.r);
    if let Some(x) = samples.iter().find(|x| !(x.abs() < r)) {
        return Err(Error::domain(format!("sample {x} outside (-R, R)")));
    }
    let hypothesis_met = lambda * r >= 10.0;
    if !hypothesis_met {
        log::warn!("lambda R = {} below 10; exponential barrier check is informational", lambda * r);
    }
    let v = barrier.global();
    let s = kernel.s();
    let scale = (0.5 * lambda * r).exp() / (lambda * r.powf(1.0 + 2.0 * s));
    let rows: Vec<BarrierRow> = samples
        .par_iter()
        .map(|&x| match lk_apply(kernel, &v, x, params) {
            Ok(l) => BarrierRow {
                x,
                local_part: 0.0,
                nonlocal_part: l.value,
                gradient_part: 0.0,
                total: l.value,
                error: None,
            },
            Err(e) => BarrierRow {
                x,
                local_part: 0.0,
                nonlocal_part: f64::NAN,
                gradient_part: 0.0,
                total: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let all_negative = rows.iter().all(|row| row.error.is_none() && row.total < 0.0);
    let empirical_c = rows
        .iter()
        .filter(|row| row.error.is_none())
        .map(|row| -barrier.eval(row.x) * scale / row.total)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ExpBarrierReport {
        lambda,
        r,
        hypothesis_met,
        all_negative,
        empirical_c,
        rows,
    })
}

/// ψ(x) = 0 on |x| ≤ r0, t - t^{1+σ}/(1+σ) with t = |x| - r0 up to 2r0, constant beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBarrier {
    pub r0: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl DistanceBarrier {
    pub fn new(s: f64, r0: f64, sigma: f64, delta: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0 <= 1.0) {
            return Err(Error::domain(format!("r0 = {r0} not in (0, 1]")));
        }
        let cap = (2.0 - 2.0 * s).min(1.0);
        if !(sigma > 0.0 && sigma < cap) {
            return Err(Error::domain(format!("sigma = {sigma} not in (0, {cap})")));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::domain(format!("delta = {delta} not in (0, 1/2]")));
        }
        Ok(DistanceBarrier { r0, sigma, delta })
    }

    pub fn plateau(&self) -> f64 {
        self.r0 - self.r0.powf(1.0 + self.sigma) / (1.0 + self.sigma)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= self.r0 {
            0.0
        } else if a >= 2.0 * self.r0 {
            self.plateau()
        } else {
            let t = a - self.r0;
            t - t.powf(1.0 + self.sigma) / (1.0 + self.sigma)
        }
    }

    /// Derivatives of order 1 and 2 inside the annulus r0 < |x| < 2r0, zero elsewhere.
    pub fn deriv(&self, x: f64, order: u32) -> f64 {
        let a = x.abs();
        if a <= self.r0 || a >= 2.0 * self.r0 {
            return 0.0;
        }
        let t = a - self.r0;
        let sg = x.signum();
        match order {
            0 => self.eval(x),
            1 => sg * (1.0 - t.powf(self.sigma)),
            2 => -self.sigma * t.powf(self.sigma - 1.0),
            3 => -sg * self.sigma * (self.sigma - 1.0) * t.powf(self.sigma - 2.0),
            _ => f64::NAN,
        }
    }

    pub fn global(&self) -> GlobalFunction {
        let b = *self;
        let (r0, c) = (self.r0, self.plateau());
        GlobalFunction::new(move |x| b.eval(x))
            .with_kinks(&[-r0, r0])
            .with_support(Support {
                lo: -2.0 * r0,
                hi: 2.0 * r0,
                left: c,
                right: c,
            })
            .with_deriv(move |x, n| b.deriv(x, n))
    }

    /// Right-side annulus samples r0 + t, t geometric in [1e-4 δ r0, 0.999 δ r0].
    pub fn annulus_samples(&self, n: usize) -> Vec<f64> {
        let w = self.delta * self.r0;
        geometric_points(1e-4 * w, 0.999 * w, n).into_iter().map(|t| self.r0 + t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedCoefficients {
    pub p: f64,
    pub q: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBarrierReport {
    pub barrier: DistanceBarrier,
    pub min_value: f64,
    pub holds: bool,
    pub rows: Vec<BarrierRow>,
}

/// p(-ψ'') + q L_k ψ + g ψ' at annulus samples; holds when the minimum is ≥ 1.
pub fn distance_barrier_check(
    kernel: &KernelSpec,
    barrier: &DistanceBarrier,
    coeffs: MixedCoefficients,
    samples: &[f64],
    params: &QuadratureParams,
) -> Result<DistanceBarrierReport> {
    let (r0, outer) = (barrier.r0, (1.0 + barrier.delta) * barrier.r0);
    if let Some(x) = samples.iter().find(|x| !(x.abs() > r0 && x.abs() < outer)) {
        return Err(Error::domain(format!("sample {x} outside the annulus ({r0}, {outer})")));
    }
    let psi = barrier.global();
    let rows: Vec<BarrierRow> = samples
        .par_iter()
        .map(|&x| {
            let local = -coeffs.p * barrier.deriv(x, 2);
            let grad = coeffs.g * barrier.deriv(x, 1);
            match lk_apply(kernel, &psi, x, params) {
                Ok(l) => BarrierRow {
                    x,
                    local_part: local,
                    nonlocal_part: coeffs.q * l.value,
                    gradient_part: grad,
                    total: local + coeffs.q * l.value + grad,
                    error: None,
                },
                Err(e) => BarrierRow {
                    x,
                    local_part: local,
                    nonlocal_part: f64::NAN,
                    gradient_part: grad,
                    total: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let failed = rows.iter().any(|r| r.error.is_some());
    let min_value = rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.total)
        .fold(f64::INFINITY, f64::min);
    Ok(DistanceBarrierReport {
        barrier: *barrier,
        min_value,
        holds: !failed && min_value >= 1.0,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSearch {
    pub delta: Option<f64>,
    pub steps: usize,
    pub report: Option<DistanceBarrierReport>,
}

/// Largest δ ∈ (0, 1/2] (to bisection accuracy) for which the distance
/// barrier check holds on `n_samples` annulus points.
pub fn find_delta(
    kernel: &KernelSpec,
    r0: f64,
    sigma: f64,
    coeffs: MixedCoefficients,
    n_samples: usize,
    params: &QuadratureParams,
) -> Result<DeltaSearch> {
    let s = kernel.s();
    let check = |delta: f64| -> Result<DistanceBarrierReport> {
        let b = DistanceBarrier::new(s, r0, sigma, delta)?;
        distance_barrier_check(kernel, &b, coeffs, &b.annulus_samples(n_samples), params)
    };
    let mut steps = 0;
    let mut hi = 0.5;
    let first = check(hi)?;
    steps += 1;
    if first.holds {
        return Ok(DeltaSearch {
            delta: Some(hi),
            steps,
            report: Some(first),
        });
    }
    let mut lo = hi;
    let mut good = None;
    while lo > 1e-12 {
        lo *= 0.125;
        let r = check(lo)?;
        steps += 1;
        if r.holds {
            good = Some(r);
            break;
        }
        hi = lo;
    }
    let Some(mut good) = good else {
        return Ok(DeltaSearch {
            delta: None,
            steps,
            report: None,
        });
    };
    for _ in 0..20 {
        let mid = (lo * hi).sqrt();
        let r = check(mid)?;
        steps += 1;
        if r.holds {
            lo = mid;
            good = r;
        } else {
            hi = mid;
        }
        if hi / lo < 1.01 {
            break;
        }
    }
    Ok(DeltaSearch {
        delta: Some(lo),
        steps,
        report: Some(good),
    })
}

/// Cutoff: 1 on [0, 1], 0 on [2, ∞), quintic smoothstep in between.
pub fn eta(t: f64, order: u32) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        return if order == 0 && t <= 1.0 { 1.0 } else { 0.0 };
    }
    let u = t - 1.0;
    match order {
        0 => 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u),
        1 => -30.0 * u * u * (1.0 - u) * (1.0 - u),
        2 => -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
        _ => f64::NAN,
    }
}

/// φ(x) = B(R² - x²) - D η(d/δ) d^{2-γ} on (0, 1), d = min(x, 1 - x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonBarrier {
    pub gamma: f64,
    pub r_dom: f64,
    pub b: f64,
    pub d: f64,
    pub delta: f64,
}

impl PoissonBarrier {
    /// D = 2M/(1-γ), B = (M/δ^γ)(242/(1-γ) + 1), R = diam = 1 and δ = 1/8
    /// (a quarter of the collar 1/2 on which d is smooth, Δd = 0 there).
    pub fn for_target(gamma: f64, m_target: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::domain(format!("gamma = {gamma} not in (0, 1)")));
        }
        if !(m_target > 0.0) {
            return Err(Error::domain(format!("target M = {m_target} must be positive")));
        }
        let delta: f64 = 0.125;
        Ok(PoissonBarrier {
            gamma,
            r_dom: 1.0,
            b: m_target / delta.powf(gamma) * (242.0 / (1.0 - gamma) + 1.0),
            d: 2.0 * m_target / (1.0 - gamma),
            delta,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let dist = x.min(1.0 - x).max(0.0);
        self.b * (self.r_dom * self.r_dom - x * x) - self.d * eta(dist / self.delta, 0) * dist.powf(2.0 - self.gamma)
    }

    /// -φ''(x), using |d'| = 1 and d'' = 0 away from the midpoint.
    pub fn minus_second_derivative(&self, x: f64) -> f64 {
        let dist = x.min(1.0 - x);
        let t = dist / self.delta;
        let g = self.gamma;
        let bracket = eta(t, 2) * t * t + 2.0 * (2.0 - g) * eta(t, 1) * t + (2.0 - g) * (1.0 - g) * eta(t, 0);
        2.0 * self.b + self.d * bracket * dist.powf(-g)
    }
}

pub fn poisson_barrier_eval(barrier: &PoissonBarrier, x: f64) -> f64 {
    barrier.eval(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonBarrierReport {
    pub barrier: PoissonBarrier,
    pub min_ratio: f64,
    pub holds: bool,
    pub min_value: f64,
    pub rows: Vec<BarrierRow>,
}

/// Samples geometric toward both ends of (0, 1).
pub fn two_sided_samples(n: usize) -> Vec<f64> {
    let half = n / 2;
    let mut xs = geometric_points(1e-6, 0.49, half.max(2));
    let right: Vec<f64> = geometric_points(1e-6, 0.49, (n - half).max(2)).into_iter().map(|t| 1.0 - t).collect();
    xs.extend(right);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

/// min over samples of -φ'' d^γ / M; holds when ≥ 1.
pub fn poisson_barrier_check(barrier: &PoissonBarrier, m_target: f64, samples: &[f64]) -> PoissonBarrierReport {
    let rows: Vec<BarrierRow> = samples
        .iter()
        .map(|&x| {
            let local = barrier.minus_second_derivative(x);
            BarrierRow {
                x,
                local_part: local,
                nonlocal_part: 0.0,
                gradient_part: 0.0,
                total: local * x.min(1.0 - x).powf(barrier.gamma) / m_target,
                error: None,
            }
        })
        .collect();
    let min_ratio = rows.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
    let min_value = samples
        .iter()
        .chain([0.0, 1.0].iter())
        .map(|&x| barrier.eval(x))
        .fold(f64::INFINITY, f64::min);
    PoissonBarrierReport {
        barrier: *barrier,
        min_ratio,
        holds: min_ratio >= 1.0,
        min_value,
        rows,
    }
}

/// Regime-dependent lower-bound shape C r0^{1-2s} A_s((|x| - r0)/r0): returns the
/// smallest C making L_k ψ ≥ -C r0^{1-2s} A_s hold on the rows of a report.
pub fn lk_lower_bound_constant(s: f64, report: &DistanceBarrierReport, q: f64) -> Result<f64> {
    let r0 = report.barrier.r0;
    let mut c = 0.0f64;
    for row in report.rows.iter().filter(|r| r.error.is_none()) {
        let r = (row.x.abs() - r0) / r0;
        let shape = r0.powf(1.0 - 2.0 * s) * as_factor(s, r)?;
        c = c.max(-(row.nonlocal_part / q) / shape);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FractionalOrder;

    #[test]
    fn as_factor_cases() {
        assert_eq!(as_factor(0.3, 0.5).unwrap(), 1.0);
        assert!((as_factor(0.5, (-2.0f64).exp()).unwrap() - 2.0).abs() < 1e-14);
        assert!((as_factor(0.75, 0.25).unwrap() - 2.0).abs() < 1e-14);
        assert!(as_factor(0.3, 1.0).is_err());
        assert!(as_factor(0.3, 0.0).is_err());
    }

    #[test]
    fn exponential_identity_and_cutoff() {
        let b = ExponentialBarrier::new(3.0, 1.0).unwrap();
        assert_eq!(b.eval(2.0), 0.0);
        assert_eq!(b.eval(-2.5), 0.0);
        let x = 0.3;
        let h = 1e-4;
        let fd = (b.eval(x + h) - 2.0 * b.eval(x) + b.eval(x - h)) / (h * h);
        assert!((fd - b.second_derivative(x)).abs() < 1e-5 * b.second_derivative(x));
    }

    #[test]
    fn exponential_barrier_negative_at_lambda_40() {
        let k = KernelSpec::fractional(FractionalOrder::new(0.6).unwrap());
        let b = ExponentialBarrier::new(40.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..15).map(|i| -0.9 + 1.8 * i as f64 / 14.0).collect();
        let r = exp_barrier_check(&k, &b, &xs, &QuadratureParams::default()).unwrap();
        assert!(r.hypothesis_met && r.all_negative);
        assert!(r.empirical_c.is_finite() && r.empirical_c > 0.0);
    }

    #[test]
    fn small_lambda_r_is_reported() {
        let k = KernelSpec::fractional(FractionalOrder::new(0.6).unwrap());
        let b = ExponentialBarrier::new(1.0, 1.0).unwrap();
        let r = exp_barrier_check(&k, &b, &[0.0, 0.5], &QuadratureParams::default()).unwrap();
        assert!(!r.hypothesis_met);
        assert_eq!(r.rows.len(), 2);
        assert!(exp_barrier_check(&k, &b, &[1.0], &QuadratureParams::default()).is_err());
    }

    #[test]
    fn distance_barrier_shape() {
        let b = DistanceBarrier::new(0.75, 0.5, 0.2, 0.1).unwrap();
        assert_eq!(b.eval(0.3), 0.0);
        assert_eq!(b.eval(-1.5), b.plateau());
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        assert!(xs.windows(2).all(|w| b.eval(w[1]) >= b.eval(w[0])));
        assert!(xs.iter().all(|x| b.eval(*x) >= -1e-12));
        let x = 0.6;
        assert!((-b.deriv(x, 2) - 0.2 * 0.1f64.powf(-0.8)).abs() < 1e-12);
        assert!(DistanceBarrier::new(0.75, 0.5, 0.5, 0.1).is_err());
        assert!(DistanceBarrier::new(0.75, 0.5, 0.2, 0.6).is_err());
    }

    #[test]
    fn eta_bounds() {
        let mut worst = 0.0f64;
        for i in 0..=2000 {
            let t = 1.0 + i as f64 / 2000.0;
            worst = worst.max(eta(t, 1).abs() + eta(t, 2).abs());
            assert!(eta(t, 1) <= 0.0);
        }
        assert!(worst <= 10.0);
        assert_eq!(eta(0.5, 0), 1.0);
        assert_eq!(eta(2.5, 0), 0.0);
        assert!((eta(1.0 + 1e-9, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_barrier_center_and_check() {
        let b = PoissonBarrier::for_target(0.5, 1.0).unwrap();
        assert!((b.minus_second_derivative(0.5) - 2.0 * b.b).abs() < 1e-9);
        assert!((b.eval(0.5) - b.b * 0.75).abs() < 1e-9);
        let r = poisson_barrier_check(&b, 1.0, &two_sided_samples(50));
        assert!(r.holds, "min ratio {}", r.min_ratio);
        assert!(r.min_value >= -1e-12);
        let x: f64 = 0.01;
        let near = b.minus_second_derivative(x) - 2.0 * b.b;
        assert!((near - b.d * 1.5 * 0.5 * x.powf(-0.5)).abs() < 1e-9 * near);
    }
}
