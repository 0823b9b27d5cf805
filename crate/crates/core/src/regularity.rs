//! Sampled estimators for boundary-weighted Hölder norms on (0, 1), the
//! interpolation and embedding ratios built from them, and blow-up fits.
//!
//! Weights use d_x = min(x, 1 - x) and d_{x,y} = min(d_x, d_y).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Regime};
use crate::pv_quadrature::{lk_apply, GlobalFunction, QuadratureParams};
use crate::util::{least_squares, LineFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Analytic,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub d: Vec<f64>,
    pub du: Option<Vec<f64>>,
    pub d2u: Option<Vec<f64>>,
    pub source: Source,
}

pub fn dist(x: f64) -> f64 {
    x.min(1.0 - x)
}

fn check_points(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    if xs.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(Error::Precondition("samples must lie in (0, 1)".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("samples must be strictly increasing".into()));
    }
    Ok(())
}

impl SampledFunction {
    pub fn analytic(
        xs: Vec<f64>,
        u: impl Fn(f64) -> f64,
        du: Option<&dyn Fn(f64) -> f64>,
        d2u: Option<&dyn Fn(f64) -> f64>,
    ) -> Result<Self> {
        check_points(&xs)?;
        Ok(SampledFunction {
            values: xs.iter().map(|x| u(*x)).collect(),
            d: xs.iter().map(|x| dist(*x)).collect(),
            du: du.map(|f| xs.iter().map(|x| f(*x)).collect()),
            d2u: d2u.map(|f| xs.iter().map(|x| f(*x)).collect()),
            xs,
            source: Source::Analytic,
        })
    }

    /// Values only; no derivative samples.
    pub fn values_only(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_points(&xs)?;
        if values.len() != xs.len() {
            return Err(Error::Precondition("values and points differ in length".into()));
        }
        Ok(SampledFunction {
            d: xs.iter().map(|x| dist(*x)).collect(),
            xs,
            values,
            du: None,
            d2u: None,
            source: Source::Analytic,
        })
    }

    /// Interior grid values with zero boundary data; derivatives by
    /// three-point differences on the nonuniform grid.
    pub fn from_grid(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_points(&xs)?;
        if values.len() != xs.len() {
            return Err(Error::Precondition("values and points differ in length".into()));
        }
        let (du, d2u) = grid_derivatives(&xs, &values);
        Ok(SampledFunction {
            d: xs.iter().map(|x| dist(*x)).collect(),
            xs,
            values,
            du: Some(du),
            d2u: Some(d2u),
            source: Source::Grid,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Largest |supplied - finite-difference| / (1 + |supplied|) over first and second derivatives.
    pub fn derivative_consistency(&self) -> f64 {
        let (fd1, fd2) = grid_derivatives(&self.xs, &self.values);
        let mut worst = 0.0f64;
        // endpoints use the boundary zero, which analytic samples need not satisfy
        let inner = 1..self.len().saturating_sub(1);
        if let Some(du) = &self.du {
            for i in inner.clone() {
                worst = worst.max((du[i] - fd1[i]).abs() / (1.0 + du[i].abs()));
            }
        }
        if let Some(d2u) = &self.d2u {
            for i in inner {
                worst = worst.max((d2u[i] - fd2[i]).abs() / (1.0 + d2u[i].abs()));
            }
        }
        worst
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        check_points(&self.xs)?;
        let c = self.derivative_consistency();
        if c > tol {
            return Err(Error::Contract(format!("derivative samples inconsistent with values ({c:.3e} > {tol:.3e})")));
        }
        Ok(())
    }

    fn channel(&self, which: Channel) -> Result<&[f64]> {
        match which {
            Channel::Values => Ok(&self.values),
            Channel::First => self
                .du
                .as_deref()
                .ok_or_else(|| Error::Contract("first derivative samples required".into())),
            Channel::Second => self
                .d2u
                .as_deref()
                .ok_or_else(|| Error::Contract("second derivative samples required".into())),
        }
    }
}

/// Three-point first and second differences with u(0) = u(1) = 0.
pub fn grid_derivatives(xs: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let mut du = vec![0.0; n];
    let mut d2u = vec![0.0; n];
    for i in 0..n {
        let (xl, ul) = if i == 0 { (0.0, 0.0) } else { (xs[i - 1], values[i - 1]) };
        let (xr, ur) = if i + 1 == n { (1.0, 0.0) } else { (xs[i + 1], values[i + 1]) };
        let (hl, hr) = (xs[i] - xl, xr - xs[i]);
        let u = values[i];
        du[i] = (hl * hl * ur - hr * hr * ul - (hl * hl - hr * hr) * u) / (hl * hr * (hl + hr));
        d2u[i] = 2.0 * (hl * ur - (hl + hr) * u + hr * ul) / (hl * hr * (hl + hr));
    }
    (du, d2u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Values,
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub beta: f64,
    pub gamma: f64,
    pub pair_budget: usize,
}

pub const DEFAULT_PAIR_BUDGET: usize = 400_000;

impl NormParams {
    pub fn new(beta: f64, gamma: f64) -> Self {
        NormParams {
            beta,
            gamma,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::domain(format!("beta = {} not in (0, 1)", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::domain(format!("gamma = {} not in (0, 1)", self.gamma)));
        }
        if self.pair_budget < 10 * n_samples {
            return Err(Error::Precondition(format!(
                "pair budget {} below 10 x {} samples",
                self.pair_budget, n_samples
            )));
        }
        Ok(())
    }
}

/// max d^w |channel|.
pub fn weighted_sup(samples: &SampledFunction, which: Channel, w: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    let v = samples.channel(which)?;
    Ok(v.iter().zip(&samples.d).map(|(f, d)| d.powf(w) * f.abs()).fold(0.0, f64::max))
}

/// Deterministic set of index pairs (i < j) for seminorm scans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pub pairs: Vec<(u32, u32)>,
    pub exhaustive: bool,
}

impl PairSet {
    /// All pairs when they fit in the budget; otherwise equal shares per dyadic
    /// |x - y| class, half from the smallest and half from the largest d_{x,y}.
    pub fn new(xs: &[f64], d: &[f64], budget: usize) -> Self {
        let n = xs.len();
        let total = n * n.saturating_sub(1) / 2;
        if total <= budget {
            let pairs = (0..n as u32).flat_map(|i| (i + 1..n as u32).map(move |j| (i, j))).collect();
            return PairSet { pairs, exhaustive: true };
        }
        let mut classes: Vec<Vec<(u32, u32)>> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = (-(xs[j] - xs[i]).log2()).floor().clamp(0.0, 63.0) as usize;
                if classes.len() <= c {
                    classes.resize(c + 1, Vec::new());
                }
                classes[c].push((i as u32, j as u32));
            }
        }
        classes.retain(|c| !c.is_empty());
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by_key(|&c| (classes[c].len(), c));
        let mut remaining = budget;
        let mut chosen: Vec<Vec<(u32, u32)>> = vec![Vec::new(); classes.len()];
        for (k, &c) in order.iter().enumerate() {
            let quota = remaining / (order.len() - k);
            let class = &mut classes[c];
            if class.len() <= quota {
                chosen[c] = class.clone();
            } else {
                let key = |p: &(u32, u32)| d[p.0 as usize].min(d[p.1 as usize]);
                class.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(b)));
                let lo = quota / 2;
                let hi = quota - lo;
                let mut pick: Vec<(u32, u32)> = class[..lo].to_vec();
                pick.extend_from_slice(&class[class.len() - hi..]);
                chosen[c] = pick;
            }
            remaining -= chosen[c].len();
        }
        let mut pairs: Vec<(u32, u32)> = chosen.into_iter().flatten().collect();
        pairs.sort_unstable();
        PairSet { pairs, exhaustive: false }
    }
}

fn seminorm_on(xs: &[f64], d: &[f64], f: &[f64], beta: f64, w: f64, pairs: &PairSet) -> f64 {
    pairs
        .pairs
        .par_iter()
        .map(|&(i, j)| {
            let (i, j) = (i as usize, j as usize);
            d[i].min(d[j]).powf(w) * (f[i] - f[j]).abs() / (xs[j] - xs[i]).powf(beta)
        })
        .reduce(|| 0.0, f64::max)
}

/// max over sampled pairs of d_{x,y}^w |f(x) - f(y)| / |x - y|^β.
pub fn weighted_holder_seminorm(
    samples: &SampledFunction,
    which: Channel,
    beta: f64,
    w: f64,
    pair_budget: usize,
) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Precondition("seminorm needs at least two samples".into()));
    }
    let f = samples.channel(which)?;
    let pairs = PairSet::new(&samples.xs, &samples.d, pair_budget);
    Ok(seminorm_on(&samples.xs, &samples.d, f, beta, w, &pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub beta: f64,
    pub gamma: f64,
    /// sup d^{-1}|u|
    pub c0_1: f64,
    /// sup |u'|
    pub grad_sup: f64,
    /// c0_1 + grad_sup + sup d|u''|
    pub c2_1: f64,
    /// sup d_{x,y}^{1+β}|u''(x) - u''(y)|/|x - y|^β
    pub c2beta_1_semi: f64,
    /// sup d^γ|u| and sup d_{x,y}^{β+γ}|u(x) - u(y)|/|x - y|^β
    pub cbeta_gamma: [f64; 2],
    /// c0_1 + grad_sup + sup d^γ|u''|
    pub c2gamma_star: f64,
    /// sup d_{x,y}^{β+γ}|u''(x) - u''(y)|/|x - y|^β
    pub c2beta_gamma_star_semi: f64,
    pub hessian_blowup: Option<ExponentFit>,
    pub pairs_exhaustive: bool,
}

impl NormReport {
    pub fn c2beta_1(&self) -> f64 {
        self.c2_1 + self.c2beta_1_semi
    }

    pub fn cbeta_gamma_norm(&self) -> f64 {
        self.cbeta_gamma[0] + self.cbeta_gamma[1]
    }

    pub fn c2beta_gamma_star(&self) -> f64 {
        self.c2gamma_star + self.c2beta_gamma_star_semi
    }
}

/// ‖f‖_{C^β_γ} = sup d^γ|f| + sup d_{x,y}^{β+γ}|f(x) - f(y)|/|x - y|^β.
pub fn cbeta_gamma_norm(samples: &SampledFunction, params: &NormParams) -> Result<f64> {
    params.validate(samples.len())?;
    let sup = weighted_sup(samples, Channel::Values, params.gamma)?;
    let semi = weighted_holder_seminorm(samples, Channel::Values, params.beta, params.beta + params.gamma, params.pair_budget)?;
    Ok(sup + semi)
}

/// Every weighted norm of the sampled function, with the Hessian blow-up
/// exponent fitted over [10 h_min, 0.05] on the left half when that window is usable.
pub fn full_report(samples: &SampledFunction, params: &NormParams) -> Result<NormReport> {
    params.validate(samples.len())?;
    let d2 = samples.channel(Channel::Second)?;
    samples.channel(Channel::First)?;
    let pairs = PairSet::new(&samples.xs, &samples.d, params.pair_budget);
    let (b, g) = (params.beta, params.gamma);
    let c0_1 = weighted_sup(samples, Channel::Values, -1.0)?;
    let grad_sup = weighted_sup(samples, Channel::First, 0.0)?;
    let hess_1 = weighted_sup(samples, Channel::Second, 1.0)?;
    let hess_g = weighted_sup(samples, Channel::Second, g)?;
    let xs = &samples.xs;
    let d = &samples.d;
    let h_min = xs.windows(2).map(|w| w[1] - w[0]).fold(xs[0], f64::min);
    let window = [10.0 * h_min, 0.05];
    let blow: Vec<(f64, f64)> = xs
        .iter()
        .zip(d2)
        .filter(|(x, m)| **x >= window[0] && **x <= window[1] && m.abs() > 0.0)
        .map(|(x, m)| (*x, m.abs()))
        .collect();
    let hessian_blowup = fit_blowup_exponent(&blow).ok().map(|f| ExponentFit {
        slope: f.slope,
        stderr: f.stderr,
        r_squared: f.r_squared,
        window,
        points: blow.len(),
    });
    Ok(NormReport {
        beta: b,
        gamma: g,
        c0_1,
        grad_sup,
        c2_1: c0_1 + grad_sup + hess_1,
        c2beta_1_semi: seminorm_on(xs, d, d2, b, 1.0 + b, &pairs),
        cbeta_gamma: [
            weighted_sup(samples, Channel::Values, g)?,
            seminorm_on(xs, d, &samples.values, b, b + g, &pairs),
        ],
        c2gamma_star: c0_1 + grad_sup + hess_g,
        c2beta_gamma_star_semi: seminorm_on(xs, d, d2, b, b + g, &pairs),
        hessian_blowup,
        pairs_exhaustive: pairs.exhaustive,
    })
}

/// ‖u‖_{C²_1} / (‖u‖_{C⁰_1}^{β/(2(1+β))} ‖u‖_{C^{2,β}_1}^{(2+β)/(2(1+β))}).
pub fn interpolation_ratio(samples: &SampledFunction, beta: f64, pair_budget: usize) -> Result<f64> {
    let params = NormParams {
        beta,
        gamma: 0.5,
        pair_budget,
    };
    let r = full_report(samples, &params)?;
    let e0 = beta / (2.0 * (1.0 + beta));
    let e2 = (2.0 + beta) / (2.0 * (1.0 + beta));
    let denom = r.c0_1.powf(e0) * r.c2beta_1().powf(e2);
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateFit(format!("interpolation denominator is {denom}")));
    }
    Ok(r.c2_1 / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub c1_1mgamma_norm: f64,
    pub c2gamma_star: f64,
    pub ratio: f64,
}

/// Unweighted C^{1,θ} estimate: sup|u| + sup|u'| + sampled θ-Hölder constant of u'.
pub fn c1_theta_norm(samples: &SampledFunction, theta: f64, pair_budget: usize) -> Result<f64> {
    let sup = weighted_sup(samples, Channel::Values, 0.0)?;
    let grad = weighted_sup(samples, Channel::First, 0.0)?;
    let semi = weighted_holder_seminorm(samples, Channel::First, theta, 0.0, pair_budget)?;
    Ok(sup + grad + semi)
}

/// C^{1,1-γ} norm against ‖u‖_{C²_{γ,★}}.
pub fn embedding_check(samples: &SampledFunction, gamma: f64, pair_budget: usize) -> Result<EmbeddingReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma = {gamma} not in (0, 1)")));
    }
    let c1 = c1_theta_norm(samples, 1.0 - gamma, pair_budget)?;
    let c0_1 = weighted_sup(samples, Channel::Values, -1.0)?;
    let grad = weighted_sup(samples, Channel::First, 0.0)?;
    let hess = weighted_sup(samples, Channel::Second, gamma)?;
    let star = c0_1 + grad + hess;
    Ok(EmbeddingReport {
        c1_1mgamma_norm: c1,
        c2gamma_star: star,
        ratio: if star > 0.0 { c1 / star } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LkMappingEntry {
    pub label: String,
    pub beta: f64,
    pub weight: f64,
    pub norm: f64,
    pub reference_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LkMappingReport {
    pub s: f64,
    pub regime: Regime,
    pub samples: usize,
    pub failed_points: usize,
    /// sup d^{max(2s-1, 0)} |L_k u|
    pub weighted_sup: f64,
    pub entries: Vec<LkMappingEntry>,
}

/// Samples L_k u on `xs` and measures it in the space the regime predicts:
/// C^{1-2s} against ‖u'‖_∞ (s < 1/2), C^{2-2s}_{2s-1} against ‖u‖_{C²_1}
/// (s > 1/2), and C^{β}_ε for ε ∈ {0.1, 0.05} against ‖u‖_{C²_1} (s = 1/2).
pub fn lk_mapping_check(
    kernel: &KernelSpec,
    u: &GlobalFunction,
    xs: &[f64],
    half_beta: f64,
    params: &QuadratureParams,
    pair_budget: usize,
) -> Result<LkMappingReport> {
    check_points(xs)?;
    let s = kernel.s();
    let regime = kernel.order.regime();
    let results: Vec<Option<f64>> = xs
        .par_iter()
        .map(|&x| lk_apply(kernel, u, x, params).ok().map(|v| v.value))
        .collect();
    let failed_points = results.iter().filter(|r| r.is_none()).count();
    let (kept_x, kept_l): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(&results)
        .filter_map(|(x, r)| r.map(|v| (*x, v)))
        .unzip();
    if kept_x.len() < 2 {
        return Err(Error::QuadratureNonConvergence {
            partial: f64::NAN,
            error_estimate: f64::NAN,
            panels: 0,
        });
    }
    let lu = SampledFunction::values_only(kept_x.clone(), kept_l)?;
    let deriv = |x: f64, k: u32| -> f64 {
        u.deriv(x, k).unwrap_or_else(|| {
            let h = 1e-4 * dist(x);
            match k {
                1 => (u.eval(x + h) - u.eval(x - h)) / (2.0 * h),
                _ => (u.eval(x + h) - 2.0 * u.eval(x) + u.eval(x - h)) / (h * h),
            }
        })
    };
    let us = SampledFunction::analytic(kept_x, |x| u.eval(x), Some(&|x| deriv(x, 1)), Some(&|x| deriv(x, 2)))?;
    let grad = weighted_sup(&us, Channel::First, 0.0)?;
    let c2_1 = weighted_sup(&us, Channel::Values, -1.0)? + grad + weighted_sup(&us, Channel::Second, 1.0)?;
    let ratio = |n: f64, r: f64| if n == 0.0 { 0.0 } else { n / r };
    let mut entries = Vec::new();
    match regime {
        Regime::Below => {
            let beta = 1.0 - 2.0 * s;
            let norm = weighted_sup(&lu, Channel::Values, 0.0)?
                + weighted_holder_seminorm(&lu, Channel::Values, beta, 0.0, pair_budget)?;
            entries.push(LkMappingEntry {
                label: "C^{1-2s}".into(),
                beta,
                weight: 0.0,
                norm,
                reference_norm: grad,
                ratio: ratio(norm, grad),
            });
        }
        Regime::Above => {
            let (beta, g) = (2.0 - 2.0 * s, 2.0 * s - 1.0);
            let norm = weighted_sup(&lu, Channel::Values, g)?
                + weighted_holder_seminorm(&lu, Channel::Values, beta, beta + g, pair_budget)?;
            entries.push(LkMappingEntry {
                label: "C^{2-2s}_{2s-1}".into(),
                beta,
                weight: g,
                norm,
                reference_norm: c2_1,
                ratio: ratio(norm, c2_1),
            });
        }
        Regime::Half => {
            for eps in [0.1, 0.05] {
                let norm = weighted_sup(&lu, Channel::Values, eps)?
                    + weighted_holder_seminorm(&lu, Channel::Values, half_beta, half_beta + eps, pair_budget)?;
                entries.push(LkMappingEntry {
                    label: format!("C^{{beta}}_{{{eps}}}"),
                    beta: half_beta,
                    weight: eps,
                    norm,
                    reference_norm: c2_1,
                    ratio: ratio(norm, c2_1),
                });
            }
        }
    }
    Ok(LkMappingReport {
        s,
        regime,
        samples: xs.len(),
        failed_points,
        weighted_sup: weighted_sup(&lu, Channel::Values, (2.0 * s - 1.0).max(0.0))?,
        entries,
    })
}

/// Least squares of log m against log d; needs ≥ 8 positive pairs over ≥ 1.5 decades.
pub fn fit_blowup_exponent(pairs: &[(f64, f64)]) -> Result<LineFit> {
    if pairs.len() < 8 {
        return Err(Error::DegenerateFit(format!("{} pairs, need at least 8", pairs.len())));
    }
    if pairs.iter().any(|(d, m)| !(*d > 0.0 && *m > 0.0 && m.is_finite())) {
        return Err(Error::DegenerateFit("distances and magnitudes must be positive".into()));
    }
    let (lo, hi) = pairs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (d, _)| (lo.min(*d), hi.max(*d)));
    if (hi / lo).log10() < 1.5 {
        return Err(Error::DegenerateFit(format!("span {:.2} decades, need 1.5", (hi / lo).log10())));
    }
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    least_squares(&lx, &ly)
}

/// Graded samples: n points geometric toward both ends of (0, 1), from `lo` to 1/2.
pub fn graded_samples(n: usize, lo: f64) -> Vec<f64> {
    let half = (n / 2).max(2);
    let left = crate::util::geometric_points(lo, 0.5, half);
    let mut xs = left.clone();
    xs.extend(left.iter().rev().skip(1).map(|x| 1.0 - x));
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    xs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FractionalOrder;

    fn uniform(n: usize) -> Vec<f64> {
        (1..n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn weighted_sup_examples() {
        let xs = uniform(100);
        let s = SampledFunction::values_only(xs.clone(), xs.iter().map(|x| dist(*x)).collect()).unwrap();
        assert!((weighted_sup(&s, Channel::Values, -1.0).unwrap() - 1.0).abs() < 1e-12);
        let z = SampledFunction::values_only(xs.clone(), vec![0.0; xs.len()]).unwrap();
        assert_eq!(weighted_sup(&z, Channel::Values, -1.0).unwrap(), 0.0);
        let g = 0.4;
        let h = SampledFunction::analytic(xs, |_| 0.0, None, Some(&|x: f64| dist(x).powf(-g))).unwrap();
        assert!((weighted_sup(&h, Channel::Second, g).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(weighted_sup(&h, Channel::First, 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn seminorm_examples() {
        let xs = uniform(50);
        let c = SampledFunction::values_only(xs.clone(), vec![2.0; xs.len()]).unwrap();
        assert_eq!(weighted_holder_seminorm(&c, Channel::Values, 0.5, 0.0, 10_000).unwrap(), 0.0);
        let lin = SampledFunction::values_only(xs.clone(), xs.clone()).unwrap();
        let v = weighted_holder_seminorm(&lin, Channel::Values, 0.5, 0.0, 10_000).unwrap();
        let span = xs[xs.len() - 1] - xs[0];
        assert!((v - span.sqrt()).abs() < 1e-12 && v <= 1.0);
    }

    #[test]
    fn pair_subsampling_is_deterministic_and_bounded() {
        let xs = graded_samples(400, 1e-5);
        let d: Vec<f64> = xs.iter().map(|x| dist(*x)).collect();
        let a = PairSet::new(&xs, &d, 5_000);
        let b = PairSet::new(&xs, &d, 5_000);
        assert_eq!(a, b);
        assert!(!a.exhaustive && a.pairs.len() <= 5_000);
        assert!(PairSet::new(&xs[..20], &d[..20], 5_000).exhaustive);
    }

    #[test]
    fn report_for_parabola() {
        let xs = graded_samples(800, 1e-4);
        let s = SampledFunction::analytic(xs, |x| x * (1.0 - x), Some(&|x| 1.0 - 2.0 * x), Some(&|_| -2.0)).unwrap();
        let r = full_report(&s, &NormParams::new(0.5, 0.5)).unwrap();
        assert!((r.c0_1 - 1.0).abs() < 0.02);
        assert!((r.grad_sup - 1.0).abs() < 1e-3);
        assert_eq!(r.c2beta_1_semi, 0.0);
        let z = SampledFunction::analytic(graded_samples(100, 1e-3), |_| 0.0, Some(&|_| 0.0), Some(&|_| 0.0)).unwrap();
        let rz = full_report(&z, &NormParams::new(0.5, 0.5)).unwrap();
        assert_eq!(rz.c2beta_gamma_star(), 0.0);
        assert_eq!(rz.c2_1, 0.0);
    }

    #[test]
    fn report_rejects_small_budget() {
        let xs = graded_samples(100, 1e-3);
        let s = SampledFunction::analytic(xs, |x| x, Some(&|_| 1.0), Some(&|_| 0.0)).unwrap();
        let p = NormParams {
            pair_budget: 10,
            ..NormParams::new(0.5, 0.5)
        };
        assert!(full_report(&s, &p).is_err());
    }

    #[test]
    fn interpolation_ratio_is_scale_invariant() {
        let xs = graded_samples(300, 1e-4);
        let mk = |l: f64| {
            SampledFunction::analytic(xs.clone(), move |x| l * x * (1.0 - x), Some(&move |x| l * (1.0 - 2.0 * x)), Some(&move |_| -2.0 * l))
                .unwrap()
        };
        let r1 = interpolation_ratio(&mk(1.0), 0.5, 100_000).unwrap();
        let r3 = interpolation_ratio(&mk(3.0), 0.5, 100_000).unwrap();
        assert!((r1 - r3).abs() < 1e-12 * r1);
        let z = SampledFunction::analytic(xs.clone(), |_| 0.0, Some(&|_| 0.0), Some(&|_| 0.0)).unwrap();
        assert!(matches!(interpolation_ratio(&z, 0.5, 100_000), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn embedding_for_linear_function() {
        let xs = graded_samples(200, 1e-3);
        let s = SampledFunction::analytic(xs, |x| x, Some(&|_| 1.0), Some(&|_| 0.0)).unwrap();
        let e = embedding_check(&s, 0.5, 100_000).unwrap();
        assert!(e.ratio <= 2.0);
    }

    #[test]
    fn blowup_fit_examples() {
        let ds = crate::util::geometric_points(1e-4, 1e-1, 12);
        let exact: Vec<(f64, f64)> = ds.iter().map(|d| (*d, d.powf(-0.5))).collect();
        let f = fit_blowup_exponent(&exact).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && f.stderr < 1e-12);
        let flat: Vec<(f64, f64)> = ds.iter().map(|d| (*d, 3.0)).collect();
        assert!(fit_blowup_exponent(&flat).unwrap().slope.abs() < 1e-12);
        let narrow: Vec<(f64, f64)> = crate::util::geometric_points(1e-2, 1e-1, 10).iter().map(|d| (*d, 1.0)).collect();
        assert!(matches!(fit_blowup_exponent(&narrow), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn grid_derivatives_of_parabola() {
        let xs = graded_samples(200, 1e-3);
        let vals: Vec<f64> = xs.iter().map(|x| x * (1.0 - x)).collect();
        let g = SampledFunction::from_grid(xs, vals).unwrap();
        assert!(g.d2u.as_ref().unwrap().iter().all(|v| (v + 2.0).abs() < 1e-6));
        assert!(g.derivative_consistency() < 1e-12);
    }

    #[test]
    fn lk_mapping_zero_function() {
        let k = KernelSpec::fractional(FractionalOrder::new(0.25).unwrap());
        let u = GlobalFunction::new(|_| 0.0).with_deriv(|_, _| 0.0);
        let r = lk_mapping_check(&k, &u, &graded_samples(20, 1e-3), 0.5, &QuadratureParams::default(), 10_000).unwrap();
        assert!(r.entries.iter().all(|e| e.norm == 0.0 && e.ratio == 0.0));
    }
}
