//! Power-log atoms x^α log^j x on (0, 1) and the exact expansion of their
//! fractional Laplacian near the origin:
//!
//! (-Δ)^s u_{α,j}(x) = x^{α-2s} Σ_k a^{(k)} log^k x + f_{α,j}(x),  0 < x < 1/2,
//!
//! with f_{α,j} smooth on [0, 1/2].

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{adaptive, geometric_breaks};
use crate::kernels::{normalization_constant, FractionalOrder};
use crate::pv_quadrature::{GlobalFunction, Support};
use crate::util::NeumaierSum;

pub const RESONANCE_GUARD: f64 = 1e-6;
pub const DEFAULT_TRUNC_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLogAtom {
    pub alpha: f64,
    pub j: u32,
    /// α as an exact fraction, when known; drives exact resonance decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_alpha: Option<(i64, i64)>,
}

impl PowerLogAtom {
    pub fn new(alpha: f64, j: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("atom exponent must be positive, got {alpha}")));
        }
        Ok(PowerLogAtom { alpha, j, exact_alpha: None })
    }

    pub fn exact(alpha: Ratio<i64>, j: u32) -> Result<Self> {
        if alpha <= Ratio::from_integer(0) {
            return Err(Error::domain(format!("atom exponent must be positive, got {alpha}")));
        }
        Ok(PowerLogAtom {
            alpha: *alpha.numer() as f64 / *alpha.denom() as f64,
            j,
            exact_alpha: Some((*alpha.numer(), *alpha.denom())),
        })
    }

    pub fn exact_ratio(&self) -> Option<Ratio<i64>> {
        self.exact_alpha.map(|(n, d)| Ratio::new(n, d))
    }
}

pub fn atom_eval(atom: &PowerLogAtom, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        if atom.j == 0 {
            1.0
        } else {
            0.0
        }
    } else if atom.j == 0 {
        x.powf(atom.alpha)
    } else {
        x.powf(atom.alpha) * x.ln().powi(atom.j as i32)
    }
}

/// n-th derivative of x^α log^j x on (0, 1), any n.
pub(crate) fn atom_derivative(atom: &PowerLogAtom, x: f64, n: u32) -> f64 {
    // x^β P(log x) differentiates to x^{β-1} (β P + P').
    let mut beta = atom.alpha;
    let mut poly = vec![0.0; atom.j as usize + 1];
    poly[atom.j as usize] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; poly.len()];
        for (k, c) in poly.iter().enumerate() {
            next[k] += beta * c;
            if k > 0 {
                next[k - 1] += k as f64 * c;
            }
        }
        poly = next;
        beta -= 1.0;
    }
    let l = x.ln();
    let mut acc = 0.0;
    for c in poly.iter().rev() {
        acc = acc * l + c;
    }
    x.powf(beta) * acc
}

pub fn atom_deriv(atom: &PowerLogAtom, x: f64, order: u32) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::domain(format!("derivative order {order} not in {{1, 2, 3}}")));
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("atom derivatives need 0 < x < 1, got {x}")));
    }
    Ok(atom_derivative(atom, x, order))
}

/// The atom as a function on the whole line, with closed-form derivatives.
pub fn atom_function(atom: &PowerLogAtom) -> GlobalFunction {
    let (a, b) = (*atom, *atom);
    GlobalFunction::new(move |x| atom_eval(&a, x))
        .with_support(Support {
            lo: 0.0,
            hi: 1.0,
            left: 0.0,
            right: if atom.j == 0 { 1.0 } else { 0.0 },
        })
        .with_deriv(move |x, n| if x <= 0.0 || x >= 1.0 { 0.0 } else { atom_derivative(&b, x, n) })
}

/// binom(β, i) = β(β-1)...(β-i+1)/i!.
pub fn generalized_binomial(beta: f64, i: u32) -> f64 {
    let mut v = 1.0;
    for l in 0..i {
        v *= (beta - l as f64) / (l as f64 + 1.0);
    }
    v
}

/// (m)_l = m!/(m-l)!.
pub fn pochhammer_falling(m: u64, l: u64) -> Result<u64> {
    if l > m {
        return Err(Error::domain(format!("falling factorial ({m})_{l} needs l <= m")));
    }
    let mut v: u64 = 1;
    for t in 0..l {
        v = v
            .checked_mul(m - t)
            .ok_or_else(|| Error::domain(format!("({m})_{l} overflows u64")))?;
    }
    Ok(v)
}

fn integer_binomial(n: usize, k: usize) -> f64 {
    generalized_binomial(n as f64, k as u32)
}

type MemoKey = (u64, u64, u32);

fn memo() -> &'static RwLock<HashMap<MemoKey, f64>> {
    static TABLE: OnceLock<RwLock<HashMap<MemoKey, f64>>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memoized(s: f64, alpha: f64, m: u32, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
    let key = (s.to_bits(), alpha.to_bits(), m);
    if let Some(v) = memo().read().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = compute()?;
    memo().write().unwrap().insert(key, v);
    Ok(v)
}

const SERIES_RADIUS: f64 = 0.25;
const SERIES_TERMS: usize = 64;

/// ∫_a^1 g(r) dr with panels clustered toward r = 1.
fn integrate_to_one<F: Fn(f64) -> f64>(g: &F, a: f64) -> Result<f64> {
    let breaks = geometric_breaks(a, 1.0, true, 1e-16);
    let mut budget = 200_000usize;
    let mut total = NeumaierSum::default();
    for w in breaks.windows(2) {
        match adaptive(g, w[0], w[1], 1e-15, 1e-14, w[1] - w[0], &mut budget) {
            Ok(p) => total.add(p.value),
            Err(p) => {
                return Err(Error::QuadratureNonConvergence {
                    partial: total.sum() + p.value,
                    error_estimate: p.error,
                    panels: 200_000,
                })
            }
        }
    }
    Ok(total.sum())
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("order s = {s} is outside (0, 1)")));
    }
    Ok(())
}

/// ∫_0^1 [2 - (1-r)^α - (1+r)^α] r^{-1-2s} dr.
pub fn pv_one_minus_power(s: f64, alpha: f64) -> Result<f64> {
    check_s(s)?;
    if !(alpha >= 0.0) {
        return Err(Error::domain(format!("exponent must be non-negative, got {alpha}")));
    }
    memoized(s, alpha, 0, || {
        let r0 = SERIES_RADIUS;
        let mut near = NeumaierSum::default();
        let mut b = 1.0;
        for n in 0..(2 * SERIES_TERMS) {
            b *= (alpha - n as f64) / (n as f64 + 1.0);
            let deg = n + 1;
            if deg % 2 == 0 {
                let d = deg as f64;
                near.add(-2.0 * b * r0.powf(d - 2.0 * s) / (d - 2.0 * s));
            }
        }
        let g = |r: f64| (2.0 - (1.0 - r).powf(alpha) - (1.0 + r).powf(alpha)) * r.powf(-1.0 - 2.0 * s);
        Ok(near.sum() + integrate_to_one(&g, r0)?)
    })
}

/// ∫_0^1 [h(1-r) + h(1+r)] r^{-1-2s} dr with h(t) = t^α log^m t.
pub fn pv_power_log(s: f64, alpha: f64, m: u32) -> Result<f64> {
    check_s(s)?;
    if m == 0 {
        return Err(Error::domain("pv_power_log needs m >= 1"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("exponent must be positive, got {alpha}")));
    }
    memoized(s, alpha, m, || {
        let n = 2 * SERIES_TERMS;
        let mut log1p = vec![0.0; n + 1];
        for (k, c) in log1p.iter_mut().enumerate().skip(1) {
            *c = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
        }
        let mut pow_log = log1p.clone();
        for _ in 1..m {
            pow_log = truncated_product(&pow_log, &log1p);
        }
        let mut binom = vec![1.0; n + 1];
        for k in 1..=n {
            binom[k] = binom[k - 1] * (alpha - (k - 1) as f64) / k as f64;
        }
        let h = truncated_product(&binom, &pow_log);
        let r0 = SERIES_RADIUS;
        let mut near = NeumaierSum::default();
        for (k, c) in h.iter().enumerate().skip(2).step_by(2) {
            let d = k as f64;
            near.add(2.0 * c * r0.powf(d - 2.0 * s) / (d - 2.0 * s));
        }
        let ht = |t: f64| if t <= 0.0 { 0.0 } else { t.powf(alpha) * t.ln().powi(m as i32) };
        let g = |r: f64| (ht(1.0 - r) + ht(1.0 + r)) * r.powf(-1.0 - 2.0 * s);
        Ok(near.sum() + integrate_to_one(&g, r0)?)
    })
}

fn truncated_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    let mut out = vec![0.0; n];
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for k in 0..(n - i) {
            out[i + k] += a[i] * b[k];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraPower {
    pub exponent: f64,
    pub coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryTerm {
    None,
    /// coeff · (1 - x)^{-2s}
    PowerMinusTwoS { coeff: f64 },
    /// coeff · log(1 - x)
    Log { coeff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothPart {
    pub series_coeffs: Vec<f64>,
    pub truncation_index: usize,
    pub tail_bound: f64,
    pub extra_power: Option<ExtraPower>,
    pub boundary_term: BoundaryTerm,
    pub valid_interval: [f64; 2],
    two_s: f64,
}

impl SmoothPart {
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.series_coeffs.iter().rev() {
            acc = acc * x + c;
        }
        if let Some(e) = &self.extra_power {
            acc += e.coeff * x.powf(e.exponent);
        }
        match self.boundary_term {
            BoundaryTerm::None => {}
            BoundaryTerm::PowerMinusTwoS { coeff } => acc += coeff * (1.0 - x).powf(-self.two_s),
            BoundaryTerm::Log { coeff } => acc += coeff * (-x).ln_1p(),
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogPolyExpansion {
    pub s: FractionalOrder,
    pub atom: PowerLogAtom,
    pub a: Vec<f64>,
    pub resonant: bool,
    pub i_star: Option<usize>,
    pub smooth: SmoothPart,
}

/// Flat JSON view used for golden files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub s: String,
    pub alpha: f64,
    pub j: u32,
    pub resonant: bool,
    pub i_star: Option<usize>,
    pub a: Vec<f64>,
    pub series_coeffs: Vec<f64>,
    pub extra_power: Option<ExtraPower>,
    pub boundary_term: BoundaryTerm,
    pub tail_bound: f64,
}

impl LogPolyExpansion {
    pub fn record(&self) -> ExpansionRecord {
        ExpansionRecord {
            s: self.s.to_string(),
            alpha: self.atom.alpha,
            j: self.atom.j,
            resonant: self.resonant,
            i_star: self.i_star,
            a: self.a.clone(),
            series_coeffs: self.smooth.series_coeffs.clone(),
            extra_power: self.smooth.extra_power,
            boundary_term: self.smooth.boundary_term,
            tail_bound: self.smooth.tail_bound,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.record()).expect("plain data serializes")
    }

    /// Σ_k a^{(k)} log^k x, the factor multiplying x^{α-2s}.
    pub fn log_poly(&self, x: f64) -> f64 {
        let l = x.ln();
        let mut acc = 0.0;
        for c in self.a.iter().rev() {
            acc = acc * l + c;
        }
        acc
    }

    pub fn singular_exponent(&self) -> f64 {
        self.atom.alpha - 2.0 * self.s.value()
    }
}

fn resonance(s: &FractionalOrder, atom: &PowerLogAtom) -> Result<Option<usize>> {
    if let (Some(sr), Some(ar)) = (s.ratio(), atom.exact_ratio()) {
        let d = ar - sr * 2;
        if d.is_integer() && d >= Ratio::from_integer(0) {
            return Ok(Some(d.to_integer() as usize));
        }
        return Ok(None);
    }
    let two_s = 2.0 * s.value();
    let top = (atom.alpha - two_s).ceil().max(0.0) as usize + 2;
    for i in 0..=top {
        let e = two_s - atom.alpha + i as f64;
        if e.abs() < RESONANCE_GUARD {
            return Err(Error::NearResonance {
                alpha: atom.alpha,
                index: i,
                distance: e.abs(),
                atom: None,
            });
        }
    }
    Ok(None)
}

/// Full coefficient table of the expansion, both branches.
pub fn fractional_expansion(s: &FractionalOrder, atom: &PowerLogAtom, trunc_tol: f64) -> Result<LogPolyExpansion> {
    if !(atom.alpha > 0.0) {
        return Err(Error::domain(format!("atom exponent must be positive, got {}", atom.alpha)));
    }
    if !(trunc_tol > 0.0) {
        return Err(Error::domain("trunc_tol must be positive"));
    }
    let sv = s.value();
    let two_s = 2.0 * sv;
    let alpha = atom.alpha;
    let j = atom.j as usize;
    let i_star = resonance(s, atom)?;
    let c_s = normalization_constant(sv)?;
    let ln2 = std::f64::consts::LN_2;

    let mut poly: Vec<NeumaierSum> = vec![NeumaierSum::default(); j + 2];
    poly[j].add(1.0 / sv + pv_one_minus_power(sv, alpha)?);
    for k in 0..j {
        poly[k].add(-integer_binomial(j, k) * pv_power_log(sv, alpha, (j - k) as u32)?);
    }

    // powers of log 2 and binomials reused below
    let ln2_pow: Vec<f64> = (0..=j + 1).map(|p| ln2.powi(p as i32)).collect();
    let falling: Vec<f64> = (0..=j).map(|m| pochhammer_falling(j as u64, m as u64).unwrap() as f64).collect();

    let mut c_i = 1.0; // binom(i + 2s, i)
    let mut i = 0usize;
    loop {
        if i > 0 {
            c_i *= (i as f64 + two_s) / i as f64;
        }
        if Some(i) != i_star {
            let e = two_s - alpha + i as f64;
            let w = c_i * (-e * ln2).exp();
            let mut biggest = 0.0f64;
            for m in 0..=j {
                let coef = w * falling[m] / e.powi(m as i32 + 1);
                let n = j - m;
                for k in 0..=n {
                    let t = coef * integer_binomial(n, k) * ln2_pow[n - k];
                    poly[k].add(-t);
                    biggest = biggest.max(t.abs());
                }
            }
            if i as f64 > alpha + 4.0 && biggest < 1e-19 {
                break;
            }
        }
        i += 1;
        if i > 400 {
            break;
        }
    }
    if let Some(is) = i_star {
        let c = generalized_binomial(is as f64 + two_s, is as u32);
        let n = j + 1;
        for k in 0..=n {
            poly[k].add(c * integer_binomial(n, k) * ln2_pow[n - k] / (j as f64 + 1.0));
        }
    }
    let mut a: Vec<f64> = poly.iter().map(|p| c_s * p.sum()).collect();
    let extra_power = i_star.map(|is| {
        let coeff = a[0];
        a[0] = 0.0;
        ExtraPower {
            exponent: is as f64,
            coeff,
        }
    });
    if i_star.is_none() {
        a[j + 1] = 0.0;
    }

    let smooth = smooth_part(sv, alpha, j, i_star, c_s, trunc_tol, extra_power);
    for v in a.iter().chain(smooth.series_coeffs.iter()) {
        if !v.is_finite() {
            return Err(Error::Numeric {
                message: format!("non-finite coefficient for atom ({alpha}, {j})"),
                condition_estimate: f64::INFINITY,
            });
        }
    }
    Ok(LogPolyExpansion {
        s: *s,
        atom: *atom,
        a,
        resonant: i_star.is_some(),
        i_star,
        smooth,
    })
}

fn smooth_part(
    s: f64,
    alpha: f64,
    j: usize,
    i_star: Option<usize>,
    c_s: f64,
    trunc_tol: f64,
    extra_power: Option<ExtraPower>,
) -> SmoothPart {
    let two_s = 2.0 * s;
    let jfact: f64 = (1..=j).map(|v| v as f64).product();
    let mut coeffs = Vec::new();
    let mut c_i = 1.0;
    let mut tail_bound = 0.0;
    let min_len = (alpha - two_s).max(0.0).ceil() as usize + 8;
    for i in 0..2000usize {
        if i > 0 {
            c_i *= (i as f64 + two_s) / i as f64;
        }
        let coeff = if Some(i) == i_star {
            0.0
        } else {
            let e = two_s - alpha + i as f64;
            c_s * jfact * c_i / e.powi(j as i32 + 1)
        };
        let bound = coeff.abs() * 0.5f64.powi(i as i32);
        if i >= min_len && bound * 10.0 < trunc_tol {
            // ratio of consecutive bounds tends to 1/2, so the dropped sum is below 4 × the first dropped term
            tail_bound = 4.0 * bound;
            break;
        }
        coeffs.push(coeff);
    }
    SmoothPart {
        truncation_index: coeffs.len(),
        series_coeffs: coeffs,
        tail_bound,
        extra_power,
        boundary_term: if j == 0 {
            BoundaryTerm::PowerMinusTwoS { coeff: -c_s / two_s }
        } else {
            BoundaryTerm::None
        },
        valid_interval: [0.0, 0.5],
        two_s,
    }
}

/// x^{α-2s} Σ_k a^{(k)} log^k x + f_{α,j}(x) for 0 < x < 1/2.
pub fn expansion_eval(exp: &LogPolyExpansion, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 0.5) {
        return Err(Error::domain(format!("expansion valid only on (0, 1/2), got x = {x}")));
    }
    Ok(x.powf(exp.singular_exponent()) * exp.log_poly(x) + exp.smooth.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> FractionalOrder {
        FractionalOrder::rational(n, d).unwrap()
    }

    #[test]
    fn atom_examples() {
        let a10 = PowerLogAtom::new(1.0, 0).unwrap();
        assert_eq!(atom_eval(&a10, 0.25), 0.25);
        assert_eq!(atom_eval(&a10, 3.0), 1.0);
        assert_eq!(atom_eval(&PowerLogAtom::new(2.5, 3).unwrap(), -1.0), 0.0);
        assert_eq!(atom_eval(&PowerLogAtom::new(2.5, 3).unwrap(), 2.0), 0.0);
        let v = atom_eval(&PowerLogAtom::new(2.0, 1).unwrap(), 0.5);
        assert!((v - 0.25 * 0.5f64.ln()).abs() < 1e-15);
        assert!(PowerLogAtom::new(0.0, 0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let a10 = PowerLogAtom::new(1.0, 0).unwrap();
        assert_eq!(atom_deriv(&a10, 0.3, 2).unwrap(), 0.0);
        let a = PowerLogAtom::new(2.7, 0).unwrap();
        let x = 0.4;
        let d2 = atom_deriv(&a, x, 2).unwrap();
        assert!((d2 - 2.7 * 1.7 * x.powf(0.7)).abs() < 1e-14);
        let b = PowerLogAtom::new(2.0, 1).unwrap();
        let h = 1e-5;
        let fd = (atom_eval(&b, 0.5 + h) - 2.0 * atom_eval(&b, 0.5) + atom_eval(&b, 0.5 - h)) / (h * h);
        let exact = atom_deriv(&b, 0.5, 2).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-6);
        assert!(atom_deriv(&b, 0.5, 4).is_err());
        assert!(atom_deriv(&b, 0.5, 0).is_err());
    }

    #[test]
    fn third_derivative_of_log_atom() {
        let b = PowerLogAtom::new(3.3, 2).unwrap();
        let x = 0.3;
        let h = 1e-4;
        let d2 = |y: f64| atom_deriv(&b, y, 2).unwrap();
        let fd = (d2(x + h) - d2(x - h)) / (2.0 * h);
        let exact = atom_deriv(&b, x, 3).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn binomial_and_pochhammer() {
        assert_eq!(generalized_binomial(1.3, 0), 1.0);
        assert_eq!(generalized_binomial(3.0, 2), 3.0);
        assert!((generalized_binomial(2.5, 2) - 1.875).abs() < 1e-15);
        assert_eq!(generalized_binomial(7.0, 3), 35.0);
        assert_eq!(pochhammer_falling(5, 0).unwrap(), 1);
        assert_eq!(pochhammer_falling(5, 1).unwrap(), 5);
        assert_eq!(pochhammer_falling(4, 3).unwrap(), 24);
        assert!(pochhammer_falling(2, 3).is_err());
    }

    #[test]
    fn pv_integral_special_values() {
        for s in [0.1, 0.5, 0.9] {
            assert!(pv_one_minus_power(s, 1.0).unwrap().abs() < 1e-13);
            assert!(pv_one_minus_power(s, 0.0).unwrap().abs() < 1e-15);
        }
        assert!(pv_power_log(0.3, 1.0, 0).is_err());
        assert!(pv_one_minus_power(1.2, 1.0).is_err());
    }

    #[test]
    fn pv_integral_goldens() {
        let v1 = pv_one_minus_power(0.25, 2.0).unwrap();
        assert!((v1 + 4.0 / 3.0).abs() < 1e-12, "{v1}");
        let v2 = pv_power_log(0.3, 1.6, 1).unwrap();
        assert!((v2 - 1.552_360_142_589_021_6).abs() < 1e-11, "{v2}");
        let v3 = pv_power_log(0.5, 1.0, 2).unwrap();
        assert!((v3 - 1.870_296_592_178_986_5).abs() < 1e-11, "{v3}");
    }

    #[test]
    fn closed_form_quarter() {
        let s = rat(1, 4);
        let e = fractional_expansion(&s, &PowerLogAtom::exact(Ratio::from_integer(1), 0).unwrap(), DEFAULT_TRUNC_TOL).unwrap();
        let c = normalization_constant(0.25).unwrap();
        let a0 = c / (0.5 * 0.5);
        assert!(!e.resonant);
        assert!(((e.a[0] - a0) / a0).abs() < 1e-10);
        assert_eq!(e.a[1], 0.0);
        for x in [0.0f64, 0.1, 0.3, 0.45] {
            let f = -a0 * (1.0 - x).powf(0.5);
            assert!((e.smooth.eval(x) - f).abs() < 1e-8, "x = {x}");
        }
        let x = 0.25;
        let expect = a0 * (0.25f64.sqrt() - 0.75f64.sqrt());
        assert!((expansion_eval(&e, x).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn closed_form_half_resonant() {
        let s = rat(1, 2);
        let e = fractional_expansion(&s, &PowerLogAtom::exact(Ratio::from_integer(1), 0).unwrap(), DEFAULT_TRUNC_TOL).unwrap();
        assert!(e.resonant);
        assert_eq!(e.i_star, Some(0));
        assert_eq!(e.a[0], 0.0);
        assert!((e.a[1] - 1.0 / std::f64::consts::PI).abs() < 1e-10);
        for x in [0.0f64, 0.2, 0.45] {
            let f = -(-x).ln_1p() / std::f64::consts::PI;
            assert!((e.smooth.eval(x) - f).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn resonant_top_coefficient_formula() {
        let s = rat(1, 4);
        for (num, den, j) in [(5i64, 2i64, 0u32), (5, 2, 2), (7, 2, 1)] {
            let atom = PowerLogAtom::exact(Ratio::new(num, den), j).unwrap();
            let e = fractional_expansion(&s, &atom, DEFAULT_TRUNC_TOL).unwrap();
            let is = e.i_star.unwrap();
            let c = normalization_constant(0.25).unwrap() * generalized_binomial(is as f64 + 0.5, is as u32);
            let mut sum = 0.0;
            for l in 0..=j {
                let sign = if (j - l) % 2 == 0 { 1.0 } else { -1.0 };
                sum += integer_binomial(j as usize, l as usize) * sign / ((j - l) as f64 + 1.0);
            }
            let expect = c * sum;
            let got = e.a[j as usize + 1];
            assert!(((got - expect) / expect).abs() < 1e-12, "({num}/{den}, {j})");
            assert_eq!(e.a[0], 0.0);
        }
    }

    #[test]
    fn near_resonance_in_float_mode() {
        let s = FractionalOrder::new(0.375).unwrap();
        let atom = PowerLogAtom::new(3.0 * 1.25 + 1.0, 0).unwrap();
        match fractional_expansion(&s, &atom, DEFAULT_TRUNC_TOL) {
            Err(Error::NearResonance { index, .. }) => assert_eq!(index, 4),
            other => panic!("expected near-resonance, got {other:?}"),
        }
    }

    #[test]
    fn domain_of_eval() {
        let s = rat(1, 4);
        let e = fractional_expansion(&s, &PowerLogAtom::new(1.7, 1).unwrap(), DEFAULT_TRUNC_TOL).unwrap();
        assert!(expansion_eval(&e, 0.0).is_err());
        assert!(expansion_eval(&e, 0.5).is_err());
        assert!(expansion_eval(&e, 0.2).is_ok());
    }

    #[test]
    fn zero_expansion_evaluates_to_zero() {
        let s = rat(1, 4);
        let mut e = fractional_expansion(&s, &PowerLogAtom::new(1.7, 1).unwrap(), DEFAULT_TRUNC_TOL).unwrap();
        e.a.iter_mut().for_each(|v| *v = 0.0);
        e.smooth.series_coeffs.iter_mut().for_each(|v| *v = 0.0);
        for x in [1e-4, 0.1, 0.4] {
            assert_eq!(expansion_eval(&e, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn json_record_round_trips() {
        let s = FractionalOrder::new(0.3).unwrap();
        let e = fractional_expansion(&s, &PowerLogAtom::new(2.2, 1).unwrap(), DEFAULT_TRUNC_TOL).unwrap();
        let text = serde_json::to_string(&e.record()).unwrap();
        let back: ExpansionRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e.record());
        let v = e.to_json();
        for key in ["s", "alpha", "j", "resonant", "i_star", "a", "series_coeffs", "extra_power", "boundary_term", "tail_bound"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
