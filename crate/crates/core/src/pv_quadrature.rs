//! Principal-value evaluation of L_k u(x) for globally defined 1D functions.
//!
//! The integral is split at ρ = fraction · dist(x, kinks). The inner part is
//! taken in symmetrized form with the quadratic Taylor term removed and added
//! back through the kernel's second moment; the outer part is cut at every
//! kink image and integrated panel by panel.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{adaptive_with_floor, geometric_breaks, Budgeted, PanelSum};
use crate::kernels::KernelSpec;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type DerivFn = Arc<dyn Fn(f64, u32) -> f64 + Send + Sync>;

/// Outside [lo, hi] the function equals `left` (x ≤ lo) or `right` (x ≥ hi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Clone)]
pub struct GlobalFunction {
    eval: RealFn,
    kinks: Vec<f64>,
    support: Option<Support>,
    deriv: Option<DerivFn>,
    pub smoothness_interior: u32,
}

impl fmt::Debug for GlobalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GlobalFunction")
            .field("kinks", &self.kinks)
            .field("support", &self.support)
            .field("has_deriv", &self.deriv.is_some())
            .finish()
    }
}

impl GlobalFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        GlobalFunction {
            eval: Arc::new(f),
            kinks: Vec::new(),
            support: None,
            deriv: None,
            smoothness_interior: 2,
        }
    }

    pub fn with_kinks(mut self, kinks: &[f64]) -> Self {
        self.kinks.extend_from_slice(kinks);
        self.normalize_kinks();
        self
    }

    /// Support endpoints become kinks.
    pub fn with_support(mut self, support: Support) -> Self {
        self.support = Some(support);
        self.kinks.push(support.lo);
        self.kinks.push(support.hi);
        self.normalize_kinks();
        self
    }

    pub fn with_deriv<D: Fn(f64, u32) -> f64 + Send + Sync + 'static>(mut self, d: D) -> Self {
        self.deriv = Some(Arc::new(d));
        self
    }

    fn normalize_kinks(&mut self) {
        self.kinks.retain(|k| k.is_finite());
        self.kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        self.kinks.dedup();
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if let Some(sp) = &self.support {
            if x <= sp.lo {
                return sp.left;
            }
            if x >= sp.hi {
                return sp.right;
            }
        }
        (self.eval)(x)
    }

    /// Derivative of the given order when a closed form was supplied.
    pub fn deriv(&self, x: f64, order: u32) -> Option<f64> {
        if let Some(sp) = &self.support {
            if x < sp.lo || x > sp.hi {
                return Some(0.0);
            }
        }
        self.deriv.as_ref().map(|d| d(x, order))
    }

    pub fn has_deriv(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn support(&self) -> Option<Support> {
        self.support
    }

    /// a·u + b·v; kinks are merged, supports combined when both are present.
    pub fn linear_combination(a: f64, u: &GlobalFunction, b: f64, v: &GlobalFunction) -> GlobalFunction {
        let (uu, vv) = (u.clone(), v.clone());
        let mut out = GlobalFunction::new(move |x| a * uu.eval(x) + b * vv.eval(x));
        out.kinks = u.kinks.iter().chain(v.kinks.iter()).copied().collect();
        out.normalize_kinks();
        if let (Some(su), Some(sv)) = (u.support, v.support) {
            out.support = Some(Support {
                lo: su.lo.min(sv.lo),
                hi: su.hi.max(sv.hi),
                left: a * su.left + b * sv.left,
                right: a * su.right + b * sv.right,
            });
        }
        if u.deriv.is_some() && v.deriv.is_some() {
            let (uu, vv) = (u.clone(), v.clone());
            out.deriv = Some(Arc::new(move |x, k| {
                a * uu.deriv(x, k).unwrap() + b * vv.deriv(x, k).unwrap()
            }));
        }
        out
    }

    /// x ↦ u(λx) for λ > 0.
    pub fn rescaled(&self, lambda: f64) -> GlobalFunction {
        assert!(lambda > 0.0);
        let u = self.clone();
        let mut out = GlobalFunction::new(move |x| u.eval(lambda * x));
        out.kinks = self.kinks.iter().map(|k| k / lambda).collect();
        out.support = self.support.map(|s| Support {
            lo: s.lo / lambda,
            hi: s.hi / lambda,
            ..s
        });
        if self.deriv.is_some() {
            let u = self.clone();
            out.deriv = Some(Arc::new(move |x, k| lambda.powi(k as i32) * u.deriv(lambda * x, k).unwrap()));
        }
        out
    }

    /// x ↦ u(x - t).
    pub fn shifted(&self, t: f64) -> GlobalFunction {
        let u = self.clone();
        let mut out = GlobalFunction::new(move |x| u.eval(x - t));
        out.kinks = self.kinks.iter().map(|k| k + t).collect();
        out.support = self.support.map(|s| Support {
            lo: s.lo + t,
            hi: s.hi + t,
            ..s
        });
        if self.deriv.is_some() {
            let u = self.clone();
            out.deriv = Some(Arc::new(move |x, k| u.deriv(x - t, k).unwrap()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub inner_radius_fraction: f64,
    pub max_panels: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            inner_radius_fraction: 0.5,
            max_panels: 200_000,
        }
    }
}

impl QuadratureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if !(self.inner_radius_fraction > 0.0 && self.inner_radius_fraction <= 1.0) {
            return Err(Error::domain("inner_radius_fraction must lie in (0, 1]"));
        }
        if self.max_panels < 64 {
            return Err(Error::domain("max_panels must be at least 64"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LkValue {
    pub value: f64,
    pub error_estimate: f64,
}

const INNER_LEVELS: i32 = 12;
const CLUSTER_DEPTH: f64 = 1e-12;
const NOISE: f64 = 64.0 * f64::EPSILON;
const FREE_TAIL_FACTOR: f64 = 1.099_511_627_776e12; // 2^40

/// p.v. ∫ (u(x) - u(x+z)) k(z) dz.
pub fn lk_apply(kernel: &KernelSpec, u: &GlobalFunction, x: f64, params: &QuadratureParams) -> Result<LkValue> {
    params.validate()?;
    if !x.is_finite() {
        return Err(Error::Precondition(format!("evaluation point {x} is not finite")));
    }
    let dist = u.kinks().iter().map(|k| (x - k).abs()).fold(f64::INFINITY, f64::min);
    if dist == 0.0 {
        return Err(Error::Precondition(format!("x = {x} coincides with a kink")));
    }
    let base = if dist.is_finite() { dist } else { 1.0 };
    let rho = params.inner_radius_fraction * base;
    let ux = u.eval(x);
    let mut budget = params.max_panels;
    let mut total = PanelSum::default();
    let abs_piece = params.abs_tol / 64.0;

    let u2 = match u.deriv(x, 2) {
        Some(v) => v,
        None => {
            let h = rho / 64.0;
            (u.eval(x + h) - 2.0 * ux + u.eval(x - h)) / (h * h)
        }
    };
    let inner = |z: f64| (2.0 * ux - u.eval(x + z) - u.eval(x - z) + u2 * z * z) * kernel.eval(z);
    let inner_floor = |lo: f64, hi: f64| {
        let size = 2.0 * ux.abs() + u.eval(x + hi).abs() + u.eval(x - hi).abs() + (u2 * hi * hi).abs();
        NOISE * size * kernel.eval(lo) * (hi - lo)
    };
    let mut b = rho;
    for _ in 0..INNER_LEVELS {
        let a = 0.5 * b;
        let r = adaptive_with_floor(&inner, a, b, abs_piece, params.rel_tol, b - a, &inner_floor, &mut budget);
        if !absorb(&mut total, r) {
            return Err(nonconvergence(total, params));
        }
        b = a;
    }
    let quad_part = -u2 * kernel.second_moment(rho);
    total.value += quad_part;
    total.abs_value += quad_part.abs();

    for dir in [1.0f64, -1.0] {
        outer_side(kernel, u, x, ux, rho, dir, params, abs_piece, &mut budget, &mut total)?;
    }

    let err = total.error;
    if !total.value.is_finite() {
        return Err(Error::Precondition(format!("non-finite integrand at x = {x}")));
    }
    Ok(LkValue {
        value: total.value,
        error_estimate: err,
    })
}

fn absorb(total: &mut PanelSum, r: Budgeted) -> bool {
    match r {
        Ok(p) => {
            total.add(p);
            true
        }
        Err(p) => {
            total.add(p);
            false
        }
    }
}

fn nonconvergence(total: PanelSum, params: &QuadratureParams) -> Error {
    Error::QuadratureNonConvergence {
        partial: total.value,
        error_estimate: total.error,
        panels: params.max_panels,
    }
}

#[allow(clippy::too_many_arguments)]
fn outer_side(
    kernel: &KernelSpec,
    u: &GlobalFunction,
    x: f64,
    ux: f64,
    rho: f64,
    dir: f64,
    params: &QuadratureParams,
    abs_piece: f64,
    budget: &mut usize,
    total: &mut PanelSum,
) -> Result<()> {
    let mut images: Vec<f64> = u
        .kinks()
        .iter()
        .map(|k| dir * (k - x))
        .filter(|z| *z > rho)
        .collect();
    images.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let (z_end, far_value) = match u.support() {
        Some(sp) => {
            let edge = if dir > 0.0 { sp.hi - x } else { x - sp.lo };
            let c = if dir > 0.0 { sp.right } else { sp.left };
            (edge.max(rho), c)
        }
        None => {
            let last = images.last().copied().unwrap_or(rho).max(rho).max(1.0);
            let z = last * FREE_TAIL_FACTOR;
            (z, u.eval(x + dir * z))
        }
    };
    images.retain(|z| *z < z_end);

    let mut knots = vec![rho];
    knots.extend(images.iter().copied());
    knots.push(z_end);
    let is_kink = |z: f64| images.contains(&z) || (u.support().is_some() && z == z_end);

    let f = |z: f64| (ux - u.eval(x + dir * z)) * kernel.eval(z);
    let floor = |lo: f64, hi: f64| NOISE * (ux.abs() + u.eval(x + dir * lo).abs()) * kernel.eval(lo) * (hi - lo);
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mut pts = dyadic(a, b);
        let ka = a != rho && is_kink(a);
        let kb = is_kink(b);
        let mut extra = Vec::new();
        if ka || kb {
            let m = 0.5 * (a + b);
            let first_hi = pts.iter().copied().find(|p| *p > a).unwrap_or(b).min(if kb { m } else { b });
            let last_lo = pts.iter().rev().copied().find(|p| *p < b).unwrap_or(a).max(if ka { m } else { a });
            if ka {
                extra.extend(geometric_breaks(a, first_hi, false, CLUSTER_DEPTH * a.abs().max(1.0)));
            }
            if kb {
                extra.extend(geometric_breaks(last_lo, b, true, CLUSTER_DEPTH * b.abs().max(1.0)));
            }
            if ka && kb {
                extra.push(m);
            }
        }
        pts.extend(extra);
        pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
        pts.dedup();
        for seg in pts.windows(2) {
            let r = adaptive_with_floor(&f, seg[0], seg[1], abs_piece, params.rel_tol, seg[1] - seg[0], &floor, budget);
            if !absorb(total, r) {
                return Err(nonconvergence(*total, params));
            }
        }
    }
    let tail = (ux - far_value) * kernel.tail_mass(z_end);
    total.value += tail;
    total.abs_value += tail.abs();
    if u.support().is_none() || !kernel.is_fractional_exact() {
        total.error += 1e-12 * tail.abs();
    }
    Ok(())
}

/// a, 2a, 4a, ... up to b.
fn dyadic(a: f64, b: f64) -> Vec<f64> {
    let mut pts = vec![a];
    let mut z = 2.0 * a;
    while z < b {
        pts.push(z);
        z *= 2.0;
    }
    pts.push(b);
    pts
}

pub fn lk_apply_batch(
    kernel: &KernelSpec,
    u: &GlobalFunction,
    xs: &[f64],
    params: &QuadratureParams,
) -> Vec<Result<LkValue>> {
    xs.par_iter().map(|&x| lk_apply(kernel, u, x, params)).collect()
}
