//! Gauss-Legendre rules and a bisecting panel integrator.

use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1] by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut sum = 0.0;
        let mut abs = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(c + h * x);
            sum += w * v;
            abs += w * v.abs();
        }
        (sum * h, abs * h.abs())
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PanelSum {
    pub value: f64,
    pub error: f64,
    pub abs_value: f64,
    pub panels: usize,
}

impl PanelSum {
    pub fn add(&mut self, other: PanelSum) {
        self.value += other.value;
        self.error += other.error;
        self.abs_value += other.abs_value;
        self.panels += other.panels;
    }
}

/// Outcome of a budgeted integration: `Err` carries the partial sum when the budget ran out.
pub type Budgeted = std::result::Result<PanelSum, PanelSum>;

/// Adaptive bisection with GL16 on [a, b]. A panel is accepted when the
/// difference between the single-panel and two-half-panel estimates is below
/// `max(abs_tol * width / scale, rel_tol * |f|-integral)`.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    scale: f64,
    budget: &mut usize,
) -> Budgeted {
    adaptive_with_floor(f, a, b, abs_tol, rel_tol, scale, &|_, _| 0.0, budget)
}

/// As [`adaptive`], with `floor(lo, hi)` bounding the rounding noise of the
/// integrand on a panel; panels whose discrepancy is below it are accepted.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_with_floor<F: Fn(f64) -> f64, N: Fn(f64, f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    scale: f64,
    floor: &N,
    budget: &mut usize,
) -> Budgeted {
    let rule = gl16();
    let mut out = PanelSum::default();
    if a == b {
        return Ok(out);
    }
    if *budget == 0 {
        return Err(out);
    }
    let (v0, a0) = rule.integrate(f, a, b);
    *budget -= 1;
    out.panels += 1;
    let mut stack = vec![(a, b, v0, a0)];
    while let Some((lo, hi, coarse, _)) = stack.pop() {
        if *budget < 2 {
            out.value += coarse;
            out.error += coarse.abs();
            while let Some((_, _, c, ca)) = stack.pop() {
                out.value += c;
                out.error += c.abs();
                out.abs_value += ca;
            }
            return Err(out);
        }
        let mid = 0.5 * (lo + hi);
        let (vl, al) = rule.integrate(f, lo, mid);
        let (vr, ar) = rule.integrate(f, mid, hi);
        *budget -= 2;
        out.panels += 2;
        let fine = vl + vr;
        let fine_abs = al + ar;
        let err = (fine - coarse).abs();
        let width = (hi - lo).abs();
        let local_abs = abs_tol * width / scale.max(f64::MIN_POSITIVE);
        let tiny = width <= 1e-14 * lo.abs().max(hi.abs()).max(1e-300);
        if err <= local_abs.max(rel_tol * fine_abs).max(floor(lo, hi)) || tiny || !fine.is_finite() {
            out.value += fine;
            out.error += err;
            out.abs_value += fine_abs;
        } else {
            stack.push((mid, hi, vr, ar));
            stack.push((lo, mid, vl, al));
        }
    }
    Ok(out)
}

/// Points lo·r^k clustered geometrically (ratio 2) toward `toward`, which must
/// be one of the two endpoints; the innermost panel ends `min_width` away.
pub fn geometric_breaks(lo: f64, hi: f64, toward_hi: bool, min_width: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    let len = hi - lo;
    if len <= 0.0 {
        return vec![lo, hi];
    }
    let mut w = 0.5 * len;
    while w > min_width {
        pts.push(if toward_hi { hi - w } else { lo + w });
        w *= 0.5;
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1usize, 2, 5, 16, 33] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n = {n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_31() {
        let r = gl16();
        for deg in 0..32 {
            let (v, _) = r.integrate(&|x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let mut budget = 10_000;
        let r = adaptive(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-13, 1e-13, 1.0, &mut budget).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reports_budget_exhaustion() {
        let mut budget = 3;
        let r = adaptive(&|x: f64| 1.0 / x.abs().sqrt(), -1.0, 1.0, 1e-15, 1e-15, 1.0, &mut budget);
        assert!(r.is_err());
    }

    #[test]
    fn geometric_breaks_cluster() {
        let b = geometric_breaks(0.0, 1.0, false, 1e-3);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 1.0);
        assert!(b[1] < 2e-3);
    }
}
