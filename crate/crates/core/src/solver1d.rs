//! Dirichlet problem p(-u'') + q L_k u + g u' = f on (0, 1) with u = 0
//! outside, discretized by collocation at grid nodes.
//!
//! The nonlocal part integrates the piecewise-linear interpolant of the nodal
//! values against the kernel cell by cell. On the symmetric window
//! |z| < min(h_l, h_r) around the node the interpolant is replaced by its
//! quadratic (second difference), which keeps the principal value finite for
//! every s.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{adaptive, geometric_breaks, gl16};
use crate::kernels::KernelSpec;
use crate::pv_quadrature::{lk_apply, GlobalFunction, QuadratureParams, Support};
use crate::regularity::{dist, full_report, graded_samples, grid_derivatives, NormParams, NormReport, SampledFunction};
use crate::util::NeumaierSum;

pub type Coef = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn constant(c: f64) -> Coef {
    Arc::new(move |_| c)
}

#[derive(Clone)]
pub struct Problem1D {
    pub p_fn: Coef,
    pub q_fn: Coef,
    pub g_fn: Coef,
    pub f_fn: Coef,
    pub kernel: KernelSpec,
    pub p_min: f64,
}

impl std::fmt::Debug for Problem1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem1D")
            .field("kernel", &self.kernel)
            .field("p_min", &self.p_min)
            .finish()
    }
}

impl Problem1D {
    pub fn new(kernel: KernelSpec, p: Coef, q: Coef, g: Coef, f: Coef, p_min: f64) -> Result<Self> {
        if !(p_min > 0.0) {
            return Err(Error::Model(format!("p_min = {p_min} must be positive")));
        }
        Ok(Problem1D {
            p_fn: p,
            q_fn: q,
            g_fn: g,
            f_fn: f,
            kernel,
            p_min,
        })
    }

    /// Constant p, q, g with p_min = p.
    pub fn constant_coeffs(kernel: KernelSpec, p: f64, q: f64, g: f64, f: Coef) -> Result<Self> {
        Self::new(kernel, constant(p), constant(q), constant(g), f, p)
    }

    pub fn with_rhs(&self, f: Coef) -> Self {
        Problem1D { f_fn: f, ..self.clone() }
    }
}

/// u*(x) = x(1 - x) on (0, 1), zero outside.
pub fn parabola() -> GlobalFunction {
    GlobalFunction::new(|x| x * (1.0 - x))
        .with_support(Support {
            lo: 0.0,
            hi: 1.0,
            left: 0.0,
            right: 0.0,
        })
        .with_deriv(|x, n| match n {
            0 => x * (1.0 - x),
            1 => 1.0 - 2.0 * x,
            2 => -2.0,
            _ => 0.0,
        })
}

/// Right-hand side 2p + q L_k u* + g u*' with L_k u* from the quadrature oracle.
pub fn manufactured_rhs(kernel: &KernelSpec, p: Coef, q: Coef, g: Coef, params: QuadratureParams) -> Coef {
    let u = parabola();
    let kernel = kernel.clone();
    Arc::new(move |x: f64| {
        let l = lk_apply(&kernel, &u, x, &params).map(|v| v.value).unwrap_or(f64::NAN);
        2.0 * p(x) + q(x) * l + g(x) * (1.0 - 2.0 * x)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    Graded { strength: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub nodes: Vec<f64>,
    pub kind: GridKind,
    pub h_min: f64,
    pub h_max: f64,
}

impl Grid1D {
    /// Interior nodes i/n, i = 1..n-1.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("need at least 2 intervals, got {n}")));
        }
        Self::from_nodes((1..n).map(|i| i as f64 / n as f64).collect(), GridKind::Uniform)
    }

    /// x_i = (i/n)^β / 2^{1-β}... mirrored: nodes cluster like (i/N)^β at both ends.
    pub fn graded(n: usize, strength: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::domain(format!("graded grid needs an even n >= 4, got {n}")));
        }
        if !(strength >= 1.0) {
            return Err(Error::domain(format!("grading strength {strength} must be >= 1")));
        }
        let half = n / 2;
        let mut nodes: Vec<f64> = (1..=half).map(|i| 0.5 * (i as f64 / half as f64).powf(strength)).collect();
        let mirror: Vec<f64> = nodes[..half - 1].iter().rev().map(|x| 1.0 - x).collect();
        nodes.extend(mirror);
        Self::from_nodes(nodes, GridKind::Graded { strength })
    }

    pub fn from_nodes(nodes: Vec<f64>, kind: GridKind) -> Result<Self> {
        if nodes.is_empty() || nodes.iter().any(|x| !(*x > 0.0 && *x < 1.0)) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("grid nodes must be strictly increasing inside (0, 1)"));
        }
        let pts = full_points(&nodes);
        let widths = pts.windows(2).map(|w| w[1] - w[0]);
        let (h_min, h_max) = widths.fold((f64::INFINITY, 0.0f64), |(a, b), h| (a.min(h), b.max(h)));
        Ok(Grid1D {
            nodes,
            kind,
            h_min,
            h_max,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// 0, nodes, 1.
    pub fn points(&self) -> Vec<f64> {
        full_points(&self.nodes)
    }
}

fn full_points(nodes: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(nodes.len() + 2);
    pts.push(0.0);
    pts.extend_from_slice(nodes);
    pts.push(1.0);
    pts
}

/// Tridiagonal matrix stored by diagonals; sub[0] and sup[n-1] are unused.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiag {
    fn zeros(n: usize) -> Self {
        Tridiag {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * u[i];
                if i > 0 {
                    v += self.sub[i] * u[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * u[i + 1];
                }
                v
            })
            .collect()
    }

    /// Thomas algorithm.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let a = if i > 0 { self.sub[i] } else { 0.0 };
            let denom = self.diag[i] - if i > 0 { a * c[i - 1] } else { 0.0 };
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Numeric {
                    message: "zero pivot in tridiagonal solve".into(),
                    condition_estimate: f64::INFINITY,
                });
            }
            c[i] = if i + 1 < n { self.sup[i] / denom } else { 0.0 };
            d[i] = (rhs[i] - if i > 0 { a * d[i - 1] } else { 0.0 }) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    fn add_to(&self, a: &mut DMatrix<f64>, row_scale: &[f64]) {
        let n = self.diag.len();
        for i in 0..n {
            a[(i, i)] += row_scale[i] * self.diag[i];
            if i > 0 {
                a[(i, i - 1)] += row_scale[i] * self.sub[i];
            }
            if i + 1 < n {
                a[(i, i + 1)] += row_scale[i] * self.sup[i];
            }
        }
    }
}

/// Pieces of A = diag(p) Lap + diag(q) K + G.
#[derive(Debug, Clone)]
pub struct OperatorParts {
    pub lap: Tridiag,
    pub nonlocal: DMatrix<f64>,
    pub grad: Tridiag,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub upwind_rows: usize,
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub a: DMatrix<f64>,
    pub f: DVector<f64>,
    pub parts: OperatorParts,
}

/// ∫_a^b t^e dt for 0 < a < b.
fn power_integral(a: f64, b: f64, e: f64) -> f64 {
    let l = (b / a).ln();
    if e == -1.0 {
        l
    } else {
        let k = e + 1.0;
        a.powf(k) * (k * l).exp_m1() / k
    }
}

/// (∫ k, ∫ t k) over t ∈ [a, b], 0 < a < b.
fn kernel_moments(kernel: &KernelSpec, a: f64, b: f64) -> (f64, f64) {
    if kernel.is_fractional_exact() {
        let s = kernel.s();
        let c = kernel.c_s();
        return (c * power_integral(a, b, -1.0 - 2.0 * s), c * power_integral(a, b, -2.0 * s));
    }
    let rule = gl16();
    let (mut m0, mut m1) = (0.0, 0.0);
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        m0 += rule.integrate(&|t| kernel.eval(t), lo, hi).0;
        m1 += rule.integrate(&|t| t * kernel.eval(t), lo, hi).0;
        lo = hi;
    }
    (m0, m1)
}

/// Row i (full-point index, 1..=n) of the nonlocal matrix over the unknowns.
fn nonlocal_row(kernel: &KernelSpec, pts: &[f64], i: usize) -> Vec<f64> {
    let n = pts.len() - 2;
    let mut row = vec![NeumaierSum::default(); n + 2];
    let x = pts[i];
    let (hl, hr) = (x - pts[i - 1], pts[i + 1] - x);
    let hm = hl.min(hr);
    let c = kernel.second_moment(hm) * 2.0 / (hl + hr);
    row[i].add(c * (1.0 / hl + 1.0 / hr));
    row[i - 1].add(-c / hl);
    row[i + 1].add(-c / hr);
    if hr > hl {
        let m1 = kernel_moments(kernel, hm, hr).1;
        row[i].add(m1 / hr);
        row[i + 1].add(-m1 / hr);
    } else if hl > hr {
        let m1 = kernel_moments(kernel, hm, hl).1;
        row[i].add(m1 / hl);
        row[i - 1].add(-m1 / hl);
    }
    let mut cell = |near: usize, far: usize, ta: f64, tb: f64| {
        let (m0, m1) = kernel_moments(kernel, ta, tb);
        let h = tb - ta;
        row[i].add(m0);
        row[near].add(-(tb * m0 - m1) / h);
        row[far].add(-(m1 - ta * m0) / h);
    };
    for j in i + 1..=n {
        cell(j, j + 1, pts[j] - x, pts[j + 1] - x);
    }
    for j in (1..i).rev() {
        cell(j, j - 1, x - pts[j], x - pts[j - 1]);
    }
    row[i].add(kernel.tail_mass(x) + kernel.tail_mass(1.0 - x));
    row[1..=n].iter().map(|v| v.sum()).collect()
}

pub fn assemble(problem: &Problem1D, grid: &Grid1D) -> Result<OperatorMatrix> {
    let pts = grid.points();
    let n = grid.len();
    let p: Vec<f64> = grid.nodes.iter().map(|x| (problem.p_fn)(*x)).collect();
    let q: Vec<f64> = grid.nodes.iter().map(|x| (problem.q_fn)(*x)).collect();
    let g: Vec<f64> = grid.nodes.iter().map(|x| (problem.g_fn)(*x)).collect();
    for (i, x) in grid.nodes.iter().enumerate() {
        if !(p[i] >= problem.p_min) {
            return Err(Error::Model(format!("p({x}) = {} below p_min = {}", p[i], problem.p_min)));
        }
        if !(q[i] >= 0.0) {
            return Err(Error::Model(format!("q({x}) = {} is negative", q[i])));
        }
        if !g[i].is_finite() {
            return Err(Error::Model(format!("g({x}) is not finite")));
        }
    }
    let mut lap = Tridiag::zeros(n);
    let mut grad = Tridiag::zeros(n);
    let mut upwind_rows = 0;
    for k in 0..n {
        let i = k + 1;
        let (hl, hr) = (pts[i] - pts[i - 1], pts[i + 1] - pts[i]);
        lap.sub[k] = -2.0 / (hl * (hl + hr));
        lap.diag[k] = 2.0 / (hl * hr);
        lap.sup[k] = -2.0 / (hr * (hl + hr));
        let gk = g[k];
        if gk.abs() * hl.max(hr) > 2.0 * p[k] {
            upwind_rows += 1;
            if gk > 0.0 {
                grad.diag[k] = gk / hl;
                grad.sub[k] = -gk / hl;
            } else {
                grad.diag[k] = -gk / hr;
                grad.sup[k] = gk / hr;
            }
        } else {
            grad.sub[k] = -gk * hr / (hl * (hl + hr));
            grad.diag[k] = gk * (hr - hl) / (hl * hr);
            grad.sup[k] = gk * hl / (hr * (hl + hr));
        }
    }
    let nonlocal = if q.iter().any(|v| *v != 0.0) {
        let rows: Vec<Vec<f64>> = (1..=n).into_par_iter().map(|i| nonlocal_row(&problem.kernel, &pts, i)).collect();
        DMatrix::from_fn(n, n, |r, c| rows[r][c])
    } else {
        DMatrix::zeros(n, n)
    };
    let mut a = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] = q[r] * nonlocal[(r, c)];
        }
    }
    lap.add_to(&mut a, &p);
    grad.add_to(&mut a, &vec![1.0; n]);
    let fv: Vec<f64> = grid.nodes.par_iter().map(|x| (problem.f_fn)(*x)).collect();
    if let Some(i) = fv.iter().position(|v| !v.is_finite()) {
        return Err(Error::Model(format!("right-hand side not finite at x = {}", grid.nodes[i])));
    }
    Ok(OperatorMatrix {
        a,
        f: DVector::from_vec(fv),
        parts: OperatorParts {
            lap,
            nonlocal,
            grad,
            p,
            q,
            upwind_rows,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub method: String,
    pub iterations: usize,
    pub residual_norm: f64,
    pub condition_estimate: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution1D {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
    pub stats: SolverStats,
}

impl Solution1D {
    fn new(nodes: Vec<f64>, values: Vec<f64>, stats: SolverStats) -> Self {
        let (du, d2u) = grid_derivatives(&nodes, &values);
        Solution1D {
            nodes,
            values,
            du,
            d2u,
            stats,
        }
    }

    /// Piecewise-linear interpolant, zero outside (0, 1).
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let k = self.nodes.partition_point(|n| *n < x);
        let (xl, ul) = if k == 0 { (0.0, 0.0) } else { (self.nodes[k - 1], self.values[k - 1]) };
        let (xr, ur) = if k == self.nodes.len() { (1.0, 0.0) } else { (self.nodes[k], self.values[k]) };
        ul + (ur - ul) * (x - xl) / (xr - xl)
    }

    pub fn sampled(&self) -> Result<SampledFunction> {
        SampledFunction::from_grid(self.nodes.clone(), self.values.clone())
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn matrix_inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Factored operator reusable across right-hand sides.
pub struct Factored {
    lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub a: DMatrix<f64>,
    pub condition_estimate: f64,
}

impl Factored {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let lu = a.clone().lu();
        let probes = [DVector::from_element(n, 1.0), DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 })];
        let mut inv = 0.0f64;
        for p in &probes {
            match lu.solve(p) {
                Some(x) if x.iter().all(|v| v.is_finite()) => inv = inv.max(inf_norm(&x)),
                _ => {
                    return Err(Error::Numeric {
                        message: "matrix is singular".into(),
                        condition_estimate: f64::INFINITY,
                    })
                }
            }
        }
        let cond = matrix_inf_norm(a) * inv;
        if !(cond < 1e15) {
            return Err(Error::Numeric {
                message: "matrix is singular to working precision".into(),
                condition_estimate: cond,
            });
        }
        Ok(Factored {
            lu,
            a: a.clone(),
            condition_estimate: cond,
        })
    }

    /// LU solve followed by up to three refinement sweeps on an error-free residual.
    pub fn solve(&self, f: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let fail = || Error::Numeric {
            message: "LU solve failed".into(),
            condition_estimate: self.condition_estimate,
        };
        let mut u = self.lu.solve(f).ok_or_else(fail)?;
        let mut r = exact_residual(&self.a, &u, f);
        let mut res = inf_norm(&r);
        for _ in 0..3 {
            if res == 0.0 {
                break;
            }
            let du = self.lu.solve(&r).ok_or_else(fail)?;
            let cand = &u + du;
            let rc = exact_residual(&self.a, &cand, f);
            let rn = inf_norm(&rc);
            if rn >= res {
                break;
            }
            u = cand;
            r = rc;
            res = rn;
        }
        Ok((u, res))
    }
}

/// f - A u with each product split exactly by fma and compensated summation.
fn exact_residual(a: &DMatrix<f64>, u: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|i| {
            let mut acc = NeumaierSum::default();
            acc.add(f[i]);
            for j in 0..a.ncols() {
                let p = a[(i, j)] * u[j];
                acc.add(-p);
                acc.add(-a[(i, j)].mul_add(u[j], -p));
            }
            acc.sum()
        }),
    )
}

pub fn solve_direct(problem: &Problem1D, grid: &Grid1D) -> Result<Solution1D> {
    let op = assemble(problem, grid)?;
    solve_assembled(&op, grid)
}

pub fn solve_assembled(op: &OperatorMatrix, grid: &Grid1D) -> Result<Solution1D> {
    let fac = Factored::new(&op.a)?;
    let (u, res) = fac.solve(&op.f)?;
    if res > 1e-10 * inf_norm(&op.f).max(f64::MIN_POSITIVE) {
        log::warn!("direct solve residual {res:.3e} above 1e-10 relative");
    }
    Ok(Solution1D::new(
        grid.nodes.clone(),
        u.iter().copied().collect(),
        SolverStats {
            method: "direct".into(),
            iterations: 1,
            residual_norm: res,
            condition_estimate: fac.condition_estimate,
            history: Vec::new(),
        },
    ))
}

pub const FIXED_POINT_TOL: f64 = 1e-10;

/// u ← (1-θ)u + θ Lap⁻¹[(f - G u - q K u)/p], stopping at the first n with
/// ‖u_{n+1} - u_n‖_∞ ≤ 1e-10.
pub fn solve_fixed_point(problem: &Problem1D, grid: &Grid1D, damping: f64, max_iter: usize) -> Result<Solution1D> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::domain(format!("damping {damping} not in (0, 1]")));
    }
    let op = assemble(problem, grid)?;
    let parts = &op.parts;
    let n = grid.len();
    let f: Vec<f64> = op.f.iter().copied().collect();
    let map = |u: &[f64]| -> Result<Vec<f64>> {
        let gu = parts.grad.apply(u);
        let ku = &parts.nonlocal * DVector::from_column_slice(u);
        let rhs: Vec<f64> = (0..n).map(|i| (f[i] - gu[i] - parts.q[i] * ku[i]) / parts.p[i]).collect();
        parts.lap.solve(&rhs)
    };
    let mut u = vec![0.0; n];
    let mut next = map(&u)?;
    let mut history = Vec::new();
    for it in 0..max_iter {
        for i in 0..n {
            next[i] = (1.0 - damping) * u[i] + damping * next[i];
        }
        let change = u.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if it > 0 {
            history.push(change);
            if change <= FIXED_POINT_TOL {
                let uv = DVector::from_vec(next.clone());
                let res = inf_norm(&(&op.a * &uv - &op.f));
                return Ok(Solution1D::new(
                    grid.nodes.clone(),
                    next,
                    SolverStats {
                        method: "fixed_point".into(),
                        iterations: it,
                        residual_norm: res,
                        condition_estimate: f64::NAN,
                        history,
                    },
                ));
            }
        }
        if !change.is_finite() {
            break;
        }
        u = next;
        next = map(&u)?;
    }
    Err(Error::FixedPointDiverged { history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub min_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub trials: usize,
    pub all_nonnegative: bool,
    pub min_over_trials: f64,
    pub violations: Vec<Violation>,
}

/// Random non-negative right-hand side: up to three Gaussian bumps with
/// non-negative heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bumps {
    pub height: [f64; 3],
    pub center: [f64; 3],
    pub width: [f64; 3],
}

impl Bumps {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut b = Bumps {
            height: [0.0; 3],
            center: [0.0; 3],
            width: [0.0; 3],
        };
        for k in 0..3 {
            b.height[k] = rng.gen_range(0.0..1.0);
            b.center[k] = rng.gen_range(0.0..1.0);
            b.width[k] = rng.gen_range(0.02..0.3);
        }
        b
    }

    pub fn eval(&self, x: f64) -> f64 {
        (0..3)
            .map(|k| self.height[k] * (-((x - self.center[k]) / self.width[k]).powi(2)).exp())
            .sum()
    }
}

pub const NONNEGATIVE_TOL: f64 = 1e-10;

/// Solves with `trials` seeded random non-negative right-hand sides (the
/// problem's own f is ignored) and checks min u ≥ -1e-10.
pub fn comparison_check(problem: &Problem1D, grid: &Grid1D, trials: usize, seed: u64) -> Result<ComparisonReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<Bumps> = (0..trials).map(|_| Bumps::random(&mut rng)).collect();
    let op = assemble(&problem.with_rhs(constant(0.0)), grid)?;
    let fac = Factored::new(&op.a)?;
    let mins: Vec<f64> = bumps
        .par_iter()
        .map(|b| {
            let f = DVector::from_iterator(grid.len(), grid.nodes.iter().map(|x| b.eval(*x)));
            fac.solve(&f).map(|(u, _)| u.iter().copied().fold(f64::INFINITY, f64::min))
        })
        .collect::<Result<_>>()?;
    let violations: Vec<Violation> = mins
        .iter()
        .enumerate()
        .filter(|(_, m)| **m < -NONNEGATIVE_TOL)
        .map(|(trial, m)| Violation { trial, min_u: *m })
        .collect();
    Ok(ComparisonReport {
        trials,
        all_nonnegative: violations.is_empty(),
        min_over_trials: mins.iter().copied().fold(f64::INFINITY, f64::min),
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGrowth {
    pub u_plus_c01: f64,
    pub f_plus_sup: f64,
    pub c01_norm_over_fplus: f64,
    pub inconsistent: bool,
}

/// max u_+/d over nodes divided by max f_+.
pub fn linear_growth_check(solution: &Solution1D, f: &[f64]) -> LinearGrowth {
    let u_plus_c01 = solution
        .nodes
        .iter()
        .zip(&solution.values)
        .map(|(x, u)| u.max(0.0) / dist(*x))
        .fold(0.0, f64::max);
    let f_plus_sup = f.iter().fold(0.0f64, |m, v| m.max(*v));
    let inconsistent = f_plus_sup == 0.0 && u_plus_c01 > 0.0;
    LinearGrowth {
        u_plus_c01,
        f_plus_sup,
        c01_norm_over_fplus: if f_plus_sup > 0.0 {
            u_plus_c01 / f_plus_sup
        } else if inconsistent {
            f64::INFINITY
        } else {
            0.0
        },
        inconsistent,
    }
}

/// M-matrix probe results for an assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixStructure {
    pub min_diagonal: f64,
    pub max_off_diagonal: f64,
    pub min_row_sum: f64,
    pub strict_rows: usize,
    pub min_inverse_probe: f64,
    pub is_m_matrix: bool,
}

/// Sign structure, diagonal dominance, and min entry of A⁻¹e_i over `probes` columns.
pub fn matrix_structure(a: &DMatrix<f64>, probes: &[usize]) -> Result<MatrixStructure> {
    let n = a.nrows();
    let mut min_diagonal = f64::INFINITY;
    let mut max_off = f64::NEG_INFINITY;
    let mut min_row_sum = f64::INFINITY;
    let mut strict_rows = 0;
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j {
                max_off = max_off.max(a[(i, j)]);
                off += a[(i, j)].abs();
            }
        }
        min_diagonal = min_diagonal.min(a[(i, i)]);
        let sum: f64 = a.row(i).iter().sum();
        min_row_sum = min_row_sum.min(sum);
        if a[(i, i)] > off {
            strict_rows += 1;
        }
    }
    let fac = Factored::new(a)?;
    let mut min_inv = f64::INFINITY;
    for &p in probes {
        let mut e = DVector::zeros(n);
        e[p.min(n - 1)] = 1.0;
        let (x, _) = fac.solve(&e)?;
        min_inv = min_inv.min(x.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(MatrixStructure {
        min_diagonal,
        max_off_diagonal: max_off,
        min_row_sum,
        strict_rows,
        min_inverse_probe: min_inv,
        is_m_matrix: min_diagonal > 0.0 && max_off <= 1e-12 && min_row_sum >= -1e-9 && strict_rows > 0 && min_inv >= -1e-12,
    })
}

/// Exact solution of -u'' = f with zero boundary values via the interval
/// Green's function, integrated with geometric refinement toward both ends.
#[derive(Clone)]
pub struct PoissonSolution {
    f: Coef,
}

const GREEN_TOL: f64 = 1e-14;

impl PoissonSolution {
    fn integral(&self, g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut pts = geometric_breaks(a, b, false, 1e-15 * (b - a));
        let right = geometric_breaks(a, b, true, 1e-15 * (b - a));
        pts.extend(right);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        let mut acc = NeumaierSum::default();
        for w in pts.windows(2) {
            let mut budget = 100_000;
            let r = adaptive(&g, w[0], w[1], GREEN_TOL, 1e-14, 1.0, &mut budget).unwrap_or_else(|p| p);
            acc.add(r.value);
        }
        acc.sum()
    }

    fn left(&self, x: f64) -> f64 {
        let f = self.f.clone();
        self.integral(&move |y| y * f(y), 0.0, x)
    }

    fn right(&self, x: f64) -> f64 {
        let f = self.f.clone();
        self.integral(&move |y| (1.0 - y) * f(y), x, 1.0)
    }

    pub fn u(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        (1.0 - x) * self.left(x) + x * self.right(x)
    }

    pub fn du(&self, x: f64) -> f64 {
        self.right(x) - self.left(x)
    }

    pub fn d2u(&self, x: f64) -> f64 {
        -(self.f)(x)
    }
}

pub struct WeightedPoissonResult {
    pub solution: PoissonSolution,
    pub samples: SampledFunction,
    pub norm_report: NormReport,
    pub f_norm: f64,
    pub ratio: f64,
}

/// Solves -u'' = f on (0, 1) for |f| ≤ M d^{-γ} and measures
/// ‖u‖_{C^{2,β}_{γ,★}} / ‖f‖_{C^β_γ} on `n_samples` graded points.
pub fn solve_weighted_poisson_1d(f: Coef, gamma: f64, beta: f64, envelope_m: f64, n_samples: usize) -> Result<WeightedPoissonResult> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma = {gamma} not in (0, 1)")));
    }
    let xs = graded_samples(n_samples, 1e-6);
    for x in &xs {
        let v = f(*x);
        if !(v.abs() <= envelope_m * dist(*x).powf(-gamma) * (1.0 + 1e-12)) {
            return Err(Error::Model(format!("|f({x})| = {} exceeds the envelope M d^-gamma", v.abs())));
        }
    }
    let sol = PoissonSolution { f: f.clone() };
    let vals: Vec<(f64, f64, f64)> = xs.par_iter().map(|x| (sol.u(*x), sol.du(*x), sol.d2u(*x))).collect();
    let samples = SampledFunction {
        d: xs.iter().map(|x| dist(*x)).collect(),
        values: vals.iter().map(|v| v.0).collect(),
        du: Some(vals.iter().map(|v| v.1).collect()),
        d2u: Some(vals.iter().map(|v| v.2).collect()),
        xs: xs.clone(),
        source: crate::regularity::Source::Analytic,
    };
    let params = NormParams::new(beta, gamma);
    let report = full_report(&samples, &params)?;
    let fs = SampledFunction::values_only(xs.clone(), xs.iter().map(|x| f(*x)).collect())?;
    let f_norm = crate::regularity::cbeta_gamma_norm(&fs, &params)?;
    Ok(WeightedPoissonResult {
        solution: sol,
        ratio: report.c2beta_gamma_star() / f_norm,
        norm_report: report,
        f_norm,
        samples,
    })
}
