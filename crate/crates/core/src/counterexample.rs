//! Explicit solutions of -u'' + (-Δ)^s u = f on (0, 1/2) whose boundary
//! regularity is exactly the sharp class, built as finite sums of power-log
//! atoms
//!
//! u = Σ_n Σ_j b_{n,j} u_{α_n, j},   α_n = 2(1-s)n + 1,
//!
//! where level n cancels the singular part that level n-1 leaves in the
//! fractional Laplacian. For irrational s every level is non-resonant; for
//! s = num/den the levels with q | n+1 (2(1-s) = p/q) are resonant and raise
//! the log power by one.

use std::sync::Arc;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{FractionalOrder, KernelSpec, Regime};
use crate::powerlog::{atom_derivative, atom_eval, fractional_expansion, ExpansionRecord, LogPolyExpansion, PowerLogAtom};
use crate::pv_quadrature::{lk_apply, GlobalFunction, QuadratureParams, Support};
use crate::util::{least_squares, NeumaierSum};

/// coeff · x^exponent · log^log_power x
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingTerm {
    pub coeff: f64,
    pub exponent: f64,
    pub log_power: u32,
}

impl ForcingTerm {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeff * x.powf(self.exponent) * x.ln().powi(self.log_power as i32)
    }
}

/// One level of the construction: atoms (α, 0..=J) with coefficients b[j].
#[derive(Debug, Clone)]
struct Level {
    alpha: f64,
    exact_alpha: Option<Ratio<i64>>,
    b: Vec<f64>,
    expansions: Vec<LogPolyExpansion>,
}

#[derive(Debug, Clone)]
pub struct IrrationalConstruction {
    pub s: FractionalOrder,
    pub k_target: u32,
    pub m: usize,
    pub b: Vec<f64>,
    pub atoms: Vec<PowerLogAtom>,
    pub expansions: Vec<LogPolyExpansion>,
    pub residual_forcing: ForcingTerm,
}

#[derive(Debug, Clone)]
pub struct RationalConstruction {
    pub s: FractionalOrder,
    pub p: i64,
    pub q: i64,
    pub k_target: u32,
    pub m: usize,
    /// b[m][ℓ-1][j] for m = 0..=M, ℓ = 1..=q, j = 0..=m.
    pub b: Vec<Vec<Vec<f64>>>,
    /// Level order (n = mq - 1 + ℓ), log power ascending within a level.
    pub atoms: Vec<PowerLogAtom>,
    pub expansions: Vec<LogPolyExpansion>,
    pub residual_forcing: Vec<ForcingTerm>,
}

#[derive(Debug, Clone)]
pub enum Construction {
    Irrational(IrrationalConstruction),
    Rational(RationalConstruction),
}

/// M₁(k) = ⌈(k+1)/(2(1-s))⌉.
pub fn m1(s: f64, k: u32) -> usize {
    ((k as f64 + 1.0) / (2.0 * (1.0 - s)) - 1e-12).ceil() as usize
}

/// M₂(k) = ⌈(k+1)/(2(1-s)q)⌉ = ⌈(k+1)/p⌉.
pub fn m2(p: i64, k: u32) -> usize {
    ((k as i64 + 1 + p - 1) / p) as usize
}

fn level_alpha(s: &FractionalOrder, n: usize) -> (f64, Option<Ratio<i64>>) {
    match s.step_fraction() {
        Some((p, q)) => {
            let a = Ratio::from_integer(1) + Ratio::new(p * n as i64, q);
            (*a.numer() as f64 / *a.denom() as f64, Some(a))
        }
        None => (2.0 * (1.0 - s.value()) * n as f64 + 1.0, None),
    }
}

fn level_atoms(level: &Level) -> Result<Vec<PowerLogAtom>> {
    (0..level.b.len())
        .map(|j| match level.exact_alpha {
            Some(a) => PowerLogAtom::exact(a, j as u32),
            None => PowerLogAtom::new(level.alpha, j as u32),
        })
        .collect()
}

/// Singular coefficients that a level leaves at x^{α-2s} log^k x.
fn level_forcing(level: &Level) -> Vec<f64> {
    let resonant = level.expansions.iter().any(|e| e.resonant);
    let len = level.b.len() + usize::from(resonant);
    let mut acc = vec![NeumaierSum::default(); len];
    for (bj, e) in level.b.iter().zip(&level.expansions) {
        for (k, a) in e.a.iter().enumerate().take(len) {
            acc[k].add(bj * a);
        }
    }
    acc.iter().map(|v| v.sum()).collect()
}

/// Solves β(β-1) b_j + (2β-1)(j+1) b_{j+1} + (j+1)(j+2) b_{j+2} = F_j from the top.
fn solve_level(beta: f64, forcing: &[f64]) -> Vec<f64> {
    let n = forcing.len();
    let mut b = vec![0.0; n];
    for j in (0..n).rev() {
        let mut r = NeumaierSum::default();
        r.add(forcing[j]);
        if j + 1 < n {
            r.add(-(2.0 * beta - 1.0) * (j as f64 + 1.0) * b[j + 1]);
        }
        if j + 2 < n {
            r.add(-(j as f64 + 1.0) * (j as f64 + 2.0) * b[j + 2]);
        }
        b[j] = r.sum() / (beta * (beta - 1.0));
    }
    b
}

fn build_levels(s: &FractionalOrder, top: usize, trunc_tol: f64) -> Result<Vec<Level>> {
    let mut levels: Vec<Level> = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let (alpha, exact_alpha) = level_alpha(s, n);
        let b = if n == 0 {
            vec![1.0]
        } else {
            solve_level(alpha, &level_forcing(&levels[n - 1]))
        };
        let mut level = Level {
            alpha,
            exact_alpha,
            b,
            expansions: Vec::new(),
        };
        let atoms = level_atoms(&level)?;
        level.expansions = atoms
            .iter()
            .map(|a| {
                fractional_expansion(s, a, trunc_tol).map_err(|e| match e {
                    Error::NearResonance { alpha, index, distance, .. } => Error::NearResonance {
                        alpha,
                        index,
                        distance,
                        atom: Some(n),
                    },
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        levels.push(level);
    }
    Ok(levels)
}

pub fn build_irrational(s: &FractionalOrder, k: i64, trunc_tol: f64) -> Result<IrrationalConstruction> {
    if k < 0 {
        return Err(Error::domain(format!("target smoothness k = {k} must be non-negative")));
    }
    if s.rational_form().is_some() {
        return Err(Error::domain(format!("order {s} is rational; use the rational construction")));
    }
    let k = k as u32;
    let m = m1(s.value(), k);
    let levels = build_levels(s, m, trunc_tol)?;
    let last = &levels[m];
    let forcing = level_forcing(last);
    Ok(IrrationalConstruction {
        s: *s,
        k_target: k,
        m,
        b: levels.iter().map(|l| l.b[0]).collect(),
        atoms: levels.iter().map(|l| level_atoms(l).map(|a| a[0])).collect::<Result<_>>()?,
        expansions: levels.iter().map(|l| l.expansions[0].clone()).collect(),
        residual_forcing: ForcingTerm {
            coeff: forcing[0],
            exponent: last.alpha - 2.0 * s.value(),
            log_power: 0,
        },
    })
}

pub fn build_rational(s: &FractionalOrder, k: i64, trunc_tol: f64) -> Result<RationalConstruction> {
    if k < 0 {
        return Err(Error::domain(format!("target smoothness k = {k} must be non-negative")));
    }
    let (p, q) = s
        .step_fraction()
        .ok_or_else(|| Error::domain(format!("order {s} has no rational form")))?;
    let k = k as u32;
    let m = m2(p, k);
    let top = (m + 1) * q as usize - 1;
    let levels = build_levels(s, top, trunc_tol)?;
    let mut b = vec![vec![Vec::new(); q as usize]; m + 1];
    for (n, level) in levels.iter().enumerate() {
        let (mm, l) = ((n + 1) / q as usize, (n + 1) % q as usize);
        // n = mm·q - 1 + ℓ with ℓ in 1..=q
        let (mi, li) = if l == 0 { (mm - 1, q as usize) } else { (mm, l) };
        b[mi][li - 1] = level.b.clone();
    }
    let last = &levels[top];
    let forcing = level_forcing(last);
    let exponent = last.alpha - 2.0 * s.value();
    let residual_forcing = forcing
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| ForcingTerm {
            coeff: *c,
            exponent,
            log_power: j as u32,
        })
        .collect();
    let mut atoms = Vec::new();
    let mut expansions = Vec::new();
    for level in &levels {
        atoms.extend(level_atoms(level)?);
        expansions.extend(level.expansions.iter().cloned());
    }
    Ok(RationalConstruction {
        s: *s,
        p,
        q,
        k_target: k,
        m,
        b,
        atoms,
        expansions,
        residual_forcing,
    })
}

/// Promotes near-rational floats, then picks the branch.
pub fn build(s: &FractionalOrder, k: i64, trunc_tol: f64) -> Result<Construction> {
    let s = s.promoted();
    if s.rational_form().is_some() {
        build_rational(&s, k, trunc_tol).map(Construction::Rational)
    } else {
        build_irrational(&s, k, trunc_tol).map(Construction::Irrational)
    }
}

impl Construction {
    pub fn s(&self) -> FractionalOrder {
        match self {
            Construction::Irrational(c) => c.s,
            Construction::Rational(c) => c.s,
        }
    }

    pub fn k_target(&self) -> u32 {
        match self {
            Construction::Irrational(c) => c.k_target,
            Construction::Rational(c) => c.k_target,
        }
    }

    /// (coefficient, atom, expansion) triples in level order.
    pub fn terms(&self) -> Vec<(f64, PowerLogAtom, LogPolyExpansion)> {
        match self {
            Construction::Irrational(c) => c
                .b
                .iter()
                .zip(&c.atoms)
                .zip(&c.expansions)
                .map(|((b, a), e)| (*b, *a, e.clone()))
                .collect(),
            Construction::Rational(c) => {
                let flat: Vec<f64> = c.b.iter().flatten().flatten().copied().collect();
                flat.into_iter()
                    .zip(&c.atoms)
                    .zip(&c.expansions)
                    .map(|((b, a), e)| (b, *a, e.clone()))
                    .collect()
            }
        }
    }

    pub fn residual_forcing(&self) -> Vec<ForcingTerm> {
        match self {
            Construction::Irrational(c) => vec![c.residual_forcing],
            Construction::Rational(c) => c.residual_forcing.clone(),
        }
    }

    /// Largest relative mismatch when every level is re-solved from the stored expansions.
    pub fn recursion_defect(&self) -> f64 {
        let terms = self.terms();
        let mut worst = 0.0f64;
        // group by exponent
        let mut groups: Vec<(f64, Vec<(f64, LogPolyExpansion)>)> = Vec::new();
        for (b, a, e) in terms {
            match groups.last_mut() {
                Some((alpha, g)) if *alpha == a.alpha => g.push((b, e)),
                _ => groups.push((a.alpha, vec![(b, e)])),
            }
        }
        for w in groups.windows(2) {
            let prev = Level {
                alpha: w[0].0,
                exact_alpha: None,
                b: w[0].1.iter().map(|v| v.0).collect(),
                expansions: w[0].1.iter().map(|v| v.1.clone()).collect(),
            };
            let redo = solve_level(w[1].0, &level_forcing(&prev));
            for (j, (stored, _)) in w[1].1.iter().enumerate() {
                let r = redo.get(j).copied().unwrap_or(0.0);
                worst = worst.max((stored - r).abs() / stored.abs().max(1e-300));
            }
        }
        worst
    }

    pub fn record(&self) -> ConstructionRecord {
        let terms = self.terms();
        let (branch, p, q, m) = match self {
            Construction::Irrational(c) => ("irrational", None, None, c.m),
            Construction::Rational(c) => ("rational", Some(c.p), Some(c.q), c.m),
        };
        ConstructionRecord {
            s: self.s().to_string(),
            branch: branch.into(),
            k_target: self.k_target(),
            m,
            p,
            q,
            coefficients: terms
                .iter()
                .map(|(b, a, _)| CoefficientEntry {
                    alpha: a.alpha,
                    j: a.j,
                    b: *b,
                })
                .collect(),
            b_table: match self {
                Construction::Rational(c) => Some(c.b.clone()),
                Construction::Irrational(_) => None,
            },
            residual_forcing: self.residual_forcing(),
            expansions: terms.iter().map(|(_, _, e)| e.record()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub alpha: f64,
    pub j: u32,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionRecord {
    pub s: String,
    pub branch: String,
    pub k_target: u32,
    pub m: usize,
    pub p: Option<i64>,
    pub q: Option<i64>,
    pub coefficients: Vec<CoefficientEntry>,
    pub b_table: Option<Vec<Vec<Vec<f64>>>>,
    pub residual_forcing: Vec<ForcingTerm>,
    pub expansions: Vec<ExpansionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NextTerm {
    /// x^{3-2s}
    Power(f64),
    /// x² log x
    SquareLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leading {
    pub linear_coeff: f64,
    pub next: NextTerm,
    pub next_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularityLabel {
    #[serde(rename = "C^{2,1-2s}-sharp")]
    C2OneMinus2s,
    #[serde(rename = "C^{1,1-eps}-family")]
    C1OneMinusEps,
    #[serde(rename = "C^{1,2-2s}-sharp")]
    C1TwoMinus2s,
}

#[derive(Clone)]
pub struct CounterexampleResult {
    pub construction: Construction,
    pub u: GlobalFunction,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    higher: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub leading: Leading,
    pub regularity_label: RegularityLabel,
}

impl std::fmt::Debug for CounterexampleResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CounterexampleResult")
            .field("s", &self.construction.s())
            .field("leading", &self.leading)
            .field("regularity_label", &self.regularity_label)
            .finish()
    }
}

impl CounterexampleResult {
    /// Right-hand side on (0, 1/2).
    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// u(x) - x, summed without the linear atom to avoid cancellation.
    pub fn u_minus_linear(&self, x: f64) -> f64 {
        (self.higher)(x)
    }

    pub fn u_deriv(&self, x: f64, order: u32) -> f64 {
        self.u.deriv(x, order).expect("closed-form derivatives attached")
    }
}

pub fn assemble(construction: Construction) -> CounterexampleResult {
    let s = construction.s();
    let terms: Vec<(f64, PowerLogAtom, LogPolyExpansion)> = construction.terms();
    let atoms: Vec<(f64, PowerLogAtom)> = terms.iter().map(|(b, a, _)| (*b, *a)).collect();
    let right: f64 = atoms.iter().filter(|(_, a)| a.j == 0).map(|(b, _)| b).sum();

    let ev = atoms.clone();
    let dv = atoms.clone();
    let u = GlobalFunction::new(move |x| ev.iter().map(|(b, a)| b * atom_eval(a, x)).collect::<NeumaierSum>().sum())
        .with_support(Support {
            lo: 0.0,
            hi: 1.0,
            left: 0.0,
            right,
        })
        .with_deriv(move |x, order| {
            if x <= 0.0 || x >= 1.0 {
                return 0.0;
            }
            dv.iter().map(|(b, a)| b * atom_derivative(a, x, order)).collect::<NeumaierSum>().sum()
        });

    let hv: Vec<(f64, PowerLogAtom)> = atoms.iter().skip(1).copied().collect();
    let higher = Arc::new(move |x: f64| hv.iter().map(|(b, a)| b * atom_eval(a, x)).collect::<NeumaierSum>().sum());

    let forcing = construction.residual_forcing();
    let smooth: Vec<(f64, LogPolyExpansion)> = terms.iter().map(|(b, _, e)| (*b, e.clone())).collect();
    let f = Arc::new(move |x: f64| {
        let mut acc = NeumaierSum::default();
        for t in &forcing {
            acc.add(t.eval(x));
        }
        for (b, e) in &smooth {
            acc.add(b * e.smooth.eval(x));
        }
        acc.sum()
    });

    let first = &terms[0].2;
    let sv = s.value();
    let (leading, label) = match s.regime() {
        Regime::Half => (
            Leading {
                linear_coeff: 1.0,
                next: NextTerm::SquareLog,
                next_coeff: first.a[1] / 2.0,
            },
            RegularityLabel::C1OneMinusEps,
        ),
        regime => (
            Leading {
                linear_coeff: 1.0,
                next: NextTerm::Power(3.0 - 2.0 * sv),
                next_coeff: first.a[0] / (2.0 * (1.0 - sv) * (3.0 - 2.0 * sv)),
            },
            if regime == Regime::Below {
                RegularityLabel::C2OneMinus2s
            } else {
                RegularityLabel::C1TwoMinus2s
            },
        ),
    };
    CounterexampleResult {
        construction,
        u,
        f,
        higher,
        leading,
        regularity_label: label,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub x: f64,
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
    pub f: f64,
    pub residual: Option<f64>,
    pub error_estimate: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs_residual: f64,
    pub per_point: Vec<PointResidual>,
}

/// Acceptance level for the residual at x: 1e-5 from 1e-3 upward, ten times looser below.
pub fn residual_tolerance(x: f64) -> f64 {
    if x >= 1e-3 {
        1e-5
    } else {
        1e-4
    }
}

/// -u'' + L u - f at each point, with L from the quadrature oracle.
pub fn residual_check(result: &CounterexampleResult, points: &[f64], params: &QuadratureParams) -> Result<ResidualReport> {
    if let Some(x) = points.iter().find(|x| !(**x >= 1e-5 && **x <= 0.45)) {
        return Err(Error::domain(format!("residual point {x} outside [1e-5, 0.45]")));
    }
    let kernel = KernelSpec::fractional(result.construction.s());
    let per_point: Vec<PointResidual> = points
        .par_iter()
        .map(|&x| {
            let d2u = result.u_deriv(x, 2);
            let f = result.f(x);
            let base = PointResidual {
                x,
                u: result.u.eval(x),
                du: result.u_deriv(x, 1),
                d2u,
                f,
                residual: None,
                error_estimate: f64::NAN,
                warning: None,
            };
            match lk_apply(&kernel, &result.u, x, params) {
                Ok(v) => PointResidual {
                    residual: Some(-d2u + v.value - f),
                    error_estimate: v.error_estimate,
                    ..base
                },
                Err(e) => {
                    log::warn!("residual at x = {x} skipped: {e}");
                    PointResidual {
                        warning: Some(e.to_string()),
                        ..base
                    }
                }
            }
        })
        .collect();
    let max_abs_residual = per_point
        .iter()
        .filter_map(|p| p.residual)
        .fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ResidualReport {
        max_abs_residual,
        per_point,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SharpnessReport {
    Slope {
        slope: f64,
        stderr: f64,
        samples: usize,
    },
    LogRatio {
        x_lo: f64,
        x_hi: f64,
        ratio_lo: f64,
        ratio_hi: f64,
        rel_diff: f64,
    },
}

/// Least-squares slope of log m against log x.
pub fn power_law_slope(xs: &[f64], ms: &[f64]) -> Result<(f64, f64)> {
    if ms.iter().all(|m| *m == 0.0) {
        return Err(Error::DegenerateFit("derivative vanishes identically on the window".into()));
    }
    if ms.iter().any(|m| !(m.abs() > 0.0) || !m.is_finite()) {
        return Err(Error::DegenerateFit("derivative vanishes or is not finite at a sample".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let lm: Vec<f64> = ms.iter().map(|m| m.abs().ln()).collect();
    let fit = least_squares(&lx, &lm)?;
    Ok((fit.slope, fit.stderr))
}

pub const SHARPNESS_SAMPLES: usize = 24;

pub fn sharpness_exponent(result: &CounterexampleResult, window: [f64; 2], order: u32) -> Result<SharpnessReport> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo && hi <= 0.05) {
        return Err(Error::domain(format!("window [{lo}, {hi}] must lie in (0, 0.05]")));
    }
    if !(order == 2 || order == 3) {
        return Err(Error::domain(format!("order {order} not in {{2, 3}}")));
    }
    if result.construction.s().regime() == Regime::Half {
        let r_lo = result.u_deriv(lo, 2) / lo.ln();
        let r_hi = result.u_deriv(hi, 2) / hi.ln();
        return Ok(SharpnessReport::LogRatio {
            x_lo: lo,
            x_hi: hi,
            ratio_lo: r_lo,
            ratio_hi: r_hi,
            rel_diff: (r_lo - r_hi).abs() / r_lo.abs().max(r_hi.abs()),
        });
    }
    let xs = crate::util::geometric_points(lo, hi, SHARPNESS_SAMPLES);
    let ms: Vec<f64> = xs.iter().map(|x| result.u_deriv(*x, order)).collect();
    let (slope, stderr) = power_law_slope(&xs, &ms)?;
    Ok(SharpnessReport::Slope {
        slope,
        stderr,
        samples: xs.len(),
    })
}

/// (x, (u(x) - x)/x^{3-2s}) or (x, (u(x) - x)/(x² log x)).
pub fn leading_ratios(result: &CounterexampleResult, xs: &[f64]) -> Vec<(f64, f64)> {
    xs.iter()
        .map(|&x| {
            let scale = match result.leading.next {
                NextTerm::Power(e) => x.powf(e),
                NextTerm::SquareLog => x * x * x.ln(),
            };
            (x, result.u_minus_linear(x) / scale)
        })
        .collect()
}
