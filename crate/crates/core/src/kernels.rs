//! Fractional orders and symmetric kernels comparable to |z|^{-1-2s}.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::gl16;

/// Where s sits relative to 1/2; decides regularity classes and barrier shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Below,
    Half,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalOrder {
    s: f64,
    rational_form: Option<(i64, i64)>,
}

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!("order s = {s} is outside (0, 1)")));
        }
        Ok(FractionalOrder { s, rational_form: None })
    }

    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if num <= 0 || den <= 0 || num >= den {
            return Err(Error::domain(format!("{num}/{den} is not a fraction in (0, 1)")));
        }
        let g = num.gcd(&den);
        let (n, d) = (num / g, den / g);
        Ok(FractionalOrder {
            s: n as f64 / d as f64,
            rational_form: Some((n, d)),
        })
    }

    /// Accepts "num/den" (exact) or a decimal literal (float mode).
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((a, b)) = t.split_once('/') {
            let num: i64 = a.trim().parse().map_err(|_| Error::domain(format!("bad numerator in '{t}'")))?;
            let den: i64 = b.trim().parse().map_err(|_| Error::domain(format!("bad denominator in '{t}'")))?;
            Self::rational(num, den)
        } else {
            let v: f64 = t.parse().map_err(|_| Error::domain(format!("cannot parse order '{t}'")))?;
            Self::new(v)
        }
    }

    /// Float orders within 1e-9 of a fraction with denominator ≤ 64 become that fraction.
    pub fn promoted(&self) -> Self {
        if self.rational_form.is_some() {
            return *self;
        }
        for den in 2..=64i64 {
            let num = (self.s * den as f64).round() as i64;
            if num <= 0 || num >= den {
                continue;
            }
            if (self.s - num as f64 / den as f64).abs() <= 1e-9 {
                let r = Self::rational(num, den).expect("fraction in range");
                let (n, d) = r.rational_form.unwrap();
                log::info!("order {} promoted to {}/{}", self.s, n, d);
                return r;
            }
        }
        *self
    }

    pub fn value(&self) -> f64 {
        self.s
    }

    pub fn rational_form(&self) -> Option<(i64, i64)> {
        self.rational_form
    }

    pub fn ratio(&self) -> Option<Ratio<i64>> {
        self.rational_form.map(|(n, d)| Ratio::new(n, d))
    }

    pub fn regime(&self) -> Regime {
        match self.ratio() {
            Some(r) => match r.cmp(&Ratio::new(1, 2)) {
                std::cmp::Ordering::Less => Regime::Below,
                std::cmp::Ordering::Equal => Regime::Half,
                std::cmp::Ordering::Greater => Regime::Above,
            },
            None if self.s < 0.5 => Regime::Below,
            None if self.s > 0.5 => Regime::Above,
            None => Regime::Half,
        }
    }

    /// (p, q) coprime with 2(1 - s) = p/q, when s is exact.
    pub fn step_fraction(&self) -> Option<(i64, i64)> {
        self.ratio().map(|r| {
            let t = (Ratio::from_integer(1) - r) * 2;
            (*t.numer(), *t.denom())
        })
    }
}

impl fmt::Display for FractionalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rational_form {
            Some((n, d)) => write!(f, "{n}/{d}"),
            None => write!(f, "{}", self.s),
        }
    }
}

/// C_s = 2^{2s} Γ((1+2s)/2) / (√π Γ(2-s)) · s(1-s).
pub fn normalization_constant(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("order s = {s} is outside (0, 1)")));
    }
    let g1 = statrs::function::gamma::gamma(0.5 + s);
    let g2 = statrs::function::gamma::gamma(2.0 - s);
    Ok((2.0 * s).exp2() * g1 / (std::f64::consts::PI.sqrt() * g2) * s * (1.0 - s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    FractionalExact,
    Custom,
}

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct KernelSpec {
    pub order: FractionalOrder,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kind: KernelKind,
    pub name: String,
    evaluator: Density,
    c_s: f64,
    far_tail: Arc<OnceLock<FarTail>>,
}

/// ∫_1^∞ k and the fitted far-field law k ≈ m|z|^{-1-e}.
#[derive(Debug, Clone, Copy)]
struct FarTail {
    mass: f64,
    m: f64,
    e: f64,
}

const FAR_START: f64 = 1.0;
const FAR_END: f64 = 1_048_576.0;
const FAR_PANEL: f64 = 8.0;

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("kappa1", &self.kappa1)
            .field("kappa2", &self.kappa2)
            .field("kind", &self.kind)
            .finish()
    }
}

pub const REGISTRY: &[&str] = &["fractional", "oscillating", "steep"];

impl KernelSpec {
    pub fn fractional(order: FractionalOrder) -> Self {
        let s = order.value();
        let c = normalization_constant(s).expect("order validated on construction");
        KernelSpec {
            order,
            kappa1: c,
            kappa2: c,
            kind: KernelKind::FractionalExact,
            name: "fractional".into(),
            evaluator: Arc::new(move |z: f64| c * z.abs().powf(-1.0 - 2.0 * s)),
            c_s: c,
            far_tail: Arc::default(),
        }
    }

    pub fn custom<F>(name: &str, order: FractionalOrder, kappa1: f64, kappa2: f64, density: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(kappa1 > 0.0 && kappa1 <= kappa2 && kappa2.is_finite()) {
            return Err(Error::domain(format!("need 0 < kappa1 <= kappa2, got {kappa1}, {kappa2}")));
        }
        Ok(KernelSpec {
            order,
            kappa1,
            kappa2,
            kind: KernelKind::Custom,
            name: name.into(),
            evaluator: Arc::new(density),
            c_s: normalization_constant(order.value())?,
            far_tail: Arc::default(),
        })
    }

    /// Built-in kernels selectable by name: `fractional`, `oscillating`
    /// (C_s(1 + cos(z)/2)|z|^{-1-2s}) and `steep` (C_s|z|^{-1.1-2s}, not admissible).
    pub fn from_registry(name: &str, order: FractionalOrder) -> Result<Self> {
        let s = order.value();
        let c = normalization_constant(s)?;
        match name {
            "fractional" => Ok(Self::fractional(order)),
            "oscillating" => Self::custom(name, order, 0.5 * c, 1.5 * c, move |z: f64| {
                c * (1.0 + 0.5 * z.cos()) * z.abs().powf(-1.0 - 2.0 * s)
            }),
            "steep" => Self::custom(name, order, c, c, move |z: f64| c * z.abs().powf(-1.1 - 2.0 * s)),
            other => Err(Error::domain(format!("unknown kernel '{other}' (known: {})", REGISTRY.join(", ")))),
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        (self.evaluator)(z)
    }

    pub fn s(&self) -> f64 {
        self.order.value()
    }

    pub fn is_fractional_exact(&self) -> bool {
        self.kind == KernelKind::FractionalExact
    }

    /// C_s of the underlying order (the exact kernel's constant).
    pub fn c_s(&self) -> f64 {
        self.c_s
    }

    /// ∫_t^∞ k(z) dz for t > 0.
    ///
    /// Custom kernels integrate with panels no wider than 8 out to 2^20 (so
    /// bounded-frequency modulations are resolved) and close with the power law
    /// fitted on the last two dyadic windows.
    pub fn tail_mass(&self, t: f64) -> f64 {
        let s = self.s();
        if self.is_fractional_exact() {
            return self.c_s * t.powf(-2.0 * s) / (2.0 * s);
        }
        let far = *self.far_tail.get_or_init(|| self.far_tail());
        if t >= FAR_END {
            return far.m * t.powf(-far.e) / far.e;
        }
        if t >= FAR_START {
            return far.mass - self.panel_integral(FAR_START, t);
        }
        self.panel_integral(t, FAR_START) + far.mass
    }

    /// ∫_a^b k for 0 < a < b: dyadic panels below 1, width-8 panels above.
    fn panel_integral(&self, a: f64, b: f64) -> f64 {
        let rule = gl16();
        let k = |z: f64| self.eval(z);
        let mut sum = 0.0;
        let mut lo = a;
        while lo < b {
            let hi = if lo < FAR_START { (2.0 * lo).min(FAR_START) } else { lo + lo.min(FAR_PANEL) };
            let hi = hi.min(b);
            sum += rule.integrate(&k, lo, hi).0;
            lo = hi;
        }
        sum
    }

    fn far_tail(&self) -> FarTail {
        let w1 = self.panel_integral(0.25 * FAR_END, 0.5 * FAR_END);
        let w2 = self.panel_integral(0.5 * FAR_END, FAR_END);
        let ratio = w2 / w1;
        let e = -ratio.log2();
        FarTail {
            mass: self.panel_integral(FAR_START, FAR_END) + w2 * ratio / (1.0 - ratio),
            m: w2 * e / ((0.5 * FAR_END).powf(-e) * (1.0 - ratio)),
            e,
        }
    }

    /// ∫_0^ρ z^2 k(z) dz.
    pub fn second_moment(&self, rho: f64) -> f64 {
        let s = self.s();
        if self.is_fractional_exact() {
            return self.c_s * rho.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        }
        let rule = gl16();
        let mut sum = 0.0;
        let mut b = rho;
        for _ in 0..60 {
            let a = 0.5 * b;
            sum += rule.integrate(&|z| z * z * self.eval(z), a, b).0;
            b = a;
        }
        sum + self.eval(b) * b * b * b / (2.0 - 2.0 * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelValidation {
    pub symmetric: bool,
    pub bounds_ok: bool,
    pub worst_ratio: f64,
    pub nonfinite_at: Vec<f64>,
}

/// Checks symmetry and the two-sided power bound on log-uniform |z| ∈ [1e-8, 1e4].
/// `worst_ratio` is the largest of k|z|^{1+2s}/κ2 and κ1/(k|z|^{1+2s}); it is ≤ 1 iff the bounds hold.
pub fn validate_kernel(kernel: &KernelSpec, sample_count: usize) -> Result<KernelValidation> {
    if sample_count < 2 {
        return Err(Error::domain("validate_kernel needs at least two samples"));
    }
    let s = kernel.s();
    let (lo, hi) = (1e-8f64.ln(), 1e4f64.ln());
    let mut symmetric = true;
    let mut bounds_ok = true;
    let mut worst = 0.0f64;
    let mut nonfinite = Vec::new();
    for i in 0..sample_count {
        let z = (lo + (hi - lo) * i as f64 / (sample_count - 1) as f64).exp();
        let kp = kernel.eval(z);
        let km = kernel.eval(-z);
        if !kp.is_finite() || !km.is_finite() {
            nonfinite.push(z);
            symmetric = false;
            bounds_ok = false;
            continue;
        }
        if (kp - km).abs() > 1e-12 * kp.abs() {
            symmetric = false;
        }
        let scaled = kp * z.powf(1.0 + 2.0 * s);
        let upper = scaled / kernel.kappa2;
        let lower = if scaled > 0.0 { kernel.kappa1 / scaled } else { f64::INFINITY };
        let r = upper.max(lower);
        worst = worst.max(r);
        if r > 1.0 + 1e-12 {
            bounds_ok = false;
        }
    }
    Ok(KernelValidation {
        symmetric,
        bounds_ok,
        worst_ratio: worst,
        nonfinite_at: nonfinite,
    })
}
