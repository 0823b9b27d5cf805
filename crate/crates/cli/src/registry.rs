//! Named coefficient functions for `solve`.

use std::sync::Arc;

use mixreg_core::kernels::KernelSpec;
use mixreg_core::pv_quadrature::QuadratureParams;
use mixreg_core::regularity::dist;
use mixreg_core::solver1d::{constant, manufactured_rhs, Coef};

use crate::CliError;

pub const COEFFICIENTS: &[&str] = &["zero", "one", "const:<v>", "linear", "sine", "dist_power:<gamma>"];
pub const RHS_ONLY: &[&str] = &["manufactured"];

pub fn coefficient(name: &str) -> Result<Coef, CliError> {
    let bad = || {
        CliError::Config(format!(
            "unknown coefficient '{name}' (known: {}, and for f also {})",
            COEFFICIENTS.join(", "),
            RHS_ONLY.join(", ")
        ))
    };
    if let Some(v) = name.strip_prefix("const:") {
        let c: f64 = v.trim().parse().map_err(|_| bad())?;
        if !c.is_finite() {
            return Err(bad());
        }
        return Ok(constant(c));
    }
    if let Some(v) = name.strip_prefix("dist_power:") {
        let g: f64 = v.trim().parse().map_err(|_| bad())?;
        if !(g >= 0.0 && g < 1.0) {
            return Err(CliError::Config(format!("dist_power exponent {g} not in [0, 1)")));
        }
        return Ok(Arc::new(move |x: f64| dist(x).powf(-g)));
    }
    Ok(match name {
        "zero" => constant(0.0),
        "one" => constant(1.0),
        "linear" => Arc::new(|x: f64| x),
        "sine" => Arc::new(|x: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin()),
        _ => return Err(bad()),
    })
}

/// Right-hand side: a registry coefficient, or `manufactured` for u* = x(1 - x).
pub fn rhs(name: &str, kernel: &KernelSpec, p: &Coef, q: &Coef, g: &Coef, params: QuadratureParams) -> Result<Coef, CliError> {
    if name == "manufactured" {
        return Ok(manufactured_rhs(kernel, p.clone(), q.clone(), g.clone(), params));
    }
    coefficient(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        assert_eq!(coefficient("const:2.5").unwrap()(0.3), 2.5);
        assert_eq!(coefficient("linear").unwrap()(0.3), 0.3);
        assert!((coefficient("dist_power:0.5").unwrap()(0.75) - 2.0).abs() < 1e-15);
        for bad in ["const:x", "dist_power:1.5", "cubic", "manufactured"] {
            assert!(matches!(coefficient(bad), Err(CliError::Config(_))), "{bad}");
        }
    }
}
