//! Experiment configuration: TOML or JSON, every key optional, unknown keys rejected.

use std::path::Path;

use mixreg_core::pv_quadrature::QuadratureParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const BUNDLED: &[(&str, &str)] = &[("thm11_s075", include_str!("../configs/thm11_s075.toml"))];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub quadrature: QuadratureConfig,
    pub verify_lemma61: Lemma61Config,
    pub counterexample: CounterexampleConfig,
    pub solve: SolveConfig,
    pub barriers: BarriersConfig,
    pub norms: NormsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            quadrature: QuadratureConfig::default(),
            verify_lemma61: Lemma61Config::default(),
            counterexample: CounterexampleConfig::default(),
            solve: SolveConfig::default(),
            barriers: BarriersConfig::default(),
            norms: NormsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub inner_radius_fraction: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureParams::default();
        QuadratureConfig {
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            inner_radius_fraction: q.inner_radius_fraction,
            max_panels: q.max_panels,
        }
    }
}

impl QuadratureConfig {
    pub fn params(&self) -> Result<QuadratureParams, CliError> {
        let p = QuadratureParams {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            inner_radius_fraction: self.inner_radius_fraction,
            max_panels: self.max_panels,
        };
        p.validate().map_err(|e| CliError::Config(format!("quadrature: {e}")))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    /// "num/den" or a decimal; kept exact.
    pub alpha: String,
    pub j: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma61Config {
    pub orders: Vec<String>,
    pub atoms: Vec<AtomSpec>,
    /// Adds the atom (2(1-s)+1, 0) for each order.
    pub include_step_atom: bool,
    pub points: usize,
    pub window: [f64; 2],
    pub rel_tol: f64,
}

impl Default for Lemma61Config {
    fn default() -> Self {
        let atom = |a: &str, j| AtomSpec { alpha: a.into(), j };
        Lemma61Config {
            orders: ["1/4", "1/2", "3/4", "0.3", "0.61"].iter().map(|s| s.to_string()).collect(),
            atoms: vec![atom("1", 0), atom("1.7", 1), atom("2.5", 2)],
            include_step_atom: true,
            points: 20,
            window: [1e-4, 0.45],
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub s: String,
    pub k: i64,
    pub points: usize,
    pub window: [f64; 2],
    pub residual_tol: f64,
    pub sharpness_window: [f64; 2],
    pub slope_tol: f64,
    /// Points compared in the s = 1/2 log-ratio test.
    pub log_ratio_points: [f64; 2],
    pub log_ratio_tol: f64,
    pub leading_points: Vec<f64>,
    pub leading_tol: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            s: "3/4".into(),
            k: 2,
            points: 30,
            window: [1e-3, 0.45],
            residual_tol: 1e-5,
            sharpness_window: [1e-5, 1e-2],
            slope_tol: 0.05,
            log_ratio_points: [1e-6, 1e-4],
            log_ratio_tol: 0.1,
            leading_points: vec![1e-3, 1e-4, 1e-5],
            leading_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    FixedPoint,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChoice {
    Uniform,
    Graded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub s: String,
    /// Kernel registry name.
    pub kernel: String,
    /// Coefficient registry names; see `registry`.
    pub p: String,
    pub q: String,
    pub g: String,
    pub f: String,
    pub p_min: f64,
    pub grid: GridChoice,
    pub n: usize,
    pub grading: f64,
    pub method: Method,
    pub damping: f64,
    pub max_iter: usize,
    pub agreement_tol: f64,
    pub comparison_trials: usize,
    /// Re-solve at 2n and compare ‖u_+‖_{C⁰_1}/‖f_+‖_∞.
    pub growth_refinement: bool,
    pub growth_tol: f64,
    pub expected_slope: Option<f64>,
    pub slope_tol: f64,
    pub slope_window_top: f64,
    pub manufactured_tol: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            s: "3/4".into(),
            kernel: "fractional".into(),
            p: "one".into(),
            q: "one".into(),
            g: "zero".into(),
            f: "one".into(),
            p_min: 1.0,
            grid: GridChoice::Uniform,
            n: 256,
            grading: 2.0,
            method: Method::Direct,
            damping: 1.0,
            max_iter: 500,
            agreement_tol: 1e-8,
            comparison_trials: 20,
            growth_refinement: true,
            growth_tol: 0.1,
            expected_slope: None,
            slope_tol: 0.1,
            slope_window_top: 0.05,
            manufactured_tol: 5e-3,
            beta: 0.5,
            gamma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarriersConfig {
    pub exp_s: String,
    pub r: f64,
    pub lambdas: Vec<f64>,
    pub exp_samples: usize,
    pub stabilization_tol: f64,
    pub distance_orders: Vec<String>,
    pub r0: f64,
    pub sigma: f64,
    pub p: f64,
    pub q: f64,
    pub g: f64,
    pub annulus_samples: usize,
    pub poisson_gamma: f64,
    pub poisson_m: f64,
    pub poisson_samples: usize,
}

impl Default for BarriersConfig {
    fn default() -> Self {
        BarriersConfig {
            exp_s: "0.6".into(),
            r: 1.0,
            lambdas: vec![20.0, 40.0, 80.0],
            exp_samples: 15,
            stabilization_tol: 0.05,
            distance_orders: vec!["1/4".into(), "3/4".into()],
            r0: 0.5,
            sigma: 0.2,
            p: 1.0,
            q: 1.0,
            g: 0.0,
            annulus_samples: 50,
            poisson_gamma: 0.5,
            poisson_m: 1.0,
            poisson_samples: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonRhs {
    /// d^{-γ}(1 + 0.3 sin 7x)
    Perturbed,
    /// d^{-γ}
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsConfig {
    pub gamma: f64,
    pub beta: f64,
    pub envelope_m: f64,
    pub rhs: PoissonRhs,
    pub resolutions: [usize; 2],
    pub stability_tol: f64,
    pub closed_form_tol: f64,
    pub closed_form_points: usize,
}

impl Default for NormsConfig {
    fn default() -> Self {
        NormsConfig {
            gamma: 0.5,
            beta: 0.5,
            envelope_m: 1.3,
            rhs: PoissonRhs::Perturbed,
            resolutions: [200, 400],
            stability_tol: 0.1,
            closed_form_tol: 1e-8,
            closed_form_points: 40,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// A path ending in `.json` is read as JSON, any other path as TOML; a
    /// name without a matching file selects a bundled config.
    pub fn load(source: &str) -> Result<Self, CliError> {
        let path = Path::new(source);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {source}: {e}")))?;
            return if path.extension().is_some_and(|e| e == "json") {
                Self::from_json(&text)
            } else {
                Self::from_toml(&text)
            };
        }
        match BUNDLED.iter().find(|(name, _)| *name == source) {
            Some((_, text)) => Self::from_toml(text),
            None => Err(CliError::Config(format!(
                "no config file '{source}' and no bundled config of that name (bundled: {})",
                BUNDLED.iter().map(|b| b.0).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
