//! Reproduction defaults and parameter resolution.
//!
//! Built-in defaults follow the reference experiment protocol: sigma 0.8,
//! gamma 0.05, rho 10, lambda 8 for the zero-norm model, and lambda 4 or 8
//! for the surrogate models depending on whether n is at most 5000. The
//! SCAD shape defaults to 3.7, the MCP shape to 3.0. Precedence is
//! defaults < config file < command-line flags.

use onebit_core::model::{ModelParams, SurrogateKind};
use onebit_core::solver::SolverConfig;
use onebit_core::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 0.8;
pub const DEFAULT_GAMMA: f64 = 0.05;
pub const DEFAULT_RHO: f64 = 10.0;
pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_A: f64 = 3.0;
pub const DEFAULT_LAMBDA_ZNORM: f64 = 8.0;

/// Surrogate-model lambda switches on the signal dimension.
pub fn default_surrogate_lambda(n: usize) -> f64 {
    if n <= 5000 {
        4.0
    } else {
        8.0
    }
}

/// Which solver engine to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Znorm,
    Scad,
    Mcp,
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Znorm => "znorm",
            SolverChoice::Scad => "scad",
            SolverChoice::Mcp => "mcp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "znorm" => Ok(SolverChoice::Znorm),
            "scad" => Ok(SolverChoice::Scad),
            "mcp" => Ok(SolverChoice::Mcp),
            other => Err(Error::Invalid(format!(
                "unknown solver '{other}' (expected znorm, scad, or mcp)"
            ))),
        }
    }
}

/// Optional model-parameter overrides from flags or a config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelOverrides {
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub a: Option<f64>,
}

/// Resolve full model parameters for a solver choice at dimension `n`.
pub fn resolve_model_params(
    choice: SolverChoice,
    n: usize,
    ov: &ModelOverrides,
) -> Result<ModelParams> {
    let (default_lambda, default_a, kind) = match choice {
        SolverChoice::Znorm => (DEFAULT_LAMBDA_ZNORM, DEFAULT_SCAD_A, SurrogateKind::Scad),
        SolverChoice::Scad => (
            default_surrogate_lambda(n),
            DEFAULT_SCAD_A,
            SurrogateKind::Scad,
        ),
        SolverChoice::Mcp => (
            default_surrogate_lambda(n),
            DEFAULT_MCP_A,
            SurrogateKind::Mcp,
        ),
    };
    ModelParams::new(
        ov.sigma.unwrap_or(DEFAULT_SIGMA),
        ov.gamma.unwrap_or(DEFAULT_GAMMA),
        ov.lambda.unwrap_or(default_lambda),
        ov.rho.unwrap_or(DEFAULT_RHO),
        ov.a.unwrap_or(default_a),
        kind,
    )
}

/// Optional solver-configuration overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolverOverrides {
    /// Step scale `c` for the default rule `tau = c / ||a||^2`.
    pub step_scale: Option<f64>,
    /// Use the certified worst-case Lipschitz step rule instead.
    pub lipschitz_step: bool,
    pub varsigma: Option<f64>,
    pub tau_safety: Option<f64>,
    pub beta_cap: Option<f64>,
    pub max_iter: Option<usize>,
    pub step_tol: Option<f64>,
    pub monitor_descent: bool,
    pub trace: bool,
}

pub fn resolve_solver_config(ov: &SolverOverrides) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    if ov.lipschitz_step && ov.step_scale.is_some() {
        return Err(Error::Invalid(
            "--step-scale and --lipschitz-step are mutually exclusive".into(),
        ));
    }
    if ov.lipschitz_step {
        cfg.step_rule = onebit_core::solver::StepRule::Lipschitz;
    } else if let Some(c) = ov.step_scale {
        cfg.step_rule = onebit_core::solver::StepRule::Scale(c);
    }
    if let Some(v) = ov.varsigma {
        cfg.varsigma = v;
    }
    if let Some(v) = ov.tau_safety {
        cfg.tau_safety = v;
    }
    if let Some(v) = ov.beta_cap {
        cfg.beta_cap = v;
    }
    if let Some(v) = ov.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = ov.step_tol {
        cfg.step_tol = v;
    }
    cfg.monitor_descent = ov.monitor_descent;
    cfg.trace = ov.trace;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_switches_on_dimension() {
        let ov = ModelOverrides::default();
        let p = resolve_model_params(SolverChoice::Scad, 2000, &ov).unwrap();
        assert_eq!(p.lambda, 4.0);
        let p = resolve_model_params(SolverChoice::Scad, 10_000, &ov).unwrap();
        assert_eq!(p.lambda, 8.0);
        let p = resolve_model_params(SolverChoice::Scad, 5000, &ov).unwrap();
        assert_eq!(p.lambda, 4.0);
        let p = resolve_model_params(SolverChoice::Znorm, 10_000, &ov).unwrap();
        assert_eq!(p.lambda, 8.0);
    }

    #[test]
    fn explicit_lambda_wins() {
        let ov = ModelOverrides {
            lambda: Some(10.0),
            ..Default::default()
        };
        let p = resolve_model_params(SolverChoice::Scad, 2000, &ov).unwrap();
        assert_eq!(p.lambda, 10.0);
    }

    #[test]
    fn mcp_gets_its_own_shape_default() {
        let ov = ModelOverrides::default();
        let p = resolve_model_params(SolverChoice::Mcp, 2000, &ov).unwrap();
        assert_eq!(p.a, DEFAULT_MCP_A);
        assert_eq!(p.surrogate, SurrogateKind::Mcp);
    }

    #[test]
    fn solver_names_roundtrip() {
        for c in [SolverChoice::Znorm, SolverChoice::Scad, SolverChoice::Mcp] {
            assert_eq!(SolverChoice::parse(c.name()).unwrap(), c);
        }
        assert!(SolverChoice::parse("bogus").is_err());
    }
}
