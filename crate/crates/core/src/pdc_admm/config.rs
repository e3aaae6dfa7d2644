use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subsolvers::DEFAULT_INNER_CAP;

/// When an outer loop stops early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum StopRule {
    /// `Immediate` for deterministic activity, `WindowMedian { window: 20 }`
    /// for randomized activity.
    Auto,
    /// Stop at the first iteration whose stop metric is at most `stop_tol`.
    Immediate,
    /// Stop once the median of the last `window` stop metrics is at most `stop_tol`.
    WindowMedian { window: usize },
    /// Always run `max_outer` iterations.
    Never,
}

pub const DEFAULT_STOP_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Consensus penalty.
    pub c: f64,
    /// Uniform proximal parameter; `None` means `tau = c`.
    pub tau: Option<f64>,
    /// Per-agent override of `tau`.
    pub tau_per_agent: Option<Vec<f64>>,
    /// BSUM tolerance for PDC-ADMM, inner ADMM tolerance for DC-ADMM.
    pub eps_inner: f64,
    pub beta_factor: f64,
    /// Inner ADMM penalty (DC-ADMM only).
    pub c1: f64,
    pub inner_cap: usize,
    pub max_outer: usize,
    pub stop_tol: f64,
    pub stop_rule: StopRule,
    /// Activity seed (randomized runs).
    pub seed: u64,
    /// Track edge duals and check the runtime invariants every iteration.
    pub debug: bool,
    /// Update agents on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tau: None,
            tau_per_agent: None,
            eps_inner: 1e-6,
            beta_factor: 1.01,
            c1: 5.0,
            inner_cap: DEFAULT_INNER_CAP,
            max_outer: 5000,
            stop_tol: 1e-4,
            stop_rule: StopRule::Auto,
            seed: 0,
            debug: false,
            parallel: false,
        }
    }
}

impl SolverConfig {
    pub fn tau_for(&self, i: usize) -> f64 {
        match &self.tau_per_agent {
            Some(v) => v[i],
            None => self.tau.unwrap_or(self.c),
        }
    }

    pub fn validate(&self, n_agents: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("c", self.c)?;
        if let Some(t) = self.tau {
            positive("tau", t)?;
        }
        if let Some(v) = &self.tau_per_agent {
            if v.len() != n_agents {
                return Err(Error::Dimension(format!("{} per-agent tau values for {n_agents} agents", v.len())));
            }
            v.iter().try_for_each(|&t| positive("tau", t))?;
        }
        positive("eps_inner", self.eps_inner)?;
        positive("beta_factor", self.beta_factor)?;
        positive("c1", self.c1)?;
        if self.inner_cap == 0 || self.max_outer == 0 {
            return Err(Error::InvalidArgument("iteration caps must be >= 1".into()));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("stop_tol must be >= 0, got {}", self.stop_tol)));
        }
        if let StopRule::WindowMedian { window: 0 } = self.stop_rule {
            return Err(Error::InvalidArgument("stop window must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_defaults_to_c() {
        let cfg = SolverConfig { c: 0.01, ..Default::default() };
        assert_eq!(cfg.tau_for(3), 0.01);
        let cfg = SolverConfig { tau_per_agent: Some(vec![1.0, 2.0]), ..cfg };
        assert_eq!(cfg.tau_for(1), 2.0);
        assert!(cfg.validate(2).is_ok());
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            SolverConfig { c: 0.0, ..Default::default() },
            SolverConfig { tau: Some(-1.0), ..Default::default() },
            SolverConfig { eps_inner: 0.0, ..Default::default() },
            SolverConfig { inner_cap: 0, ..Default::default() },
            SolverConfig { stop_tol: f64::NAN, ..Default::default() },
            SolverConfig { stop_rule: StopRule::WindowMedian { window: 0 }, ..Default::default() },
        ] {
            assert!(bad.validate(2).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"c": 0.05, "stop_rule": {"type": "never"}}"#).unwrap();
        assert_eq!(cfg.c, 0.05);
        assert_eq!(cfg.beta_factor, 1.01);
        assert_eq!(cfg.stop_rule, StopRule::Never);
    }
}
