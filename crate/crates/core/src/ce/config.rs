use serde::Serialize;

use super::state::AgentRole;
use crate::error::{Error, Result};

/// Relative contribution of each agent to the consensus; sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    pub sensor: f64,
    pub data: f64,
    pub image: f64,
}

impl Weights {
    pub fn new(sensor: f64, data: f64, image: f64) -> Result<Self> {
        let w = Self {
            sensor,
            data,
            image,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn get(&self, role: AgentRole) -> f64 {
        match role {
            AgentRole::Sensor => self.sensor,
            AgentRole::Data => self.data,
            AgentRole::Image => self.image,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.sensor, self.data, self.image]
    }

    fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config(format!(
                "agent weights must be finite and non-negative, got {w:?}"
            )));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "agent weights must sum to 1, got {total}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeConfig {
    weights: Weights,
    rho: f64,
    max_iters: usize,
    residual_tol: f64,
    lambda_s: f64,
    lambda_d: f64,
    lambda_i: f64,
    nonneg_image: bool,
    nonneg_data: bool,
}

/// Unvalidated fields of a [`CeConfig`]; `build` checks every invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct CeConfigBuilder {
    pub mu_s: f64,
    pub mu_d: f64,
    pub mu_i: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub lambda_s: f64,
    pub lambda_d: f64,
    pub lambda_i: f64,
    pub nonneg_image: bool,
    pub nonneg_data: bool,
}

impl Default for CeConfigBuilder {
    fn default() -> Self {
        Self {
            mu_s: 0.6,
            mu_d: 0.2,
            mu_i: 0.2,
            rho: 0.5,
            max_iters: 4,
            residual_tol: 1e-6,
            lambda_s: 1.0,
            lambda_d: 1.0,
            lambda_i: 1.0,
            nonneg_image: false,
            nonneg_data: false,
        }
    }
}

impl CeConfigBuilder {
    pub fn weights(mut self, mu_s: f64, mu_d: f64, mu_i: f64) -> Self {
        self.mu_s = mu_s;
        self.mu_d = mu_d;
        self.mu_i = mu_i;
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn lambdas(mut self, s: f64, d: f64, i: f64) -> Self {
        self.lambda_s = s;
        self.lambda_d = d;
        self.lambda_i = i;
        self
    }

    pub fn nonneg(mut self, image: bool, data: bool) -> Self {
        self.nonneg_image = image;
        self.nonneg_data = data;
        self
    }

    pub fn build(self) -> Result<CeConfig> {
        let weights = Weights::new(self.mu_s, self.mu_d, self.mu_i)?;
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config(format!(
                "Mann parameter rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_ce_iters must be at least 1"));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::config("residual tolerance must be non-negative"));
        }
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_d", self.lambda_d),
            ("lambda_i", self.lambda_i),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(CeConfig {
            weights,
            rho: self.rho,
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            lambda_s: self.lambda_s,
            lambda_d: self.lambda_d,
            lambda_i: self.lambda_i,
            nonneg_image: self.nonneg_image,
            nonneg_data: self.nonneg_data,
        })
    }
}

impl CeConfig {
    pub fn builder() -> CeConfigBuilder {
        CeConfigBuilder::default()
    }

    pub fn to_builder(&self) -> CeConfigBuilder {
        CeConfigBuilder {
            mu_s: self.weights.sensor,
            mu_d: self.weights.data,
            mu_i: self.weights.image,
            rho: self.rho,
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            lambda_s: self.lambda_s,
            lambda_d: self.lambda_d,
            lambda_i: self.lambda_i,
            nonneg_image: self.nonneg_image,
            nonneg_data: self.nonneg_data,
        }
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn max_iters(&self) -> usize {
        self.max_iters
    }
    pub fn residual_tol(&self) -> f64 {
        self.residual_tol
    }
    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }
    pub fn lambda_d(&self) -> f64 {
        self.lambda_d
    }
    pub fn lambda_i(&self) -> f64 {
        self.lambda_i
    }
    pub fn nonneg_image(&self) -> bool {
        self.nonneg_image
    }
    pub fn nonneg_data(&self) -> bool {
        self.nonneg_data
    }
}
