use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and scaling parameters of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Exchange intensity.
    pub lambda: f64,
    /// Flip amplitude.
    pub c: f64,
    /// Flip decay exponent: `γ_n = c n^{-b}`.
    pub b: f64,
    /// Scaling parameter.
    pub n: u64,
    /// Inverse temperature.
    pub beta: f64,
    /// Time-scale exponent: macroscopic `t` is microscopic `t n^a`.
    pub a: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, c: f64, b: f64, n: u64, beta: f64, a: f64) -> Result<Self> {
        let p = ModelParams { lambda, c, b, n, beta, a };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("lambda", self.lambda),
            ("c", self.c),
            ("b", self.b),
            ("beta", self.beta),
            ("a", self.a),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        if self.lambda < 0.0 {
            return Err(Error::param("lambda", "must be >= 0"));
        }
        if self.c < 0.0 {
            return Err(Error::param("c", "must be >= 0"));
        }
        if self.b < 0.0 {
            return Err(Error::param("b", "must be >= 0"));
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        if self.beta <= 0.0 {
            return Err(Error::param("beta", "must be > 0"));
        }
        if self.a <= 0.0 {
            return Err(Error::param("a", "must be > 0"));
        }
        Ok(())
    }

    /// Same parameters at another scaling parameter.
    pub fn with_n(&self, n: u64) -> Self {
        ModelParams { n, ..*self }
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    pub fn gamma_n(&self) -> f64 {
        self.c * self.n_f64().powf(-self.b)
    }

    /// Microscopic time `t n^a`.
    pub fn horizon(&self, t: f64) -> f64 {
        t * self.n_f64().powf(self.a)
    }

    /// Ring size `max(16 n, 4 ⌈2 t n^a⌉)`, the finite-size policy for transport speed 2.
    pub fn ring_size(&self, t: f64) -> usize {
        let by_n = 16 * self.n as usize;
        let by_speed = 4 * (2.0 * self.horizon(t)).ceil() as usize;
        by_n.max(by_speed).max(4)
    }
}
