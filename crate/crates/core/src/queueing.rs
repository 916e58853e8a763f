//! Closed forms for an M/M/1 queue whose customers abandon after a
//! deterministic deadline, and the gain from pooling two such queues.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("invalid queue parameters: {0}")]
    Domain(String),
    #[error("pooling gain undefined: success probability without pooling is zero")]
    UndefinedGain,
}

/// Below this distance from 1 the traffic intensity is treated as exactly 1.
const RHO_ONE_BAND: f64 = 1e-9;
/// Exponents below this are clamped; `exp` has long since saturated at 0.
const MIN_EXPONENT: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParams {
    /// Average service rate.
    pub mu: f64,
    /// Traffic intensity.
    pub rho: f64,
    /// Deterministic deadline.
    pub deadline: f64,
}

impl QueueParams {
    pub fn new(mu: f64, rho: f64, deadline: f64) -> Result<Self, QueueError> {
        let p = QueueParams { mu, rho, deadline };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), QueueError> {
        if !(self.mu.is_finite() && self.rho.is_finite() && self.deadline.is_finite()) {
            return Err(QueueError::Domain(format!("non-finite input {self:?}")));
        }
        if self.mu <= 0.0 {
            return Err(QueueError::Domain(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.deadline <= 0.0 {
            return Err(QueueError::Domain(format!(
                "deadline must be > 0, got {}",
                self.deadline
            )));
        }
        if self.rho < 0.0 {
            return Err(QueueError::Domain(format!("rho must be >= 0, got {}", self.rho)));
        }
        Ok(())
    }
}

/// Probability that a customer is served before its deadline expires.
///
/// Evaluates `(1 - e^x) / (1 - rho e^x)` with `x = mu D (rho - 1)`. Both
/// numerator and denominator are rewritten through `expm1` so there is no
/// cancellation near `rho = 1`; for `x > 0` the fraction is scaled by `e^-x`
/// so nothing overflows. At `rho = 1` the limit `mu D / (1 + mu D)` is used.
pub fn p_succ(p: &QueueParams) -> Result<f64, QueueError> {
    p.validate()?;
    let md = p.mu * p.deadline;
    let eps = p.rho - 1.0;
    if eps.abs() < RHO_ONE_BAND {
        return Ok(md / (1.0 + md));
    }
    let x = (md * eps).max(MIN_EXPONENT);
    let value = if x <= 0.0 {
        let em1 = x.exp_m1();
        -em1 / (-eps - p.rho * em1)
    } else {
        let em1 = (-x).exp_m1();
        -em1 / (eps - em1)
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Fractional improvement in success probability when two identical queues
/// are pooled (service rate doubled, traffic intensity unchanged).
pub fn g_pool(p: &QueueParams) -> Result<f64, QueueError> {
    let alone = p_succ(p)?;
    if alone == 0.0 {
        return Err(QueueError::UndefinedGain);
    }
    let pooled = p_succ(&QueueParams {
        mu: 2.0 * p.mu,
        ..*p
    })?;
    Ok((pooled - alone) / alone)
}
