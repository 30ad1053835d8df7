//! Utility, payoff and penalty functions.
//!
//! Every family is normalised so that a "fully satisfied" user scores 100
//! utility units. Logarithms are natural; the normalised log utility is a
//! ratio of logarithms so the base cancels.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Normalised logarithmic utility `100 ln(1 + ηx) / ln(1 + ηχ)`.
///
/// Strictly increasing and concave on `x ≥ 0`, zero at the origin and exactly
/// 100 at the saturation allocation `χ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogUtility {
    eta: f64,
    chi: f64,
    #[serde(skip)]
    norm: f64,
}

impl LogUtility {
    pub fn new(eta: f64, chi: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid("eta", format!("must be finite and > 0, got {eta}")));
        }
        if !(chi.is_finite() && chi > 0.0) {
            return Err(invalid("chi", format!("must be finite and > 0, got {chi}")));
        }
        Ok(Self {
            eta,
            chi,
            norm: (eta * chi).ln_1p(),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == self.chi {
            return 100.0;
        }
        100.0 * (self.eta * x).ln_1p() / self.norm
    }

    pub fn deriv(&self, x: f64) -> f64 {
        100.0 * self.eta / ((1.0 + self.eta * x) * self.norm)
    }

    /// Allocation at which the marginal utility equals `level`, unclamped.
    ///
    /// Returns `+∞` for `level ≤ 0` (the marginal never drops that low).
    pub fn inverse_marginal(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return f64::INFINITY;
        }
        (100.0 / (level * self.norm)) - 1.0 / self.eta
    }
}

/// Payoff of a priced good: `u(x) − L·x`. Concave but not necessarily monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffUtility {
    base: LogUtility,
    price: f64,
}

impl PayoffUtility {
    pub fn new(base: LogUtility, price: f64) -> Result<Self> {
        if !(price.is_finite() && price >= 0.0) {
            return Err(invalid("price", format!("must be finite and >= 0, got {price}")));
        }
        Ok(Self { base, price })
    }

    pub fn base(&self) -> &LogUtility {
        &self.base
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.base.eval(x) - self.price * x
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.base.deriv(x) - self.price
    }

    /// Maximiser of the payoff over `[0, cap]`.
    ///
    /// With a zero price the payoff is strictly increasing, so the answer is
    /// `cap`; this keeps PAIMD at `L = 0` identical to plain AIMD.
    pub fn argmax(&self, cap: f64) -> f64 {
        if self.price == 0.0 {
            return cap;
        }
        self.base.inverse_marginal(self.price).clamp(0.0, cap)
    }
}

/// Logistic utility `100/(1 + e^{−η(x−ψ)}) − 100/(1 + e^{ηψ})`.
///
/// Convex below the inflection point `ψ`, concave above, zero at the origin
/// and bounded by 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmoidUtility {
    eta: f64,
    psi: f64,
    #[serde(skip)]
    offset: f64,
}

impl SigmoidUtility {
    pub fn new(eta: f64, psi: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid("eta", format!("must be finite and > 0, got {eta}")));
        }
        if !(psi.is_finite() && psi > 0.0) {
            return Err(invalid("psi", format!("must be finite and > 0, got {psi}")));
        }
        Ok(Self {
            eta,
            psi,
            offset: 100.0 / (1.0 + (eta * psi).exp()),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn eval(&self, x: f64) -> f64 {
        // At x = 0 the exponent is exactly ηψ, so the two terms cancel bit-for-bit.
        100.0 / (1.0 + (-(self.eta * (x - self.psi))).exp()) - self.offset
    }

    pub fn deriv(&self, x: f64) -> f64 {
        // s(1 - s) written in terms of e^{-|z|} so the tails do not cancel to 0.
        let e = (-(self.eta * (x - self.psi)).abs()).exp();
        100.0 * self.eta * e / ((1.0 + e) * (1.0 + e))
    }
}

/// Ideal threshold utility: 0 below `θ`, 100 at or above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepUtility {
    theta: f64,
}

impl StepUtility {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(invalid("theta", format!("must be finite and > 0, got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.theta {
            0.0
        } else {
            100.0
        }
    }
}

/// Any of the supported utility families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum UtilityModel {
    Log(LogUtility),
    Payoff(PayoffUtility),
    Sigmoid(SigmoidUtility),
    Step(StepUtility),
}

impl UtilityModel {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UtilityModel::Log(m) => m.eval(x),
            UtilityModel::Payoff(m) => m.eval(x),
            UtilityModel::Sigmoid(m) => m.eval(x),
            UtilityModel::Step(m) => m.eval(x),
        }
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        match self {
            UtilityModel::Log(m) => Ok(m.deriv(x)),
            UtilityModel::Payoff(m) => Ok(m.deriv(x)),
            UtilityModel::Sigmoid(m) => Ok(m.deriv(x)),
            UtilityModel::Step(_) => Err(Error::UnsupportedModel),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, UtilityModel::Step(_))
    }

    /// `sup_{x ∈ [lo, hi]} deriv(x) / x`, used to calibrate the back-off scale.
    ///
    /// The concave families have a decreasing ratio, so the supremum sits at
    /// `lo`. The sigmoid ratio peaks just below `ψ`; it is found by a dense scan
    /// concentrated around the inflection point followed by golden-section
    /// refinement.
    pub fn marginal_ratio_sup(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Domain {
                what: "marginal ratio interval",
                value: lo,
                lo: f64::MIN_POSITIVE,
                hi,
            });
        }
        match self {
            UtilityModel::Log(m) => Ok(m.deriv(lo) / lo),
            UtilityModel::Payoff(m) => Ok(m.deriv(lo) / lo),
            UtilityModel::Sigmoid(m) => {
                let ratio = |x: f64| m.deriv(x) / x;
                let width = 12.0 / m.eta;
                let mut candidates: Vec<f64> = Vec::with_capacity(1024 + 512);
                for k in 0..=1024 {
                    candidates.push(lo + (hi - lo) * k as f64 / 1024.0);
                }
                let (a, b) = ((m.psi - width).max(lo), (m.psi + width).min(hi));
                if a < b {
                    for k in 0..=512 {
                        candidates.push(a + (b - a) * k as f64 / 512.0);
                    }
                }
                candidates.sort_by(f64::total_cmp);
                let best = candidates
                    .iter()
                    .enumerate()
                    .max_by(|x, y| ratio(*x.1).total_cmp(&ratio(*y.1)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                let left = candidates[best.saturating_sub(1)];
                let right = candidates[(best + 1).min(candidates.len() - 1)];
                let refined = crate::search::golden_max(ratio, left, right, 1e-12);
                Ok(ratio(refined).max(ratio(candidates[best])))
            }
            UtilityModel::Step(_) => Err(Error::UnsupportedModel),
        }
    }
}

/// Concave capacity penalty `τ(z) = √(1 − zᵖ/Cᵖ)` on `[0, C]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyFn {
    exponent: u32,
    capacity: f64,
}

/// Relative slack tolerated above capacity before `τ` reports a domain error;
/// absorbs rounding in sums of feasible profiles.
const PENALTY_SLACK: f64 = 1e-12;

impl PenaltyFn {
    pub fn new(exponent: u32, capacity: f64) -> Result<Self> {
        if exponent == 0 {
            return Err(invalid("penalty_exponent", "must be a positive integer"));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(invalid("capacity", format!("must be finite and > 0, got {capacity}")));
        }
        Ok(Self { exponent, capacity })
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    fn check(&self, z: f64) -> Result<f64> {
        if z < 0.0 || z > self.capacity * (1.0 + PENALTY_SLACK) || z.is_nan() {
            return Err(Error::Domain {
                what: "penalty",
                value: z,
                lo: 0.0,
                hi: self.capacity,
            });
        }
        Ok(z.min(self.capacity))
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        let z = self.check(z)?;
        let r = (z / self.capacity).powi(self.exponent as i32);
        Ok((1.0 - r).max(0.0).sqrt())
    }

    /// `τ'(z)`; tends to `−∞` as `z → C`.
    pub fn deriv(&self, z: f64) -> Result<f64> {
        let z = self.check(z)?;
        let tau = self.eval(z)?;
        let p = self.exponent as i32;
        let slope = p as f64 * z.powi(p - 1) / self.capacity.powi(p);
        if tau == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(-slope / (2.0 * tau))
    }
}
