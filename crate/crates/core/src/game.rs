//! Competition over the shared capacity as a strategic game.
//!
//! With the hard payoff `ũᵢ = uᵢ(xᵢ)·[Σx ≤ C]` every profile that exactly
//! fills the capacity is an equilibrium. Multiplying the utility by a concave
//! capacity penalty `τ(Σx)` and charging a unit price gives the continuous
//! payoff `ṽᵢ = uᵢ(xᵢ)·τ(Σx) − L·xᵢ`, which has a unique equilibrium that we
//! locate by damped best-response iteration.

use serde::Serialize;

use crate::baseline::BaselineResult;
use crate::error::{invalid, Error, Result};
use crate::search::bisect_sign_change;
use crate::utility::{LogUtility, PayoffUtility, PenaltyFn, UtilityModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub models: Vec<LogUtility>,
    pub capacity: f64,
    pub price: f64,
    pub penalty: PenaltyFn,
}

impl GameConfig {
    pub fn new(models: Vec<LogUtility>, capacity: f64, price: f64, exponent: u32) -> Result<Self> {
        if models.is_empty() {
            return Err(invalid("models", "need at least one player"));
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(invalid("price", format!("must be finite and >= 0, got {price}")));
        }
        let penalty = PenaltyFn::new(exponent, capacity)?;
        Ok(Self {
            models,
            capacity,
            price,
            penalty,
        })
    }

    pub fn players(&self) -> usize {
        self.models.len()
    }

    /// Payoff models `vᵢ = uᵢ − L·xᵢ` of the matching centralised problem.
    pub fn payoff_models(&self) -> Vec<UtilityModel> {
        self.models
            .iter()
            .map(|m| UtilityModel::Payoff(PayoffUtility::new(*m, self.price).expect("price validated")))
            .collect()
    }

    /// Hard-capacity payoff: `uᵢ(xᵢ)` if the profile fits, otherwise nothing.
    pub fn payoff_discontinuous(&self, i: usize, profile: &[f64]) -> f64 {
        let total: f64 = profile.iter().sum();
        if total <= self.capacity {
            self.models[i].eval(profile[i])
        } else {
            0.0
        }
    }

    /// Best response in the hard-capacity game: claim whatever is left.
    pub fn br_discontinuous(&self, others_sum: f64) -> f64 {
        self.capacity - others_sum
    }

    pub fn payoff_penalized(&self, i: usize, profile: &[f64]) -> Result<f64> {
        let total: f64 = profile.iter().sum();
        let tau = self.penalty.eval(total)?;
        Ok(self.models[i].eval(profile[i]) * tau - self.price * profile[i])
    }

    /// `∂ṽᵢ/∂xᵢ` with the rest of the profile summing to `others`.
    fn own_marginal(&self, i: usize, own: f64, others: f64) -> f64 {
        let z = (own + others).min(self.capacity);
        let u = &self.models[i];
        let tau = self.penalty.eval(z).unwrap_or(0.0);
        let dtau = self.penalty.deriv(z).unwrap_or(f64::NEG_INFINITY);
        let coupling = if u.eval(own) == 0.0 { 0.0 } else { u.eval(own) * dtau };
        u.deriv(own) * tau + coupling - self.price
    }

    fn own_payoff(&self, i: usize, own: f64, others: f64) -> f64 {
        let z = (own + others).min(self.capacity);
        self.models[i].eval(own) * self.penalty.eval(z).unwrap_or(0.0) - self.price * own
    }

    /// `argmax_{x ∈ [0, C − others]} ṽᵢ(x, others)`.
    ///
    /// A 64-point scan of the payoff brackets the maximiser; inside the bracket
    /// the own-action marginal is bisected to its sign change. The payoff is
    /// concave in the own action, so the marginal is monotone and the root is
    /// located to machine precision.
    pub fn best_response(&self, i: usize, others: f64) -> f64 {
        let hi = (self.capacity - others).max(0.0);
        if hi == 0.0 {
            return 0.0;
        }
        const SCAN: usize = 64;
        let grid = |k: usize| hi * k as f64 / SCAN as f64;
        let k = (0..=SCAN)
            .max_by(|a, b| {
                self.own_payoff(i, grid(*a), others)
                    .total_cmp(&self.own_payoff(i, grid(*b), others))
            })
            .unwrap_or(0);
        let (a, b) = (grid(k.saturating_sub(1)), grid((k + 1).min(SCAN)));
        let g = |x: f64| self.own_marginal(i, x, others);
        if g(a) <= 0.0 {
            return a;
        }
        if g(b) > 0.0 {
            return b;
        }
        bisect_sign_change(g, a, b)
    }

    /// `max_i |xᵢ − BRᵢ(x₋ᵢ)|` at a profile.
    pub fn br_residual(&self, profile: &[f64]) -> f64 {
        let total: f64 = profile.iter().sum();
        profile
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - self.best_response(i, total - x)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    /// Starting profile; defaults to `C / (2n)` for every player.
    pub initial: Option<Vec<f64>>,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 10_000,
            damping: 0.5,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashResult {
    pub x_ne: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm best-response displacement at `x_ne`.
    pub residual: f64,
    /// Largest `|∂ṽᵢ/∂xᵢ|` over players strictly inside their feasible range.
    pub first_order_residual: f64,
    pub converged: bool,
    pub poa: Option<f64>,
}

/// Damped best-response iteration.
///
/// Players update in index order, each responding to the latest profile
/// (Gauss–Seidel). The iteration stops once the best-response residual of the
/// whole profile is within `tol`; running out of iterations is reported via
/// `converged = false`, not as an error.
pub fn nash_solve(config: &GameConfig, options: &NashOptions) -> Result<NashResult> {
    if !(options.tol > 0.0) {
        return Err(invalid("tol", "must be > 0"));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(invalid("damping", "must lie in (0, 1]"));
    }
    let n = config.players();
    let mut x = match &options.initial {
        Some(start) => {
            if start.len() != n || start.iter().any(|v| *v < 0.0) || start.iter().sum::<f64>() > config.capacity {
                return Err(invalid(
                    "initial",
                    "must be a feasible profile with one entry per player",
                ));
            }
            start.clone()
        }
        None => vec![config.capacity / (2.0 * n as f64); n],
    };

    let d = options.damping;
    let mut total: f64 = x.iter().sum();
    let mut residual = config.br_residual(&x);
    let mut iterations = 0;
    while residual > options.tol && iterations < options.max_iters {
        for i in 0..n {
            let others = (total - x[i]).max(0.0);
            let br = config.best_response(i, others);
            let updated = (1.0 - d) * x[i] + d * br;
            total = others + updated;
            x[i] = updated;
        }
        // Re-sum to keep rounding from drifting.
        total = x.iter().sum();
        iterations += 1;
        residual = config.br_residual(&x);
    }

    let first_order_residual = (0..n)
        .filter(|&i| {
            let hi = config.capacity - (total - x[i]);
            x[i] > 0.0 && x[i] < hi
        })
        .map(|i| config.own_marginal(i, x[i], total - x[i]).abs())
        .fold(0.0, f64::max);

    Ok(NashResult {
        x_ne: x,
        iterations,
        residual,
        first_order_residual,
        converged: residual <= options.tol,
        poa: None,
    })
}

/// Equilibrium welfare `Σ ṽᵢ(x^ne)`.
pub fn equilibrium_welfare(config: &GameConfig, nash: &NashResult) -> Result<f64> {
    (0..config.players())
        .map(|i| config.payoff_penalized(i, &nash.x_ne))
        .sum()
}

/// `Σ ṽᵢ(x^ne) / Σ vᵢ(x*)`: penalised equilibrium welfare against the
/// unpenalised centralised optimum.
pub fn poa(config: &GameConfig, nash: &NashResult, baseline: &BaselineResult) -> Result<f64> {
    let denominator: f64 = config
        .payoff_models()
        .iter()
        .zip(&baseline.x_star)
        .map(|(m, x)| m.eval(*x))
        .sum();
    if !(denominator > 0.0) {
        return Err(Error::UndefinedPoa(denominator));
    }
    Ok(equilibrium_welfare(config, nash)? / denominator)
}
