//! Per-user AIMD state machines.
//!
//! Four variants share one state record:
//!
//! * **AIMD**: additive increase while the capacity signal is clear; on a
//!   congestion signal back off multiplicatively with probability `λ`.
//! * **DAIMD**: the derandomised variant; the stochastic back-off is replaced
//!   by a deterministic convex combination (see [`DaimdSemantics`]).
//! * **PAIMD**: AIMD for priced goods; additive increase never passes the
//!   user's payoff maximiser `x*`.
//! * **QAIMD**: for sigmoidal utilities; below the inflection point the user
//!   grows multiplicatively and backs off additively, above it plain AIMD runs.
//!
//! The back-off probability is `λ = clamp(Γ·u'(x̄) / max(x̄, α), floor, ceil)`,
//! where `x̄` is the running average of the user's allocation. Transitions are
//! pure: `(state, signal, draw) → state`.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, Violation};
use crate::rng;
use crate::utility::UtilityModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Aimd,
    Daimd,
    Paimd,
    Qaimd,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Aimd => "aimd",
            Algorithm::Daimd => "daimd",
            Algorithm::Paimd => "paimd",
            Algorithm::Qaimd => "qaimd",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aimd" => Ok(Algorithm::Aimd),
            "daimd" => Ok(Algorithm::Daimd),
            "paimd" => Ok(Algorithm::Paimd),
            "qaimd" => Ok(Algorithm::Qaimd),
            other => Err(invalid("algorithm", format!("unknown variant `{other}`"))),
        }
    }
}

/// How DAIMD applies the deterministic back-off.
///
/// `AsWritten` uses `x ← β(1−λ)x + λx`, which keeps `x` with weight `λ`.
/// `Expectation` uses `x ← x(1 − λ(1−β))`, the mean of the stochastic AIMD
/// back-off. The two coincide only when `λ = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaimdSemantics {
    #[default]
    AsWritten,
    Expectation,
}

/// Which broadcast scale a `λ` evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSelector {
    Gamma,
    Gamma1,
    Gamma2,
}

/// Broadcast AIMD parameters, identical for every user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AimdParams {
    /// Additive growth per round.
    pub alpha: f64,
    /// Multiplicative drop factor in `(0, 1)`.
    pub beta: f64,
    pub gamma: f64,
    /// QAIMD scale below the inflection point.
    pub gamma1: f64,
    /// QAIMD scale above the inflection point.
    pub gamma2: f64,
    pub lambda_floor: f64,
    pub lambda_ceil: f64,
}

impl Default for AimdParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.85,
            gamma: 1.0,
            gamma1: 1.0,
            gamma2: 1.0,
            lambda_floor: 0.001,
            lambda_ceil: 0.999,
        }
    }
}

impl AimdParams {
    pub fn violations(&self, prefix: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| {
            out.push(Violation {
                field: format!("{prefix}{field}"),
                message,
            })
        };
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            bad("alpha", format!("must be > 0, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            bad("beta", format!("must lie in (0, 1), got {}", self.beta));
        }
        for (name, g) in [("gamma", self.gamma), ("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(g.is_finite() && g > 0.0) {
                bad(name, format!("must be finite and > 0, got {g}"));
            }
        }
        if !(self.lambda_floor >= 0.0 && self.lambda_floor < self.lambda_ceil && self.lambda_ceil <= 1.0) {
            bad(
                "lambda_floor",
                format!(
                    "need 0 <= lambda_floor < lambda_ceil <= 1, got [{}, {}]",
                    self.lambda_floor, self.lambda_ceil
                ),
            );
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations("");
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    fn scale(&self, which: GammaSelector) -> f64 {
        match which {
            GammaSelector::Gamma => self.gamma,
            GammaSelector::Gamma1 => self.gamma1,
            GammaSelector::Gamma2 => self.gamma2,
        }
    }
}

/// The one-bit congestion notification, identical for every agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CapacitySignal {
    pub over: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Current allocation `x(t)`.
    pub x: f64,
    /// Mean of `x(0), …, x(t)`.
    pub xbar: f64,
    pub t: u64,
    /// Most recently computed back-off probability.
    pub lambda: f64,
    pub utility: UtilityModel,
    /// PAIMD ceiling `x*`.
    pub xstar: Option<f64>,
    /// QAIMD inflection point `ψ`.
    pub psi: Option<f64>,
}

impl AgentState {
    pub fn new(utility: UtilityModel, x0: f64) -> Result<Self> {
        if !utility.is_differentiable() {
            return Err(Error::UnsupportedModel);
        }
        if !(x0.is_finite() && x0 >= 0.0) {
            return Err(invalid("initial_x", format!("must be finite and >= 0, got {x0}")));
        }
        Ok(Self {
            x: x0,
            xbar: x0,
            t: 0,
            lambda: 0.0,
            utility,
            xstar: None,
            psi: None,
        })
    }

    pub fn with_cap(mut self, xstar: f64) -> Self {
        self.xstar = Some(xstar);
        self
    }

    pub fn with_inflection(mut self, psi: f64) -> Self {
        self.psi = Some(psi);
        self
    }

    /// Folds the current allocation into the running mean.
    pub fn update_running_average(mut self) -> Self {
        self.t += 1;
        let t = self.t as f64;
        self.xbar = (t * self.xbar + self.x) / (t + 1.0);
        self
    }

    pub fn lambda_of(&self, params: &AimdParams, which: GammaSelector) -> f64 {
        // Negative marginals (priced goods past x*) count as zero.
        let marginal = self.utility.deriv(self.xbar).unwrap_or(0.0).max(0.0);
        let raw = params.scale(which) * marginal / self.xbar.max(params.alpha);
        raw.clamp(params.lambda_floor, params.lambda_ceil)
    }

    pub fn aimd_step(self, params: &AimdParams, over: bool, draw: f64) -> Self {
        self.stochastic_step(params, over, draw, GammaSelector::Gamma, None)
    }

    pub fn daimd_step(mut self, params: &AimdParams, over: bool, semantics: DaimdSemantics) -> Self {
        self.lambda = self.lambda_of(params, GammaSelector::Gamma);
        if !over {
            self.x += params.alpha;
        } else {
            let (lambda, beta) = (self.lambda, params.beta);
            self.x = match semantics {
                DaimdSemantics::AsWritten => beta * (1.0 - lambda) * self.x + lambda * self.x,
                DaimdSemantics::Expectation => self.x * (1.0 - lambda * (1.0 - beta)),
            };
        }
        self
    }

    pub fn paimd_step(self, params: &AimdParams, over: bool, draw: f64) -> Self {
        let cap = self.xstar.unwrap_or(f64::INFINITY);
        self.stochastic_step(params, over, draw, GammaSelector::Gamma, Some(cap))
    }

    pub fn qaimd_step(mut self, params: &AimdParams, over: bool, draw: f64) -> Self {
        let psi = self.psi.unwrap_or(0.0);
        if self.xbar >= psi {
            return self.stochastic_step(params, over, draw, GammaSelector::Gamma2, None);
        }
        self.lambda = self.lambda_of(params, GammaSelector::Gamma1);
        if !over {
            if draw < self.lambda {
                self.x /= params.beta;
            }
        } else {
            self.x = (self.x - params.alpha).max(0.0);
        }
        self
    }

    fn stochastic_step(
        mut self,
        params: &AimdParams,
        over: bool,
        draw: f64,
        which: GammaSelector,
        cap: Option<f64>,
    ) -> Self {
        self.lambda = self.lambda_of(params, which);
        if !over {
            self.x += params.alpha;
            if let Some(cap) = cap {
                self.x = self.x.min(cap);
            }
        } else if draw < self.lambda {
            self.x *= params.beta;
        }
        self
    }
}

/// A user as seen by the engine: it owns its state and its private random
/// stream, and it can only be driven by the broadcast capacity signal.
#[derive(Debug, Clone)]
pub struct Agent {
    state: AgentState,
    params: AimdParams,
    algorithm: Algorithm,
    semantics: DaimdSemantics,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(
        state: AgentState,
        params: AimdParams,
        algorithm: Algorithm,
        semantics: DaimdSemantics,
        seed: u64,
        id: usize,
    ) -> Self {
        Self {
            state,
            params,
            algorithm,
            semantics,
            rng: rng::agent_stream(seed, id),
        }
    }

    /// One round: update the allocation from the signal, then the running mean.
    ///
    /// Exactly one uniform is consumed per round, whether or not the variant
    /// needs it, so the stream stays aligned with the round counter.
    pub fn step(&mut self, signal: CapacitySignal) {
        let draw = rng::unit(&mut self.rng);
        let s = self.state;
        let next = match self.algorithm {
            Algorithm::Aimd => s.aimd_step(&self.params, signal.over, draw),
            Algorithm::Daimd => s.daimd_step(&self.params, signal.over, self.semantics),
            Algorithm::Paimd => s.paimd_step(&self.params, signal.over, draw),
            Algorithm::Qaimd => s.qaimd_step(&self.params, signal.over, draw),
        };
        self.state = next.update_running_average();
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }
}
