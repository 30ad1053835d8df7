//! Scenario files and their resolution into concrete populations.
//!
//! A scenario is a TOML document. Only `n`, `[utility]` and (for simulation)
//! `algorithm` are required:
//!
//! ```toml
//! name = "daimd-log"
//! n = 50
//! algorithm = "daimd"          # aimd | daimd | paimd | qaimd
//! horizon = 10000              # rounds, default 10000
//! seed = 1                     # default 1
//! # population_seed = 7        # default: same as seed
//! price = 0.0                  # default 0
//! # initial_x = 0.0            # default 0 (alpha for qaimd)
//! baseline_bins = 2000         # DP grid for sigmoid baselines
//!
//! [capacity]
//! ratio = 0.35                 # or: absolute = 25.0; default ratio 0.35
//!
//! [aimd]
//! alpha = 1.0
//! beta = 0.85
//! # gamma / gamma1 / gamma2: default calibrated from the population
//! lambda_floor = 0.001
//! lambda_ceil = 0.999
//! daimd_semantics = "as-written"   # or "expectation"
//!
//! [utility]
//! family = "log"               # log: eta + chi, sigmoid: eta + psi
//! eta = { uniform = [0.0, 1.0] }
//! chi = { uniform = [40.0, 60.0] }   # or a list, or a single number
//!
//! [game]
//! penalty_exponent = 1
//! tol = 1e-8
//! damping = 0.5
//! max_iters = 10000
//! ```
//!
//! The ratio capacity rule is `C = ratio·Σχᵢ` for log utilities and
//! `C = ratio·Σψᵢ` for sigmoids. Random parameters are drawn user by user
//! from a dedicated stream, so the first `k` users of an `n`-user population
//! do not depend on `n`.

use serde::{Deserialize, Serialize};

use crate::agent::{AimdParams, Algorithm, DaimdSemantics};
use crate::baseline::{refine_allocation, solve_concave, solve_sigmoidal, BaselineResult};
use crate::error::{Error, Result, Violation};
use crate::game::{GameConfig, NashOptions};
use crate::rng::{self, POPULATION_STREAM};
use crate::utility::{LogUtility, PayoffUtility, SigmoidUtility, UtilityModel};

pub const DEFAULT_HORIZON: u64 = 10_000;
pub const DEFAULT_CAPACITY_RATIO: f64 = 0.35;
pub const DEFAULT_BINS: usize = 2000;

/// Fraction of the tightest admissible scale used when `Γ` is not given.
pub const GAMMA_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub capacity: CapacitySpec,
    #[serde(default)]
    pub aimd: AimdSettings,
    #[serde(default)]
    pub price: f64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub population_seed: Option<u64>,
    #[serde(default)]
    pub initial_x: Option<f64>,
    #[serde(default = "default_bins")]
    pub baseline_bins: usize,
    pub utility: UtilitySpec,
    #[serde(default)]
    pub game: GameSettings,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}
fn default_seed() -> u64 {
    1
}
fn default_bins() -> usize {
    DEFAULT_BINS
}

/// Exactly one of `absolute` or `ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absolute: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

impl Default for CapacitySpec {
    fn default() -> Self {
        Self {
            absolute: None,
            ratio: Some(DEFAULT_CAPACITY_RATIO),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AimdSettings {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub gamma2: Option<f64>,
    #[serde(default = "default_floor")]
    pub lambda_floor: f64,
    #[serde(default = "default_ceil")]
    pub lambda_ceil: f64,
    #[serde(default)]
    pub daimd_semantics: DaimdSemantics,
}

fn one() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    0.85
}
fn default_floor() -> f64 {
    0.001
}
fn default_ceil() -> f64 {
    0.999
}

impl Default for AimdSettings {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.85,
            gamma: None,
            gamma1: None,
            gamma2: None,
            lambda_floor: 0.001,
            lambda_ceil: 0.999,
            daimd_semantics: DaimdSemantics::AsWritten,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum UtilitySpec {
    Log { eta: ParamDist, chi: ParamDist },
    Sigmoid { eta: ParamDist, psi: ParamDist },
}

impl UtilitySpec {
    fn family(&self) -> &'static str {
        match self {
            UtilitySpec::Log { .. } => "log",
            UtilitySpec::Sigmoid { .. } => "sigmoid",
        }
    }
}

/// How a per-user parameter is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamDist {
    /// Same value for everyone.
    Constant(f64),
    /// One value per user, in order; may be longer than `n`.
    Values(Vec<f64>),
    /// Independent draws from the open interval `(lo, hi)`.
    Uniform { uniform: [f64; 2] },
}

impl ParamDist {
    fn violations(&self, field: &str, n: usize, out: &mut Vec<Violation>) {
        let mut bad = |message: String| {
            out.push(Violation {
                field: field.to_string(),
                message,
            })
        };
        match self {
            ParamDist::Constant(v) => {
                if !(v.is_finite() && *v > 0.0) {
                    bad(format!("must be finite and > 0, got {v}"));
                }
            }
            ParamDist::Values(vs) => {
                if vs.len() < n {
                    bad(format!("lists {} values but n = {n}", vs.len()));
                }
                if let Some(v) = vs.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    bad(format!("every value must be finite and > 0, got {v}"));
                }
            }
            ParamDist::Uniform { uniform: [lo, hi] } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi) {
                    bad(format!("uniform bounds need 0 <= lo < hi, got [{lo}, {hi}]"));
                }
            }
        }
    }

    fn draw(&self, i: usize, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        match self {
            ParamDist::Constant(v) => *v,
            ParamDist::Values(vs) => vs[i],
            ParamDist::Uniform { uniform: [lo, hi] } => rng::open_uniform(rng, *lo, *hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSettings {
    #[serde(default = "default_exponent")]
    pub penalty_exponent: u32,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_exponent() -> u32 {
    1
}
fn default_tol() -> f64 {
    1e-8
}
fn default_damping() -> f64 {
    0.5
}
fn default_max_iters() -> usize {
    10_000
}

impl Default for GameSettings {
    fn default() -> Self {
        Self {
            penalty_exponent: 1,
            tol: 1e-8,
            damping: 0.5,
            max_iters: 10_000,
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a TOML scenario. Syntax errors carry the line and
    /// column of the offending token.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// Checks every bound and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| {
            out.push(Violation {
                field: field.into(),
                message,
            })
        };
        if self.n == 0 {
            bad("n", "must be >= 1".into());
        }
        if self.horizon == 0 {
            bad("horizon", "must be >= 1".into());
        }
        if !(self.price.is_finite() && self.price >= 0.0) {
            bad("price", format!("must be finite and >= 0, got {}", self.price));
        }
        if let Some(x0) = self.initial_x {
            if !(x0.is_finite() && x0 >= 0.0) {
                bad("initial_x", format!("must be finite and >= 0, got {x0}"));
            }
        }
        if self.baseline_bins < 100 {
            bad("baseline_bins", format!("must be >= 100, got {}", self.baseline_bins));
        }
        match (self.capacity.absolute, self.capacity.ratio) {
            (Some(c), None) if !(c.is_finite() && c > 0.0) => {
                bad("capacity.absolute", format!("must be finite and > 0, got {c}"))
            }
            (None, Some(r)) if !(r.is_finite() && r > 0.0) => {
                bad("capacity.ratio", format!("must be finite and > 0, got {r}"))
            }
            (Some(_), Some(_)) | (None, None) => bad("capacity", "give exactly one of `absolute` or `ratio`".into()),
            _ => {}
        }
        if let (Some(alg), family) = (self.algorithm, self.utility.family()) {
            let wanted = if alg == Algorithm::Qaimd { "sigmoid" } else { "log" };
            if family != wanted {
                bad(
                    "algorithm",
                    format!("{alg} runs on {wanted} utilities, but utility.family = \"{family}\""),
                );
            }
        }
        let g = &self.game;
        if g.penalty_exponent == 0 {
            bad("game.penalty_exponent", "must be >= 1".into());
        }
        if !(g.tol > 0.0) {
            bad("game.tol", format!("must be > 0, got {}", g.tol));
        }
        if !(g.damping > 0.0 && g.damping <= 1.0) {
            bad("game.damping", format!("must lie in (0, 1], got {}", g.damping));
        }
        if g.max_iters == 0 {
            bad("game.max_iters", "must be >= 1".into());
        }

        out.extend(self.base_params().violations("aimd."));
        match &self.utility {
            UtilitySpec::Log { eta, chi } => {
                eta.violations("utility.eta", self.n, &mut out);
                chi.violations("utility.chi", self.n, &mut out);
            }
            UtilitySpec::Sigmoid { eta, psi } => {
                eta.violations("utility.eta", self.n, &mut out);
                psi.violations("utility.psi", self.n, &mut out);
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(out))
        }
    }

    /// AIMD parameters with any unset `Γ` left at 1.
    fn base_params(&self) -> AimdParams {
        let a = &self.aimd;
        AimdParams {
            alpha: a.alpha,
            beta: a.beta,
            gamma: a.gamma.unwrap_or(1.0),
            gamma1: a.gamma1.unwrap_or(1.0),
            gamma2: a.gamma2.unwrap_or(1.0),
            lambda_floor: a.lambda_floor,
            lambda_ceil: a.lambda_ceil,
        }
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        self.algorithm.ok_or_else(|| {
            Error::Validation(vec![Violation {
                field: "algorithm".into(),
                message: "required to run a simulation".into(),
            }])
        })
    }

    /// Draws the population and fixes every derived quantity.
    pub fn resolve(&self) -> Result<Scenario> {
        self.validate()?;
        let n = self.n;
        let mut rng = rng::stream(self.population_seed.unwrap_or(self.seed), POPULATION_STREAM);
        let mut users = Vec::with_capacity(n);
        for i in 0..n {
            let user = match &self.utility {
                UtilitySpec::Log { eta, chi } => {
                    let e = eta.draw(i, &mut rng);
                    let c = chi.draw(i, &mut rng);
                    User::Log(LogUtility::new(e, c)?)
                }
                UtilitySpec::Sigmoid { eta, psi } => {
                    let e = eta.draw(i, &mut rng);
                    let p = psi.draw(i, &mut rng);
                    User::Sigmoid(SigmoidUtility::new(e, p)?)
                }
            };
            users.push(user);
        }
        let scale: f64 = users.iter().map(User::scale).sum();
        let capacity = match (self.capacity.absolute, self.capacity.ratio) {
            (Some(c), _) => c,
            (_, Some(r)) => r * scale,
            _ => unreachable!("validated"),
        };
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::Validation(vec![Violation {
                field: "capacity".into(),
                message: format!("resolves to {capacity}"),
            }]));
        }

        let objective: Vec<UtilityModel> = users
            .iter()
            .map(|u| match u {
                User::Log(m) => Ok(UtilityModel::Payoff(PayoffUtility::new(*m, self.price)?)),
                User::Sigmoid(m) => Ok(UtilityModel::Sigmoid(*m)),
            })
            .collect::<Result<_>>()?;

        let algorithm = self.algorithm;
        let agent_models: Vec<UtilityModel> = users
            .iter()
            .zip(&objective)
            .map(|(u, obj)| match (u, algorithm) {
                (User::Log(_), Some(Algorithm::Paimd)) => *obj,
                (User::Log(m), _) => UtilityModel::Log(*m),
                (User::Sigmoid(m), _) => UtilityModel::Sigmoid(*m),
            })
            .collect();

        let mut params = self.base_params();
        let hi = capacity.max(params.alpha);
        let mut sup = f64::NEG_INFINITY;
        for m in &agent_models {
            sup = sup.max(m.marginal_ratio_sup(params.alpha, hi)?);
        }
        let calibrated = if sup > 0.0 { GAMMA_SAFETY / sup } else { 1.0 };
        params.gamma = self.aimd.gamma.unwrap_or(calibrated);
        params.gamma1 = self.aimd.gamma1.unwrap_or(calibrated);
        params.gamma2 = self.aimd.gamma2.unwrap_or(calibrated);
        params.validate()?;

        let caps: Vec<Option<f64>> = objective
            .iter()
            .map(|m| match (m, algorithm) {
                (UtilityModel::Payoff(p), Some(Algorithm::Paimd)) => Some(p.argmax(capacity)),
                _ => None,
            })
            .collect();

        let initial_x = self.initial_x.unwrap_or(match algorithm {
            Some(Algorithm::Qaimd) => params.alpha,
            _ => 0.0,
        });

        Ok(Scenario {
            config: self.clone(),
            capacity,
            params,
            initial_x,
            agent_models,
            objective,
            caps,
        })
    }

    /// Returns a copy with one sweep axis set to `value`.
    ///
    /// Axes: `L` (price), `C_ratio` (capacity ratio), `n` (population size,
    /// integral) and `seed`.
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let bad = |message: String| {
            Error::Validation(vec![Violation {
                field: axis.to_string(),
                message,
            }])
        };
        match axis {
            "L" => c.price = value,
            "C_ratio" => {
                c.capacity = CapacitySpec {
                    absolute: None,
                    ratio: Some(value),
                }
            }
            "n" | "seed" => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                    return Err(bad(format!("needs a nonnegative integer, got {value}")));
                }
                if axis == "n" {
                    c.n = value as usize;
                } else {
                    c.seed = value as u64;
                }
            }
            other => return Err(Error::UnknownAxis(other.to_string())),
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy)]
enum User {
    Log(LogUtility),
    Sigmoid(SigmoidUtility),
}

impl User {
    fn scale(&self) -> f64 {
        match self {
            User::Log(m) => m.chi(),
            User::Sigmoid(m) => m.psi(),
        }
    }
}

/// A fully resolved scenario: a concrete population, capacity and parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub capacity: f64,
    /// Broadcast parameters with every `Γ` filled in.
    pub params: AimdParams,
    pub initial_x: f64,
    /// Utility each agent uses for its own back-off probability.
    pub agent_models: Vec<UtilityModel>,
    /// Per-user terms of the welfare objective (`v` for log users, `w` for sigmoids).
    pub objective: Vec<UtilityModel>,
    /// PAIMD increase caps `x*ᵢ`.
    pub caps: Vec<Option<f64>>,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.agent_models.len()
    }

    pub fn is_sigmoidal(&self) -> bool {
        matches!(self.config.utility, UtilitySpec::Sigmoid { .. })
    }

    /// Inflection points of sigmoid users.
    pub fn inflections(&self) -> Vec<Option<f64>> {
        self.agent_models
            .iter()
            .map(|m| match m {
                UtilityModel::Sigmoid(s) => Some(s.psi()),
                _ => None,
            })
            .collect()
    }

    /// Centralised optimum of the scenario objective.
    ///
    /// Concave scenarios are solved exactly. Sigmoid scenarios use the
    /// capacity DP followed by one continuous refinement pass of one grid
    /// step per user.
    pub fn baseline(&self) -> Result<BaselineResult> {
        if self.is_sigmoidal() {
            let bins = self.config.baseline_bins;
            let grid = solve_sigmoidal(&self.objective, self.capacity, bins)?;
            Ok(refine_allocation(
                &self.objective,
                self.capacity,
                &grid,
                self.capacity / bins as f64,
            ))
        } else {
            solve_concave(&self.objective, self.capacity)
        }
    }

    /// Competition game over the same population (log users only).
    pub fn game(&self) -> Result<(GameConfig, NashOptions)> {
        let models = self
            .objective
            .iter()
            .map(|m| match m {
                UtilityModel::Payoff(p) => Ok(*p.base()),
                _ => Err(Error::Validation(vec![Violation {
                    field: "utility.family".into(),
                    message: "the competition game needs log utilities".into(),
                }])),
            })
            .collect::<Result<Vec<_>>>()?;
        let g = &self.config.game;
        let config = GameConfig::new(models, self.capacity, self.config.price, g.penalty_exponent)?;
        let options = NashOptions {
            tol: g.tol,
            max_iters: g.max_iters,
            damping: g.damping,
            initial: None,
        };
        Ok((config, options))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        n = 4
        algorithm = "daimd"
        [utility]
        family = "log"
        eta = { uniform = [0.0, 1.0] }
        chi = { uniform = [40.0, 60.0] }
    "#;

    #[test]
    fn defaults_fill_in() {
        let c = ScenarioConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.horizon, 10_000);
        assert_eq!(c.seed, 1);
        assert_eq!(c.capacity.ratio, Some(0.35));
        assert_eq!(c.aimd.beta, 0.85);
        assert_eq!(c.game.tol, 1e-8);
        let s = c.resolve().unwrap();
        let chi_sum: f64 = s
            .agent_models
            .iter()
            .map(|m| match m {
                UtilityModel::Log(l) => l.chi(),
                _ => unreachable!(),
            })
            .sum();
        assert!((s.capacity - 0.35 * chi_sum).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let err = ScenarioConfig::from_toml(&format!("{BASIC}\n[aimd]\nbeat = 0.5\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("beat"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn validation_lists_every_violation() {
        let text = BASIC.replace("n = 4", "n = 4\nprice = -1.0\nhorizon = 0");
        let err = ScenarioConfig::from_toml(&format!("{text}\n[aimd]\nbeta = 1.2\n")).unwrap_err();
        match err {
            Error::Validation(v) => {
                let fields: Vec<_> = v.iter().map(|v| v.field.as_str()).collect();
                assert!(fields.contains(&"aimd.beta"));
                assert!(fields.contains(&"price"));
                assert!(fields.contains(&"horizon"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn family_must_match_algorithm() {
        let err = ScenarioConfig::from_toml(&BASIC.replace("daimd", "qaimd")).unwrap_err();
        assert!(err.to_string().contains("algorithm"));
    }

    #[test]
    fn populations_are_prefix_consistent() {
        let c = ScenarioConfig::from_toml(BASIC).unwrap();
        let small = c.resolve().unwrap();
        let big = c.with_axis("n", 9.0).unwrap().resolve().unwrap();
        assert_eq!(&big.agent_models[..4], &small.agent_models[..]);
    }

    #[test]
    fn population_seed_decouples_users_from_draws() {
        let mut c = ScenarioConfig::from_toml(BASIC).unwrap();
        c.population_seed = Some(3);
        let a = c.resolve().unwrap();
        c.seed = 99;
        let b = c.resolve().unwrap();
        assert_eq!(a.agent_models, b.agent_models);
    }

    #[test]
    fn gamma_is_calibrated_against_the_tightest_user() {
        let s = ScenarioConfig::from_toml(BASIC).unwrap().resolve().unwrap();
        let alpha = s.params.alpha;
        let worst = s
            .agent_models
            .iter()
            .map(|m| m.deriv(alpha).unwrap() / alpha)
            .fold(0.0, f64::max);
        assert!((s.params.gamma * worst - GAMMA_SAFETY).abs() < 1e-12);
    }

    #[test]
    fn explicit_values_and_absolute_capacity() {
        let text = r#"
            n = 2
            [capacity]
            absolute = 25.0
            [utility]
            family = "log"
            eta = [15.0, 38.0]
            chi = [30.0, 70.0]
        "#;
        let s = ScenarioConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(s.capacity, 25.0);
        assert_eq!(
            s.agent_models[1],
            UtilityModel::Log(LogUtility::new(38.0, 70.0).unwrap())
        );
        assert!(s.game().is_ok());
    }

    #[test]
    fn axes() {
        let c = ScenarioConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.with_axis("L", 0.3).unwrap().price, 0.3);
        assert_eq!(c.with_axis("C_ratio", 2.0).unwrap().capacity.ratio, Some(2.0));
        assert_eq!(c.with_axis("seed", 7.0).unwrap().seed, 7);
        assert!(matches!(c.with_axis("beta", 0.5), Err(Error::UnknownAxis(_))));
        assert!(c.with_axis("n", 2.5).is_err());
        assert!(c.with_axis("n", 0.0).is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let c = ScenarioConfig::from_toml(BASIC).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
