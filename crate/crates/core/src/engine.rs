//! Synchronous round-based simulation.
//!
//! Each round the engine broadcasts one bit, "the aggregate exceeded `C` last
//! round", steps every participant, and records what happened. Participants
//! see nothing but that bit and their own state: the [`Participant`] trait is
//! the whole agent-facing interface.

use rayon::prelude::*;
use serde::Serialize;

use crate::agent::{Agent, AgentState, Algorithm, CapacitySignal};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::utility::UtilityModel;

/// Rounds of stability required before a run counts as converged.
pub const CONVERGENCE_WINDOW: u64 = 100;
/// Relative per-round change in `x̄` tolerated inside the window.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// What the engine may do with an agent.
pub trait Participant {
    /// Delivers the broadcast signal; the agent updates its allocation and
    /// running average.
    fn respond(&mut self, signal: CapacitySignal);
    /// Read-only view used for metering and traces.
    fn report(&self) -> &AgentState;
}

impl Participant for Agent {
    fn respond(&mut self, signal: CapacitySignal) {
        self.step(signal)
    }

    fn report(&self) -> &AgentState {
        self.state()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: u64,
    pub agent: usize,
    pub x: f64,
    pub xbar: f64,
    pub lambda: f64,
    pub signal: bool,
    pub sum_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub efficiency: f64,
    pub objective_distributed: f64,
    pub objective_optimal: f64,
    /// First round of the first 100-round window in which every `x̄ᵢ` moved by
    /// less than 0.1% per round.
    pub converged_round: Option<u64>,
    pub n: usize,
    pub capacity: f64,
    pub algorithm: Algorithm,
    pub sum_xbar: f64,
    pub final_sum_x: f64,
    pub xbar: Vec<f64>,
}

/// Outcome of driving participants through the rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub xbar: Vec<f64>,
    pub final_sum_x: f64,
    pub converged_round: Option<u64>,
}

/// Runs `horizon` rounds. Round `t` delivers `Σx(t−1) > C`, where `Σx(0)` is
/// the initial aggregate. Records go to `sink` in round order, agent order.
pub fn drive<P: Participant>(
    participants: &mut [P],
    capacity: f64,
    horizon: u64,
    mut sink: impl FnMut(&TraceRecord),
) -> Dynamics {
    let mut sum_prev: f64 = participants.iter().map(|p| p.report().x).sum();
    let mut prev_xbar: Vec<f64> = participants.iter().map(|p| p.report().xbar).collect();
    let mut streak = 0u64;
    let mut converged_round = None;

    for t in 1..=horizon {
        let signal = CapacitySignal {
            over: sum_prev > capacity,
        };
        for p in participants.iter_mut() {
            p.respond(signal);
        }
        let sum_x: f64 = participants.iter().map(|p| p.report().x).sum();

        let mut stable = true;
        for (i, p) in participants.iter().enumerate() {
            let s = p.report();
            sink(&TraceRecord {
                t,
                agent: i,
                x: s.x,
                xbar: s.xbar,
                lambda: s.lambda,
                signal: signal.over,
                sum_x,
            });
            stable &= (s.xbar - prev_xbar[i]).abs() <= CONVERGENCE_TOL * s.xbar.abs();
            prev_xbar[i] = s.xbar;
        }
        streak = if stable { streak + 1 } else { 0 };
        if converged_round.is_none() && streak == CONVERGENCE_WINDOW {
            converged_round = Some(t + 1 - CONVERGENCE_WINDOW);
        }
        sum_prev = sum_x;
    }

    Dynamics {
        xbar: prev_xbar,
        final_sum_x: sum_prev,
        converged_round,
    }
}

/// Builds the agents of a resolved scenario.
pub fn spawn_agents(scenario: &Scenario) -> Result<Vec<Agent>> {
    let algorithm = scenario.config.algorithm()?;
    let psi = scenario.inflections();
    scenario
        .agent_models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut state = AgentState::new(*m, scenario.initial_x)?;
            if let Some(cap) = scenario.caps[i] {
                state = state.with_cap(cap);
            }
            if let Some(p) = psi[i] {
                state = state.with_inflection(p);
            }
            Ok(Agent::new(
                state,
                scenario.params,
                algorithm,
                scenario.config.aimd.daimd_semantics,
                scenario.config.seed,
                i,
            ))
        })
        .collect()
}

/// `Σ objᵢ(x̄ᵢ) / Σ objᵢ(x*ᵢ)`.
pub fn efficiency(xbar: &[f64], objective: &[UtilityModel], optimum: f64) -> Result<f64> {
    if !(optimum > 0.0) {
        return Err(Error::UndefinedEfficiency(optimum));
    }
    let achieved: f64 = objective.iter().zip(xbar).map(|(m, x)| m.eval(*x)).sum();
    Ok(achieved / optimum)
}

/// Runs a scenario, passing every trace record to `sink`.
pub fn run_simulation_with(config: &ScenarioConfig, sink: impl FnMut(&TraceRecord)) -> Result<RunSummary> {
    let scenario = config.resolve()?;
    let algorithm = config.algorithm()?;
    let mut agents = spawn_agents(&scenario)?;
    let dynamics = drive(&mut agents, scenario.capacity, config.horizon, sink);

    let baseline = scenario.baseline()?;
    let eff = efficiency(&dynamics.xbar, &scenario.objective, baseline.objective)?;
    let achieved = eff * baseline.objective;
    Ok(RunSummary {
        scenario: config.name.clone(),
        seed: config.seed,
        horizon: config.horizon,
        efficiency: eff,
        objective_distributed: achieved,
        objective_optimal: baseline.objective,
        converged_round: dynamics.converged_round,
        n: scenario.n(),
        capacity: scenario.capacity,
        algorithm,
        sum_xbar: dynamics.xbar.iter().sum(),
        final_sum_x: dynamics.final_sum_x,
        xbar: dynamics.xbar,
    })
}

/// Runs a scenario and keeps the whole trace.
pub fn run_simulation(config: &ScenarioConfig) -> Result<(Vec<TraceRecord>, RunSummary)> {
    let mut trace = Vec::with_capacity(config.n.saturating_mul(config.horizon.min(1 << 20) as usize));
    let summary = run_simulation_with(config, |r| trace.push(*r))?;
    Ok((trace, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub efficiency: f64,
    pub sum_xbar: f64,
    pub converged_round: Option<u64>,
    pub objective_distributed: f64,
    pub objective_optimal: f64,
    pub capacity: f64,
}

impl From<(f64, &RunSummary)> for SweepRow {
    fn from((value, s): (f64, &RunSummary)) -> Self {
        Self {
            value,
            efficiency: s.efficiency,
            sum_xbar: s.sum_xbar,
            converged_round: s.converged_round,
            objective_distributed: s.objective_distributed,
            objective_optimal: s.objective_optimal,
            capacity: s.capacity,
        }
    }
}

/// One run per axis value, executed in parallel, rows in input order.
///
/// Only the swept field changes; in particular the seed is kept unless the
/// axis is `seed`, so a one-value sweep reproduces [`run_simulation`].
pub fn sweep(config: &ScenarioConfig, axis: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    let configs = values
        .iter()
        .map(|v| config.with_axis(axis, *v))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, v)| run_simulation_with(c, |_| {}).map(|s| SweepRow::from((*v, &s))))
        .collect()
}
