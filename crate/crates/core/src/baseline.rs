//! Centralised reference solvers for `max Σ uᵢ(xᵢ)  s.t.  Σ xᵢ ≤ C, xᵢ ≥ 0`.
//!
//! * [`solve_concave`] handles log utilities and their priced payoffs exactly,
//!   by bisection on the capacity multiplier `μ` (water-filling).
//! * [`solve_sigmoidal`] handles S-shaped utilities by dynamic programming over
//!   a uniform capacity grid; the result is the exact optimum of the
//!   discretised problem.
//! * [`brute_force_oracle`] enumerates the simplex grid for up to three users
//!   and exists to cross-check the other two.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::search::golden_max;
use crate::utility::{LogUtility, UtilityModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub x_star: Vec<f64>,
    pub objective: f64,
    /// Capacity multiplier `μ` (concave solver only).
    pub dual: Option<f64>,
    /// Largest KKT violation (concave solver only).
    pub residual: Option<f64>,
}

fn objective(models: &[UtilityModel], x: &[f64]) -> f64 {
    models.iter().zip(x).map(|(m, &xi)| m.eval(xi)).sum()
}

fn check_capacity(capacity: f64) -> Result<()> {
    if capacity.is_finite() && capacity > 0.0 {
        Ok(())
    } else {
        Err(invalid("capacity", format!("must be finite and > 0, got {capacity}")))
    }
}

/// Log utility plus a (possibly zero) linear price.
#[derive(Clone, Copy)]
struct Concave {
    base: LogUtility,
    price: f64,
}

impl Concave {
    fn from_model(m: &UtilityModel) -> Result<Self> {
        match m {
            UtilityModel::Log(base) => Ok(Self {
                base: *base,
                price: 0.0,
            }),
            UtilityModel::Payoff(p) => Ok(Self {
                base: *p.base(),
                price: p.price(),
            }),
            _ => Err(invalid("models", "solve_concave needs log or payoff utilities")),
        }
    }

    fn marginal(&self, x: f64) -> f64 {
        self.base.deriv(x) - self.price
    }

    /// Demand at multiplier `mu`: the point where the marginal equals `mu`.
    fn demand(&self, mu: f64) -> f64 {
        self.base.inverse_marginal(mu + self.price).max(0.0)
    }
}

/// Water-filling solution of the concave problem.
pub fn solve_concave(models: &[UtilityModel], capacity: f64) -> Result<BaselineResult> {
    check_capacity(capacity)?;
    if models.is_empty() {
        return Err(invalid("models", "need at least one user"));
    }
    let users = models.iter().map(Concave::from_model).collect::<Result<Vec<_>>>()?;
    let total = |mu: f64| users.iter().map(|u| u.demand(mu)).sum::<f64>();

    let (mu, x) = if total(0.0) <= capacity {
        (0.0, users.iter().map(|u| u.demand(0.0)).collect::<Vec<_>>())
    } else {
        // Every demand is zero once μ reaches the largest marginal at 0.
        let mut lo = 0.0;
        let mut hi = users.iter().map(|u| u.marginal(0.0)).fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = total(mid);
            if s > capacity {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (hi, users.iter().map(|u| u.demand(hi)).collect())
    };

    let residual = users
        .iter()
        .zip(&x)
        .map(|(u, &xi)| {
            if xi > 0.0 {
                (u.marginal(xi) - mu).abs()
            } else {
                (u.marginal(0.0) - mu).max(0.0)
            }
        })
        .fold(0.0, f64::max);

    Ok(BaselineResult {
        objective: objective(models, &x),
        x_star: x,
        dual: Some(mu),
        residual: Some(residual),
    })
}

/// Exact optimum of the problem discretised to `bins` equal capacity steps.
///
/// `best(k, c) = max_{j ≤ c} [w_k(jδ) + best(k−1, c−j)]` with `δ = C / bins`.
pub fn solve_sigmoidal(models: &[UtilityModel], capacity: f64, bins: usize) -> Result<BaselineResult> {
    check_capacity(capacity)?;
    if bins < 100 {
        return Err(invalid("bins", format!("need at least 100 bins, got {bins}")));
    }
    if models.is_empty() {
        return Err(invalid("models", "need at least one user"));
    }
    let delta = capacity / bins as f64;
    let width = bins + 1;

    let mut best = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    let mut choice = vec![0u32; models.len() * width];
    let mut values = vec![0.0f64; width];

    for (k, m) in models.iter().enumerate() {
        for (j, v) in values.iter_mut().enumerate() {
            *v = m.eval(j as f64 * delta);
        }
        let row = &mut choice[k * width..(k + 1) * width];
        for c in 0..width {
            let mut top = f64::NEG_INFINITY;
            let mut arg = 0;
            for j in 0..=c {
                let cand = values[j] + best[c - j];
                if cand > top {
                    top = cand;
                    arg = j;
                }
            }
            next[c] = top;
            row[c] = arg as u32;
        }
        std::mem::swap(&mut best, &mut next);
    }

    let mut x = vec![0.0; models.len()];
    let mut c = bins;
    for k in (0..models.len()).rev() {
        let j = choice[k * width + c] as usize;
        x[k] = j as f64 * delta;
        c -= j;
    }

    Ok(BaselineResult {
        objective: best[bins],
        x_star: x,
        dual: None,
        residual: None,
    })
}

/// One pass of per-user continuous refinement around a grid solution.
///
/// Each user in turn re-optimises its own allocation within one grid step of
/// the current value, subject to the leftover capacity, with every other
/// user held fixed. The objective never decreases.
pub fn refine_allocation(models: &[UtilityModel], capacity: f64, start: &BaselineResult, step: f64) -> BaselineResult {
    let mut x = start.x_star.clone();
    for i in 0..x.len() {
        let others: f64 = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
        let hi = (x[i] + step).min(capacity - others).max(0.0);
        let lo = (x[i] - step).max(0.0).min(hi);
        let m = models[i];
        let cand = golden_max(|v| m.eval(v), lo, hi, 1e-10);
        let best = [cand, hi, x[i].min(hi)]
            .into_iter()
            .max_by(|a, b| m.eval(*a).total_cmp(&m.eval(*b)))
            .unwrap_or(x[i]);
        if m.eval(best) > m.eval(x[i]) {
            x[i] = best;
        }
    }
    BaselineResult {
        objective: objective(models, &x).max(start.objective),
        x_star: x,
        dual: start.dual,
        residual: start.residual,
    }
}

/// Exhaustive search over `{k·C/grid : Σk ≤ grid}` for at most three users.
pub fn brute_force_oracle(models: &[UtilityModel], capacity: f64, grid: usize) -> Result<BaselineResult> {
    check_capacity(capacity)?;
    if models.len() > 3 {
        return Err(Error::TooManyUsers(models.len()));
    }
    if models.is_empty() || grid == 0 {
        return Err(invalid("grid", "need at least one user and one grid step"));
    }
    let delta = capacity / grid as f64;
    let tables: Vec<Vec<f64>> = models
        .iter()
        .map(|m| (0..=grid).map(|k| m.eval(k as f64 * delta)).collect())
        .collect();

    let mut best = (f64::NEG_INFINITY, [0usize; 3]);
    match models.len() {
        1 => {
            for a in 0..=grid {
                let v = tables[0][a];
                if v > best.0 {
                    best = (v, [a, 0, 0]);
                }
            }
        }
        2 => {
            for a in 0..=grid {
                for b in 0..=grid - a {
                    let v = tables[0][a] + tables[1][b];
                    if v > best.0 {
                        best = (v, [a, b, 0]);
                    }
                }
            }
        }
        _ => {
            for a in 0..=grid {
                for b in 0..=grid - a {
                    let ab = tables[0][a] + tables[1][b];
                    for c in 0..=grid - a - b {
                        let v = ab + tables[2][c];
                        if v > best.0 {
                            best = (v, [a, b, c]);
                        }
                    }
                }
            }
        }
    }
    Ok(BaselineResult {
        objective: best.0,
        x_star: best.1[..models.len()].iter().map(|&k| k as f64 * delta).collect(),
        dual: None,
        residual: None,
    })
}
