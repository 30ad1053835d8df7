use aimd_alloc::game::{nash_solve, NashOptions};
use aimd_alloc::output::{sweep_csv, to_json, trace_csv};
use aimd_alloc::rng;
use aimd_alloc::{run_simulation, run_simulation_with, sweep, ScenarioConfig};
use rand::Rng;

fn shipped(name: &str) -> ScenarioConfig {
    let path = format!("{}/../../scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    ScenarioConfig::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn shortened(name: &str, horizon: u64) -> ScenarioConfig {
    let mut c = shipped(name);
    c.horizon = horizon;
    c
}

#[test]
fn daimd_scenario_summary() {
    let (trace, s) = run_simulation(&shipped("fig3a-daimd")).unwrap();
    assert_eq!(trace.len(), 50 * 10_000);
    assert_eq!(s.horizon, 10_000);
    assert!(s.efficiency > 0.95 && s.efficiency < 1.0, "{}", s.efficiency);
    assert!((s.sum_xbar - s.xbar.iter().sum::<f64>()).abs() < 1e-9);
    let json = to_json(&s);
    for key in [
        "scenario",
        "seed",
        "T",
        "efficiency",
        "objective_distributed",
        "objective_optimal",
        "converged_round",
    ] {
        assert!(json.contains(&format!("\"{key}\"")), "{key}");
    }
}

#[test]
fn every_variant_is_deterministic() {
    for name in ["fig3a-daimd", "fig3b-aimd", "fig3c-paimd", "fig4-qaimd"] {
        let mut c = shortened(name, 500);
        c.baseline_bins = 200;
        let a = run_simulation(&c).unwrap();
        let b = run_simulation(&c).unwrap();
        assert_eq!(trace_csv(&a.0), trace_csv(&b.0), "{name}");
        assert_eq!(to_json(&a.1), to_json(&b.1), "{name}");
    }
}

#[test]
fn different_seeds_give_different_stochastic_traces() {
    let c = shortened("fig3b-aimd", 300);
    let a = trace_csv(&run_simulation(&c).unwrap().0);
    let b = trace_csv(&run_simulation(&c.with_axis("seed", 2.0).unwrap()).unwrap().0);
    assert_ne!(a, b);
}

#[test]
fn price_sweep_has_one_row_per_value() {
    let values: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let rows = sweep(&shortened("fig3c-paimd", 1000), "L", &values).unwrap();
    assert_eq!(rows.len(), 11);
    for (r, v) in rows.iter().zip(&values) {
        assert_eq!(r.value, *v);
        assert!(r.efficiency > 0.0 && r.efficiency <= 1.0 + 1e-12);
    }
    assert_eq!(sweep_csv(&rows).lines().count(), 12);
}

#[test]
fn capacity_sweep_has_one_row_per_value() {
    let values: Vec<f64> = (0..=10).map(|k| 0.5 + 0.25 * k as f64).collect();
    let mut c = shortened("fig4-qaimd", 500);
    c.baseline_bins = 200;
    let rows = sweep(&c, "C_ratio", &values).unwrap();
    assert_eq!(rows.len(), 11);
    assert!(rows.windows(2).all(|w| w[1].capacity > w[0].capacity));
}

#[test]
fn single_value_sweep_is_a_run() {
    let c = shortened("fig3c-paimd", 800);
    let run = run_simulation_with(&c, |_| {}).unwrap();
    let rows = sweep(&c, "L", &[c.price]).unwrap();
    assert_eq!(rows[0].efficiency, run.efficiency);
    assert_eq!(rows[0].sum_xbar, run.sum_xbar);
    assert_eq!(rows[0].converged_round, run.converged_round);
}

#[test]
fn free_paimd_runs_like_aimd() {
    // With L = 0 the payoff maximiser is the capacity, which no single user
    // reaches in a crowded population, so the two variants coincide.
    let mut p = shortened("fig3c-paimd", 2000);
    p.price = 0.0;
    let mut a = shortened("fig3b-aimd", 2000);
    a.population_seed = None;
    let tp = trace_csv(&run_simulation(&p).unwrap().0);
    let ta = trace_csv(&run_simulation(&a).unwrap().0);
    assert_eq!(tp, ta);
}

#[test]
fn qaimd_users_start_at_alpha() {
    let mut c = shortened("fig4-qaimd", 1);
    c.baseline_bins = 200;
    c.initial_x = None;
    let (trace, _) = run_simulation(&c).unwrap();
    let n = c.n as f64;
    // Round 1 sees Σx(0) = n·α against C = Σψ, so nobody is told to back off.
    assert!(trace.iter().all(|r| !r.signal));
    assert!(trace[0].sum_x >= n);
}

#[test]
fn two_player_equilibrium_ignores_the_start() {
    let s = shipped("poa-two-player").resolve().unwrap();
    let (game, opts) = s.game().unwrap();
    let reference = nash_solve(&game, &opts).unwrap();
    let mut r = rng::stream(41, 0);
    for _ in 0..5 {
        let a: f64 = r.gen_range(0.0..25.0);
        let b: f64 = r.gen_range(0.0..25.0 - a);
        let start = NashOptions {
            initial: Some(vec![a, b]),
            ..opts.clone()
        };
        let ne = nash_solve(&game, &start).unwrap();
        assert!(ne.converged);
        for (x, y) in ne.x_ne.iter().zip(&reference.x_ne) {
            assert!((x - y).abs() <= 1e-6, "start ({a}, {b}): {x} vs {y}");
        }
    }
}
