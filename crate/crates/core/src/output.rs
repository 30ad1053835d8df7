//! Byte-stable text output.
//!
//! Every float is rounded to 12 significant digits and then printed in Rust's
//! shortest round-trip form, so identical runs give identical bytes on every
//! platform.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::engine::{SweepRow, TraceRecord};

pub const TRACE_HEADER: &str = "t,agent,x,xbar,lambda,signal,sum_x";
pub const SWEEP_HEADER: &str =
    "value,efficiency,sum_xbar,converged_round,objective_distributed,objective_optimal,capacity";

/// Rounds to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

pub fn fmt_num(v: f64) -> String {
    round12(v).to_string()
}

pub fn trace_line(r: &TraceRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.t,
        r.agent,
        fmt_num(r.x),
        fmt_num(r.xbar),
        fmt_num(r.lambda),
        u8::from(r.signal),
        fmt_num(r.sum_x)
    )
}

pub fn trace_csv(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(48 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&trace_line(r));
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let converged = r.converged_round.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(r.value),
            fmt_num(r.efficiency),
            fmt_num(r.sum_xbar),
            converged,
            fmt_num(r.objective_distributed),
            fmt_num(r.objective_optimal),
            fmt_num(r.capacity)
        );
    }
    out
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(f) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round12(f)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with all floats rounded; ends with a newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("output types serialise");
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("json value serialises");
    s.push('\n');
    s
}
