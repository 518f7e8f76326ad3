//! CSV rendering of traces and sweep tables.

use std::fmt::Write;

use super::harness::SweepRow;
use crate::regret::RegretTrace;

pub const TRACE_HEADER: &str =
    "t,cost,regret_partial,avg_regret,disagreement,mean_field_residual,e1,e2,e3,bound_partial";
pub const SUMMARY_HEADER: &str = "T,regret,avg_regret,theory_bound";

/// Renders like C's `%.{digits}g`: fixed or scientific, trailing zeros dropped.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

fn g(x: f64) -> String {
    format_sig(x, 12)
}

pub fn trace_csv(trace: &RegretTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.horizon() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (k, r) in trace.rounds.iter().enumerate() {
        let terms = &trace.terms[k];
        let partial = trace.regret_partial[k];
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            g(r.cost),
            g(partial),
            g(partial / r.t as f64),
            g(r.disagreement),
            g(r.mean_field_residual),
            g(terms.e1),
            g(terms.e2),
            g(terms.e3),
            g(terms.bound())
        )
        .expect("writing to a String");
    }
    out
}

pub fn summary_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.horizon,
            g(r.regret),
            g(r.avg_regret),
            r.theory_bound.map(g).unwrap_or_default()
        )
        .expect("writing to a String");
    }
    out
}
