//! Number formatting, confidence intervals and CSV output.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::Result;
use crate::harness::experiment::{Aggregate, Experiment, ReplicaRow};

/// Formats `x` with six significant digits, without trailing zeros.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let text = if (-5..15).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    };
    trim_zeros(&text)
}

fn trim_zeros(text: &str) -> String {
    let (mantissa, exp) = match text.find('e') {
        Some(i) => (&text[..i], &text[i..]),
        None => (text, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    let mantissa = if mantissa == "-0" { "0" } else { mantissa };
    format!("{mantissa}{exp}")
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

/// Sample mean and the half-width of its 95% Student-t interval.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("at least one degree of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "kind",
    "scheme",
    "sweep_key",
    "sweep_value",
    "seed",
    "replicas",
    "mean_psnr_db",
    "psnr_ci95",
    "utility",
    "utility_ci95",
    "collision_rate",
    "collision_rate_max",
    "iterations",
    "undelivered",
    "trajectory",
    "error",
];

fn replica_record(key: &str, r: &ReplicaRow) -> Vec<String> {
    vec![
        "replica".into(),
        r.scheme.clone(),
        key.into(),
        r.sweep_value.clone(),
        r.seed.to_string(),
        "1".into(),
        opt(r.mean_psnr_db),
        String::new(),
        opt(r.utility),
        String::new(),
        opt(r.collision_rate),
        opt(r.collision_rate_max),
        opt(r.iterations),
        r.undelivered.map(|u| u.to_string()).unwrap_or_default(),
        r.trajectory.clone(),
        r.error.clone().unwrap_or_default(),
    ]
}

fn aggregate_record(key: &str, a: &Aggregate) -> Vec<String> {
    vec![
        "aggregate".into(),
        a.scheme.clone(),
        key.into(),
        a.sweep_value.clone(),
        String::new(),
        a.replicas.to_string(),
        opt(a.psnr.map(|p| p.0)),
        opt(a.psnr.map(|p| p.1)),
        opt(a.utility.map(|p| p.0)),
        opt(a.utility.map(|p| p.1)),
        opt(a.collision_rate),
        opt(a.collision_rate_max),
        opt(a.iterations),
        a.undelivered.map(|u| u.to_string()).unwrap_or_default(),
        String::new(),
        if a.errors > 0 {
            format!("{} failed replicas", a.errors)
        } else {
            String::new()
        },
    ]
}

/// Writes replica rows grouped by (scheme, sweep point), each group
/// followed by its aggregate row.
pub fn write_summary<W: Write>(exp: &Experiment, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for a in &exp.aggregates {
        for r in exp
            .replicas
            .iter()
            .filter(|r| r.scheme == a.scheme && r.sweep_value == a.sweep_value)
        {
            w.write_record(replica_record(&exp.sweep_key, r))?;
        }
        w.write_record(aggregate_record(&exp.sweep_key, a))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-GoP (infrastructure) or per-slot (multihop) trace.
pub fn write_trace<W: Write>(exp: &Experiment, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&exp.trace_header)?;
    for row in &exp.trace {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
