//! Bit-stable report serialization.
//!
//! JSON objects have sorted keys, rationals are `"a/b"` strings in lowest
//! terms, and decimals are rounded to 12 significant digits. Non-finite
//! decimals are written as the strings `"inf"`, `"-inf"` and `"nan"`.

use serde_json::{json, Map, Value};

use crate::decompose::{
    AsymptoticParams, CellMetrics, CharacterizeReport, DenseSubset, EntropyDense,
    EntropyDenseDiagnostics, PartitionReport,
};
use crate::exact::{self, Rational};
use crate::images::{ImageResult, ScanReport};
use crate::spectrum::{LevelRow, SpectrumPartition};
use crate::verify::{CheckResult, Quantity, SuiteReport};

fn round12(v: f64) -> f64 {
    let r: f64 = format!("{v:.11e}").parse().expect("formatted float");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn non_finite(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// Decimal text with 12 significant digits.
pub fn fmt_decimal(v: f64) -> String {
    if v.is_finite() {
        round12(v).to_string()
    } else {
        non_finite(v).to_string()
    }
}

pub fn decimal(v: f64) -> Value {
    if v.is_finite() {
        json!(round12(v))
    } else {
        json!(non_finite(v))
    }
}

pub fn rational(r: &Rational) -> Value {
    Value::String(exact::fmt_rational(r))
}

pub fn quantity(q: &Quantity) -> Value {
    match q {
        Quantity::Exact(r) => rational(r),
        Quantity::Decimal(v) => decimal(*v),
        Quantity::Count(c) => json!(c),
    }
}

/// Pretty JSON with a trailing newline.
pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn level_row(r: &LevelRow) -> Value {
    json!({
        "k": r.k,
        "size": r.size,
        "log_size_per_n": decimal(r.log_size_per_n),
        "mass": rational(&r.mass),
        "cumulative_mass": rational(&r.cumulative_mass),
    })
}

pub fn spectrum_json(part: &SpectrumPartition, profile: &[LevelRow]) -> Value {
    json!({
        "delta": rational(part.delta()),
        "n": part.n(),
        "k_delta": part.k_delta(),
        "b_infinity_size": part.b_infinity_size(),
        "space_size": part.space_size(),
        "levels": profile.iter().map(level_row).collect::<Vec<_>>(),
    })
}

pub fn level_profile_csv(profile: &[LevelRow]) -> String {
    csv_text(
        &["k", "size", "log_size_per_n", "mass", "cumulative_mass"],
        profile
            .iter()
            .map(|r| {
                vec![
                    r.k.to_string(),
                    r.size.to_string(),
                    fmt_decimal(r.log_size_per_n),
                    exact::fmt_rational(&r.mass),
                    exact::fmt_rational(&r.cumulative_mass),
                ]
            })
            .collect(),
    )
}

pub fn image_json(res: &ImageResult) -> Value {
    json!({
        "set": res.set.render(&res.space),
        "size": res.size(),
        "log_size_per_n": decimal(res.log_size_per_n()),
        "eta": rational(&res.eta),
        "certificate": res.certificate.to_string(),
        "achieved": rational(&res.achieved),
    })
}

pub fn image_csv(res: &ImageResult) -> String {
    csv_text(
        &["sequence"],
        res.set.render(&res.space).into_iter().map(|s| vec![s]).collect(),
    )
}

pub fn scan_json(report: &ScanReport) -> Value {
    json!({
        "max_gap": decimal(report.max_gap),
        "rows": report.rows.iter().map(|r| json!({
            "eta": rational(&r.eta),
            "g": r.g,
            "log_g_per_n": decimal(r.log_g_per_n),
            "certificate": r.certificate.to_string(),
        })).collect::<Vec<_>>(),
    })
}

pub fn scan_csv(report: &ScanReport) -> String {
    csv_text(
        &["eta", "g", "log_g_per_n", "certificate"],
        report
            .rows
            .iter()
            .map(|r| {
                vec![
                    exact::fmt_rational(&r.eta),
                    r.g.to_string(),
                    fmt_decimal(r.log_g_per_n),
                    r.certificate.to_string(),
                ]
            })
            .collect(),
    )
}

pub fn params_json(p: &AsymptoticParams) -> Value {
    json!({
        "beta_n": rational(&p.beta_n),
        "tau_n": decimal(p.tau_n),
        "epsilon_n": decimal(p.epsilon_n),
    })
}

pub fn dense_json(out: &DenseSubset, alpha: &Rational) -> Value {
    json!({
        "alpha": rational(alpha),
        "subset": out.subset.render(),
        "size": out.subset.len(),
        "quasi_image": image_json(&out.quasi_image),
    })
}

fn opt_rational(r: &Option<Rational>) -> Value {
    r.as_ref().map(rational).unwrap_or(Value::Null)
}

pub fn diagnostics_json(d: &EntropyDenseDiagnostics) -> Value {
    json!({
        "branch": serde_json::to_value(d.branch).expect("enum"),
        "fell_back": d.fell_back,
        "delta": rational(&d.delta),
        "k_delta": d.k_delta,
        "k_prime": d.k_prime,
        "k_double_prime": d.k_double_prime,
        "c_n": decimal(d.c_n),
        "eta_k_prime": rational(&d.eta_k_prime),
        "eta_k_double_prime": opt_rational(&d.eta_k_double_prime),
        "source_size": d.source_size,
        "dense_size": d.dense_size,
        "size": d.size,
        "density": rational(&d.density),
        "density_target": rational(&d.density_target),
        "density_ok": d.density_ok(),
        "entropy_rate": decimal(d.entropy_rate),
        "image_log_size": decimal(d.image_log_size),
        "image_certificate": d.image_certificate.to_string(),
        "entropy_bound": decimal(d.entropy_bound),
        "entropy_slack": decimal(d.entropy_slack),
        "params": params_json(&d.params),
    })
}

pub fn entropy_dense_json(out: &EntropyDense) -> Value {
    json!({
        "subset": out.subset.render(),
        "size": out.subset.len(),
        "dense_subset": out.dense.render(),
        "diagnostics": diagnostics_json(&out.diagnostics),
    })
}

pub fn cell_metrics_json(m: &CellMetrics) -> Value {
    json!({
        "size": m.size,
        "cell_log_size_per_n": decimal(m.cell_log_size_per_n),
        "source_entropy_rate": decimal(m.source_entropy_rate),
        "uniformity_residual": decimal(m.uniformity_residual()),
        "channels": m.channels.iter().map(|c| json!({
            "entropy_rate": decimal(c.entropy_rate),
            "image_size": c.image_size,
            "image_log_size": decimal(c.image_log_size),
            "certificate": c.certificate.to_string(),
            "gap": decimal(c.gap),
            "bound_budget": decimal(c.bound_budget),
            "params": params_json(&c.params),
        })).collect::<Vec<_>>(),
    })
}

pub fn characterize_json(rep: &CharacterizeReport, epsilon: f64) -> Value {
    json!({
        "subset": rep.subset.render(),
        "size": rep.subset.len(),
        "nested": rep.nested.iter().map(|s| s.render()).collect::<Vec<_>>(),
        "metrics": cell_metrics_json(&rep.metrics),
        "steps": rep.steps.iter().map(diagnostics_json).collect::<Vec<_>>(),
        "size_drop": decimal(rep.size_drop),
        "epsilon": decimal(epsilon),
        "size_drop_within_epsilon": rep.size_drop_within(epsilon),
    })
}

pub fn partition_json(rep: &PartitionReport) -> Value {
    json!({
        "n": rep.n,
        "m": rep.m(),
        "gamma": decimal(rep.gamma),
        "delta_step": rational(&rep.delta_step),
        "cell_bound": rep.cell_bound,
        "ceil_n_gamma": rep.ceil_n_gamma(),
        "delta_lemma": rational(&rep.delta_lemma),
        "gamma_lemma": decimal(rep.gamma_lemma),
        "cells": rep.cells.iter().map(|c| c.render()).collect::<Vec<_>>(),
        "per_cell": rep.per_cell.iter().map(cell_metrics_json).collect::<Vec<_>>(),
        "residual_trace": rep.residual_trace.iter().map(|s| json!({
            "remainder_size": s.remainder_size,
            "cell_size": s.cell_size,
            "retained": rational(&s.retained),
            "short_circuit": s.short_circuit,
            "fell_back": s.fell_back,
            "branches": serde_json::to_value(&s.branches).expect("enums"),
        })).collect::<Vec<_>>(),
    })
}

/// One row per (cell, channel); `members` is space-separated.
pub fn partition_csv(rep: &PartitionReport) -> String {
    let mut rows = Vec::new();
    for (i, (cell, m)) in rep.cells.iter().zip(&rep.per_cell).enumerate() {
        for (j, c) in m.channels.iter().enumerate() {
            rows.push(vec![
                i.to_string(),
                j.to_string(),
                cell.len().to_string(),
                cell.render().join(" "),
                fmt_decimal(m.cell_log_size_per_n),
                fmt_decimal(m.source_entropy_rate),
                fmt_decimal(c.entropy_rate),
                c.image_size.to_string(),
                fmt_decimal(c.image_log_size),
                c.certificate.to_string(),
                fmt_decimal(c.gap),
                fmt_decimal(c.bound_budget),
            ]);
        }
    }
    csv_text(
        &[
            "cell",
            "channel",
            "size",
            "members",
            "cell_log_size_per_n",
            "source_entropy_rate",
            "entropy_rate",
            "image_size",
            "image_log_size",
            "certificate",
            "gap",
            "bound_budget",
        ],
        rows,
    )
}

pub fn check_json(c: &CheckResult) -> Value {
    let mut m = Map::new();
    m.insert("check_id".into(), json!(c.check_id));
    m.insert("status".into(), json!(c.status.to_string()));
    m.insert("lhs".into(), quantity(&c.lhs));
    m.insert("rhs".into(), quantity(&c.rhs));
    m.insert("slack".into(), c.slack.as_ref().map(quantity).unwrap_or(Value::Null));
    m.insert("vacuous".into(), json!(c.vacuous));
    m.insert("context".into(), json!(c.context));
    Value::Object(m)
}

pub fn suite_json(rep: &SuiteReport) -> Value {
    json!({
        "seed": rep.seed,
        "instances": rep.instances,
        "summary": {
            "total": rep.summary.total,
            "pass": rep.summary.pass,
            "fail": rep.summary.fail,
            "report_only": rep.summary.report_only,
        },
        "results": rep.results.iter().map(check_json).collect::<Vec<_>>(),
    })
}

pub fn suite_csv(rep: &SuiteReport) -> String {
    let text = |q: &Quantity| match q {
        Quantity::Exact(r) => exact::fmt_rational(r),
        Quantity::Decimal(v) => fmt_decimal(*v),
        Quantity::Count(c) => c.to_string(),
    };
    csv_text(
        &["check_id", "status", "lhs", "rhs", "slack", "vacuous", "context"],
        rep.results
            .iter()
            .map(|c| {
                vec![
                    c.check_id.clone(),
                    c.status.to_string(),
                    text(&c.lhs),
                    text(&c.rhs),
                    c.slack.as_ref().map(text).unwrap_or_default(),
                    c.vacuous.to_string(),
                    c.context.clone(),
                ]
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;

    #[test]
    fn decimals_are_rounded_and_stable() {
        assert_eq!(fmt_decimal(0.840_038_522_864_139_8), "0.840038522864");
        assert_eq!(fmt_decimal(1.0), "1");
        assert_eq!(fmt_decimal(-0.0), "0");
        assert_eq!(fmt_decimal(f64::NEG_INFINITY), "-inf");
        assert_eq!(decimal(f64::INFINITY), json!("inf"));
        assert_eq!(decimal(2.0 / 3.0), json!(0.666666666667));
    }

    #[test]
    fn rationals_are_canonical() {
        assert_eq!(rational(&parse_rational("18/20").unwrap()), json!("9/10"));
    }

    #[test]
    fn keys_are_sorted() {
        let v = json!({"b": 1, "a": 2});
        assert_eq!(render_json(&v), "{\n  \"a\": 2,\n  \"b\": 1\n}\n");
    }
}
