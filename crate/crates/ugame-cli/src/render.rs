//! Result-document rendering.
//!
//! Every command emits one JSON document on standard output. Rationals
//! are rendered in canonical `p/q` form (plain `p` for integers) so that
//! re-parsing yields bit-identical values; floating-point levels from
//! general utilities appear as JSON numbers instead, making exactness
//! visible in the type. Coalitions are sorted member arrays and coalition
//! lists are sorted by size then members, so equal inputs produce
//! byte-identical documents.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};

use ugame::balance::CoreStatus;
use ugame::game::{Coalition, Payoff};
use ugame::kohlberg::{CollectionVerdict, KohlbergReport};
use ugame::lexcenter::{IterationRecord, PrenucleolusResult};
use ugame::num::{format_rational, Rational, Value};

pub fn rat_json(r: &Rational) -> Json {
    Json::String(format_rational(r))
}

pub fn value_json(v: &Value) -> Json {
    match v {
        Value::Exact(r) => rat_json(r),
        Value::Approx(x) => json!(x),
    }
}

pub fn coalition_json(c: Coalition) -> Json {
    Json::Array(c.members().map(|p| json!(p)).collect())
}

pub fn coalitions_json<I: IntoIterator<Item = Coalition>>(cs: I) -> Json {
    let mut list: Vec<Coalition> = cs.into_iter().collect();
    list.sort();
    Json::Array(list.into_iter().map(coalition_json).collect())
}

pub fn payoff_json(x: &Payoff) -> Json {
    Json::Array(x.0.iter().map(rat_json).collect())
}

/// `[{"coalition": [...], "weight": "p/q"}, ...]` sorted by coalition.
pub fn weights_json(weights: &BTreeMap<Coalition, Rational>) -> Json {
    Json::Array(
        weights
            .iter()
            .map(|(c, w)| json!({"coalition": coalition_json(*c), "weight": rat_json(w)}))
            .collect(),
    )
}

pub fn core_status_json(status: &CoreStatus) -> Json {
    match status {
        CoreStatus::NonEmptyAllPreimputations => json!({
            "kind": "all-preimputations",
            "nonempty": true,
        }),
        CoreStatus::Empty => json!({
            "kind": "empty-range",
            "nonempty": false,
        }),
        CoreStatus::DecidedByLp {
            lp_optimum,
            core_nonempty,
            witness,
            dual_weights,
        } => {
            let mut m = Map::new();
            m.insert("kind".into(), json!("decided-by-lp"));
            m.insert("nonempty".into(), json!(core_nonempty));
            m.insert("lp_optimum".into(), rat_json(lp_optimum));
            if let Some(w) = witness {
                m.insert("witness".into(), payoff_json(w));
            }
            if let Some(d) = dual_weights {
                m.insert(
                    "dual_weights".into(),
                    json!({
                        "coalitions": weights_json(&d.coalition_weights),
                        "grand_weight": rat_json(&d.grand_weight),
                        "bound": rat_json(&d.bound),
                    }),
                );
            }
            Json::Object(m)
        }
    }
}

pub fn verdict_json(verdict: &CollectionVerdict) -> Json {
    match verdict {
        CollectionVerdict::Balanced(cert) => json!({
            "balanced": true,
            "weights": weights_json(&cert.weights),
        }),
        CollectionVerdict::NotBalanced(diag) => json!({
            "balanced": false,
            "uncovered_players": diag.uncovered_players,
            "zero_weight_coalitions": coalitions_json(diag.zero_weight_coalitions.iter().copied()),
        }),
    }
}

fn record_json(r: &IterationRecord) -> Json {
    let mut fixed: Vec<(Coalition, Rational)> = r.newly_fixed.clone();
    fixed.sort_by(|a, b| a.0.cmp(&b.0));
    json!({
        "k": r.k,
        "level": r.level.as_ref().map(value_json),
        "coalitions": Json::Array(
            fixed
                .iter()
                .map(|(c, w)| json!({"members": coalition_json(*c), "payoff": rat_json(w)}))
                .collect(),
        ),
    })
}

pub fn prenucleolus_json(r: &PrenucleolusResult, include_trace: bool) -> Map<String, Json> {
    let mut m = Map::new();
    m.insert("point".into(), payoff_json(&r.representative));
    m.insert("is_singleton".into(), json!(r.is_singleton));
    m.insert("approximate".into(), json!(r.approximate));
    m.insert(
        "levels".into(),
        Json::Array(r.levels().iter().map(value_json).collect()),
    );
    if include_trace {
        m.insert(
            "trace".into(),
            Json::Array(r.trace.iter().map(record_json).collect()),
        );
    }
    m
}

pub fn kohlberg_json(report: &KohlbergReport) -> Json {
    json!({
        "preimputation": report.preimputation,
        "satisfied": report.satisfied,
        "levels": Json::Array(
            report
                .levels
                .iter()
                .map(|l| {
                    json!({
                        "level": value_json(&l.level),
                        "coalitions": coalitions_json(l.coalitions.iter().copied()),
                        "verdict": verdict_json(&l.verdict),
                    })
                })
                .collect(),
        ),
    })
}

/// Human-readable payoff, e.g. `(3, 3, 3, 3)`.
pub fn payoff_text(x: &Payoff) -> String {
    let parts: Vec<String> = x.0.iter().map(format_rational).collect();
    format!("({})", parts.join(", "))
}

pub fn value_text(v: &Value) -> String {
    match v {
        Value::Exact(r) => format_rational(r),
        Value::Approx(x) => format!("~{x}"),
    }
}

/// Human-readable level summary, e.g. `0, -1`.
pub fn levels_text(levels: &[Value]) -> String {
    let parts: Vec<String> = levels.iter().map(value_text).collect();
    parts.join(", ")
}
