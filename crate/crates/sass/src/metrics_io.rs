//! Metrics and learning-curve tables.
//!
//! USAR rows: `seed,victims_rescued,victims_total,completion_tick,total_energy`
//! (an unfinished mission leaves `completion_tick` empty).
//! Explore rows: `seed,success,cost,encounters`.
//! Curve rows: `episode,success,cost,value,mean_variance`.
//! JSON output is one flat object with the same keys plus `mode`.

use serde::Serialize;

use sass_core::learning::CurvePoint;
use sass_core::metrics::Metrics;

pub const USAR_COLUMNS: [&str; 5] = ["seed", "victims_rescued", "victims_total", "completion_tick", "total_energy"];
pub const EXPLORE_COLUMNS: [&str; 4] = ["seed", "success", "cost", "encounters"];
pub const CURVE_COLUMNS: [&str; 5] = ["episode", "success", "cost", "value", "mean_variance"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsarRow {
    pub seed: u64,
    pub victims_rescued: u32,
    pub victims_total: u32,
    pub completion_tick: Option<u64>,
    pub total_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploreRow {
    pub seed: u64,
    pub success: bool,
    pub cost: f64,
    pub encounters: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub episode: usize,
    pub success: bool,
    pub cost: f64,
    pub value: f64,
    pub mean_variance: f64,
}

#[derive(Serialize)]
struct Tagged<'a, R> {
    mode: &'static str,
    #[serde(flatten)]
    row: &'a R,
}

fn usar_row(seed: u64, m: &sass_core::metrics::UsarMetrics) -> UsarRow {
    UsarRow {
        seed,
        victims_rescued: m.victims_rescued,
        victims_total: m.victims_total,
        completion_tick: m.completion_tick,
        total_energy: m.total_energy,
    }
}

fn explore_row(seed: u64, m: &sass_core::metrics::ExploreMetrics) -> ExploreRow {
    ExploreRow { seed, success: m.success, cost: m.cost, encounters: m.encounters }
}

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>, columns: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(columns).expect("write to vec");
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("flush to vec")).expect("csv is utf-8")
}

/// CSV table of per-seed metrics. All rows must share one mode.
pub fn metrics_csv(rows: &[(u64, Metrics)]) -> String {
    match rows.first() {
        Some((_, Metrics::Explore(_))) => to_csv(
            rows.iter().filter_map(|(s, m)| match m {
                Metrics::Explore(e) => Some(explore_row(*s, e)),
                Metrics::Usar(_) => None,
            }),
            &EXPLORE_COLUMNS,
        ),
        _ => to_csv(
            rows.iter().filter_map(|(s, m)| match m {
                Metrics::Usar(u) => Some(usar_row(*s, u)),
                Metrics::Explore(_) => None,
            }),
            &USAR_COLUMNS,
        ),
    }
}

/// Single-run metrics as a flat JSON object.
pub fn metrics_json(seed: u64, m: &Metrics) -> String {
    match m {
        Metrics::Usar(u) => serde_json::to_string_pretty(&Tagged { mode: "usar", row: &usar_row(seed, u) }),
        Metrics::Explore(e) => serde_json::to_string_pretty(&Tagged { mode: "explore", row: &explore_row(seed, e) }),
    }
    .expect("metrics serialize")
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    to_csv(
        curve.iter().map(|p| CurveRow {
            episode: p.episode,
            success: p.success,
            cost: p.cost,
            value: p.value,
            mean_variance: p.mean_variance,
        }),
        &CURVE_COLUMNS,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use sass_core::metrics::{ExploreMetrics, UsarMetrics};

    #[test]
    fn usar_csv_has_fixed_columns_and_empty_cell_for_unfinished() {
        let m = Metrics::Usar(UsarMetrics { victims_rescued: 2, victims_total: 4, completion_tick: None, total_energy: 12.5 });
        assert_eq!(metrics_csv(&[(9, m)]), "seed,victims_rescued,victims_total,completion_tick,total_energy\n9,2,4,,12.5\n");
    }

    #[test]
    fn explore_json_is_flat() {
        let m = Metrics::Explore(ExploreMetrics { success: true, cost: 3.0, encounters: 1 });
        let v: serde_json::Value = serde_json::from_str(&metrics_json(1, &m)).unwrap();
        assert_eq!(v["mode"], "explore");
        assert_eq!(v["success"], true);
        assert_eq!(v["encounters"], 1);
    }
}
