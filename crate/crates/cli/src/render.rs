//! Plain-text rendering of verdict report rows: one row per property with
//! estimate, interval, threshold, and outcome, rounded to four decimals.

use protocol_games_core::experiments::ReportRow;

fn fmt4(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.4}")
    }
}

/// Deterministic fixed-width table. An empty row list renders the header
/// only.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut width = "property".len();
    for r in rows {
        width = width.max(r.property.len());
    }
    let mut out = format!(
        "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>6}\n",
        "property",
        "estimate",
        "ci_low",
        "ci_high",
        "threshold",
        "pass",
        width = width
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>6}\n",
            r.property,
            fmt4(r.estimate),
            fmt4(r.ci_low),
            fmt4(r.ci_high),
            fmt4(r.threshold),
            if r.pass { "pass" } else { "FAIL" },
            width = width
        ));
    }
    out
}
