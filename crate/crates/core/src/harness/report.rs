//! Markdown and CSV rendering of ablation summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{RunSummary, BASELINE_ARM};

/// Both renderings of one summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub markdown: String,
    pub csv: String,
}

/// Accuracy in percent with one decimal.
fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

/// Signed delta marker; deltas that round to zero render as `∼0.0`.
pub fn delta_marker(delta: f64) -> String {
    let p = 100.0 * delta;
    let shown = format!("{:.1}", p.abs());
    if shown == "0.0" {
        "∼0.0".to_string()
    } else if p > 0.0 {
        format!("↑ {shown}")
    } else {
        format!("↓ {shown}")
    }
}

pub fn format_report(summary: &RunSummary) -> Report {
    Report { markdown: markdown(summary), csv: csv(summary) }
}

/// One row per arm; per eval subset a `mean±std` column followed by a delta
/// column that stays blank for the baseline.
pub fn markdown(summary: &RunSummary) -> String {
    let mut out = String::new();
    out.push_str("| arm |");
    for s in &summary.eval_subsets {
        let _ = write!(out, " {}→{} | Δ |", summary.train_subset, s);
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in &summary.eval_subsets {
        out.push_str("---|---|");
    }
    out.push('\n');
    for arm in &summary.arms {
        let _ = write!(out, "| {} |", arm.name);
        for st in &arm.stats {
            let cell = if st.n == 0 { "n/a".to_string() } else { format!("{}±{}", pct(st.mean), pct(st.std)) };
            let delta = if arm.name == BASELINE_ARM || st.n == 0 { String::new() } else { delta_marker(st.delta) };
            let _ = write!(out, " {cell} | {delta} |");
        }
        out.push('\n');
    }
    let failed = summary.failed_runs();
    if failed > 0 {
        let _ = writeln!(out, "\n{failed} run(s) failed; see the result JSON for causes.");
    }
    out
}

/// Header: `arm`, then `<subset>_mean`, `<subset>_std`, `<subset>_delta`
/// per eval subset. Values are fractions at full precision.
pub fn csv(summary: &RunSummary) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["arm".to_string()];
    for s in &summary.eval_subsets {
        header.extend([format!("{s}_mean"), format!("{s}_std"), format!("{s}_delta")]);
    }
    w.write_record(&header).expect("in-memory write");
    for arm in &summary.arms {
        let mut row = vec![arm.name.clone()];
        for st in &arm.stats {
            row.extend([st.mean.to_string(), st.std.to_string(), st.delta.to_string()]);
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// One parsed CSV row: arm name and `(mean, std, delta)` per subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub arm: String,
    pub values: Vec<(f64, f64, f64)>,
}

/// Parses the output of [`csv`] back into numbers.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<CsvRow>), String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.get(0) != Some("arm") || (header.len() - 1) % 3 != 0 {
        return Err("unexpected header".into());
    }
    let subsets = (1..header.len())
        .step_by(3)
        .map(|i| header[i].strip_suffix("_mean").map(str::to_string).ok_or_else(|| format!("bad column {}", &header[i])))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| format!("column {i}: {e}"));
        let values = (1..rec.len()).step_by(3).map(|i| Ok((num(i)?, num(i + 1)?, num(i + 2)?))).collect::<Result<_, String>>()?;
        rows.push(CsvRow { arm: rec[0].to_string(), values });
    }
    Ok((subsets, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{aggregate, RunOutcome, RunRecord};

    fn summary(arms: &[(&str, &[f64])]) -> RunSummary {
        let subsets = vec!["NB".to_string()];
        let arms = arms
            .iter()
            .map(|(name, accs)| {
                let runs = accs
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| RunRecord {
                        run_index: i,
                        outcome: RunOutcome::Completed { best_epoch: 1, best_val_accuracy: 1.0, test_accuracy: vec![a] },
                    })
                    .collect();
                (name.to_string(), runs)
            })
            .collect();
        RunSummary { train_subset: "LB".into(), eval_subsets: subsets.clone(), runs: 2, seed: 0, arms: aggregate(&subsets, arms) }
    }

    #[test]
    fn markers() {
        assert_eq!(delta_marker(0.061), "↑ 6.1");
        assert_eq!(delta_marker(-0.037), "↓ 3.7");
        assert_eq!(delta_marker(0.0), "∼0.0");
        assert_eq!(delta_marker(-0.0004), "∼0.0");
    }

    #[test]
    fn table_shape() {
        let s = summary(&[("none", &[0.375, 0.375]), ("rot", &[0.436, 0.436]), ("amp", &[0.30, 0.35])]);
        let md = markdown(&s);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| arm | LB→NB | Δ |");
        assert_eq!(lines[2], "| none | 37.5±0.0 |  |");
        assert_eq!(lines[3], "| rot | 43.6±0.0 | ↑ 6.1 |");
        assert!(lines[4].starts_with("| amp | 32.5±3.5 | ↓ 5.0 |"));
    }

    #[test]
    fn csv_round_trip() {
        let s = summary(&[("none", &[0.4, 0.6]), ("rot", &[0.1 + 0.2, 0.7])]);
        let (subsets, rows) = parse_csv(&csv(&s)).unwrap();
        assert_eq!(subsets, vec!["NB"]);
        for (row, arm) in rows.iter().zip(&s.arms) {
            assert_eq!(row.arm, arm.name);
            let st = &arm.stats[0];
            assert_eq!(row.values[0], (st.mean, st.std, st.delta));
        }
    }

    #[test]
    fn rendering_is_stable() {
        let s = summary(&[("none", &[0.4, 0.6]), ("rot", &[0.5, 0.9])]);
        assert_eq!(format_report(&s), format_report(&s.clone()));
    }
}
