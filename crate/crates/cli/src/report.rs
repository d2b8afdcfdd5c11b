//! Evaluation reports as JSON and as a text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use themefit_core::metrics::{EvalReport, EvalSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auc_mean: f64,
    pub auc_std: f64,
    pub fitb_mean: f64,
    pub fitb_std: f64,
    pub positives: usize,
    pub negatives: usize,
    pub questions: usize,
}

impl From<&EvalSummary> for Summary {
    fn from(s: &EvalSummary) -> Self {
        Summary {
            auc_mean: s.auc_mean,
            auc_std: s.auc_std,
            fitb_mean: s.fitb_mean,
            fitb_std: s.fitb_std,
            positives: s.positives,
            negatives: s.negatives,
            questions: s.questions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    #[serde(flatten)]
    pub overall: Summary,
    pub auc_runs: Vec<f64>,
    pub fitb_runs: Vec<f64>,
    pub per_theme: BTreeMap<String, Summary>,
    pub per_group: BTreeMap<String, Summary>,
}

impl MethodReport {
    pub fn new(method: &str, r: &EvalReport) -> Self {
        MethodReport {
            method: method.to_string(),
            overall: Summary::from(&r.overall),
            auc_runs: r.auc_runs.clone(),
            fitb_runs: r.fitb_runs.clone(),
            per_theme: r.per_theme.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
            per_group: r.per_group.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub split: String,
    pub repetitions: usize,
    pub seed: u64,
    pub methods: Vec<MethodReport>,
}

fn pct(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{c}{}", " ".repeat(w - c.chars().count()));
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

/// One row per method with mean ± std in percent, then a per-theme block.
pub fn render_table(report: &ReportFile) -> String {
    let rows: Vec<Vec<String>> = report
        .methods
        .iter()
        .map(|m| {
            vec![
                m.method.clone(),
                pct(m.overall.auc_mean, m.overall.auc_std),
                pct(m.overall.fitb_mean, m.overall.fitb_std),
            ]
        })
        .collect();
    let mut out = table(&["method", "Compat. AUC(%)", "FITB Acc(%)"], &rows);
    let mut per_theme = Vec::new();
    for m in &report.methods {
        for (theme, s) in &m.per_theme {
            per_theme.push(vec![
                theme.clone(),
                m.method.clone(),
                pct(s.auc_mean, s.auc_std),
                pct(s.fitb_mean, s.fitb_std),
                s.positives.to_string(),
            ]);
        }
    }
    per_theme.sort();
    if !per_theme.is_empty() {
        out.push('\n');
        out.push_str(&table(
            &["theme", "method", "Compat. AUC(%)", "FITB Acc(%)", "positives"],
            &per_theme,
        ));
    }
    out
}
