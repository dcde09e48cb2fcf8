//! Full evaluation report and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::roc::{auc, best_threshold, f1_isometric, roc_curve, soc_points, Criterion, RocPoint, SocPoint};
use super::scores::{balanced_accuracy, confusion_counts, confusion_matrix, cross_entropy, per_class_recall, soft_confusion, Confusion, SoftAnd};
use super::EvalSet;
use crate::error::{Error, Result};

pub const CROSS_ENTROPY_CONVENTION: &str = "mean over examples of -sum_i t_i ln(max(p_i, 1e-12))";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub category: String,
    pub positives: usize,
    pub negatives: usize,
    pub auc: Option<f64>,
    pub points: Vec<RocPoint>,
    pub f1_threshold: Option<f64>,
    pub accuracy_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocReport {
    pub category: String,
    /// Strong, product and weak, in that order.
    pub points: Option<Vec<SocPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub classes: Vec<String>,
    pub balanced_accuracy: f64,
    pub per_class_recall: Vec<Option<f64>>,
    pub cross_entropy: f64,
    pub cross_entropy_convention: String,
    pub confusion: Confusion,
    pub confusion_counts: Vec<Vec<f64>>,
    pub soft_confusion: BTreeMap<String, Vec<Vec<f64>>>,
    pub roc: Vec<RocReport>,
    pub soc: Vec<SocReport>,
}

/// Computes every metric. Categories whose curves or points are undefined
/// are reported with an error message instead of failing the report.
pub fn evaluate(set: &EvalSet, classes: &[&str]) -> Result<EvalReport> {
    if classes.len() != set.k() {
        return Err(Error::Shape(format!("{} class names for {} categories", classes.len(), set.k())));
    }
    let mut roc = Vec::with_capacity(set.k());
    let mut soc = Vec::with_capacity(set.k());
    for (i, name) in classes.iter().enumerate() {
        match roc_curve(set, i) {
            Ok(c) => roc.push(RocReport {
                category: name.to_string(),
                positives: c.positives,
                negatives: c.negatives,
                auc: Some(auc(&c)),
                f1_threshold: Some(best_threshold(&c, Criterion::F1).0),
                accuracy_threshold: Some(best_threshold(&c, Criterion::Accuracy).0),
                points: c.points,
                error: None,
            }),
            Err(e) => roc.push(RocReport {
                category: name.to_string(),
                positives: 0,
                negatives: 0,
                auc: None,
                points: Vec::new(),
                f1_threshold: None,
                accuracy_threshold: None,
                error: Some(e.to_string()),
            }),
        }
        soc.push(match soc_points(set, i) {
            Ok(p) => SocReport {
                category: name.to_string(),
                points: Some(p.to_vec()),
                error: None,
            },
            Err(e) => SocReport {
                category: name.to_string(),
                points: None,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(EvalReport {
        n_examples: set.n(),
        classes: classes.iter().map(|c| c.to_string()).collect(),
        balanced_accuracy: balanced_accuracy(set)?,
        per_class_recall: per_class_recall(set),
        cross_entropy: cross_entropy(set),
        cross_entropy_convention: CROSS_ENTROPY_CONVENTION.into(),
        confusion: confusion_matrix(set, true),
        confusion_counts: confusion_counts(set),
        soft_confusion: SoftAnd::ALL
            .iter()
            .map(|&m| (format!("{m:?}").to_lowercase(), soft_confusion(set, m)))
            .collect(),
        roc,
        soc,
    })
}

const PANEL: f64 = 220.0;
const MARGIN: f64 = 30.0;
const ISOMETRICS: [f64; 4] = [0.9, 0.8, 0.7, 0.6];

/// One ROC/SOC panel per category, with F1 isometrics.
pub fn render_svg(report: &EvalReport) -> String {
    let cols = report.roc.len().clamp(1, 4);
    let rows = report.roc.len().div_ceil(cols).max(1);
    let cell = PANEL + 2.0 * MARGIN;
    let (width, height) = (cols as f64 * cell, rows as f64 * cell);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    for (idx, (roc, soc)) in report.roc.iter().zip(&report.soc).enumerate() {
        let ox = (idx % cols) as f64 * cell + MARGIN;
        let oy = (idx / cols) as f64 * cell + MARGIN;
        let px = |fpr: f64| ox + fpr * PANEL;
        let py = |tpr: f64| oy + (1.0 - tpr) * PANEL;
        let _ = writeln!(s, r#"<g>"#);
        let _ = writeln!(
            s,
            r##"<rect x="{ox}" y="{oy}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#000"/>"##
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ox + PANEL / 2.0, oy - 8.0, roc.category);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">FPR</text>"#, ox + PANEL / 2.0, oy + PANEL + 20.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">TPR</text>"#,
            ox - 12.0,
            oy + PANEL / 2.0,
            ox - 12.0,
            oy + PANEL / 2.0
        );
        if roc.positives > 0 && roc.negatives > 0 {
            for f1 in ISOMETRICS {
                let pts = f1_isometric(f1, roc.positives as f64, roc.negatives as f64, 60);
                let _ = writeln!(
                    s,
                    r##"<polyline fill="none" stroke="#bbb" stroke-dasharray="3,3" points="{}"/>"##,
                    polyline(&pts, &px, &py)
                );
            }
        }
        if !roc.points.is_empty() {
            let pts: Vec<(f64, f64)> = roc.points.iter().map(|p| (p.fpr, p.tpr)).collect();
            let _ = writeln!(
                s,
                r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
                polyline(&pts, &px, &py)
            );
        }
        if let Some(points) = &soc.points {
            let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
            let _ = writeln!(
                s,
                r##"<polyline fill="none" stroke="#d62728" points="{}"/>"##,
                polyline(&pts, &px, &py)
            );
            for (x, y) in pts {
                let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#d62728"/>"##, px(x), py(y));
            }
        }
        if let Some(e) = &roc.error {
            let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle" fill="#888">{}</text>"##, ox + PANEL / 2.0, oy + PANEL / 2.0, escape(e));
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn polyline(pts: &[(f64, f64)], px: &impl Fn(f64) -> f64, py: &impl Fn(f64) -> f64) -> String {
    pts.iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
