//! Output formatting: comparison tables and attention bar charts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    pub variant: String,
    pub models: String,
    pub dim: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

pub fn markdown_table(rows: &[CompareRow]) -> String {
    let mut out = String::from("| run | variant | models | d | MRR | H@1 | H@3 | H@10 |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} |",
            r.name, r.variant, r.models, r.dim, r.mrr, r.hits1, r.hits3, r.hits10
        );
    }
    out
}

pub fn csv_table(rows: &[CompareRow]) -> String {
    let mut out = String::from("run,variant,models,dim,mrr,hits1,hits3,hits10\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},\"{}\",{},{:.6},{:.6},{:.6},{:.6}",
            r.name, r.variant, r.models, r.dim, r.mrr, r.hits1, r.hits3, r.hits10
        );
    }
    out
}

/// Vertical bar chart of attention weights, one bar per model.
pub fn attention_svg(relation: &str, labels: &[String], weights: &[f64], color: &str) -> String {
    const W: f64 = 360.0;
    const H: f64 = 240.0;
    const MARGIN: f64 = 40.0;
    let n = weights.len().max(1) as f64;
    let slot = (W - 2.0 * MARGIN) / n;
    let plot_h = H - 2.0 * MARGIN;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
        W / 2.0,
        escape(relation)
    );
    let base = H - MARGIN;
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>",
        W - MARGIN
    );
    for (i, (label, &w)) in labels.iter().zip(weights).enumerate() {
        let bar_h = w.clamp(0.0, 1.0) * plot_h;
        let x = MARGIN + i as f64 * slot + slot * 0.15;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{bar_h:.1}\" fill=\"{color}\"/>",
            base - bar_h,
            slot * 0.7
        );
        let cx = x + slot * 0.35;
        let _ = writeln!(
            svg,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{w:.2}</text>",
            base - bar_h - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
            base + 14.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// File-name-safe version of a relation name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
