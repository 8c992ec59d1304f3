use std::fmt::Write;

use alarm_pipeline::MetricReport;

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", x * 100.0))
        .unwrap_or_else(|| "n/a".into())
}

fn beta_label(beta: f64) -> String {
    format!("F_{beta}")
}

/// Per-database results in percent, one decimal, with a macro-average row.
pub fn render(rows: &[(&str, &MetricReport)], average: &MetricReport, betas: &[f64]) -> String {
    let mut header: Vec<String> = vec!["Database".into()];
    header.extend(betas.iter().map(|&b| beta_label(b)));
    header.extend(["p_a", "se_a", "TP_a", "FP_a", "FN_a"].map(String::from));

    let mut lines: Vec<Vec<String>> = vec![header];
    for (name, r) in rows {
        let mut line = vec![name.to_string()];
        line.extend(betas.iter().map(|&b| pct(r.f_beta_for(b))));
        line.extend([pct(r.p_a), pct(r.se_a)]);
        let a = r.alarm_counts;
        line.extend([a.tp_a, a.fp_a, a.fn_a].map(|c| c.to_string()));
        lines.push(line);
    }
    let mut avg = vec!["Avg.".to_string()];
    avg.extend(betas.iter().map(|&b| pct(average.f_beta_for(b))));
    avg.extend([pct(average.p_a), pct(average.se_a)]);
    avg.extend(["-", "-", "-"].map(String::from));
    lines.push(avg);

    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in &lines {
        for (c, cell) in line.iter().enumerate() {
            if c == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(out, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push('\n');
    }
    out
}
