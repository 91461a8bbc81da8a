use serde_json::{json, Map, Value};

use super::dist::t_critical;
use super::ols::{RegressionResult, INTERCEPT};
use crate::format::sig;

/// Two-sided significance levels and their markers, strictest first.
const LEVELS: [(f64, &str); 3] = [(0.01, "***"), (0.05, "**"), (0.10, "*")];

/// Stars for a t-statistic with `df` residual degrees of freedom: `***`,
/// `**`, `*` at the 1%, 5%, 10% two-sided levels. A statistic exactly at a
/// critical value earns the higher marker.
pub fn significance_stars(t: f64, df: usize) -> &'static str {
    if t.is_nan() || df == 0 {
        return "";
    }
    let t = t.abs();
    LEVELS
        .iter()
        .find(|(alpha, _)| t >= t_critical(*alpha, df as f64))
        .map_or("", |(_, stars)| stars)
}

type FooterRow = (&'static str, fn(&RegressionResult) -> String);

fn stars_for(result: &RegressionResult) -> Vec<&'static str> {
    let df = result.df_resid();
    let crit: Vec<f64> = LEVELS
        .iter()
        .map(|(alpha, _)| t_critical(*alpha, df as f64))
        .collect();
    result
        .coefficients
        .iter()
        .map(|c| {
            if c.t.is_nan() {
                return "";
            }
            LEVELS
                .iter()
                .zip(&crit)
                .find(|(_, &cv)| c.t.abs() >= cv)
                .map_or("", |((_, stars), _)| stars)
        })
        .collect()
}

/// Renders regressions side by side: one `coef (t)stars` cell per term,
/// then F-statistic, adjusted R^2 and sample-size footer rows.
pub fn format_table(results: &[RegressionResult]) -> String {
    let mut terms: Vec<&str> = Vec::new();
    for r in results {
        for c in &r.coefficients {
            if c.name != INTERCEPT && !terms.contains(&c.name.as_str()) {
                terms.push(&c.name);
            }
        }
    }
    if results.iter().any(|r| r.intercept) {
        terms.push(INTERCEPT);
    }

    let stars: Vec<Vec<&str>> = results.iter().map(stars_for).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend((1..=results.len()).map(|i| format!("({i})")));
    rows.push(header);
    for term in &terms {
        let mut row = vec![term.replace('_', " ")];
        for (r, s) in results.iter().zip(&stars) {
            let cell = r
                .coefficients
                .iter()
                .position(|c| c.name == *term)
                .map(|i| {
                    let c = &r.coefficients[i];
                    format!("{} ({}){}", sig(c.coef, 6), sig(c.t, 6), s[i])
                })
                .unwrap_or_default();
            row.push(cell);
        }
        rows.push(row);
    }
    let footer_start = rows.len();
    let footer: [FooterRow; 3] = [
        ("F-Statistics", |r| sig(r.f_stat, 6)),
        ("R2 adjusted", |r| sig(r.r2_adj, 6)),
        ("# of samples", |r| r.n.to_string()),
    ];
    for (label, cell) in footer {
        let mut row = vec![label.to_string()];
        row.extend(results.iter().map(cell));
        rows.push(row);
    }

    let ncols = results.len() + 1;
    let widths: Vec<usize> = (0..ncols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let total: usize = widths.iter().sum::<usize>() + 3 * (ncols - 1);
    let rule = "-".repeat(total);

    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        if i == 1 || i == footer_start {
            out.push_str(&rule);
            out.push('\n');
        }
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    out.push_str("* p<0.10, ** p<0.05, *** p<0.01 (two-sided t test)\n");
    out
}

/// `{coefficients: {name: {coef, se, t, stars}}, F, r2, r2_adj, n}`.
pub fn regression_json(result: &RegressionResult) -> Value {
    let stars = stars_for(result);
    let mut coefficients = Map::new();
    for (c, s) in result.coefficients.iter().zip(stars) {
        coefficients.insert(
            c.name.clone(),
            json!({ "coef": c.coef, "se": c.se, "t": c.t, "stars": s }),
        );
    }
    json!({
        "coefficients": coefficients,
        "F": result.f_stat,
        "r2": result.r2,
        "r2_adj": result.r2_adj,
        "n": result.n,
    })
}
