//! Gnuplot scripts for the CSV tables. Text generation only.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub ys: Vec<String>,
    /// Column whose distinct values become separate curves.
    pub group: Option<String>,
    pub log_y: bool,
}

impl PlotSpec {
    pub fn new(title: &str, x: &str, ys: &[&str]) -> Self {
        Self {
            title: title.to_string(),
            x: x.to_string(),
            ys: ys.iter().map(|s| s.to_string()).collect(),
            group: None,
            log_y: false,
        }
    }

    pub fn grouped(mut self, column: &str) -> Self {
        self.group = Some(column.to_string());
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Distinct values of `column` in order of first appearance, read from CSV
/// text with a header row.
pub fn distinct_values(csv: &str, column: &str) -> Option<Vec<String>> {
    let mut lines = csv.lines();
    let index = lines.next()?.split(',').position(|c| c == column)?;
    let mut seen: Vec<String> = Vec::new();
    for line in lines {
        let value = line.split(',').nth(index).unwrap_or("").to_string();
        if !seen.contains(&value) {
            seen.push(value);
        }
    }
    Some(seen)
}

/// Script plotting `csv_file` to `<stem>.png`. `groups` lists the values of
/// the group column, if any.
pub fn script(csv_file: &str, plot: &PlotSpec, groups: &[String]) -> String {
    let stem = csv_file.strip_suffix(".csv").unwrap_or(csv_file);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator \",\"");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output {}", quote(&format!("{stem}.png")));
    let _ = writeln!(s, "set title {}", quote(&plot.title));
    let _ = writeln!(s, "set xlabel {}", quote(&plot.x));
    let _ = writeln!(s, "set ylabel {}", quote(&plot.ys.join(", ")));
    let _ = writeln!(s, "set key outside right");
    if plot.log_y {
        let _ = writeln!(s, "set logscale y");
        let _ = writeln!(s, "set format y \"10^{{%L}}\"");
    }
    let x = format!("(column({}))", quote(&plot.x));
    let mut curves = Vec::new();
    for y in &plot.ys {
        match &plot.group {
            Some(g) => {
                let values = groups.join(" ");
                let label = if plot.ys.len() > 1 { format!("{y} {g}=") } else { format!("{g}=") };
                curves.push(format!(
                    "for [v in {}] {} using {x}:(strcol({}) eq v ? column({}) : NaN) with lines title {}.v",
                    quote(&values),
                    quote(csv_file),
                    quote(g),
                    quote(y),
                    quote(&label),
                ));
            }
            None => curves.push(format!(
                "{} using {x}:(column({})) with lines title {}",
                quote(csv_file),
                quote(y),
                quote(y)
            )),
        }
    }
    let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    s
}
