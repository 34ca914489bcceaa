//! Tabular artifacts: CSV and JSON writers, and SVG rendered from CSV text.

use std::fmt::Write as _;

use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    /// Written as `# ` lines above the header.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
            .collect();
        json!({ "comments": self.comments, "rows": rows })
    }
}

/// Which columns of a CSV to draw.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub x: String,
    pub ys: Vec<String>,
    pub log_y: bool,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

fn axis_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) { format!("{v:.3e}") } else { format!("{v:.4}") }
}

/// Renders polylines of `spec.ys` against `spec.x` from CSV text (comment
/// lines skipped, first remaining line is the header). Non-numeric cells and,
/// on a log axis, non-positive values break the line.
pub fn svg_from_csv(csv: &str, spec: &PlotSpec) -> Result<String, String> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or("empty CSV")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("no column `{name}`"));
    let xi = col(&spec.x)?;
    let yis = spec.ys.iter().map(|y| col(y)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let value = |row: &Vec<&str>, i: usize| -> Option<f64> {
        let v: f64 = match row.get(i)?.trim() {
            "true" => 1.0,
            "false" => 0.0,
            s => s.parse().ok()?,
        };
        (v.is_finite() && (!spec.log_y || i == xi || v > 0.0)).then_some(if spec.log_y && i != xi { v.log10() } else { v })
    };

    let mut series: Vec<Vec<Vec<(f64, f64)>>> = Vec::new();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &yi in &yis {
        let mut parts = vec![Vec::new()];
        for r in &rows {
            match (value(r, xi), value(r, yi)) {
                (Some(x), Some(y)) => {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                    parts.last_mut().unwrap().push((x, y));
                }
                _ => {
                    if !parts.last().unwrap().is_empty() {
                        parts.push(Vec::new());
                    }
                }
            }
        }
        series.push(parts);
    }
    if !x0.is_finite() {
        return Err("nothing to plot".into());
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let ylab = |y: f64| if spec.log_y { axis_label(10f64.powf(y)) } else { axis_label(y) };
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="{anchor}">{}</text>"#, px(v), HEIGHT - MARGIN + 16.0, axis_label(v));
    }
    for v in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{}</text>"#, MARGIN - 4.0, py(v) + 4.0, ylab(v));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 14.0, spec.x);
    for (k, (parts, name)) in series.iter().zip(&spec.ys).enumerate() {
        let color = COLORS[k % COLORS.len()];
        for part in parts.iter().filter(|p| !p.is_empty()) {
            let pts: Vec<String> = part.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{name}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 16.0 * (k + 1) as f64
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["x", "y", "ok"]);
        t.comments.push("demo".into());
        t.push(vec![1.0.into(), 2.5.into(), true.into()]);
        t.push(vec![2.0.into(), f64::NAN.into(), false.into()]);
        t.push(vec![3.0.into(), 4.0.into(), true.into()]);
        t
    }

    #[test]
    fn csv_and_json() {
        let t = sample();
        assert_eq!(t.to_csv(), "# demo\nx,y,ok\n1,2.5,true\n2,NaN,false\n3,4,true\n");
        assert_eq!(t.to_json()["rows"][1]["y"], Value::Null);
    }

    #[test]
    fn svg_is_a_function_of_the_csv() {
        let csv = sample().to_csv();
        let spec = PlotSpec {
            x: "x".into(),
            ys: vec!["y".into()],
            log_y: true,
        };
        let a = svg_from_csv(&csv, &spec).unwrap();
        assert_eq!(a, svg_from_csv(&csv, &spec).unwrap());
        // the NaN row splits the line in two
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(svg_from_csv(&csv, &PlotSpec { x: "z".into(), ..spec }).is_err());
    }
}
