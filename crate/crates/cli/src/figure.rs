//! Static SVG line plots rendered from CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::config::Kind;
use crate::table_io::CsvTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let pts = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let pad = 0.05 * (y1 - y0);
        let (y0, y1) = (y0 - pad, y1 + pad);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (l, r, b, t) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(fx),
                b + 18.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                l - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (i, ser) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut d = String::new();
            for (j, &(x, y)) in ser.points.iter().enumerate() {
                let _ = write!(d, "{}{:.2} {:.2} ", if j == 0 { "M" } else { "L" }, sx(x), sy(y));
            }
            let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"{dash}/>"#,
                d.trim_end()
            );
            let ly = t + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
                r - 150.0,
                r - 125.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{}</text>"#,
                r - 120.0,
                ly + 4.0,
                escape(&ser.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

type Key = Vec<String>;

/// Rows with status `OK`, grouped by the given key columns in file order.
fn groups(t: &CsvTable, keys: &[&str]) -> Result<BTreeMap<Key, Vec<Vec<String>>>> {
    let idx: Vec<usize> = keys.iter().map(|k| t.column(k)).collect::<Result<_>>()?;
    let status = t.column("status")?;
    let mut out: BTreeMap<Key, Vec<Vec<String>>> = BTreeMap::new();
    for row in &t.rows {
        if row[status] != "OK" {
            continue;
        }
        let key = idx.iter().map(|&i| row[i].clone()).collect();
        out.entry(key).or_default().push(row.clone());
    }
    Ok(out)
}

fn series(t: &CsvTable, rows: &[Vec<String>], x: &str, y: &str, name: &str, dashed: bool) -> Result<Option<Series>> {
    let (xi, yi) = (t.column(x)?, t.column(y)?);
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((t.num(r, xi)?, t.num(r, yi)?)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    Ok((!points.is_empty()).then(|| Series {
        name: name.into(),
        points,
        dashed,
    }))
}

/// Mean and sample SD of `y` at each distinct `x`, in increasing `x`.
fn mean_sd_by(t: &CsvTable, rows: &[Vec<String>], x: &str, y: &str) -> Result<Vec<(f64, f64, f64)>> {
    let (xi, yi) = (t.column(x)?, t.column(y)?);
    let mut by: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in rows {
        let (Some(a), Some(b)) = (t.num(r, xi), t.num(r, yi)) else { continue };
        match by.iter_mut().find(|(k, _)| *k == a) {
            Some((_, v)) => v.push(b),
            None => by.push((a, vec![b])),
        }
    }
    by.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(by
        .into_iter()
        .map(|(k, v)| {
            let (m, sd) = bridge_core::finite_sample::mean_sd(&v);
            (k, m, sd)
        })
        .collect())
}

fn label(keys: &[&str], vals: &[String]) -> String {
    keys.iter()
        .zip(vals)
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn file_stem(kind: Kind, keys: &[&str], vals: &[String]) -> String {
    let mut s = format!("fig_{kind}");
    for (k, v) in keys.iter().zip(vals) {
        let _ = write!(s, "_{k}{v}");
    }
    s
}

/// Build one plot per cell of the table.
pub fn plots(t: &CsvTable) -> Result<Vec<(String, Plot)>> {
    let mut out = Vec::new();
    match t.kind {
        Kind::Phase => {
            let keys = ["q"];
            for (k, rows) in groups(t, &keys)? {
                let mut ser = Vec::new();
                ser.extend(series(t, &rows, "epsilon", "m_value", "M_q(eps)", false)?);
                ser.extend(series(t, &rows, "epsilon", "epsilon", "delta = eps", true)?);
                out.push((
                    file_stem(t.kind, &keys, &k),
                    Plot {
                        title: format!("phase transition, {}", label(&keys, &k)),
                        x_label: "epsilon".into(),
                        y_label: "delta".into(),
                        series: ser,
                    },
                ));
            }
        }
        Kind::AmseCurve | Kind::ExpansionCheck => {
            let keys = ["q", "delta", "epsilon"];
            for (k, rows) in groups(t, &keys)? {
                let mut ser = Vec::new();
                ser.extend(series(t, &rows, "sigma_w", "amse", "AMSE", false)?);
                ser.extend(series(t, &rows, "sigma_w", "first_order", "first order", true)?);
                ser.extend(series(t, &rows, "sigma_w", "second_order", "second order", true)?);
                out.push((
                    file_stem(t.kind, &keys, &k),
                    Plot {
                        title: label(&keys, &k),
                        x_label: "sigma_w".into(),
                        y_label: "AMSE".into(),
                        series: ser,
                    },
                ));
            }
        }
        Kind::FiniteSample => {
            let keys = ["q", "delta", "epsilon", "p"];
            for (k, rows) in groups(t, &keys)? {
                let stats = mean_sd_by(t, &rows, "sigma_w", "mse")?;
                let amse = mean_sd_by(t, &rows, "sigma_w", "amse")?;
                let ser = vec![
                    Series {
                        name: "AMSE".into(),
                        points: amse.iter().map(|&(x, m, _)| (x, m)).collect(),
                        dashed: false,
                    },
                    Series {
                        name: "mean MSE".into(),
                        points: stats.iter().map(|&(x, m, _)| (x, m)).collect(),
                        dashed: false,
                    },
                    Series {
                        name: "mean + SD".into(),
                        points: stats.iter().map(|&(x, m, s)| (x, m + s)).collect(),
                        dashed: true,
                    },
                    Series {
                        name: "mean - SD".into(),
                        points: stats.iter().map(|&(x, m, s)| (x, m - s)).collect(),
                        dashed: true,
                    },
                ];
                out.push((
                    file_stem(t.kind, &keys, &k),
                    Plot {
                        title: label(&keys, &k),
                        x_label: "sigma_w".into(),
                        y_label: "MSE".into(),
                        series: ser,
                    },
                ));
            }
        }
        Kind::AmpTrace => {
            let keys = ["q", "delta", "epsilon", "sigma_w", "p"];
            for (k, rows) in groups(t, &keys)? {
                let emp = mean_sd_by(t, &rows, "t", "mse")?;
                let theory = mean_sd_by(t, &rows, "t", "mse_theory")?;
                let ser = vec![
                    Series {
                        name: "AMP".into(),
                        points: emp.iter().map(|&(x, m, _)| (x, m)).collect(),
                        dashed: false,
                    },
                    Series {
                        name: "state evolution".into(),
                        points: theory.iter().map(|&(x, m, _)| (x, m)).collect(),
                        dashed: true,
                    },
                ];
                out.push((
                    file_stem(t.kind, &keys, &k),
                    Plot {
                        title: label(&keys, &k),
                        x_label: "iteration".into(),
                        y_label: "MSE".into(),
                        series: ser,
                    },
                ));
            }
        }
    }
    Ok(out)
}

/// Render every cell of `t` into `dir`; returns the written paths.
pub fn emit(t: &CsvTable, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (stem, plot) in plots(t)? {
        let path = dir.join(format!("{stem}.svg"));
        std::fs::write(&path, plot.to_svg())?;
        paths.push(path);
    }
    Ok(paths)
}
