use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::replication::RegretTrace;
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Per-round quantiles of cumulative regret for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub policy: String,
    pub levels: Vec<f64>,
    /// `rows[t][k]` is the `levels[k]` quantile at round `t + 1`.
    pub rows: Vec<Vec<f64>>,
}

impl QuantileTable {
    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    /// Index of the level closest to the median.
    pub fn median_index(&self) -> usize {
        self.levels
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn median(&self) -> Vec<f64> {
        let k = self.median_index();
        self.rows.iter().map(|r| r[k]).collect()
    }

    pub fn final_median(&self) -> Option<f64> {
        self.rows.last().map(|r| r[self.median_index()])
    }
}

/// Per-round empirical quantiles of cumulative regret across traces, with
/// linear interpolation between order statistics.
pub fn aggregate_quantiles(traces: &[RegretTrace], quantiles: &[f64]) -> Result<QuantileTable> {
    let first = traces.first().ok_or(Error::Empty("trace list"))?;
    let t_len = first.horizon();
    for tr in traces {
        if tr.policy != first.policy {
            return Err(Error::config(
                "traces from different policies cannot be aggregated together",
            ));
        }
        crate::error::check_dim("trace horizon", t_len, tr.horizon())?;
    }
    let mut column = vec![0.0; traces.len()];
    let rows = (0..t_len)
        .map(|t| {
            for (c, tr) in column.iter_mut().zip(traces) {
                *c = tr.cumulative[t];
            }
            column.sort_by(f64::total_cmp);
            quantiles
                .iter()
                .map(|&q| quantile_sorted(&column, q))
                .collect()
        })
        .collect();
    Ok(QuantileTable {
        policy: first.policy.clone(),
        levels: quantiles.to_vec(),
        rows,
    })
}

/// Column name of a quantile level: 0.1 becomes `q10`, 0.025 becomes `q2.5`.
pub fn level_name(level: f64) -> String {
    let pct = level * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{}", pct.round() as i64)
    } else {
        format!("q{}", pct)
    }
}

fn parse_level(name: &str) -> Option<f64> {
    name.strip_prefix('q')?
        .parse::<f64>()
        .ok()
        .map(|v| v / 100.0)
}

/// Writes `policy,round,q10,q50,q90` rows for every table. All tables must
/// share the same levels.
pub fn write_results_csv<W: Write>(tables: &[QuantileTable], out: W) -> Result<()> {
    let levels = tables
        .first()
        .map(|t| t.levels.clone())
        .unwrap_or_else(super::config::default_quantiles);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["policy".to_string(), "round".to_string()];
    header.extend(levels.iter().map(|&l| level_name(l)));
    w.write_record(&header)?;
    for table in tables {
        if table.levels != levels {
            return Err(Error::config(
                "tables in one CSV must share quantile levels",
            ));
        }
        for (t, row) in table.rows.iter().enumerate() {
            let mut rec = vec![table.policy.clone(), (t + 1).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_results_csv(tables: &[QuantileTable], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results_csv(tables, std::io::BufWriter::new(file))
}

/// Reads tables back, one per policy in order of first appearance.
pub fn read_results_csv<R: Read>(input: R, source: &Path) -> Result<Vec<QuantileTable>> {
    let parse_err = |message: String| Error::Parse {
        path: source.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "policy" || &header[1] != "round" {
        return Err(parse_err("expected header `policy,round,q..`".into()));
    }
    let levels = header
        .iter()
        .skip(2)
        .map(|h| parse_level(h).ok_or_else(|| parse_err(format!("bad quantile column `{h}`"))))
        .collect::<Result<Vec<_>>>()?;
    let mut tables: Vec<QuantileTable> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let policy = rec.get(0).unwrap_or_default();
        let round: usize = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(format!("line {line}: bad round")))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(format!("line {line}: bad value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != levels.len() {
            return Err(parse_err(format!(
                "line {line}: expected {} values",
                levels.len()
            )));
        }
        let idx = match tables.iter().position(|t| t.policy == policy) {
            Some(k) => k,
            None => {
                tables.push(QuantileTable {
                    policy: policy.to_string(),
                    levels: levels.clone(),
                    rows: Vec::new(),
                });
                tables.len() - 1
            }
        };
        let table = &mut tables[idx];
        if round != table.rows.len() + 1 {
            return Err(parse_err(format!(
                "line {line}: rounds of `{policy}` are not consecutive"
            )));
        }
        table.rows.push(values);
    }
    Ok(tables)
}

pub fn load_results_csv(path: &Path) -> Result<Vec<QuantileTable>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results_csv(std::io::BufReader::new(file), path)
}

/// Look of a regret plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgStyle {
    pub width: u32,
    pub height: u32,
    pub title: String,
    /// Policy label to CSS color. Unlisted policies cycle through a palette.
    pub colors: BTreeMap<String, String>,
    pub band_opacity: f64,
    /// Polylines are thinned to at most this many points.
    pub max_points: usize,
}

impl Default for SvgStyle {
    fn default() -> Self {
        let colors = [
            ("DWTS", "#d62728"),
            ("LINTS_FULL", "#1f77b4"),
            ("LINTS_TRUE", "#17becf"),
            ("OFUL", "#2ca02c"),
            ("ORACLE", "#444444"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        SvgStyle {
            width: 640,
            height: 420,
            title: "Cumulative regret".into(),
            colors,
            band_opacity: 0.2,
            max_points: 400,
        }
    }
}

const PALETTE: [&str; 6] = [
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#ff7f0e",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A "nice" upper axis bound and tick step covering `max`.
fn nice_axis(max: f64) -> (f64, f64) {
    if !(max > 0.0) {
        return (1.0, 0.25);
    }
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    ((max / step).ceil() * step, step)
}

fn fmt_tick(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Median line plus a band between the lowest and highest quantile per
/// policy. Output depends only on the inputs.
pub fn regret_svg(tables: &[QuantileTable], style: &SvgStyle) -> String {
    let (w, h) = (style.width as f64, style.height as f64);
    let (left, right, top, bottom) = (64.0, 150.0, 36.0, 44.0);
    let plot_w = (w - left - right).max(10.0);
    let plot_h = (h - top - bottom).max(10.0);
    let horizon = tables.iter().map(|t| t.horizon()).max().unwrap_or(0).max(1);
    let y_top = tables
        .iter()
        .flat_map(|t| t.rows.iter().flat_map(|r| r.iter().copied()))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let (y_max, y_step) = nice_axis(y_top);
    let (x_max, x_step) = nice_axis(horizon as f64);
    let sx = |t: f64| left + plot_w * t / x_max;
    let sy = |v: f64| top + plot_h * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + plot_w / 2.0,
        escape(&style.title)
    );
    // grid and ticks
    let mut v = 0.0;
    while v <= y_max + 1e-9 {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e5e5e5"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
        v += y_step;
    }
    let mut t = 0.0;
    while t <= x_max + 1e-9 {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            top + plot_h + 16.0,
            fmt_tick(t)
        );
        t += x_step;
    }
    let _ = writeln!(
        s,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round</text>"#,
        left + plot_w / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">cumulative regret</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    let mut spare = PALETTE.iter().cycle();
    for (i, table) in tables.iter().enumerate() {
        let color = style
            .colors
            .get(&table.policy)
            .cloned()
            .unwrap_or_else(|| spare.next().expect("cycle").to_string());
        let n = table.horizon();
        if n == 0 {
            continue;
        }
        let stride = n.div_ceil(style.max_points.max(2));
        let mut idx: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
        if *idx.last().expect("nonempty") != n - 1 {
            idx.push(n - 1);
        }
        let lo = 0;
        let hi = table.levels.len() - 1;
        let mid = table.median_index();
        if hi > lo {
            let mut band = String::new();
            for &k in &idx {
                let _ = write!(
                    band,
                    "{:.2},{:.2} ",
                    sx((k + 1) as f64),
                    sy(table.rows[k][hi])
                );
            }
            for &k in idx.iter().rev() {
                let _ = write!(
                    band,
                    "{:.2},{:.2} ",
                    sx((k + 1) as f64),
                    sy(table.rows[k][lo])
                );
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{}" fill-opacity="{}" stroke="none"/>"#,
                band.trim_end(),
                escape(&color),
                style.band_opacity
            );
        }
        let mut line = String::new();
        for &k in &idx {
            let _ = write!(
                line,
                "{:.2},{:.2} ",
                sx((k + 1) as f64),
                sy(table.rows[k][mid])
            );
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            line.trim_end(),
            escape(&color)
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            escape(&color),
            lx + 26.0,
            ly + 4.0,
            escape(&table.policy)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_regret_svg(tables: &[QuantileTable], path: &Path, style: &SvgStyle) -> Result<()> {
    std::fs::write(path, regret_svg(tables, style)).map_err(|e| Error::io(path, e))
}
