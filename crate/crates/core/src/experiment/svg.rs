//! Static SVG 1.1 line charts of sweep rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sweep::SweepRow;
use crate::dynamics::StartLabel;
use crate::error::{Error, Result};

/// Figure sets plot iterations `nu <= FIGURE_NU_MAX`.
pub const FIGURE_NU_MAX: usize = 6;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: Option<String>,
    pub color: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let m = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let step = nice_step(hi - lo);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let count = ((end - start) / step).round() as usize;
    let t = (0..=count).map(|i| start + i as f64 * step).collect();
    (start, end, t)
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn render(&self) -> String {
        let finite = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|(x, y)| x.is_finite() && y.is_finite())
        };
        let (xmin, xmax) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (ymin, ymax) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let (xmin, xmax) = if xmin.is_finite() { (xmin, xmax) } else { (0.0, 1.0) };
        let (ymin, ymax) = if ymin.is_finite() { (ymin, ymax) } else { (0.0, 1.0) };
        let (x0, x1, xt) = ticks(xmin, xmax);
        let (y0, y1, yt) = ticks(ymin, ymax);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        for &t in &xt {
            let x = px(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(t));
        }
        for &t in &yt {
            let y = py(t);
            let _ = writeln!(s, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(t));
        }
        let _ = writeln!(s, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for series in &self.series {
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let mut segment: Vec<String> = Vec::new();
            let flush = |seg: &mut Vec<String>, s: &mut String| {
                if seg.len() > 1 {
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                        series.color,
                        seg.join(" ")
                    );
                }
                seg.clear();
            };
            for &(x, y) in &series.points {
                if x.is_finite() && y.is_finite() {
                    segment.push(format!("{:.2},{:.2}", px(x), py(y)));
                } else {
                    flush(&mut segment, &mut s);
                }
            }
            flush(&mut segment, &mut s);
            for &(x, y) in series.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#, px(x), py(y), series.color);
            }
        }

        let mut ly = TOP + 8.0;
        let lx = WIDTH - RIGHT + 15.0;
        for series in self.series.iter().filter(|s| s.label.is_some()) {
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="1.5"{dash}/>"#,
                lx + 26.0,
                series.color
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 32.0,
                ly + 4.0,
                escape(series.label.as_deref().unwrap_or(""))
            );
            ly += 16.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn y_of(delta: f64) -> f64 {
    if delta > 0.0 { delta.log10() } else { f64::NAN }
}

fn dashed(start: StartLabel) -> bool {
    start != StartLabel::Max
}

type Key = (u64, StartLabel, usize);
type Lines = BTreeMap<(StartLabel, usize), Vec<(f64, f64)>>;

/// Rows with `nu <= FIGURE_NU_MAX` grouped as `lambda -> (start, a, b) -> delta`.
fn windowed(rows: &[SweepRow], by_nu: bool) -> BTreeMap<u64, Lines> {
    let mut out: BTreeMap<u64, Lines> = BTreeMap::new();
    let mut keyed: Vec<(Key, &SweepRow)> = rows
        .iter()
        .filter(|r| r.nu <= FIGURE_NU_MAX)
        .map(|r| ((r.lambda.to_bits(), r.start, if by_nu { r.n } else { r.nu }), r))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| (a.1.nu, a.1.n).cmp(&(b.1.nu, b.1.n))));
    for ((bits, start, group), r) in keyed {
        let x = if by_nu { r.nu as f64 } else { r.n as f64 };
        out.entry(bits).or_default().entry((start, group)).or_default().push((x, y_of(r.delta)));
    }
    out
}

fn write(path: PathBuf, chart: &Chart, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, chart.render()).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Writes figure set `set_id` into `dir` and returns the written paths.
///
/// * set 1: `delta_n` against `nu`, one line per `(n, start)`, one file per lambda;
/// * set 2: `delta_n` against `n`, one line per `(nu, start)`, one file per lambda;
/// * set 3: `delta_n` against `nu` for every lambda overlaid, one file per start.
///
/// Max starts are solid, other starts dashed. Returns no files when `rows` is empty.
pub fn emit_svg(rows: &[SweepRow], set_id: u8, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    if rows.is_empty() {
        eprintln!("note: no rows, no set {set_id} figures written");
        return Ok(files);
    }
    match set_id {
        1 | 2 => {
            let by_nu = set_id == 1;
            for (bits, groups) in windowed(rows, by_nu) {
                let lambda = f64::from_bits(bits);
                let mut series = Vec::new();
                let mut colors: BTreeMap<usize, &'static str> = BTreeMap::new();
                for (&(start, group), points) in &groups {
                    let next = colors.len();
                    let color = *colors.entry(group).or_insert(PALETTE[next % PALETTE.len()]);
                    let label = if by_nu { format!("n={group} {start}") } else { format!("nu={group} {start}") };
                    series.push(Series {
                        label: Some(label),
                        color,
                        dashed: dashed(start),
                        points: points.clone(),
                    });
                }
                let chart = Chart {
                    title: if by_nu {
                        format!("delta_n against iteration, lambda = {lambda}")
                    } else {
                        format!("delta_n against n, lambda = {lambda}")
                    },
                    x_label: if by_nu { "iteration nu".into() } else { "n".into() },
                    y_label: "log10 delta_n".into(),
                    series,
                };
                write(dir.join(format!("set{set_id}_lambda_{lambda}.svg")), &chart, &mut files)?;
            }
        }
        3 => {
            let data = windowed(rows, true);
            let mut starts: Vec<StartLabel> = rows.iter().map(|r| r.start).collect();
            starts.sort();
            starts.dedup();
            for start in starts {
                let mut series = Vec::new();
                for (i, (bits, groups)) in data.iter().enumerate() {
                    let color = PALETTE[i % PALETTE.len()];
                    let mut first = true;
                    for (_, points) in groups.iter().filter(|((s, _), _)| *s == start) {
                        series.push(Series {
                            label: first.then(|| format!("lambda={}", f64::from_bits(*bits))),
                            color,
                            dashed: false,
                            points: points.clone(),
                        });
                        first = false;
                    }
                }
                let chart = Chart {
                    title: format!("delta_n against iteration, all lambda, {start} start"),
                    x_label: "iteration nu".into(),
                    y_label: "log10 delta_n".into(),
                    series,
                };
                write(dir.join(format!("set3_{start}.svg")), &chart, &mut files)?;
            }
        }
        _ => return Err(Error::Usage(format!("figure set must be 1, 2 or 3, got {set_id}"))),
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(lambda: f64, start: StartLabel, nu: usize, n: usize, delta: f64) -> SweepRow {
        SweepRow {
            lambda,
            n,
            nu,
            start,
            delta,
            h_sign: 1,
            h_log10_abs: 0.0,
            status: "ok",
        }
    }

    fn sample() -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for lambda in [0.01, 0.03] {
            for start in [StartLabel::Max, StartLabel::Min] {
                for nu in 0..=8 {
                    for n in [7, 9] {
                        rows.push(row(lambda, start, nu, n, 1.0 + nu as f64 + n as f64));
                    }
                }
            }
        }
        rows
    }

    #[test]
    fn writes_one_file_per_lambda_or_start() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample();
        assert_eq!(emit_svg(&rows, 1, dir.path()).unwrap().len(), 2);
        assert_eq!(emit_svg(&rows, 2, dir.path()).unwrap().len(), 2);
        let set3 = emit_svg(&rows, 3, dir.path()).unwrap();
        assert_eq!(set3.len(), 2);
        let text = std::fs::read_to_string(dir.path().join("set1_lambda_0.01.svg")).unwrap();
        assert!(text.starts_with("<?xml"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<polyline").count(), 4);
        assert!(text.contains("stroke-dasharray"));
    }

    #[test]
    fn output_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let rows = sample();
        for set in 1..=3 {
            let fa = emit_svg(&rows, set, a.path()).unwrap();
            let fb = emit_svg(&rows, set, b.path()).unwrap();
            for (x, y) in fa.iter().zip(&fb) {
                assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
            }
        }
    }

    #[test]
    fn empty_and_invalid() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_svg(&[], 1, dir.path()).unwrap().is_empty());
        assert!(emit_svg(&sample(), 4, dir.path()).is_err());
    }

    #[test]
    fn non_finite_points_break_lines() {
        let chart = Chart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                label: None,
                color: PALETTE[0],
                dashed: false,
                points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN), (3.0, 1.0), (4.0, 0.5)],
            }],
        };
        assert_eq!(chart.render().matches("<polyline").count(), 2);
    }
}
