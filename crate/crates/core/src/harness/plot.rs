//! Static SVG charts from harness CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Learning curves from raw or aggregated metric files.
    Curves,
    /// Relative error against visit and generalized counters.
    Fig6,
    /// Histogram of per-state correlation coefficients.
    Histogram,
    /// Visit histogram beside the `C_E` map.
    Heatmap,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curves" => Ok(PlotKind::Curves),
            "fig6" => Ok(PlotKind::Fig6),
            "histogram" => Ok(PlotKind::Histogram),
            "heatmap" => Ok(PlotKind::Heatmap),
            _ => Err(Error::Config(format!(
                "unknown plot kind '{s}'; valid kinds: curves, fig6, histogram, heatmap"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    pub log_abscissa: bool,
    pub title: Option<String>,
}

/// A parsed CSV file.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let name = name.into();
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Schema(format!("{name}: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        let rows = reader
            .records()
            .map(|r| {
                r.map(|r| r.iter().map(str::to_owned).collect())
                    .map_err(|e| Error::Schema(format!("{name}: {e}")))
            })
            .collect::<Result<Vec<Vec<String>>>>()?;
        if rows.is_empty() {
            return Err(Error::Schema(format!("{name}: no data rows")));
        }
        Ok(Self { name, headers, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(name, &std::fs::read_to_string(path)?)
    }

    pub fn has(&self, column: &str) -> bool {
        self.headers.iter().any(|h| h == column)
    }

    fn index(&self, column: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::Schema(format!("{}: missing column '{column}'", self.name)))
    }

    pub fn require(&self, columns: &[&str]) -> Result<()> {
        columns.iter().try_for_each(|c| self.index(c).map(|_| ()))
    }

    pub fn strings(&self, column: &str) -> Result<Vec<&str>> {
        let i = self.index(column)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Numeric column; empty cells become NaN.
    pub fn numbers(&self, column: &str) -> Result<Vec<f64>> {
        let i = self.index(column)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                let cell = r[i].trim();
                if cell.is_empty() {
                    return Ok(f64::NAN);
                }
                cell.parse().map_err(|_| {
                    Error::Schema(format!("{}: row {} column '{column}' is not a number", self.name, n + 1))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = if log { (1.0, 10.0) } else { (0.0, 1.0) };
        }
        if hi <= lo {
            if log {
                (lo, hi) = (lo / 2.0, hi * 2.0);
            } else {
                (lo, hi) = (lo - 0.5, hi + 0.5);
            }
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        Some(if self.log {
            (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        })
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().floor() as i32, self.hi.log10().ceil() as i32);
            (a..=b)
                .map(|e| 10f64.powi(e))
                .filter(|t| *t >= self.lo * 0.999 && *t <= self.hi * 1.001)
                .collect()
        } else {
            let raw = (self.hi - self.lo) / 4.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last).map(|i| i as f64 * step).collect()
        }
    }

    fn with_zero(mut self) -> Self {
        if !self.log && self.lo > 0.0 {
            self.lo = 0.0;
        }
        self
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plot area inside an SVG document.
struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x: Axis,
    y: Axis,
}

impl Panel {
    fn point(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (ux, uy) = (self.x.unit(x)?, self.y.unit(y)?);
        Some((self.x0 + ux * self.w, self.y0 + self.h - uy * self.h))
    }

    fn frame(&self, svg: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, y0, w, h) = (self.x0, self.y0, self.w, self.h);
        let _ = write!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>"##
        );
        for t in self.x.ticks() {
            if let Some((px, _)) = self.point(t, self.y.lo) {
                let _ = write!(
                    svg,
                    r##"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="#333"/><text x="{px:.1}" y="{}" font-size="11" text-anchor="middle">{}</text>"##,
                    y0 + h,
                    y0 + h + 4.0,
                    y0 + h + 16.0,
                    label(t)
                );
            }
        }
        for t in self.y.ticks() {
            if let Some((_, py)) = self.point(self.x.lo, t) {
                let _ = write!(
                    svg,
                    r##"<line x1="{}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="#333"/><text x="{}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
                    x0 - 4.0,
                    x0 - 6.0,
                    py + 4.0,
                    label(t)
                );
            }
        }
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            x0 + w / 2.0,
            y0 + h + 34.0,
            escape(xlabel)
        );
        let _ = write!(
            svg,
            r#"<text transform="translate({:.1},{:.1}) rotate(-90)" font-size="12" text-anchor="middle">{}</text>"#,
            x0 - 42.0,
            y0 + h / 2.0,
            escape(ylabel)
        );
    }
}

fn document(width: f64, height: f64, title: Option<&str>, body: &str) -> String {
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(t) = title {
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            width / 2.0,
            escape(t)
        );
    }
    svg.push_str(body);
    svg.push_str("</svg>\n");
    svg
}

fn legend(svg: &mut String, names: &[String], x: f64, y: f64) {
    for (i, n) in names.iter().enumerate() {
        let yy = y + 14.0 * i as f64;
        let _ = write!(
            svg,
            r#"<rect x="{x}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{}" y="{:.1}" font-size="11">{}</text>"#,
            yy - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            yy,
            escape(n)
        );
    }
}

/// Mean curve(s) of a metric file: one per agent for aggregated files, one
/// per file for raw files.
fn curves_of(table: &Table) -> Result<Vec<(String, Vec<(f64, f64)>)>> {
    if table.has("agent") {
        table.require(&["episode", "agent", "mean_metric"])?;
        let eps = table.numbers("episode")?;
        let agents = table.strings("agent")?;
        let vals = table.numbers("mean_metric")?;
        let mut order: Vec<String> = Vec::new();
        let mut by: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for ((e, a), v) in eps.into_iter().zip(agents).zip(vals) {
            if !by.contains_key(a) {
                order.push(a.to_owned());
            }
            by.entry(a.to_owned()).or_default().push((e, v));
        }
        Ok(order
            .into_iter()
            .map(|a| {
                let pts = by.remove(&a).unwrap_or_default();
                (a, pts)
            })
            .collect())
    } else {
        table.require(&["trial", "episode", "metric", "steps"])?;
        let eps = table.numbers("episode")?;
        let vals = table.numbers("metric")?;
        let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for (e, v) in eps.into_iter().zip(vals) {
            let slot = acc.entry(e as u64).or_insert((0.0, 0));
            slot.0 += v;
            slot.1 += 1;
        }
        let pts = acc
            .into_iter()
            .map(|(e, (s, n))| (e as f64, s / n as f64))
            .collect();
        Ok(vec![(table.name.clone(), pts)])
    }
}

fn plot_curves(tables: &[Table], opts: &PlotOptions) -> Result<String> {
    let mut series = Vec::new();
    for t in tables {
        series.extend(curves_of(t)?);
    }
    let x = Axis::fit(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)), opts.log_abscissa);
    let y = Axis::fit(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)), false).with_zero();
    let panel = Panel {
        x0: MARGIN,
        y0: 32.0,
        w: WIDTH - MARGIN - 150.0,
        h: HEIGHT - 32.0 - MARGIN,
        x,
        y,
    };
    let mut body = String::new();
    panel.frame(&mut body, "episode", "metric");
    for (i, (_, pts)) in series.iter().enumerate() {
        let path: Vec<String> = pts
            .iter()
            .filter_map(|&(a, b)| panel.point(a, b))
            .map(|(px, py)| format!("{px:.2},{py:.2}"))
            .collect();
        let _ = write!(
            body,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            path.join(" ")
        );
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut body, &names, WIDTH - 140.0, 48.0);
    Ok(document(WIDTH, HEIGHT, opts.title.as_deref(), &body))
}

fn plot_fig6(table: &Table, opts: &PlotOptions) -> Result<String> {
    table.require(&["pair", "episode", "c", "gc", "rel_err"])?;
    let pairs = table.numbers("pair")?;
    let c = table.numbers("c")?;
    let gc = table.numbers("gc")?;
    let err = table.numbers("rel_err")?;
    let mut ids: Vec<u64> = pairs.iter().map(|&p| p as u64).collect();
    ids.sort_unstable();
    ids.dedup();
    let colour = |p: f64| {
        let i = ids.binary_search(&(p as u64)).unwrap_or(0);
        PALETTE[i % PALETTE.len()]
    };
    let width = 2.0 * WIDTH - MARGIN;
    let y = Axis::fit(err.iter().copied(), false).with_zero();
    let mut body = String::new();
    for (k, (xs, name)) in [(&c, "visit counter"), (&gc, "generalized counter")].into_iter().enumerate() {
        let panel = Panel {
            x0: MARGIN + k as f64 * (WIDTH - MARGIN / 2.0),
            y0: 32.0,
            w: WIDTH - 2.0 * MARGIN,
            h: HEIGHT - 32.0 - MARGIN,
            x: Axis::fit(xs.iter().copied(), opts.log_abscissa).with_zero(),
            y,
        };
        panel.frame(&mut body, name, "relative error");
        for i in 0..xs.len() {
            if let Some((px, py)) = panel.point(xs[i], err[i]) {
                let _ = write!(
                    body,
                    r#"<circle cx="{px:.1}" cy="{py:.1}" r="1.5" fill="{}" fill-opacity="0.6"/>"#,
                    colour(pairs[i])
                );
            }
        }
    }
    Ok(document(width, HEIGHT, opts.title.as_deref(), &body))
}

fn plot_histogram(table: &Table, opts: &PlotOptions) -> Result<String> {
    table.require(&["coefficient"])?;
    let vals: Vec<f64> = table
        .numbers("coefficient")?
        .into_iter()
        .filter(|v| v.is_finite())
        .collect();
    const BINS: usize = 20;
    let mut counts = [0usize; BINS];
    for v in &vals {
        let b = (((v + 1.0) / 2.0 * BINS as f64).floor().max(0.0) as usize).min(BINS - 1);
        counts[b] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let panel = Panel {
        x0: MARGIN,
        y0: 32.0,
        w: WIDTH - 2.0 * MARGIN,
        h: HEIGHT - 32.0 - MARGIN,
        x: Axis { lo: -1.0, hi: 1.0, log: false },
        y: Axis { lo: 0.0, hi: top, log: false },
    };
    let mut body = String::new();
    panel.frame(&mut body, "correlation coefficient", "states");
    let bw = panel.w / BINS as f64;
    for (i, &n) in counts.iter().enumerate() {
        let h = n as f64 / top * panel.h;
        let _ = write!(
            body,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#1f77b4" stroke="white"/>"##,
            panel.x0 + i as f64 * bw,
            panel.y0 + panel.h - h,
            bw
        );
    }
    Ok(document(WIDTH, HEIGHT, opts.title.as_deref(), &body))
}

fn plot_heatmap(table: &Table, opts: &PlotOptions) -> Result<String> {
    table.require(&["position_bin", "velocity_bin", "count", "c_e"])?;
    let pb = table.numbers("position_bin")?;
    let vb = table.numbers("velocity_bin")?;
    let np = pb.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    let nv = vb.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    let size = HEIGHT - 32.0 - MARGIN;
    let mut body = String::new();
    for (k, (col, name)) in [("count", "visits"), ("c_e", "C_E")].into_iter().enumerate() {
        let vals = table.numbers(col)?;
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x0 = MARGIN + k as f64 * (size + MARGIN);
        let (cw, ch) = (size / np as f64, size / nv as f64);
        for i in 0..vals.len() {
            let t = (vals[i] - lo) / span;
            let shade = (255.0 * (1.0 - t)).round() as u8;
            let _ = write!(
                body,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="rgb(255,{shade},{shade})"/>"#,
                x0 + pb[i] * cw,
                32.0 + size - (vb[i] + 1.0) * ch,
                cw + 0.1,
                ch + 0.1
            );
        }
        let _ = write!(
            body,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{name} (position across, velocity up)</text>"#,
            x0 + size / 2.0,
            32.0 + size + 20.0
        );
    }
    Ok(document(2.0 * size + 3.0 * MARGIN, HEIGHT, opts.title.as_deref(), &body))
}

/// Renders parsed tables; every kind but `Curves` takes exactly one table.
pub fn render(kind: PlotKind, tables: &[Table], opts: &PlotOptions) -> Result<String> {
    if tables.is_empty() {
        return Err(Error::Config("plot needs at least one input".into()));
    }
    let single = || -> Result<&Table> {
        match tables {
            [t] => Ok(t),
            _ => Err(Error::Config("this plot kind takes one input".into())),
        }
    };
    match kind {
        PlotKind::Curves => plot_curves(tables, opts),
        PlotKind::Fig6 => plot_fig6(single()?, opts),
        PlotKind::Histogram => plot_histogram(single()?, opts),
        PlotKind::Heatmap => plot_heatmap(single()?, opts),
    }
}

pub fn plot_files(kind: PlotKind, inputs: &[&Path], opts: &PlotOptions) -> Result<String> {
    let tables = inputs.iter().map(|p| Table::read(p)).collect::<Result<Vec<_>>>()?;
    render(kind, &tables, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregated_curves_one_polyline_per_agent() {
        let t = Table::parse(
            "agg",
            "episode,agent,mean_metric\n1,a,3\n2,a,2\n1,b,5\n2,b,1\n1,c,4\n2,c,4\n",
        )
        .unwrap();
        let svg = render(PlotKind::Curves, &[t], &PlotOptions::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn log_abscissa_drops_nothing_positive() {
        let t = Table::parse("r", "trial,episode,metric,steps\n0,1,3,5\n0,10,2,5\n0,100,1,5\n").unwrap();
        let opts = PlotOptions { log_abscissa: true, title: None };
        let svg = render(PlotKind::Curves, &[t], &opts).unwrap();
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 3);
        // evenly spaced on a log axis
        let xs: Vec<f64> = pts.split(' ').map(|p| p.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(((xs[1] - xs[0]) - (xs[2] - xs[1])).abs() < 0.05);
    }

    #[test]
    fn fig6_two_panels() {
        let t = Table::parse("f", "pair,episode,c,gc,rel_err\n0,1,1,0.5,1\n2,1,3,1.5,0.5\n").unwrap();
        let svg = render(PlotKind::Fig6, &[t], &PlotOptions::default()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains("generalized counter"));
    }

    #[test]
    fn histogram_and_heatmap() {
        let t = Table::parse("c", "state,position,velocity,coefficient\n0,0,0,0.9\n1,0,0,\n2,0,0,-0.2\n").unwrap();
        let svg = render(PlotKind::Histogram, &[t], &PlotOptions::default()).unwrap();
        assert_eq!(svg.matches("fill=\"#1f77b4\"").count(), 20);
        let t = Table::parse(
            "v",
            "position_bin,velocity_bin,count,c_e\n0,0,1,0.5\n0,1,0,0\n1,0,4,2\n1,1,2,1\n",
        )
        .unwrap();
        let svg = render(PlotKind::Heatmap, &[t], &PlotOptions::default()).unwrap();
        assert_eq!(svg.matches("rgb(").count(), 8);
    }

    #[test]
    fn schema_errors_name_the_column() {
        let t = Table::parse("bad", "trial,episode,steps\n0,1,2\n").unwrap();
        let err = render(PlotKind::Curves, &[t], &PlotOptions::default()).unwrap_err();
        assert!(err.to_string().contains("'metric'"), "{err}");
        let t = Table::parse("bad", "pair,episode,c,rel_err\n0,1,1,1\n").unwrap();
        let err = render(PlotKind::Fig6, &[t], &PlotOptions::default()).unwrap_err();
        assert!(err.to_string().contains("'gc'"));
    }

    #[test]
    fn empty_csv_is_an_error() {
        assert!(matches!(Table::parse("e", ""), Err(Error::Schema(_))));
        assert!(matches!(Table::parse("e", "episode,agent,mean_metric\n"), Err(Error::Schema(_))));
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("fig6".parse::<PlotKind>().unwrap(), PlotKind::Fig6);
        assert!("pie".parse::<PlotKind>().is_err());
    }
}
