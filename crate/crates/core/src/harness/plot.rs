use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use plotters::prelude::*;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Mean penalized regret against T, one series per (cell, policy).
    RegretVsT,
    /// Mean final unfairness against eta, one series per (policy, arm).
    UnfairnessPath,
    /// Mean expected reward against mean total unfairness, one series per
    /// (cell, policy).
    RewardVsUnfairness,
    /// Mean count against the inverse squared gap, with the fairness levels.
    CountVsInverseGap,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::RegretVsT,
        PlotKind::UnfairnessPath,
        PlotKind::RewardVsUnfairness,
        PlotKind::CountVsInverseGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::RegretVsT => "regret-vs-T",
            PlotKind::UnfairnessPath => "unfairness-path",
            PlotKind::RewardVsUnfairness => "reward-vs-unfairness",
            PlotKind::CountVsInverseGap => "count-vs-inverse-gap",
        }
    }

    fn columns(self) -> [&'static str; 4] {
        match self {
            PlotKind::RegretVsT => ["cell", "policy", "T", "penalized_regret"],
            PlotKind::UnfairnessPath => ["policy", "arm", "eta", "final_unfairness"],
            PlotKind::RewardVsUnfairness => {
                ["cell", "policy", "total_unfairness", "expected_reward"]
            }
            PlotKind::CountVsInverseGap => ["cell", "arm", "inverse_gap", "count"],
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::UnknownPlotKind(s.to_string()))
    }
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

#[derive(Default)]
struct Acc {
    x: f64,
    y: f64,
    n: usize,
}

fn mismatch(kind: PlotKind, reason: String) -> HarnessError {
    HarnessError::SchemaMismatch {
        kind: kind.name().to_string(),
        reason,
    }
}

fn parse_num(kind: PlotKind, col: &str, s: &str) -> Result<f64, HarnessError> {
    s.parse::<f64>()
        .map_err(|_| mismatch(kind, format!("column {col}: {s:?} is not a number")))
}

struct Loaded {
    series: Series,
    fairness_levels: Vec<f64>,
}

/// Averages x and y over the rows sharing a series and a point key.
fn load(csv_path: &Path, kind: PlotKind) -> Result<Loaded, HarnessError> {
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| mismatch(kind, format!("missing column {name}")))
    };
    let [a, b, x, y] = kind.columns();
    let (ia, ib, ix, iy) = (find(a)?, find(b)?, find(x)?, find(y)?);
    let fairness = match kind {
        PlotKind::CountVsInverseGap => Some(find("fairness_level")?),
        _ => None,
    };
    let eta = match kind {
        PlotKind::RewardVsUnfairness => Some(find("eta")?),
        _ => None,
    };
    let class = headers.iter().position(|h| h == "class");

    let mut groups: BTreeMap<String, BTreeMap<String, Acc>> = BTreeMap::new();
    let mut levels: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let xv = parse_num(kind, x, get(ix))?;
        let yv = parse_num(kind, y, get(iy))?;
        if let Some(i) = fairness {
            let level = parse_num(kind, "fairness_level", get(i))?;
            if !levels.contains(&level) {
                levels.push(level);
            }
        }
        if !xv.is_finite() {
            continue;
        }
        let (series_key, point_key) = match kind {
            PlotKind::RegretVsT => (format!("{} {}", get(ia), get(ib)), get(ix).to_string()),
            PlotKind::UnfairnessPath => {
                (format!("{} arm {}", get(ia), get(ib)), get(ix).to_string())
            }
            PlotKind::RewardVsUnfairness => (
                format!("{} {}", get(ia), get(ib)),
                eta.map_or("", |i| get(i)).to_string(),
            ),
            PlotKind::CountVsInverseGap => {
                let label = class.map_or("arms", |i| get(i));
                (format!("{} {}", get(ia), label), get(ib).to_string())
            }
        };
        let acc = groups
            .entry(series_key)
            .or_default()
            .entry(point_key)
            .or_default();
        acc.x += xv;
        acc.y += yv;
        acc.n += 1;
    }
    if groups.is_empty() {
        return Err(mismatch(kind, "no data rows".into()));
    }

    let series: Series = groups
        .into_iter()
        .map(|(name, points)| {
            let mut pts: Vec<(f64, f64)> = points
                .values()
                .map(|acc| (acc.x / acc.n as f64, acc.y / acc.n as f64))
                .collect();
            pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
            (name, pts)
        })
        .collect();
    levels.sort_by(f64::total_cmp);
    Ok(Loaded {
        series,
        fairness_levels: levels,
    })
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn plot_err<E: std::error::Error>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

/// Renders `csv_path` as an SVG at `out_path`. Returns the number of data
/// series drawn (fairness lines excluded).
pub fn emit_plot(csv_path: &Path, kind: PlotKind, out_path: &Path) -> Result<usize, HarnessError> {
    let Loaded {
        series,
        fairness_levels,
    } = load(csv_path, kind)?;
    let all = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for &l in &fairness_levels {
        y0 = y0.min(l);
        y1 = y1.max(l);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let [_, _, x_desc, y_desc] = kind.columns();

    let root = SVGBackend::new(out_path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(kind.name(), ("sans-serif", 24))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(72)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(plot_err)?;

    let scatter = kind == PlotKind::CountVsInverseGap;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        if scatter {
            chart
                .draw_series(points.iter().map(|&p| Circle::new(p, 4, color.filled())))
                .map_err(plot_err)?
                .label(name.as_str())
                .legend(move |(x, y)| Circle::new((x + 10, y), 4, color.filled()));
        } else {
            chart
                .draw_series(LineSeries::new(
                    points.iter().copied(),
                    color.stroke_width(2),
                ))
                .map_err(plot_err)?
                .label(name.as_str())
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
                });
        }
    }
    for &level in &fairness_levels {
        chart
            .draw_series(LineSeries::new(
                [(x0, level), (x1, level)],
                BLUE.stroke_width(1),
            ))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(series.len())
}
