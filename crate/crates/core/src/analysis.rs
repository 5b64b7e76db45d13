//! Diagnostics over trained objectives and finished lifetimes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::inner::TraceRow;
use crate::lpo::{linspace, DriftObjective, RATIO_MAX, RATIO_MIN};

/// `d(p*A - D)/dp` sampled on a `(p, A)` grid; `values[i][j]` belongs to
/// `p_axis[i]` and `a_axis[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeGrid {
    pub p_axis: Vec<f64>,
    pub a_axis: Vec<f64>,
    pub lifetime_frac: f64,
    pub values: Vec<Vec<f64>>,
}

impl DerivativeGrid {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub const DEFAULT_P_RANGE: (f64, f64) = (0.5, 1.5);
pub const DEFAULT_A_RANGE: (f64, f64) = (-1.0, 1.0);
pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_FRACS: [f64; 3] = [0.0, 0.5, 1.0];

pub fn objective_derivative_grid(
    drift: &dyn DriftObjective,
    lifetime_frac: f64,
    p_range: (f64, f64),
    a_range: (f64, f64),
    resolution: usize,
) -> Result<DerivativeGrid> {
    if resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    if !(p_range.0 >= RATIO_MIN && p_range.1 <= RATIO_MAX && p_range.0 < p_range.1) {
        return Err(Error::Config(format!(
            "ratio range [{}, {}] must be increasing and inside [{RATIO_MIN}, {RATIO_MAX}]",
            p_range.0, p_range.1
        )));
    }
    if !(a_range.0 < a_range.1) {
        return Err(Error::Config("advantage range must be increasing".into()));
    }
    if !(0.0..=1.0).contains(&lifetime_frac) {
        return Err(Error::Config(format!("lifetime fraction {lifetime_frac} outside [0, 1]")));
    }
    let p_axis = linspace(p_range.0, p_range.1, resolution);
    let a_axis = linspace(a_range.0, a_range.1, resolution);
    let mut values = Vec::with_capacity(resolution);
    for &p in &p_axis {
        let mut row = Vec::with_capacity(resolution);
        for &a in &a_axis {
            let v = a - drift.drift_dp(p, a, lifetime_frac)?;
            if !v.is_finite() {
                return Err(Error::Numeric(format!("derivative at p={p}, A={a} is not finite")));
            }
            row.push(v);
        }
        values.push(row);
    }
    Ok(DerivativeGrid {
        p_axis,
        a_axis,
        lifetime_frac,
        values,
    })
}

/// Metric rows of one lifetime, stored at single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    pub experiment_id: String,
    pub seed: u64,
    pub horizon: u64,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub n: u64,
    pub entropy: f32,
    pub update_norm: f32,
    pub eval_return_normalized: f32,
}

impl MetricTrace {
    pub fn from_rows(experiment_id: &str, seed: u64, horizon: u64, rows: &[TraceRow]) -> Self {
        Self {
            experiment_id: experiment_id.to_string(),
            seed,
            horizon,
            rows: rows
                .iter()
                .map(|r| MetricRow {
                    n: r.n,
                    entropy: r.entropy as f32,
                    update_norm: r.update_norm as f32,
                    eval_return_normalized: r.eval_return_normalized as f32,
                })
                .collect(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.rows.last().is_some_and(|r| r.n == self.horizon)
    }

    /// First lifetime fraction at which entropy is at most half its first
    /// recorded value; 1.0 when that never happens.
    pub fn entropy_half_life(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 1.0;
        };
        let half = first.entropy / 2.0;
        self.rows
            .iter()
            .find(|r| r.entropy <= half)
            .map_or(1.0, |r| r.n as f64 / self.horizon as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSummary {
    pub horizon: u64,
    pub lifetimes: usize,
    pub mean_half_life: f64,
    pub mean_update_norm: f64,
    pub mean_final_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeMetrics {
    /// Sorted by horizon.
    pub per_horizon: Vec<HorizonSummary>,
    /// Adjacent horizon pairs whose mean half-life does not decrease.
    pub non_decreasing_pairs: usize,
    pub adjacent_pairs: usize,
    pub excluded: usize,
}

impl LifetimeMetrics {
    pub fn half_life_non_decreasing(&self) -> bool {
        self.non_decreasing_pairs == self.adjacent_pairs
    }
}

/// Summarises complete traces per horizon; incomplete traces are skipped.
pub fn lifetime_metrics(traces: &[MetricTrace]) -> LifetimeMetrics {
    let mut groups: BTreeMap<u64, Vec<&MetricTrace>> = BTreeMap::new();
    let mut excluded = 0;
    for t in traces {
        if t.is_complete() {
            groups.entry(t.horizon).or_default().push(t);
        } else {
            log::warn!(
                "excluding incomplete trace {} seed {} (horizon {})",
                t.experiment_id,
                t.seed,
                t.horizon
            );
            excluded += 1;
        }
    }
    let per_horizon: Vec<HorizonSummary> = groups
        .into_iter()
        .map(|(horizon, ts)| {
            let k = ts.len() as f64;
            let update_norm = ts
                .iter()
                .map(|t| t.rows.iter().map(|r| f64::from(r.update_norm)).sum::<f64>() / t.rows.len() as f64)
                .sum::<f64>()
                / k;
            HorizonSummary {
                horizon,
                lifetimes: ts.len(),
                mean_half_life: ts.iter().map(|t| t.entropy_half_life()).sum::<f64>() / k,
                mean_update_norm: update_norm,
                mean_final_return: ts
                    .iter()
                    .map(|t| f64::from(t.rows.last().expect("complete").eval_return_normalized))
                    .sum::<f64>()
                    / k,
            }
        })
        .collect();
    let adjacent_pairs = per_horizon.len().saturating_sub(1);
    let non_decreasing_pairs = per_horizon
        .windows(2)
        .filter(|w| w[1].mean_half_life >= w[0].mean_half_life)
        .count();
    LifetimeMetrics {
        per_horizon,
        non_decreasing_pairs,
        adjacent_pairs,
        excluded,
    }
}

pub const TRACE_HEADER: [&str; 7] = [
    "experiment_id",
    "seed",
    "N",
    "n",
    "entropy",
    "update_norm",
    "eval_return_normalized",
];

/// Nine significant digits, enough to reproduce any single-precision value.
pub fn format_real(v: f64) -> String {
    format!("{v:.8e}")
}

fn format_f32(v: f32) -> String {
    format!("{v:.8e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_trace_csv(path: &Path, traces: &[MetricTrace]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    for t in traces {
        for r in &t.rows {
            w.write_record([
                t.experiment_id.clone(),
                t.seed.to_string(),
                t.horizon.to_string(),
                r.n.to_string(),
                format_f32(r.entropy),
                format_f32(r.update_norm),
                format_f32(r.eval_return_normalized),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a trace file back; consecutive rows with the same
/// `(experiment_id, seed, N)` form one trace.
pub fn read_trace_csv(path: &Path) -> Result<Vec<MetricTrace>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "unexpected trace header".into(),
        });
    }
    let mut traces: Vec<MetricTrace> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| Error::Parse {
            path: path.display().to_string(),
            line,
            message: format!("invalid {what}"),
        };
        let int = |i: usize, what: &str| record[i].parse::<u64>().map_err(|_| bad(what));
        let real = |i: usize, what: &str| record[i].parse::<f32>().map_err(|_| bad(what));
        let id = record[0].to_string();
        let seed = int(1, "seed")?;
        let horizon = int(2, "N")?;
        let row = MetricRow {
            n: int(3, "n")?,
            entropy: real(4, "entropy")?,
            update_norm: real(5, "update_norm")?,
            eval_return_normalized: real(6, "eval_return_normalized")?,
        };
        match traces.last_mut() {
            Some(t) if t.experiment_id == id && t.seed == seed && t.horizon == horizon => t.rows.push(row),
            _ => traces.push(MetricTrace {
                experiment_id: id,
                seed,
                horizon,
                rows: vec![row],
            }),
        }
    }
    Ok(traces)
}

pub fn write_grid_csv(path: &Path, grid: &DerivativeGrid) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# lifetime_frac={}", format_real(grid.lifetime_frac)).unwrap();
    out.push_str("p,A,value\n");
    for (i, p) in grid.p_axis.iter().enumerate() {
        for (j, a) in grid.a_axis.iter().enumerate() {
            writeln!(out, "{},{},{}", format_real(*p), format_real(*a), format_real(grid.values[i][j])).unwrap();
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Diverging palette: white at zero, pure red at `+scale`, pure blue at
/// `-scale`. Negating the value swaps the red and blue channels.
pub fn diverging_color(value: f64, scale: f64) -> (u8, u8, u8) {
    if !(scale > 0.0) {
        return (255, 255, 255);
    }
    let t = (value / scale).clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        (255, fade, fade)
    } else {
        (fade, fade, 255)
    }
}

pub const SVG_CELL: usize = 8;

/// One rectangle per grid cell with the colour scale symmetric about zero.
/// Ratio runs left to right, advantage bottom to top.
pub fn render_heatmap_svg(grid: &DerivativeGrid) -> String {
    let cols = grid.p_axis.len();
    let rows = grid.a_axis.len();
    let scale = grid.max_abs();
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        cols * SVG_CELL,
        rows * SVG_CELL,
        cols * SVG_CELL,
        rows * SVG_CELL
    )
    .unwrap();
    for i in 0..cols {
        for j in 0..rows {
            let (r, g, b) = diverging_color(grid.values[i][j], scale);
            writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{SVG_CELL}\" height=\"{SVG_CELL}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>",
                i * SVG_CELL,
                (rows - 1 - j) * SVG_CELL
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_heatmap_svg(path: &Path, grid: &DerivativeGrid) -> Result<()> {
    fs::write(path, render_heatmap_svg(grid)).map_err(|e| Error::io(path, e))
}

/// Writes `grid_<k>.csv` and `grid_<k>.svg` per grid plus `traces.csv`.
pub fn export_artifacts(grids: &[DerivativeGrid], traces: &[MetricTrace], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (k, g) in grids.iter().enumerate() {
        let csv_path = out_dir.join(format!("grid_{k}.csv"));
        write_grid_csv(&csv_path, g)?;
        let svg_path = out_dir.join(format!("grid_{k}.svg"));
        write_heatmap_svg(&svg_path, g)?;
        written.push(csv_path);
        written.push(svg_path);
    }
    let trace_path = out_dir.join("traces.csv");
    write_trace_csv(&trace_path, traces)?;
    written.push(trace_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpo::{DriftNet, PpoClipDrift, ZeroDrift};
    use crate::nn::{finite_diff_grad, relative_error};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_drift_grid_equals_advantage() {
        let g = objective_derivative_grid(&ZeroDrift, 0.5, (0.5, 1.5), (-1.0, 1.0), 5).unwrap();
        for row in &g.values {
            assert_eq!(row, &g.a_axis);
        }
    }

    #[test]
    fn ppo_grid_is_piecewise() {
        let ppo = PpoClipDrift::new(0.2).unwrap();
        let g = objective_derivative_grid(&ppo, 0.0, (0.5, 1.5), (-1.0, 1.0), 11).unwrap();
        for (i, &p) in g.p_axis.iter().enumerate() {
            for (j, &a) in g.a_axis.iter().enumerate() {
                let clipped = (p > 1.2 + 1e-12 && a > 0.0) || (p < 0.8 - 1e-12 && a < 0.0);
                let expected = if clipped { 0.0 } else { a };
                assert!((g.values[i][j] - expected).abs() < 1e-12, "p={p} A={a}");
            }
        }
        assert_eq!(g.values[10][10], 0.0);
    }

    #[test]
    fn temporal_net_grids_change_with_lifetime() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DriftNet::random(true, 32, &mut rng).unwrap();
        let a = objective_derivative_grid(&net, 0.0, (0.5, 1.5), (-1.0, 1.0), 8).unwrap();
        let b = objective_derivative_grid(&net, 1.0, (0.5, 1.5), (-1.0, 1.0), 8).unwrap();
        assert_ne!(a.values, b.values);
    }

    #[test]
    fn grid_agrees_with_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DriftNet::random(true, 64, &mut rng).unwrap();
        let g = objective_derivative_grid(&net, 0.3, (0.5, 1.5), (-1.0, 1.0), 16).unwrap();
        for _ in 0..50 {
            let i = rng.random_range(0..16);
            let j = rng.random_range(0..16);
            let (p, a) = (g.p_axis[i], g.a_axis[j]);
            let fd = finite_diff_grad(|x| x[0] * a - net.drift(x[0], a, 0.3).unwrap(), &[p], 1e-6).unwrap()[0];
            assert!(relative_error(g.values[i][j], fd, 1e-3) < 1e-4);
        }
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(objective_derivative_grid(&ZeroDrift, 0.0, (0.0, 1.0), (-1.0, 1.0), 4).is_err());
        assert!(objective_derivative_grid(&ZeroDrift, 0.0, (0.5, 1.5), (-1.0, 1.0), 1).is_err());
    }

    fn trace(horizon: u64, entropies: &[f32]) -> MetricTrace {
        let k = entropies.len() as u64;
        MetricTrace {
            experiment_id: "t".into(),
            seed: 0,
            horizon,
            rows: entropies
                .iter()
                .enumerate()
                .map(|(i, &e)| MetricRow {
                    n: (i as u64 + 1) * horizon / k,
                    entropy: e,
                    update_norm: 0.5,
                    eval_return_normalized: 0.25,
                })
                .collect(),
        }
    }

    #[test]
    fn half_life_conventions() {
        assert_eq!(trace(100, &[1.0, 1.0, 1.0, 1.0]).entropy_half_life(), 1.0);
        assert_eq!(trace(600, &[1.0, 0.8, 0.6, 0.5, 0.3, 0.2]).entropy_half_life(), 4.0 / 6.0);
        assert_eq!(trace(100, &[1.0, 0.6, 0.5, 0.4]).entropy_half_life(), 0.75);
    }

    #[test]
    fn synthetic_horizon_trend() {
        let horizons = [2048u64, 4096, 8192, 16384];
        let traces: Vec<MetricTrace> = horizons
            .iter()
            .map(|&n| {
                let c = 40_000.0 / n as f64;
                let e: Vec<f32> = (0..=100).map(|k| (-c * k as f64 / 100.0).exp() as f32).collect();
                let mut t = trace(n, &e);
                for (k, r) in t.rows.iter_mut().enumerate() {
                    r.n = k as u64 * n / 100;
                }
                t
            })
            .collect();
        let m = lifetime_metrics(&traces);
        assert_eq!(m.per_horizon.len(), 4);
        assert!(m.half_life_non_decreasing());
        assert!(m.per_horizon.windows(2).all(|w| w[1].mean_half_life > w[0].mean_half_life));
        let mut incomplete = traces[0].clone();
        incomplete.rows.pop();
        assert_eq!(lifetime_metrics(&[incomplete]).excluded, 1);
    }

    #[test]
    fn palette_endpoints_and_symmetry() {
        assert_eq!(diverging_color(1.0, 1.0), (255, 0, 0));
        assert_eq!(diverging_color(-1.0, 1.0), (0, 0, 255));
        assert_eq!(diverging_color(0.0, 1.0), (255, 255, 255));
        let grid = DerivativeGrid {
            p_axis: vec![0.0, 1.0],
            a_axis: vec![0.0, 1.0],
            lifetime_frac: 0.0,
            values: vec![vec![-1.0, 0.0], vec![0.0, 1.0]],
        };
        let svg = render_heatmap_svg(&grid);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert_eq!(svg.matches("#ff0000").count(), 1);
        assert_eq!(svg.matches("#0000ff").count(), 1);
        assert_eq!(svg.matches("#ffffff").count(), 2);
        assert!(!svg.contains("href"));
    }

    proptest! {
        #[test]
        fn palette_is_odd(v in -5.0f64..5.0, scale in 0.1f64..5.0) {
            let (r, g, b) = diverging_color(v, scale);
            prop_assert_eq!(diverging_color(-v, scale), (b, g, r));
        }

        #[test]
        fn trace_csv_round_trip(
            rows in proptest::collection::vec((0u64..1_000_000, 0f32..2.0, 0f32..100.0, -3f32..3.0), 0..20),
            seed in any::<u64>(),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.csv");
            let t = MetricTrace {
                experiment_id: "exp,1".into(),
                seed,
                horizon: 1_000_000,
                rows: rows.iter().map(|&(n, e, u, r)| MetricRow { n, entropy: e, update_norm: u, eval_return_normalized: r }).collect(),
            };
            let traces = if t.rows.is_empty() { vec![] } else { vec![t] };
            write_trace_csv(&path, &traces).unwrap();
            prop_assert_eq!(read_trace_csv(&path).unwrap(), traces);
        }
    }

    #[test]
    fn empty_export_has_header_only_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let g = objective_derivative_grid(&PpoClipDrift::new(0.2).unwrap(), 0.5, (0.5, 1.5), (-1.0, 1.0), 4).unwrap();
        let files = export_artifacts(std::slice::from_ref(&g), &[], dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let traces = fs::read_to_string(dir.path().join("traces.csv")).unwrap();
        assert_eq!(traces, "experiment_id,seed,N,n,entropy,update_norm,eval_return_normalized\n");
        let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        export_artifacts(&[g], &[], dir.path()).unwrap();
        let second: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        assert_eq!(first, second);
        let grid_text = fs::read_to_string(dir.path().join("grid_0.csv")).unwrap();
        assert!(grid_text.starts_with("# lifetime_frac=5.00000000e-1\np,A,value\n"));
    }
}
