//! Text formats: graph, snapshot, design and simulator-config inputs, and
//! the CSV reports written by the commands.
//!
//! Numbers are written with 12 significant digits. Files are written to a
//! temporary sibling first and renamed into place.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::efficiency::Arm;
use crate::error::{Error, Result};
use crate::gem::Snapshot;
use crate::graph::{grid_graph, CellGraph, Edge};
use crate::indices::StateLabel;
use crate::inference::{ExperimentDesign, InferenceResult, MarketPeriods, MarketShift, Sidedness};
use crate::sim::{Intervention, SimConfig};

pub const SNAPSHOT_HEADER: &str = "t,cell,supply,demand";
pub const DESIGN_HEADER: &str = "market,period,arm";
pub const RHO_HEADER: &str = "t,rho";
pub const DUALS_HEADER: &str = "t,cell,w,u";
pub const INDICES_HEADER: &str = "t,A_d,A_s,M,N,label";
pub const SCATTER_HEADER: &str = "t,A_d,A_s,label";
pub const EFFECTS_HEADER: &str = "statistic,estimate,se,p_value,sidedness";
pub const ATE_HEADER: &str = "market,control_A_d,control_A_s,treatment_A_d,treatment_A_s,delta_A_d,delta_A_s";

/// Label column value for windows whose indices are undefined.
pub const UNDEFINED_LABEL: &str = "undefined";
/// `t` column value of the whole-run row in `indices.csv`.
pub const ALL_PERIODS: &str = "all";

/// Shortest decimal form of `x` rounded to 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes `contents` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Non-blank, non-comment lines with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse { path: self.path.to_path_buf(), line, message: message.into() }
    }

    fn fields<'t>(&self, line: usize, text: &'t str, n: usize) -> Result<Vec<&'t str>> {
        let f: Vec<&str> = text.split(',').map(str::trim).collect();
        if f.len() != n {
            return Err(self.err(line, format!("expected {n} comma-separated fields, found {}", f.len())));
        }
        Ok(f)
    }

    fn num(&self, line: usize, s: &str, what: &str) -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| self.err(line, format!("{what}: cannot parse {s:?} as a number")))
    }

    fn int<T: std::str::FromStr>(&self, line: usize, s: &str, what: &str) -> Result<T> {
        s.parse::<T>()
            .map_err(|_| self.err(line, format!("{what}: cannot parse {s:?} as an integer")))
    }

    fn header(&self, text: &str, expected: &str) -> Result<()> {
        match data_lines(text).next() {
            Some((_, h)) if h.replace(' ', "") == expected => Ok(()),
            Some((line, h)) => Err(self.err(line, format!("expected header {expected:?}, found {h:?}"))),
            None => Err(self.err(1, format!("missing header {expected:?}"))),
        }
    }
}

// ---------------------------------------------------------------- graph

pub fn parse_graph(text: &str, path: &Path, dispatch_radius: f64) -> Result<CellGraph> {
    let ctx = Ctx { path };
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| ctx.err(1, "missing n_cells=<k> header"))?;
    let n: usize = header
        .strip_prefix("n_cells=")
        .ok_or_else(|| ctx.err(hline, format!("expected n_cells=<k>, found {header:?}")))
        .and_then(|k| ctx.int(hline, k.trim(), "n_cells"))?;
    let mut edges = Vec::new();
    for (line, l) in lines {
        let f = ctx.fields(line, l, 3)?;
        let i: usize = ctx.int(line, f[0], "i")?;
        let j: usize = ctx.int(line, f[1], "j")?;
        let w = ctx.num(line, f[2], "w")?;
        if i >= n || j >= n {
            return Err(ctx.err(line, format!("edge ({i},{j}) outside 0..{n}")));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(ctx.err(line, format!("edge weight must be finite and nonnegative, got {w}")));
        }
        edges.push(Edge::new(i, j, w));
    }
    CellGraph::from_edges(n, edges, dispatch_radius)
}

pub fn read_graph(path: &Path, dispatch_radius: f64) -> Result<CellGraph> {
    parse_graph(&read_text(path)?, path, dispatch_radius)
}

pub fn format_graph(graph: &CellGraph) -> String {
    let mut s = format!("n_cells={}\n", graph.n_cells());
    for e in graph.edges() {
        let _ = writeln!(s, "{},{},{}", e.from, e.to, fmt_num(e.weight));
    }
    s
}

pub fn write_graph(path: &Path, graph: &CellGraph) -> Result<()> {
    write_atomic(path, &format_graph(graph))
}

// ------------------------------------------------------------ snapshots

/// Snapshots in ascending `t`; cells absent from a period are zero.
pub fn parse_snapshots(text: &str, path: &Path, n_cells: usize) -> Result<Vec<Snapshot>> {
    let ctx = Ctx { path };
    ctx.header(text, SNAPSHOT_HEADER)?;
    let mut by_t: BTreeMap<i64, (Vec<f64>, Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for (line, l) in data_lines(text).skip(1) {
        let f = ctx.fields(line, l, 4)?;
        let t: i64 = ctx.int(line, f[0], "t")?;
        let cell: usize = ctx.int(line, f[1], "cell")?;
        let supply = ctx.num(line, f[2], "supply")?;
        let demand = ctx.num(line, f[3], "demand")?;
        if cell >= n_cells {
            return Err(ctx.err(line, format!("cell {cell} outside 0..{n_cells}")));
        }
        for (name, x) in [("supply", supply), ("demand", demand)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(ctx.err(line, format!("{name} must be finite and nonnegative, got {x}")));
            }
        }
        let entry = by_t
            .entry(t)
            .or_insert_with(|| (vec![0.0; n_cells], vec![0.0; n_cells], vec![false; n_cells]));
        if entry.2[cell] {
            return Err(ctx.err(line, format!("duplicate row for t={t}, cell {cell}")));
        }
        entry.2[cell] = true;
        entry.0[cell] = supply;
        entry.1[cell] = demand;
    }
    by_t.into_iter()
        .map(|(t, (s, d, _))| Snapshot::new(t, s, d))
        .collect()
}

pub fn read_snapshots(path: &Path, n_cells: usize) -> Result<Vec<Snapshot>> {
    parse_snapshots(&read_text(path)?, path, n_cells)
}

pub fn format_snapshots(snapshots: &[Snapshot]) -> String {
    let mut s = format!("{SNAPSHOT_HEADER}\n");
    for snap in snapshots {
        for (cell, (mu, nu)) in snap.supply.iter().zip(&snap.demand).enumerate() {
            let _ = writeln!(s, "{},{cell},{},{}", snap.time_index, fmt_num(*mu), fmt_num(*nu));
        }
    }
    s
}

pub fn write_snapshots(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    write_atomic(path, &format_snapshots(snapshots))
}

/// Per-market snapshots: a directory of `<market>.csv` files (sorted by
/// name), or a single file holding one market named after its stem.
pub fn read_market_snapshots(path: &Path, n_cells: usize) -> Result<Vec<(String, Vec<Snapshot>)>> {
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if path.is_dir() {
        let io_err = |source| Error::Io { path: path.to_path_buf(), source };
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|f| Ok((stem(&f), read_snapshots(&f, n_cells)?)))
            .collect()
    } else {
        Ok(vec![(stem(path), read_snapshots(path, n_cells)?)])
    }
}

// --------------------------------------------------------------- design

pub fn parse_design(text: &str, path: &Path, period_length: f64, seed: u64) -> Result<ExperimentDesign> {
    let ctx = Ctx { path };
    ctx.header(text, DESIGN_HEADER)?;
    let mut markets: Vec<MarketPeriods> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen: HashMap<(String, i64), usize> = HashMap::new();
    for (line, l) in data_lines(text).skip(1) {
        let f = ctx.fields(line, l, 3)?;
        let period: i64 = ctx.int(line, f[1], "period")?;
        let arm = Arm::parse(f[2])
            .ok_or_else(|| ctx.err(line, format!("arm must be treatment or control, got {:?}", f[2])))?;
        if let Some(prev) = seen.insert((f[0].to_string(), period), line) {
            return Err(ctx.err(line, format!("market {} period {period} already assigned on line {prev}", f[0])));
        }
        let k = *index.entry(f[0].to_string()).or_insert_with(|| {
            markets.push(MarketPeriods { market: f[0].to_string(), periods: Vec::new() });
            markets.len() - 1
        });
        markets[k].periods.push((period, arm));
    }
    for m in &mut markets {
        m.periods.sort_by_key(|(p, _)| *p);
    }
    ExperimentDesign::new(markets, period_length, seed)
}

pub fn read_design(path: &Path, period_length: f64, seed: u64) -> Result<ExperimentDesign> {
    parse_design(&read_text(path)?, path, period_length, seed)
}

pub fn format_design(design: &ExperimentDesign) -> String {
    let mut s = format!("{DESIGN_HEADER}\n");
    for m in &design.markets {
        for (p, arm) in &m.periods {
            let _ = writeln!(s, "{},{p},{arm}", m.market);
        }
    }
    s
}

pub fn write_design(path: &Path, design: &ExperimentDesign) -> Result<()> {
    write_atomic(path, &format_design(design))
}

// ------------------------------------------------------- key-value files

/// `key = value` pairs with line numbers; later keys override earlier ones.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let ctx = Ctx { path };
    data_lines(text)
        .map(|(line, l)| {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| ctx.err(line, format!("expected key = value, found {l:?}")))?;
            Ok((line, k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn parse_rates(ctx: &Ctx, line: usize, v: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = v
        .split(',')
        .map(|s| ctx.num(line, s.trim(), what))
        .collect::<Result<_>>()?;
    match vals.len() {
        1 => Ok(vec![vals[0]; n]),
        k if k == n => Ok(vals),
        k => Err(ctx.err(line, format!("{what}: {k} values for {n} cells"))),
    }
}

/// Simulator configuration. Keys:
///
/// ```text
/// graph = grid:3x3           # or a graph file path, relative to this file
/// unit_cost = 1              # grid edge weight
/// radius = 1                 # dispatch radius
/// horizon = 96               # emitted ticks
/// warmup_ticks = 0
/// request_rates = 2.0        # one value for every cell, or one per cell
/// driver_signin_rates = 0.8
/// cancel_prob = 0.2
/// signoff_prob = 0.05
/// destination = identity     # identity | uniform | rows "p00,p01;p10,p11"
/// trip_ticks = 3
/// supply_scale = 0           # treatment intervention
/// repositioning_strength = 0 # treatment intervention
/// reposition_lambda = 0.1
/// seed = 0
/// ```
pub fn parse_sim_config(text: &str, path: &Path) -> Result<SimConfig> {
    let ctx = Ctx { path };
    let kv = parse_key_values(text, path)?;
    let mut map: HashMap<String, (usize, String)> = HashMap::new();
    const KEYS: [&str; 15] = [
        "graph",
        "unit_cost",
        "radius",
        "horizon",
        "warmup_ticks",
        "request_rates",
        "driver_signin_rates",
        "cancel_prob",
        "signoff_prob",
        "destination",
        "trip_ticks",
        "supply_scale",
        "repositioning_strength",
        "reposition_lambda",
        "seed",
    ];
    for (line, k, v) in kv {
        if !KEYS.contains(&k.as_str()) {
            return Err(ctx.err(line, format!("unknown key {k:?}")));
        }
        map.insert(k, (line, v));
    }
    let last_line = text.lines().count().max(1);
    let required = |k: &str| map.get(k).ok_or_else(|| ctx.err(last_line, format!("missing required key {k:?}")));
    let num_or = |k: &str, default: f64| -> Result<f64> {
        map.get(k).map_or(Ok(default), |(line, v)| ctx.num(*line, v, k))
    };
    let int_or = |k: &str, default: u64| -> Result<u64> {
        map.get(k).map_or(Ok(default), |(line, v)| ctx.int(*line, v, k))
    };

    let radius = num_or("radius", 1.0)?;
    let unit_cost = num_or("unit_cost", 1.0)?;
    let (gline, gval) = required("graph")?;
    let graph = if let Some(dims) = gval.strip_prefix("grid:") {
        let (r, c) = dims
            .split_once('x')
            .ok_or_else(|| ctx.err(*gline, format!("expected grid:<rows>x<cols>, found {gval:?}")))?;
        let rows: usize = ctx.int(*gline, r.trim(), "grid rows")?;
        let cols: usize = ctx.int(*gline, c.trim(), "grid cols")?;
        grid_graph(rows, cols, unit_cost)?.with_radius(radius)?
    } else {
        let base = path.parent().unwrap_or(Path::new("."));
        read_graph(&base.join(gval), radius)?
    };
    let n = graph.n_cells();

    let (hl, hv) = required("horizon")?;
    let horizon: usize = ctx.int(*hl, hv, "horizon")?;
    let (rl, rv) = required("request_rates")?;
    let request_rates = parse_rates(&ctx, *rl, rv, n, "request_rates")?;
    let (sl, sv) = required("driver_signin_rates")?;
    let driver_signin_rates = parse_rates(&ctx, *sl, sv, n, "driver_signin_rates")?;

    let destination_matrix = match map.get("destination") {
        None => identity(n),
        Some((_, v)) if v == "identity" => identity(n),
        Some((_, v)) if v == "uniform" => vec![vec![1.0 / n as f64; n]; n],
        Some((line, v)) => {
            let rows: Vec<Vec<f64>> = v
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|x| ctx.num(*line, x.trim(), "destination"))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(ctx.err(*line, format!("destination must be {n} rows of {n} values")));
            }
            rows
        }
    };

    let config = SimConfig {
        graph,
        horizon,
        request_rates,
        driver_signin_rates,
        cancel_prob: num_or("cancel_prob", 0.2)?,
        signoff_prob: num_or("signoff_prob", 0.05)?,
        destination_matrix,
        trip_ticks: int_or("trip_ticks", 3)? as usize,
        warmup_ticks: int_or("warmup_ticks", 0)? as usize,
        intervention: Intervention {
            supply_scale: num_or("supply_scale", 0.0)?,
            repositioning_strength: num_or("repositioning_strength", 0.0)?,
        },
        reposition_lambda: num_or("reposition_lambda", crate::gem::DEFAULT_LAMBDA)?,
        seed: int_or("seed", 0)?,
    };
    config.validate().map_err(|e| ctx.err(last_line, e.to_string()))?;
    Ok(config)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn read_sim_config(path: &Path) -> Result<SimConfig> {
    parse_sim_config(&read_text(path)?, path)
}

// -------------------------------------------------------------- reports

pub fn format_rho(rows: &[(i64, f64)]) -> String {
    let mut s = format!("{RHO_HEADER}\n");
    for (t, rho) in rows {
        let _ = writeln!(s, "{t},{}", fmt_num(*rho));
    }
    s
}

pub fn parse_rho(text: &str, path: &Path) -> Result<Vec<(i64, f64)>> {
    let ctx = Ctx { path };
    ctx.header(text, RHO_HEADER)?;
    data_lines(text)
        .skip(1)
        .map(|(line, l)| {
            let f = ctx.fields(line, l, 2)?;
            Ok((ctx.int(line, f[0], "t")?, ctx.num(line, f[1], "rho")?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRecord {
    pub t: i64,
    pub cell: usize,
    pub w: f64,
    pub u: f64,
}

pub fn format_duals(rows: &[DualRecord]) -> String {
    let mut s = format!("{DUALS_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.t, r.cell, fmt_num(r.w), fmt_num(r.u));
    }
    s
}

pub fn parse_duals(text: &str, path: &Path) -> Result<Vec<DualRecord>> {
    let ctx = Ctx { path };
    ctx.header(text, DUALS_HEADER)?;
    data_lines(text)
        .skip(1)
        .map(|(line, l)| {
            let f = ctx.fields(line, l, 4)?;
            Ok(DualRecord {
                t: ctx.int(line, f[0], "t")?,
                cell: ctx.int(line, f[1], "cell")?,
                w: ctx.num(line, f[2], "w")?,
                u: ctx.num(line, f[3], "u")?,
            })
        })
        .collect()
}

/// One row of `indices.csv`. `t` is the first time index of the window, or
/// `None` for the whole-run row; undefined indices are NaN with no label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexRecord {
    pub t: Option<i64>,
    pub a_d: f64,
    pub a_s: f64,
    pub total_supply: f64,
    pub total_demand: f64,
    pub label: Option<StateLabel>,
}

fn label_text(label: Option<StateLabel>) -> &'static str {
    label.map_or(UNDEFINED_LABEL, |l| l.as_str())
}

pub fn format_indices(rows: &[IndexRecord]) -> String {
    let mut s = format!("{INDICES_HEADER}\n");
    for r in rows {
        let t = r.t.map_or(ALL_PERIODS.to_string(), |t| t.to_string());
        let _ = writeln!(
            s,
            "{t},{},{},{},{},{}",
            fmt_num(r.a_d),
            fmt_num(r.a_s),
            fmt_num(r.total_supply),
            fmt_num(r.total_demand),
            label_text(r.label)
        );
    }
    s
}

pub fn parse_indices(text: &str, path: &Path) -> Result<Vec<IndexRecord>> {
    let ctx = Ctx { path };
    ctx.header(text, INDICES_HEADER)?;
    data_lines(text)
        .skip(1)
        .map(|(line, l)| {
            let f = ctx.fields(line, l, 6)?;
            let t = if f[0] == ALL_PERIODS { None } else { Some(ctx.int(line, f[0], "t")?) };
            let label = if f[5] == UNDEFINED_LABEL {
                None
            } else {
                Some(StateLabel::parse(f[5]).ok_or_else(|| ctx.err(line, format!("unknown label {:?}", f[5])))?)
            };
            Ok(IndexRecord {
                t,
                a_d: ctx.num(line, f[1], "A_d")?,
                a_s: ctx.num(line, f[2], "A_s")?,
                total_supply: ctx.num(line, f[3], "M")?,
                total_demand: ctx.num(line, f[4], "N")?,
                label,
            })
        })
        .collect()
}

/// Plot data: one point per window with defined indices.
pub fn format_scatter(rows: &[IndexRecord]) -> String {
    let mut s = format!("{SCATTER_HEADER}\n");
    for r in rows {
        if let (Some(t), Some(label)) = (r.t, r.label) {
            let _ = writeln!(s, "{t},{},{},{label}", fmt_num(r.a_d), fmt_num(r.a_s));
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectRecord {
    pub statistic: String,
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
}

impl From<&InferenceResult> for EffectRecord {
    fn from(r: &InferenceResult) -> Self {
        EffectRecord {
            statistic: r.statistic.name().to_string(),
            estimate: r.estimate,
            se: r.standard_error,
            p_value: r.p_value,
            sidedness: r.sidedness,
        }
    }
}

pub fn format_effects(rows: &[EffectRecord]) -> String {
    let mut s = format!("{EFFECTS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.statistic,
            fmt_num(r.estimate),
            fmt_num(r.se),
            fmt_num(r.p_value),
            r.sidedness.as_str()
        );
    }
    s
}

pub fn parse_effects(text: &str, path: &Path) -> Result<Vec<EffectRecord>> {
    let ctx = Ctx { path };
    ctx.header(text, EFFECTS_HEADER)?;
    data_lines(text)
        .skip(1)
        .map(|(line, l)| {
            let f = ctx.fields(line, l, 5)?;
            Ok(EffectRecord {
                statistic: f[0].to_string(),
                estimate: ctx.num(line, f[1], "estimate")?,
                se: ctx.num(line, f[2], "se")?,
                p_value: ctx.num(line, f[3], "p_value")?,
                sidedness: Sidedness::parse(f[4])
                    .ok_or_else(|| ctx.err(line, format!("unknown sidedness {:?}", f[4])))?,
            })
        })
        .collect()
}

pub fn format_market_shifts(rows: &[MarketShift]) -> String {
    let mut s = format!("{ATE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.market,
            fmt_num(r.control_mean.a_d),
            fmt_num(r.control_mean.a_s),
            fmt_num(r.treatment_mean.a_d),
            fmt_num(r.treatment_mean.a_s),
            fmt_num(r.delta_a_d),
            fmt_num(r.delta_a_s)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456789.123456789), "123456789.123");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(2.5e-20), "0.000000000000000000025");
    }

    proptest! {
        #[test]
        fn number_round_trip_relative(x in -1e12f64..1e12) {
            let back: f64 = fmt_num(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn integers_round_trip_exactly(k in 0u32..1_000_000) {
            let x = f64::from(k);
            prop_assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn graph_parsing() {
        let g = parse_graph("n_cells=3\n0,1,1\n1,2,1.5\n", p(), 10.0).unwrap();
        assert_eq!(g.n_cells(), 3);
        assert_eq!(g.cost(0, 2), Some(2.5));
        assert_eq!(g.cost(2, 0), None);
        let again = parse_graph(&format_graph(&g), p(), 10.0).unwrap();
        assert_eq!(again.edges(), g.edges());
    }

    #[test]
    fn graph_errors_carry_lines() {
        let cases = [
            ("cells=3\n", 1),
            ("n_cells=2\n0,1\n", 2),
            ("n_cells=2\n0,1,1\n0,5,1\n", 3),
            ("n_cells=2\n\n# note\n0,1,-1\n", 4),
            ("n_cells=2\n0,1,x\n", 2),
        ];
        for (text, line) in cases {
            match parse_graph(text, p(), 1.0) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn snapshot_parsing() {
        let text = "t,cell,supply,demand\n3,1,2,5\n1,0,1,0\n";
        let snaps = parse_snapshots(text, p(), 2).unwrap();
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[0].time_index, 1);
        assert_eq!(snaps[0].supply, vec![1.0, 0.0]);
        assert_eq!(snaps[1].demand, vec![0.0, 5.0]);
        assert_eq!(parse_snapshots(&format_snapshots(&snaps), p(), 2).unwrap(), snaps);
        assert_eq!(format_snapshots(&[]), "t,cell,supply,demand\n");
    }

    #[test]
    fn snapshot_errors() {
        for (text, line) in [
            ("t,cell,demand\n", 1),
            ("t,cell,supply,demand\n0,0,1,1\n0,0,2,2\n", 3),
            ("t,cell,supply,demand\n0,9,1,1\n", 2),
            ("t,cell,supply,demand\n0,0,-1,1\n", 2),
        ] {
            match parse_snapshots(text, p(), 2) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn design_round_trip() {
        let text = "market,period,arm\nb,1,control\nb,0,treatment\na,0,control\na,1,treatment\n";
        let d = parse_design(text, p(), 60.0, 0).unwrap();
        assert_eq!(d.markets[0].market, "b");
        assert_eq!(d.markets[0].periods, vec![(0, Arm::Treatment), (1, Arm::Control)]);
        assert_eq!(parse_design(&format_design(&d), p(), 60.0, 0).unwrap(), d);
        assert!(matches!(
            parse_design("market,period,arm\na,0,x\n", p(), 60.0, 0),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_design("market,period,arm\na,0,control\na,0,treatment\n", p(), 60.0, 0),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn sim_config_parsing() {
        let text = "graph = grid:2x2\nhorizon = 10\nrequest_rates = 1,2,3,4\ndriver_signin_rates = 0.5\n\
                    destination = uniform\nseed = 7\nsupply_scale = 0.5\n";
        let c = parse_sim_config(text, p()).unwrap();
        assert_eq!(c.n_cells(), 4);
        assert_eq!(c.request_rates, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.driver_signin_rates, vec![0.5; 4]);
        assert_eq!(c.destination_matrix[2], vec![0.25; 4]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.intervention.supply_scale, 0.5);
        assert_eq!(c.graph.neighborhood(0), &[0, 1, 2]);

        let rows = "graph = grid:1x2\nhorizon = 1\nrequest_rates = 1\ndriver_signin_rates = 1\ndestination = 0,1;1,0\n";
        assert_eq!(parse_sim_config(rows, p()).unwrap().destination_matrix, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        assert!(matches!(
            parse_sim_config("graph = grid:2x2\nhorizon = 1\nbogus = 1\n", p()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_sim_config("graph = grid:2x2\nhorizon = 1\nrequest_rates = 1,2\ndriver_signin_rates = 1\n", p()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(parse_sim_config("graph = grid:2x2\nrequest_rates = 1\ndriver_signin_rates = 1\n", p()).is_err());
        assert!(parse_sim_config(
            "graph = grid:1x1\nhorizon = 1\nrequest_rates = 1\ndriver_signin_rates = 1\ncancel_prob = 2\n",
            p()
        )
        .is_err());
    }

    #[test]
    fn report_round_trips() {
        let rho = vec![(0, 0.0), (5, 1.0 / 3.0)];
        let back = parse_rho(&format_rho(&rho), p()).unwrap();
        assert_eq!(back[0], (0, 0.0));
        assert!((back[1].1 - 1.0 / 3.0).abs() < 1e-12);

        let duals = vec![DualRecord { t: 2, cell: 1, w: -1.0, u: 0.9 }];
        assert_eq!(parse_duals(&format_duals(&duals), p()).unwrap(), duals);

        let idx = vec![
            IndexRecord {
                t: Some(0),
                a_d: -0.25,
                a_s: 1.5,
                total_supply: 10.0,
                total_demand: 12.0,
                label: Some(StateLabel::SdMisaligned),
            },
            IndexRecord { t: None, a_d: f64::NAN, a_s: 0.5, total_supply: 3.0, total_demand: 0.0, label: None },
        ];
        let back = parse_indices(&format_indices(&idx), p()).unwrap();
        assert_eq!(back[0], idx[0]);
        assert!(back[1].a_d.is_nan() && back[1].label.is_none() && back[1].t.is_none());
        assert_eq!(format_scatter(&idx).lines().count(), 2);

        let eff = vec![EffectRecord {
            statistic: "tau_total".into(),
            estimate: 0.125,
            se: 0.5,
            p_value: 0.25,
            sidedness: Sidedness::OneSided,
        }];
        assert_eq!(parse_effects(&format_effects(&eff), p()).unwrap(), eff);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("x.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
