use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::approx::{LogisticEHead, TileCoder};
use crate::env::ContinuousState;
use crate::error::{config_err, Error, Result};
use crate::mdp::{ActionId, StateId};
use crate::oracle::{
    aggregated_counter, ce_map, pearson_correlation, CounterRow, OptimalSolution, VisitHistogram,
    DEFAULT_TOLERANCE,
};
use crate::rng::SeededRng;

use super::config::{EnvSpec, ExperimentConfig};
use super::run::{run_with_sink, MetricRow, RunOutput, TableSnapshotRow, TrialExtras, WeightSnapshot};

pub const RAW_HEADER: [&str; 4] = ["trial", "episode", "metric", "steps"];
pub const AGGREGATED_HEADER: [&str; 3] = ["episode", "agent", "mean_metric"];
pub const ORACLE_HEADER: [&str; 5] = ["state", "action", "q_star", "is_optimal", "occupancy"];
pub const FIG6_HEADER: [&str; 5] = ["pair", "episode", "c", "gc", "rel_err"];
pub const CORRELATION_HEADER: [&str; 4] = ["state", "position", "velocity", "coefficient"];
pub const VISITS_HEADER: [&str; 4] = ["position_bin", "velocity_bin", "count", "c_e"];
pub const TABLES_HEADER: [&str; 6] = ["episode", "state", "action", "q", "e", "c"];
pub const WEIGHTS_HEADER: [&str; 4] = ["episode", "head", "index", "weight"];

const SAMPLE_STREAM: u64 = 0x5eed_c0de;

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema(format!("{other:?}")),
    }
}

/// CSV writer over any sink with a fixed header.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W, header: &[&str]) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        inner.write_record(header).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn create(path: &Path, header: &[&str]) -> Result<CsvSink<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    CsvSink::new(BufWriter::new(File::create(path)?), header)
}

pub fn write_metric_rows<W: Write>(sink: &mut CsvSink<W>, rows: &[MetricRow]) -> Result<()> {
    for r in rows {
        sink.row([
            r.trial.to_string(),
            r.episode.to_string(),
            r.metric.to_string(),
            r.steps.to_string(),
        ])?;
    }
    Ok(())
}

pub fn raw_csv(run: &RunOutput) -> Result<String> {
    let mut sink = CsvSink::new(Vec::new(), &RAW_HEADER)?;
    for t in &run.trials {
        write_metric_rows(&mut sink, &t.rows)?;
    }
    Ok(String::from_utf8(sink.finish()?).expect("csv output is utf-8"))
}

pub fn write_fig6<W: Write>(w: W, rows: &[CounterRow]) -> Result<W> {
    let mut sink = CsvSink::new(w, &FIG6_HEADER)?;
    for r in rows {
        sink.row([
            r.pair.to_string(),
            r.episode.to_string(),
            r.c.to_string(),
            r.gc.to_string(),
            r.rel_err.to_string(),
        ])?;
    }
    sink.finish()
}

pub fn write_tables<W: Write>(w: W, rows: &[TableSnapshotRow]) -> Result<W> {
    let mut sink = CsvSink::new(w, &TABLES_HEADER)?;
    for r in rows {
        sink.row([
            r.episode.to_string(),
            r.state.to_string(),
            r.action.to_string(),
            r.q.to_string(),
            r.e.to_string(),
            r.c.to_string(),
        ])?;
    }
    sink.finish()
}

pub fn write_weights<W: Write>(w: W, snaps: &[WeightSnapshot]) -> Result<W> {
    let mut sink = CsvSink::new(w, &WEIGHTS_HEADER)?;
    for s in snaps {
        for (head, weights) in [("q", &s.q_weights), ("e", &s.e_weights)] {
            for (i, w) in weights.iter().enumerate() {
                sink.row([s.episode.to_string(), head.to_string(), i.to_string(), w.to_string()])?;
            }
        }
    }
    sink.finish()
}

/// One row of the `Q*` dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub state: usize,
    pub action: usize,
    pub q_star: f64,
    pub is_optimal: bool,
    pub occupancy: f64,
}

/// `Q*`, the greedy optimal action flag and the optimal occupancy for every
/// non-terminal pair.
pub fn oracle_rows(env: &EnvSpec, gamma: Option<f64>) -> Result<Vec<OracleRow>> {
    let mut mdp = env.tabular()?;
    if let Some(g) = gamma {
        mdp = mdp.with_discount(g)?;
    }
    let sol = OptimalSolution::solve(&mdp, DEFAULT_TOLERANCE)?;
    let mut rows = Vec::new();
    for s in 0..mdp.num_states() {
        let s = StateId(s);
        for a in 0..mdp.actions_at(s) {
            let a = ActionId(a);
            rows.push(OracleRow {
                state: s.0,
                action: a.0,
                q_star: sol.q_star.get(s, a),
                is_optimal: sol.pi_star[s.0] == Some(a),
                occupancy: sol.occupancy(s, a),
            });
        }
    }
    Ok(rows)
}

pub fn write_oracle<W: Write>(w: W, rows: &[OracleRow]) -> Result<W> {
    let mut sink = CsvSink::new(w, &ORACLE_HEADER)?;
    for r in rows {
        sink.row([
            r.state.to_string(),
            r.action.to_string(),
            r.q_star.to_string(),
            u8::from(r.is_optimal).to_string(),
            r.occupancy.to_string(),
        ])?;
    }
    sink.finish()
}

/// Per-state correlation between the empirical visit count of the state's
/// bin and `C_E` of the state, across weight snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationRow {
    pub state: usize,
    pub position: f64,
    pub velocity: f64,
    /// `None` when either series is constant over the snapshots.
    pub coefficient: Option<f64>,
}

/// Samples `samples` states from the recorded visits (achievable states only)
/// and correlates, per state, the cumulative visit histogram value of its bin
/// with `C_E(s)` over every weight snapshot.
pub fn correlation_analysis(
    extras: &TrialExtras,
    coder: &TileCoder,
    alpha_e: f64,
    bins: (usize, usize),
    samples: usize,
    seed: u64,
) -> Vec<CorrelationRow> {
    if extras.visits.is_empty() || extras.weights.is_empty() {
        return Vec::new();
    }
    let mut rng = SeededRng::new(seed ^ SAMPLE_STREAM);
    let states: Vec<ContinuousState> = (0..samples)
        .map(|_| extras.visits[rng.below(extras.visits.len())].1)
        .collect();
    let mut hist = VisitHistogram::new(bins);
    let sample_bins: Vec<usize> = states.iter().map(|&s| hist.bin_of(s)).collect();
    let mut visited = extras.visits.iter().peekable();
    let mut counts = vec![Vec::with_capacity(extras.weights.len()); samples];
    let mut ce = vec![Vec::with_capacity(extras.weights.len()); samples];
    for snap in &extras.weights {
        while let Some((_, s)) = visited.next_if(|(ep, _)| *ep <= snap.episode) {
            hist.add(*s);
        }
        let head = LogisticEHead::from_weights(snap.e_weights.clone());
        for i in 0..samples {
            counts[i].push(hist.counts[sample_bins[i]] as f64);
            ce[i].push(aggregated_counter(&head, coder, states[i], alpha_e));
        }
    }
    states
        .iter()
        .enumerate()
        .map(|(i, s)| CorrelationRow {
            state: i,
            position: s.position,
            velocity: s.velocity,
            coefficient: pearson_correlation(&counts[i], &ce[i]),
        })
        .collect()
}

pub fn write_correlation<W: Write>(w: W, rows: &[CorrelationRow]) -> Result<W> {
    let mut sink = CsvSink::new(w, &CORRELATION_HEADER)?;
    for r in rows {
        sink.row([
            r.state.to_string(),
            r.position.to_string(),
            r.velocity.to_string(),
            r.coefficient.map_or_else(String::new, |c| c.to_string()),
        ])?;
    }
    sink.finish()
}

/// Final visit histogram beside `C_E` at each bin center.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitMap {
    pub bins: (usize, usize),
    pub counts: Vec<u64>,
    pub c_e: Vec<f64>,
}

pub fn visit_map(extras: &TrialExtras, coder: &TileCoder, alpha_e: f64, bins: (usize, usize)) -> Option<VisitMap> {
    let last = extras.weights.last()?;
    let mut hist = VisitHistogram::new(bins);
    for (_, s) in extras.visits.iter().filter(|(ep, _)| *ep <= last.episode) {
        hist.add(*s);
    }
    let head = LogisticEHead::from_weights(last.e_weights.clone());
    Some(VisitMap {
        bins,
        counts: hist.counts,
        c_e: ce_map(&head, coder, bins, alpha_e),
    })
}

pub fn write_visit_map<W: Write>(w: W, map: &VisitMap) -> Result<W> {
    let mut sink = CsvSink::new(w, &VISITS_HEADER)?;
    for (i, (&c, &e)) in map.counts.iter().zip(&map.c_e).enumerate() {
        sink.row([
            (i / map.bins.1).to_string(),
            (i % map.bins.1).to_string(),
            c.to_string(),
            e.to_string(),
        ])?;
    }
    sink.finish()
}

/// Paths written for one experiment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFiles {
    pub raw: PathBuf,
    pub extra: Vec<PathBuf>,
}

/// Runs `cfg`, streaming raw rows to `<dir>/<out>.csv` in trial order, then
/// writes whichever first-trial analyses the config enabled.
pub fn run_to_dir(cfg: &ExperimentConfig, workers: usize, dir: &Path) -> Result<(RunOutput, RunFiles)> {
    let raw = dir.join(format!("{}.csv", cfg.out));
    let mut sink = create(&raw, &RAW_HEADER)?;
    let run = run_with_sink(cfg, workers, |t| write_metric_rows(&mut sink, &t.rows))?;
    sink.finish()?;
    let mut files = RunFiles { raw, extra: Vec::new() };
    let Some(extras) = run.extras() else {
        return Ok((run, files));
    };
    let path = |suffix: &str| dir.join(format!("{}.{suffix}.csv", cfg.out));
    let open = |p: &Path| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(p)?)) };
    if cfg.fig6 {
        let p = path("fig6");
        write_fig6(open(&p)?, &extras.fig6)?.flush()?;
        files.extra.push(p);
    }
    if !extras.tables.is_empty() {
        let p = path("tables");
        write_tables(open(&p)?, &extras.tables)?.flush()?;
        files.extra.push(p);
    }
    if !extras.weights.is_empty() {
        let p = path("weights");
        write_weights(open(&p)?, &extras.weights)?.flush()?;
        files.extra.push(p);
    }
    if cfg.correlation {
        let coder = TileCoder::mountain_car();
        let rows = correlation_analysis(
            extras,
            &coder,
            cfg.params.alpha_e,
            cfg.correlation_bins,
            cfg.correlation_samples,
            cfg.seed(0),
        );
        let p = path("correlation");
        write_correlation(open(&p)?, &rows)?.flush()?;
        files.extra.push(p);
        if let Some(map) = visit_map(extras, &coder, cfg.params.alpha_e, cfg.correlation_bins) {
            let p = path("visits");
            write_visit_map(open(&p)?, &map)?.flush()?;
            files.extra.push(p);
        }
    }
    Ok((run, files))
}

/// Mean metric per episode for each run, labelled by experiment name.
pub fn aggregate(runs: &[&RunOutput]) -> Vec<(usize, String, f64)> {
    runs.iter()
        .flat_map(|r| {
            r.mean_curve()
                .into_iter()
                .map(move |(ep, m)| (ep, r.config.name.clone(), m))
        })
        .collect()
}

pub fn write_aggregated<W: Write>(w: W, rows: &[(usize, String, f64)]) -> Result<W> {
    let mut sink = CsvSink::new(w, &AGGREGATED_HEADER)?;
    for (ep, agent, m) in rows {
        sink.row([ep.to_string(), agent.clone(), m.to_string()])?;
    }
    sink.finish()
}

#[derive(Debug)]
pub struct SweepOutput {
    pub runs: Vec<(String, Result<(RunOutput, RunFiles)>)>,
    pub aggregated: PathBuf,
}

/// Runs each experiment, writing raw files, then the aggregated curves of
/// all that succeeded to `<dir>/aggregated.csv`. A failing experiment is
/// reported in its slot and does not stop the others.
pub fn sweep(cfgs: &[ExperimentConfig], workers: usize, dir: &Path) -> Result<SweepOutput> {
    if cfgs.is_empty() {
        return config_err("sweep needs at least one experiment");
    }
    let runs: Vec<_> = cfgs
        .iter()
        .map(|c| (c.name.clone(), run_to_dir(c, workers, dir)))
        .collect();
    let ok: Vec<&RunOutput> = runs
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().map(|(run, _)| run))
        .collect();
    let aggregated = dir.join("aggregated.csv");
    write_aggregated(BufWriter::new(File::create(&aggregated)?), &aggregate(&ok))?.flush()?;
    Ok(SweepOutput { runs, aggregated })
}
