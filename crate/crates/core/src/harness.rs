//! Scenario files, run matrices and the synthetic scenario generator.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{load_requests, write_requests, DemandError, RateTable, Request, DEFAULT_INTERVAL};
use crate::ids::{NodeId, RequestId, Seconds, ZoneId};
use crate::metrics::MetricsReport;
use crate::network::{
    all_pairs_shortest, build_grid_zones, load_network, write_network, EdgeRecord, NetworkError, NodeRecord,
    RoadNetwork, ZoneSet,
};
use crate::sim::{run_scenario, Scenario, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// An input file could not be read.
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    /// Output could not be written.
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl HarnessError {
    /// Input problems as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        match self {
            HarnessError::Io { .. } => false,
            HarnessError::Sim(SimError::Assignment(_)) => false,
            _ => true,
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Input files of a scenario. Relative paths resolve against the config
/// file that names them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFiles {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub requests: PathBuf,
    pub rates: PathBuf,
    #[serde(default = "default_cell")]
    pub zone_cell_m: f64,
    #[serde(default = "default_interval")]
    pub rate_interval_s: Seconds,
}

fn default_cell() -> f64 {
    2000.0
}

fn default_interval() -> Seconds {
    DEFAULT_INTERVAL
}

impl ScenarioFiles {
    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.nodes, &mut self.edges, &mut self.requests, &mut self.rates] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn load(&self) -> Result<Scenario, HarnessError> {
        let net = load_network(read(&self.nodes)?.as_bytes(), read(&self.edges)?.as_bytes())?;
        let tables = all_pairs_shortest(&net);
        let zones = build_grid_zones(&net, self.zone_cell_m)?;
        let requests = load_requests(read(&self.requests)?.as_bytes(), &net, &tables)?;
        if self.rate_interval_s <= 0 {
            return Err(HarnessError::Invalid("rate_interval_s must be positive".into()));
        }
        let rates = RateTable::load(read(&self.rates)?.as_bytes(), self.rate_interval_s)?;
        Ok(Scenario {
            net,
            tables,
            zones,
            requests,
            rates,
        })
    }
}

/// A single-run config file: `[scenario]` files plus `[sim]` parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioFiles,
    #[serde(default)]
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut cfg: RunConfig = toml::from_str(&read(path)?).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.scenario.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }
}

/// One labelled run. A config that failed to parse is kept so the failure
/// shows up in the combined table.
#[derive(Debug, Clone)]
pub struct MatrixRun {
    pub label: String,
    pub config: Result<SimConfig, String>,
}

#[derive(Debug, Clone)]
pub struct RunMatrix {
    pub runs: Vec<MatrixRun>,
    pub out_dir: PathBuf,
    pub parallelism: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    scenario: ScenarioFiles,
    #[serde(default)]
    base: toml::Table,
    #[serde(default = "one")]
    parallelism: usize,
    #[serde(default)]
    runs: Vec<toml::Table>,
}

fn one() -> usize {
    1
}

impl RunMatrix {
    /// Reads a matrix file: `[scenario]`, optional `[base]` sim settings and
    /// `[[runs]]` tables with a `label` plus overrides.
    pub fn load(path: &Path, out_dir: PathBuf) -> Result<(Self, ScenarioFiles), HarnessError> {
        let bad = |reason: String| HarnessError::Parse {
            path: path.to_path_buf(),
            reason,
        };
        let mut file: MatrixFile = toml::from_str(&read(path)?).map_err(|e| bad(e.to_string()))?;
        file.scenario.resolve(path.parent().unwrap_or(Path::new(".")));
        let mut runs = Vec::new();
        for (i, mut t) in file.runs.into_iter().enumerate() {
            let label = match t.remove("label") {
                Some(toml::Value::String(s)) => s,
                _ => format!("run{i}"),
            };
            let mut merged = file.base.clone();
            merged.extend(t);
            let config = merged
                .try_into::<SimConfig>()
                .map_err(|e| e.to_string())
                .and_then(|c| c.validate().map(|_| c));
            runs.push(MatrixRun { label, config });
        }
        let m = RunMatrix {
            runs,
            out_dir,
            parallelism: file.parallelism.max(1),
        };
        m.check_labels()?;
        Ok((m, file.scenario))
    }

    pub fn check_labels(&self) -> Result<(), HarnessError> {
        let mut seen = HashSet::new();
        for r in &self.runs {
            if r.label.is_empty() || r.label.contains(['/', '\\']) {
                return Err(HarnessError::Invalid(format!("bad run label `{}`", r.label)));
            }
            if !seen.insert(r.label.as_str()) {
                return Err(HarnessError::Invalid(format!("duplicate run label `{}`", r.label)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub config: Option<SimConfig>,
    pub result: Result<MetricsReport, String>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    label: &'a str,
    seed: u64,
    config: &'a SimConfig,
    metrics: &'a MetricsReport,
}

const ECHO_FIELDS: &str = "label,status,error,variant,fleet,seed,capacity,alpha,beta,gamma,horizon_s,epoch_s";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn summary_row(o: &RunOutcome) -> String {
    let echo = match &o.config {
        Some(c) => {
            format!(
                "{},{},{},{},{},{},{},{}",
                c.variant,
                c.fleet,
                c.seed,
                c.capacity,
                c.alpha,
                c.beta.map(|b| b.to_string()).unwrap_or_default(),
                c.gamma,
                c.horizon_s,
            ) + &format!(",{}", c.epoch_s)
        }
        None => ",,,,,,,,".into(),
    };
    let metrics_cols = MetricsReport::csv_header().split(',').count();
    match &o.result {
        Ok(m) => format!("{},ok,,{echo},{}", csv_field(&o.label), m.csv_row()),
        Err(e) => format!(
            "{},failed,{},{echo}{}",
            csv_field(&o.label),
            csv_field(e),
            ",".repeat(metrics_cols)
        ),
    }
}

/// Runs every configuration against one scenario, writing
/// `<label>/report.json`, `<label>/journal.csv` and `summary.csv`.
/// A failing run is recorded and does not stop the others.
pub fn run_matrix(matrix: &RunMatrix, scenario: &Scenario) -> Result<Vec<RunOutcome>, HarnessError> {
    matrix.check_labels()?;
    fs::create_dir_all(&matrix.out_dir).map_err(|source| HarnessError::Io {
        path: matrix.out_dir.clone(),
        source,
    })?;
    let slots: Vec<Mutex<Option<RunOutcome>>> = matrix.runs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = matrix.parallelism.clamp(1, matrix.runs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(run) = matrix.runs.get(i) else { break };
                let outcome = execute(run, scenario, &matrix.out_dir);
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });
    let outcomes: Vec<RunOutcome> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every run executed"))
        .collect();

    let mut csv = format!("{ECHO_FIELDS},{}\n", MetricsReport::csv_header());
    for o in &outcomes {
        csv.push_str(&summary_row(o));
        csv.push('\n');
    }
    write(&matrix.out_dir.join("summary.csv"), &csv)?;
    Ok(outcomes)
}

fn execute(run: &MatrixRun, scenario: &Scenario, out: &Path) -> RunOutcome {
    let config = match &run.config {
        Ok(c) => c.clone(),
        Err(e) => {
            log::warn!("run {} has an invalid config: {e}", run.label);
            return RunOutcome {
                label: run.label.clone(),
                config: None,
                result: Err(e.clone()),
            };
        }
    };
    let result = run_one(&run.label, &config, scenario, &out.join(&run.label)).map_err(|e| e.to_string());
    if let Err(e) = &result {
        log::warn!("run {} failed: {e}", run.label);
    }
    RunOutcome {
        label: run.label.clone(),
        config: Some(config),
        result,
    }
}

/// Runs one scenario and writes its report and journal into `dir`.
pub fn run_one(
    label: &str,
    config: &SimConfig,
    scenario: &Scenario,
    dir: &Path,
) -> Result<MetricsReport, HarnessError> {
    let out = run_scenario(scenario, config)?;
    let report = ReportFile {
        label,
        seed: config.seed,
        config,
        metrics: &out.report,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&dir.join("report.json"), &json)?;
    write(&dir.join("journal.csv"), &out.journal.to_csv(&scenario.net))?;
    Ok(out.report)
}

/// Spatial pattern of synthetic demand. `rate_per_s` is the city-wide
/// arrival intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DemandPattern {
    /// Origins spread evenly over zones, destinations uniform over nodes.
    Uniform { rate_per_s: f64 },
    /// `hot_share` of the demand originates in `hot_zones`, the rest evenly
    /// everywhere. Destinations are uniform over nodes.
    Hotspot {
        rate_per_s: f64,
        hot_zones: Vec<u32>,
        hot_share: f64,
    },
    /// Origins in one cluster of zones, destinations in another.
    Commute {
        rate_per_s: f64,
        origin_zones: Vec<u32>,
        destination_zones: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Nodes per side of the square grid.
    pub grid_size: usize,
    pub spacing_m: f64,
    pub speed_mps: f64,
    pub zone_cell_m: f64,
    pub pattern: DemandPattern,
    pub start_s: Seconds,
    pub duration_s: Seconds,
    pub interval_s: Seconds,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            grid_size: 21,
            spacing_m: 400.0,
            speed_mps: 8.33,
            zone_cell_m: 2000.0,
            pattern: DemandPattern::Uniform { rate_per_s: 0.2 },
            start_s: 0,
            duration_s: 3 * 3600,
            interval_s: DEFAULT_INTERVAL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub spec: SyntheticSpec,
    pub scenario: Scenario,
}

/// Bidirectional square grid, labelled by index, row-major from the origin.
pub fn grid_network(n: usize, spacing_m: f64, speed_mps: f64) -> Result<RoadNetwork, NetworkError> {
    let nodes = (0..n * n)
        .map(|i| NodeRecord {
            node_id: i.to_string(),
            x: (i % n) as f64 * spacing_m,
            y: (i / n) as f64 * spacing_m,
        })
        .collect();
    let t = spacing_m / speed_mps;
    let mut edges = Vec::new();
    let mut link = |a: usize, b: usize| {
        for (f, to) in [(a, b), (b, a)] {
            edges.push(EdgeRecord {
                from: f.to_string(),
                to: to.to_string(),
                length_m: spacing_m,
                time_s: t,
            });
        }
    };
    for r in 0..n {
        for c in 0..n {
            let i = r * n + c;
            if c + 1 < n {
                link(i, i + 1);
            }
            if r + 1 < n {
                link(i, i + n);
            }
        }
    }
    RoadNetwork::from_records(nodes, edges)
}

fn zone_list(zones: &ZoneSet, ids: &[u32], what: &str) -> Result<Vec<ZoneId>, HarnessError> {
    let set: BTreeSet<u32> = ids.iter().copied().collect();
    if set.is_empty() {
        return Err(HarnessError::Invalid(format!("{what} must name at least one zone")));
    }
    set.into_iter()
        .map(|z| {
            if (z as usize) < zones.len() {
                Ok(ZoneId(z))
            } else {
                Err(HarnessError::Invalid(format!(
                    "{what}: zone {z} does not exist ({} zones)",
                    zones.len()
                )))
            }
        })
        .collect()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Invalid(m.into()));
        if self.grid_size < 2 {
            return bad("grid_size must be at least 2");
        }
        if !(self.spacing_m > 0.0 && self.speed_mps > 0.0 && self.zone_cell_m > 0.0) {
            return bad("spacing, speed and zone cell must be positive");
        }
        if self.duration_s < 0 || self.interval_s <= 0 {
            return bad("duration must be non-negative and interval positive");
        }
        let rate = match &self.pattern {
            DemandPattern::Uniform { rate_per_s } => *rate_per_s,
            DemandPattern::Hotspot {
                rate_per_s, hot_share, ..
            } => {
                if !(0.0..=1.0).contains(hot_share) {
                    return bad("hot_share must lie in [0, 1]");
                }
                *rate_per_s
            }
            DemandPattern::Commute { rate_per_s, .. } => *rate_per_s,
        };
        if !(rate.is_finite() && rate >= 0.0) {
            return bad("rate_per_s must be finite and non-negative");
        }
        Ok(())
    }

    /// Expected share of origins per zone, and the admissible destination
    /// zones (`None` means any node).
    fn origin_shares(&self, zones: &ZoneSet) -> Result<(f64, Vec<f64>, Option<Vec<ZoneId>>), HarnessError> {
        let nz = zones.len();
        let even = vec![1.0 / nz as f64; nz];
        Ok(match &self.pattern {
            DemandPattern::Uniform { rate_per_s } => (*rate_per_s, even, None),
            DemandPattern::Hotspot {
                rate_per_s,
                hot_zones,
                hot_share,
            } => {
                let hot = zone_list(zones, hot_zones, "hot_zones")?;
                let mut w: Vec<f64> = even.iter().map(|e| e * (1.0 - hot_share)).collect();
                for z in &hot {
                    w[z.index()] += hot_share / hot.len() as f64;
                }
                (*rate_per_s, w, None)
            }
            DemandPattern::Commute {
                rate_per_s,
                origin_zones,
                destination_zones,
            } => {
                let o = zone_list(zones, origin_zones, "origin_zones")?;
                let d = zone_list(zones, destination_zones, "destination_zones")?;
                let mut w = vec![0.0; nz];
                for z in &o {
                    w[z.index()] = 1.0 / o.len() as f64;
                }
                (*rate_per_s, w, Some(d))
            }
        })
    }
}

/// Grid network, zones, Poisson requests and the rates that generated
/// them. Arrivals in each (zone, interval) cell are a Poisson count spread
/// uniformly over the interval, so the rates file is the true intensity.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticScenario, HarnessError> {
    spec.validate()?;
    let net = grid_network(spec.grid_size, spec.spacing_m, spec.speed_mps)?;
    let tables = all_pairs_shortest(&net);
    let zones = build_grid_zones(&net, spec.zone_cell_m)?;
    let (rate, shares, dest_zones) = spec.origin_shares(&zones)?;
    let all_nodes: Vec<NodeId> = (0..net.num_nodes()).map(NodeId::from).collect();
    let dest_nodes: Vec<NodeId> = match &dest_zones {
        None => all_nodes,
        Some(zs) => zs.iter().flat_map(|z| zones.zone(*z).nodes.iter().copied()).collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rates = RateTable::new(spec.interval_s);
    let mut raw: Vec<(Seconds, NodeId, NodeId)> = Vec::new();
    let end = spec.start_s + spec.duration_s;
    let first = spec.start_s.div_euclid(spec.interval_s);
    let last = (end - 1).div_euclid(spec.interval_s);
    // one extra interval so target supply near the end is defined
    for k in first..=last + 1 {
        let lo = (k * spec.interval_s).max(spec.start_s);
        let hi = ((k + 1) * spec.interval_s).min(end);
        for z in zones.zones() {
            let lambda = rate * shares[z.id.index()] * spec.interval_s as f64;
            rates.set(z.id, k, lambda);
            let expected = rate * shares[z.id.index()] * (hi - lo).max(0) as f64;
            if expected <= 0.0 {
                continue;
            }
            let count = rng.sample(Poisson::new(expected).expect("positive mean")) as u64;
            for _ in 0..count {
                let t = rng.random_range(lo..hi);
                let o = *z.nodes.choose(&mut rng).expect("zones are non-empty");
                let d = loop {
                    let d = *dest_nodes.choose(&mut rng).expect("destinations exist");
                    if d != o || dest_nodes.len() == 1 {
                        break d;
                    }
                };
                if d != o {
                    raw.push((t, o, d));
                }
            }
        }
    }
    raw.sort_by_key(|&(t, o, d)| (t, o, d));
    let requests = raw
        .into_iter()
        .enumerate()
        .map(|(i, (t, o, d))| Request::new(RequestId(i as u64), o, d, t, &tables))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SyntheticScenario {
        spec: spec.clone(),
        scenario: Scenario {
            net,
            tables,
            zones,
            requests,
            rates,
        },
    })
}

impl SyntheticScenario {
    /// Writes `nodes.csv`, `edges.csv`, `requests.csv`, `rates.csv` and a
    /// ready-to-run `scenario.toml`, each stamped with the generating spec.
    pub fn write_to(&self, dir: &Path, sim: &SimConfig) -> Result<RunConfig, HarnessError> {
        let stamp = format!(
            "# generated seed={} spec={}\n",
            self.spec.seed,
            serde_json::to_string(&self.spec).expect("spec serializes")
        );
        let s = &self.scenario;
        let (nodes, edges) = write_network(&s.net);
        write(&dir.join("nodes.csv"), &(stamp.clone() + &nodes))?;
        write(&dir.join("edges.csv"), &(stamp.clone() + &edges))?;
        write(
            &dir.join("requests.csv"),
            &(stamp.clone() + &write_requests(&s.requests, &s.net)),
        )?;
        write(&dir.join("rates.csv"), &(stamp.clone() + &s.rates.to_csv()))?;
        let cfg = RunConfig {
            scenario: ScenarioFiles {
                nodes: "nodes.csv".into(),
                edges: "edges.csv".into(),
                requests: "requests.csv".into(),
                rates: "rates.csv".into(),
                zone_cell_m: self.spec.zone_cell_m,
                rate_interval_s: self.spec.interval_s,
            },
            sim: sim.clone(),
        };
        let body = toml::to_string(&cfg).map_err(|e| HarnessError::Invalid(e.to_string()))?;
        write(&dir.join("scenario.toml"), &(stamp + &body))?;
        Ok(cfg)
    }
}
