//! Seeded Monte-Carlo detection campaigns: tolerance ROC sweeps, anomaly
//! sensitivity scaling, probe placement grids, port ablations and FD-KNN
//! clone classification.
//!
//! Every random board is drawn from a stream keyed by (root seed, tolerance,
//! role, index), so results do not depend on thread scheduling and an arm
//! can be rerun on its own. Anomalies are appended after the base branches,
//! which leaves the base-element draws of a trial unchanged between arms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::boards::{chain_node, decap_chain_board, DecapChainParams, CHAIN_LEN};
use crate::detector::{knn_vote, roc, DetectError, IntraStats, RocCurve, Statistic};
use crate::frechet::{aggregate, all_port_pairs, pair_distances, subset_port_pairs, EmbeddedBoard, FdConfig, FrechetError};
use crate::netlist::{AnomalyKind, AnomalySpec, NetlistError, PdnNetlist, ToleranceModel};
use crate::seed::{label_word, mix_seed};
use crate::solver::{solve_z_serial, FrequencyGrid, SolveError};

pub const CAMPAIGN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error("{role} trial {trial}: {source}")]
    Trial {
        role: String,
        trial: u64,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Frechet(#[from] FrechetError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("campaign toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: 300e3,
            stop: 3e9,
            points: 1024,
            spacing: Spacing::Log,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<FrequencyGrid, SolveError> {
        match self.spacing {
            Spacing::Log => FrequencyGrid::log(self.start, self.stop, self.points),
            Spacing::Linear => FrequencyGrid::linear(self.start, self.stop, self.points),
        }
    }
}

/// Where the base board comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoardSource {
    DecapChain {
        #[serde(default)]
        doubled: bool,
        /// Chain positions (1..=6) carrying ports, in port order.
        ports: Vec<usize>,
        #[serde(default)]
        params: DecapChainParams,
    },
    /// Netlist JSON file, relative to the config file.
    Netlist { path: String },
    Inline { netlist: PdnNetlist },
}

/// One anomalous arm of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityArm {
    pub name: String,
    #[serde(default = "one")]
    pub scale_r: f64,
    #[serde(default = "one")]
    pub scale_l: f64,
    #[serde(default = "one")]
    pub scale_c: f64,
    /// Absolute (R, L, C) replacing the reference values before scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rlc: Option<[f64; 3]>,
}

fn one() -> f64 {
    1.0
}

fn default_k() -> f64 {
    3.0
}

fn default_doubled_variants() -> Vec<bool> {
    vec![false, true]
}

/// A clone class for the KNN campaign: the base decap chain with every
/// capacitor scaled by `cap_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloneClass {
    pub name: String,
    pub cap_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Tolerance {
        tolerances: Vec<f64>,
    },
    Sensitivity {
        tolerance: f64,
        arms: Vec<SensitivityArm>,
    },
    Placement {
        tolerance: f64,
        anomaly_index: usize,
        #[serde(default = "default_doubled_variants")]
        doubled: Vec<bool>,
    },
    PortAblation {
        tolerance: f64,
        /// Port subsets (1-based port numbers of the base board).
        subsets: Vec<Vec<usize>>,
    },
    Knn {
        tolerance: f64,
        classes: Vec<CloneClass>,
        train_per_class: usize,
        neighbors: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub name: String,
    pub seed: u64,
    /// Genuine and anomalous trials per arm (test trials for KNN).
    pub trials_per_arm: usize,
    #[serde(default)]
    pub golden_count: usize,
    /// Threshold multiplier k in μ + kσ.
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default)]
    pub fd: FdConfig,
    #[serde(default)]
    pub grid: GridSpec,
    pub board: BoardSource,
    #[serde(default)]
    pub anomalies: Vec<AnomalySpec>,
    pub experiment: Experiment,
}

fn default_format_version() -> u32 {
    CAMPAIGN_FORMAT_VERSION
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a config file and inlines a netlist board source, resolving its
    /// path against the config's directory.
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let io = |source| CampaignError::Io {
            path: path.display().to_string(),
            source,
        };
        let text = std::fs::read_to_string(path).map_err(io)?;
        let mut cfg = Self::from_toml(&text)?;
        if let BoardSource::Netlist { path: rel } = &cfg.board {
            let full = path.parent().unwrap_or(Path::new(".")).join(rel);
            let text = std::fs::read_to_string(&full).map_err(|source| CampaignError::Io {
                path: full.display().to_string(),
                source,
            })?;
            cfg.board = BoardSource::Inline {
                netlist: PdnNetlist::from_json(&text)?,
            };
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if self.format_version != CAMPAIGN_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.trials_per_arm < 10 {
            return bad(format!("trials_per_arm = {} must be >= 10", self.trials_per_arm));
        }
        let tol_ok = |t: f64| (0.0..1.0).contains(&t);
        match &self.experiment {
            Experiment::Tolerance { tolerances } => {
                if tolerances.is_empty() || !tolerances.iter().all(|t| tol_ok(*t)) {
                    return bad("tolerances must be non-empty and within [0, 1)".into());
                }
            }
            Experiment::Sensitivity { tolerance, arms } => {
                if !tol_ok(*tolerance) || arms.is_empty() {
                    return bad("sensitivity needs a tolerance in [0, 1) and at least one arm".into());
                }
                if arms.iter().any(|a| !(a.scale_r > 0.0 && a.scale_l > 0.0 && a.scale_c > 0.0)) {
                    return bad("sensitivity multipliers must be > 0".into());
                }
            }
            Experiment::Placement { tolerance, anomaly_index, doubled } => {
                if !tol_ok(*tolerance) || !(1..=CHAIN_LEN).contains(anomaly_index) || doubled.is_empty() {
                    return bad("placement needs tolerance in [0, 1), anomaly_index in 1..=6 and a doubled list".into());
                }
                if !matches!(self.board, BoardSource::DecapChain { .. }) {
                    return bad("placement requires a decap_chain board".into());
                }
            }
            Experiment::PortAblation { tolerance, subsets } => {
                if !tol_ok(*tolerance) || subsets.is_empty() || subsets.iter().any(|s| s.is_empty()) {
                    return bad("port ablation needs a tolerance in [0, 1) and non-empty subsets".into());
                }
            }
            Experiment::Knn {
                tolerance,
                classes,
                train_per_class,
                neighbors,
            } => {
                if !tol_ok(*tolerance) || classes.len() < 2 || *train_per_class < 1 {
                    return bad("knn needs a tolerance in [0, 1), >= 2 classes and >= 1 training board each".into());
                }
                if *neighbors == 0 || neighbors % 2 == 0 || *neighbors > classes.len() * train_per_class {
                    return bad(format!("neighbors = {neighbors} must be odd and <= the library size"));
                }
                if !matches!(self.board, BoardSource::DecapChain { .. }) {
                    return bad("knn requires a decap_chain board".into());
                }
            }
        }
        let needs_golden = !matches!(self.experiment, Experiment::Knn { .. });
        if needs_golden && self.golden_count < 2 {
            return bad(format!("golden_count = {} must be >= 2", self.golden_count));
        }
        if needs_golden && self.anomalies.is_empty() {
            return bad("at least one anomaly is required".into());
        }
        Ok(())
    }

    fn base_netlist(&self) -> Result<PdnNetlist, CampaignError> {
        match &self.board {
            BoardSource::DecapChain { doubled, ports, params } => {
                if ports.is_empty() || ports.iter().any(|p| !(1..=CHAIN_LEN).contains(p)) {
                    return Err(CampaignError::Config("decap_chain ports must be within 1..=6".into()));
                }
                Ok(decap_chain_board(params, *doubled, ports))
            }
            BoardSource::Inline { netlist } => Ok(netlist.clone()),
            BoardSource::Netlist { path } => Err(CampaignError::Config(format!(
                "netlist board `{path}` was not resolved; load the config with CampaignConfig::load"
            ))),
        }
    }
}

/// Draws and solves one variated board.
struct Sampler<'a> {
    seed: u64,
    grid: &'a FrequencyGrid,
}

impl Sampler<'_> {
    fn board(&self, netlist: &PdnNetlist, tolerance: f64, role: &str, index: u64) -> Result<EmbeddedBoard, CampaignError> {
        let stream = mix_seed(&[self.seed, tolerance.to_bits(), label_word(role)]);
        let model = ToleranceModel::gaussian(tolerance, stream);
        let sig = solve_z_serial(&netlist.sample_variation(&model, index), self.grid).map_err(|source| {
            CampaignError::Trial {
                role: role.to_string(),
                trial: index,
                source,
            }
        })?;
        Ok(EmbeddedBoard::new(&sig)?)
    }

    fn boards(&self, netlist: &PdnNetlist, tolerance: f64, role: &str, n: usize) -> Result<Vec<EmbeddedBoard>, CampaignError> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.board(netlist, tolerance, role, i))
            .collect()
    }
}

/// Decision statistics of one test board against a golden set, for several
/// port-pair selections at once. The per-pair Frechet distances are
/// computed once and reused by every selection.
fn trial_statistics(
    golden: &[EmbeddedBoard],
    test: &EmbeddedBoard,
    union: &[(usize, usize)],
    selections: &[Vec<usize>],
    cfg: &FdConfig,
    statistic: Statistic,
) -> Result<Vec<f64>, CampaignError> {
    let per_golden = golden
        .iter()
        .map(|g| pair_distances(g, test, union))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(selections
        .iter()
        .map(|sel| {
            let fds: Vec<f64> = per_golden
                .iter()
                .map(|d| aggregate(&sel.iter().map(|&i| d[i]).collect::<Vec<_>>(), cfg))
                .collect();
            statistic.reduce(&fds)
        })
        .collect())
}

/// Intra-golden statistics for each selection.
fn golden_statistics(
    golden: &[EmbeddedBoard],
    union: &[(usize, usize)],
    selections: &[Vec<usize>],
    cfg: &FdConfig,
    k: f64,
) -> Result<Vec<IntraStats>, CampaignError> {
    let mut per_pair = Vec::new();
    for i in 0..golden.len() {
        for j in (i + 1)..golden.len() {
            per_pair.push(pair_distances(&golden[i], &golden[j], union)?);
        }
    }
    Ok(selections
        .iter()
        .map(|sel| {
            let fds: Vec<f64> = per_pair
                .iter()
                .map(|d| aggregate(&sel.iter().map(|&i| d[i]).collect::<Vec<_>>(), cfg))
                .collect();
            IntraStats::from_fds(&fds, k)
        })
        .collect())
}

/// Genuine and anomalous statistics of one arm, plus the derived ROC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: String,
    pub tolerance: f64,
    pub golden: IntraStats,
    pub genuine: Vec<f64>,
    pub anomalous: Vec<f64>,
    pub roc: RocCurve,
}

impl ArmResult {
    fn new(arm: String, tolerance: f64, golden: IntraStats, genuine: Vec<f64>, anomalous: Vec<f64>) -> Result<Self, CampaignError> {
        let roc = roc(&genuine, &anomalous)?;
        Ok(Self {
            arm,
            tolerance,
            golden,
            genuine,
            anomalous,
            roc,
        })
    }

    /// (TP+TN)/total at the golden-model threshold μ + kσ.
    pub fn accuracy_at_threshold(&self) -> f64 {
        let t = self.golden.threshold;
        let tn = self.genuine.iter().filter(|s| **s <= t).count();
        let tp = self.anomalous.iter().filter(|s| **s > t).count();
        (tp + tn) as f64 / (self.genuine.len() + self.anomalous.len()) as f64
    }
}

/// Golden set, genuine trials and one anomalous batch per arm, all at a
/// single tolerance. Genuine and golden boards are shared by every arm.
fn run_arms(
    cfg: &CampaignConfig,
    base: &PdnNetlist,
    tolerance: f64,
    arms: &[(String, Vec<AnomalySpec>)],
) -> Result<Vec<ArmResult>, CampaignError> {
    let grid = cfg.grid.build()?;
    let sampler = Sampler { seed: cfg.seed, grid: &grid };
    let union = all_port_pairs(base.n_ports());
    let selections = vec![(0..union.len()).collect::<Vec<_>>()];
    let golden = sampler.boards(base, tolerance, "golden", cfg.golden_count)?;
    let stats = golden_statistics(&golden, &union, &selections, &cfg.fd, cfg.k)?.remove(0);
    let genuine = stat_batch(&sampler, &golden, &union, &selections, cfg, tolerance, |_| Ok((base.clone(), "genuine")))?;
    let genuine: Vec<f64> = genuine.into_iter().map(|v| v[0]).collect();
    let mut out = Vec::with_capacity(arms.len());
    for (name, anomalies) in arms {
        let boards = anomalies
            .iter()
            .map(|a| base.apply_anomaly(a))
            .collect::<Result<Vec<_>, _>>()?;
        let anomalous = stat_batch(&sampler, &golden, &union, &selections, cfg, tolerance, |i| {
            Ok((boards[i % boards.len()].clone(), "anomalous"))
        })?;
        let anomalous = anomalous.into_iter().map(|v| v[0]).collect();
        out.push(ArmResult::new(name.clone(), tolerance, stats.clone(), genuine.clone(), anomalous)?);
    }
    Ok(out)
}

/// Runs `cfg.trials_per_arm` trials in parallel; `make(i)` returns the
/// netlist and role of trial `i`.
fn stat_batch<F>(
    sampler: &Sampler,
    golden: &[EmbeddedBoard],
    union: &[(usize, usize)],
    selections: &[Vec<usize>],
    cfg: &CampaignConfig,
    tolerance: f64,
    make: F,
) -> Result<Vec<Vec<f64>>, CampaignError>
where
    F: Fn(usize) -> Result<(PdnNetlist, &'static str), CampaignError> + Sync,
{
    (0..cfg.trials_per_arm)
        .into_par_iter()
        .map(|i| {
            let (netlist, role) = make(i)?;
            let board = sampler.board(&netlist, tolerance, role, i as u64)?;
            trial_statistics(golden, &board, union, selections, &cfg.fd, cfg.statistic)
        })
        .collect()
}

fn first_anomaly(cfg: &CampaignConfig) -> Result<&AnomalySpec, CampaignError> {
    cfg.anomalies
        .first()
        .ok_or_else(|| CampaignError::Config("at least one anomaly is required".into()))
}

/// One ROC per tolerance, anomaly = the first configured anomaly.
pub fn run_tolerance_sweep(cfg: &CampaignConfig) -> Result<Vec<ArmResult>, CampaignError> {
    cfg.validate()?;
    let Experiment::Tolerance { tolerances } = &cfg.experiment else {
        return Err(CampaignError::Config("not a tolerance experiment".into()));
    };
    let base = cfg.base_netlist()?;
    let anomaly = first_anomaly(cfg)?;
    let mut out = Vec::new();
    for &t in tolerances {
        let arm = (format!("t={t}"), vec![anomaly.clone()]);
        out.extend(run_arms(cfg, &base, t, &[arm])?);
    }
    Ok(out)
}

/// Applies an arm's absolute values and multipliers to the reference chip.
pub fn scaled_anomaly(reference: &AnomalySpec, arm: &SensitivityArm) -> AnomalySpec {
    let mut a = reference.clone();
    if let Some([r, l, c]) = arm.rlc {
        a.r = r;
        a.l = l;
        a.c = c;
    }
    a.scaled(arm.scale_r, arm.scale_l, arm.scale_c)
}

/// One ROC per arm at a fixed tolerance, scaling the first configured
/// anomaly. Genuine and golden boards are shared across arms.
pub fn run_sensitivity_sweep(cfg: &CampaignConfig) -> Result<Vec<ArmResult>, CampaignError> {
    cfg.validate()?;
    let Experiment::Sensitivity { tolerance, arms } = &cfg.experiment else {
        return Err(CampaignError::Config("not a sensitivity experiment".into()));
    };
    let base = cfg.base_netlist()?;
    let reference = first_anomaly(cfg)?;
    let arms: Vec<(String, Vec<AnomalySpec>)> = arms
        .iter()
        .map(|a| (a.name.clone(), vec![scaled_anomaly(reference, a)]))
        .collect();
    run_arms(cfg, &base, *tolerance, &arms)
}

/// Best detection accuracy for every (source, probe) position pair, each
/// cell using only the single profile Z_xy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGrid {
    pub doubled: bool,
    pub anomaly_index: usize,
    /// `cells[x-1][y-1]`, symmetric.
    pub cells: Vec<Vec<f64>>,
}

impl AccuracyGrid {
    pub fn mean(&self) -> f64 {
        let n = self.cells.len();
        self.cells.iter().flatten().sum::<f64>() / (n * n) as f64
    }

    pub fn cell(&self, x: usize, y: usize) -> f64 {
        self.cells[x - 1][y - 1]
    }
}

/// Placement grid for one board variant with the first configured anomaly
/// moved to chain position `anomaly_index`.
pub fn run_placement_grid(cfg: &CampaignConfig, doubled: bool, anomaly_index: usize) -> Result<AccuracyGrid, CampaignError> {
    cfg.validate()?;
    let Experiment::Placement { tolerance, .. } = &cfg.experiment else {
        return Err(CampaignError::Config("not a placement experiment".into()));
    };
    let BoardSource::DecapChain { params, .. } = &cfg.board else {
        return Err(CampaignError::Config("placement requires a decap_chain board".into()));
    };
    if !(1..=CHAIN_LEN).contains(&anomaly_index) {
        return Err(CampaignError::Config(format!("anomaly_index {anomaly_index} outside 1..=6")));
    }
    let all: Vec<usize> = (1..=CHAIN_LEN).collect();
    let base = decap_chain_board(params, doubled, &all);
    let mut anomaly = first_anomaly(cfg)?.clone();
    if anomaly.kind != AnomalyKind::ParallelRlcAtNode {
        return Err(CampaignError::Config("placement anomaly must be parallel_rlc_at_node".into()));
    }
    anomaly.target = chain_node(anomaly_index);
    let infected = base.apply_anomaly(&anomaly)?;

    let grid = cfg.grid.build()?;
    let sampler = Sampler { seed: cfg.seed, grid: &grid };
    let union = all_port_pairs(CHAIN_LEN);
    let selections: Vec<Vec<usize>> = (0..union.len()).map(|i| vec![i]).collect();
    let golden = sampler.boards(&base, *tolerance, "golden", cfg.golden_count)?;
    let genuine = stat_batch(&sampler, &golden, &union, &selections, cfg, *tolerance, |_| Ok((base.clone(), "genuine")))?;
    let anomalous = stat_batch(&sampler, &golden, &union, &selections, cfg, *tolerance, |_| {
        Ok((infected.clone(), "anomalous"))
    })?;
    let mut cells = vec![vec![0.0; CHAIN_LEN]; CHAIN_LEN];
    for (s, &(x, y)) in union.iter().enumerate() {
        let g: Vec<f64> = genuine.iter().map(|v| v[s]).collect();
        let a: Vec<f64> = anomalous.iter().map(|v| v[s]).collect();
        let acc = roc(&g, &a)?.best_accuracy;
        cells[x - 1][y - 1] = acc;
        cells[y - 1][x - 1] = acc;
    }
    Ok(AccuracyGrid {
        doubled,
        anomaly_index,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub ports: Vec<usize>,
    pub best_accuracy: f64,
    pub auc: f64,
}

/// Detection accuracy per port subset on one shared batch of trials.
/// Anomalous trial `i` carries anomaly `i mod len(anomalies)`.
pub fn run_port_ablation(cfg: &CampaignConfig) -> Result<Vec<AblationRow>, CampaignError> {
    cfg.validate()?;
    let Experiment::PortAblation { tolerance, subsets } = &cfg.experiment else {
        return Err(CampaignError::Config("not a port ablation experiment".into()));
    };
    let base = cfg.base_netlist()?;
    let n = base.n_ports();
    if let Some(bad) = subsets.iter().flatten().find(|p| !(1..=n).contains(*p)) {
        return Err(CampaignError::Config(format!("port {bad} outside 1..={n}")));
    }
    let infected = cfg
        .anomalies
        .iter()
        .map(|a| base.apply_anomaly(a))
        .collect::<Result<Vec<_>, _>>()?;
    let union = all_port_pairs(n);
    let selections: Vec<Vec<usize>> = subsets
        .iter()
        .map(|s| {
            subset_port_pairs(s)
                .iter()
                .map(|p| union.iter().position(|u| u == p).expect("pair in union"))
                .collect()
        })
        .collect();
    let grid = cfg.grid.build()?;
    let sampler = Sampler { seed: cfg.seed, grid: &grid };
    let golden = sampler.boards(&base, *tolerance, "golden", cfg.golden_count)?;
    let genuine = stat_batch(&sampler, &golden, &union, &selections, cfg, *tolerance, |_| Ok((base.clone(), "genuine")))?;
    let anomalous = stat_batch(&sampler, &golden, &union, &selections, cfg, *tolerance, |i| {
        Ok((infected[i % infected.len()].clone(), "anomalous"))
    })?;
    subsets
        .iter()
        .enumerate()
        .map(|(s, ports)| {
            let g: Vec<f64> = genuine.iter().map(|v| v[s]).collect();
            let a: Vec<f64> = anomalous.iter().map(|v| v[s]).collect();
            let r = roc(&g, &a)?;
            Ok(AblationRow {
                ports: ports.clone(),
                best_accuracy: r.best_accuracy,
                auc: r.auc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnResult {
    pub classes: Vec<String>,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

/// FD-KNN over clone classes. Test trial `i` is drawn from class
/// `i mod n_classes`.
pub fn run_knn_campaign(cfg: &CampaignConfig) -> Result<KnnResult, CampaignError> {
    cfg.validate()?;
    let Experiment::Knn {
        tolerance,
        classes,
        train_per_class,
        neighbors,
    } = &cfg.experiment
    else {
        return Err(CampaignError::Config("not a knn experiment".into()));
    };
    let BoardSource::DecapChain { doubled, ports, params } = &cfg.board else {
        return Err(CampaignError::Config("knn requires a decap_chain board".into()));
    };
    let boards: Vec<PdnNetlist> = classes
        .iter()
        .map(|c| {
            let mut n = decap_chain_board(&params.clone().with_cap_scale(c.cap_scale), *doubled, ports);
            n.label = c.name.clone();
            n
        })
        .collect();
    let grid = cfg.grid.build()?;
    let sampler = Sampler { seed: cfg.seed, grid: &grid };
    let mut library: Vec<(EmbeddedBoard, usize)> = Vec::new();
    for (ci, b) in boards.iter().enumerate() {
        let role = format!("train:{}", classes[ci].name);
        for e in sampler.boards(b, *tolerance, &role, *train_per_class)? {
            library.push((e, ci));
        }
    }
    let pairs = all_port_pairs(ports.len());
    let predictions = (0..cfg.trials_per_arm)
        .into_par_iter()
        .map(|i| {
            let truth = i % classes.len();
            let test = sampler.board(&boards[truth], *tolerance, "test", i as u64)?;
            let dists = library
                .iter()
                .map(|(e, ci)| Ok((aggregate(&pair_distances(e, &test, &pairs)?, &cfg.fd), classes[*ci].name.as_str())))
                .collect::<Result<Vec<_>, CampaignError>>()?;
            let label = knn_vote(&dists, *neighbors)?;
            let predicted = classes.iter().position(|c| c.name == label).expect("label from library");
            Ok((truth, predicted))
        })
        .collect::<Result<Vec<_>, CampaignError>>()?;
    let mut confusion = vec![vec![0; classes.len()]; classes.len()];
    for &(t, p) in &predictions {
        confusion[t][p] += 1;
    }
    let correct = predictions.iter().filter(|(t, p)| t == p).count();
    Ok(KnnResult {
        classes: classes.iter().map(|c| c.name.clone()).collect(),
        trials: cfg.trials_per_arm,
        correct,
        accuracy: correct as f64 / cfg.trials_per_arm as f64,
        confusion,
    })
}

/// Result of whichever experiment a config describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CampaignOutcome {
    Arms { arms: Vec<ArmResult> },
    Placement { grids: Vec<AccuracyGrid> },
    PortAblation { rows: Vec<AblationRow> },
    Knn { result: KnnResult },
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignOutcome, CampaignError> {
    match &cfg.experiment {
        Experiment::Tolerance { .. } => Ok(CampaignOutcome::Arms {
            arms: run_tolerance_sweep(cfg)?,
        }),
        Experiment::Sensitivity { .. } => Ok(CampaignOutcome::Arms {
            arms: run_sensitivity_sweep(cfg)?,
        }),
        Experiment::Placement { anomaly_index, doubled, .. } => Ok(CampaignOutcome::Placement {
            grids: doubled
                .iter()
                .map(|&d| run_placement_grid(cfg, d, *anomaly_index))
                .collect::<Result<_, _>>()?,
        }),
        Experiment::PortAblation { .. } => Ok(CampaignOutcome::PortAblation {
            rows: run_port_ablation(cfg)?,
        }),
        Experiment::Knn { .. } => Ok(CampaignOutcome::Knn {
            result: run_knn_campaign(cfg)?,
        }),
    }
}

impl CampaignOutcome {
    /// CSV tables as (file name, contents). Formatting is locale-free and
    /// uses shortest round-trip floats, so reruns are byte-identical.
    pub fn tables(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        match self {
            CampaignOutcome::Arms { arms } => {
                let mut s = String::from("arm,tolerance,auc,best_accuracy,best_threshold,mu,sigma,threshold,accuracy_at_threshold,n_genuine,n_anomalous\n");
                let mut r = String::from("arm,tolerance,fpr,tpr,threshold\n");
                let mut st = String::from("arm,tolerance,class,trial,statistic\n");
                for a in arms {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{},{}\n",
                        a.arm,
                        a.tolerance,
                        a.roc.auc,
                        a.roc.best_accuracy,
                        a.roc.best_threshold,
                        a.golden.mu,
                        a.golden.sigma,
                        a.golden.threshold,
                        a.accuracy_at_threshold(),
                        a.genuine.len(),
                        a.anomalous.len()
                    ));
                    for p in &a.roc.points {
                        r.push_str(&format!("{},{},{},{},{}\n", a.arm, a.tolerance, p.fpr, p.tpr, p.threshold));
                    }
                    for (class, list) in [("genuine", &a.genuine), ("anomalous", &a.anomalous)] {
                        for (i, v) in list.iter().enumerate() {
                            st.push_str(&format!("{},{},{},{},{}\n", a.arm, a.tolerance, class, i, v));
                        }
                    }
                }
                out.push(("summary.csv".into(), s));
                out.push(("roc.csv".into(), r));
                out.push(("statistics.csv".into(), st));
            }
            CampaignOutcome::Placement { grids } => {
                let mut summary = String::from("capacitors,anomaly_index,mean_accuracy\n");
                for g in grids {
                    let caps = if g.doubled { 12 } else { 6 };
                    let mut s = String::from("x,y,accuracy\n");
                    for x in 1..=g.cells.len() {
                        for y in 1..=g.cells.len() {
                            s.push_str(&format!("{x},{y},{}\n", g.cell(x, y)));
                        }
                    }
                    summary.push_str(&format!("{caps},{},{}\n", g.anomaly_index, g.mean()));
                    out.push((format!("grid_{caps}cap.csv"), s));
                }
                out.push(("summary.csv".into(), summary));
            }
            CampaignOutcome::PortAblation { rows } => {
                let mut s = String::from("ports,best_accuracy,auc\n");
                for r in rows {
                    let ports: Vec<String> = r.ports.iter().map(|p| p.to_string()).collect();
                    s.push_str(&format!("{},{},{}\n", ports.join(" "), r.best_accuracy, r.auc));
                }
                out.push(("ablation.csv".into(), s));
            }
            CampaignOutcome::Knn { result } => {
                let mut s = String::from("trials,correct,accuracy\n");
                s.push_str(&format!("{},{},{}\n", result.trials, result.correct, result.accuracy));
                let mut c = String::from("true_class,predicted_class,count\n");
                for (t, row) in result.confusion.iter().enumerate() {
                    for (p, n) in row.iter().enumerate() {
                        c.push_str(&format!("{},{},{n}\n", result.classes[t], result.classes[p]));
                    }
                }
                out.push(("knn.csv".into(), s));
                out.push(("confusion.csv".into(), c));
            }
        }
        out
    }
}
