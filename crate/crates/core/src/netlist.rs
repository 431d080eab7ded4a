//! Power-delivery-network netlists: a flat list of RLC branches over named
//! nodes, measurement ports, and switchable anomalies.
//!
//! Netlists are values. Every operation here (anomaly application, process
//! variation) returns a new netlist and leaves its input untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::seed::mix_seed;

/// Name of the distinguished reference node.
pub const GROUND: &str = "gnd";

/// Current netlist JSON schema version.
pub const NETLIST_FORMAT_VERSION: u32 = 1;

/// Floor applied to perturbed element values, relative to nominal.
const VARIATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Resistor,
    Inductor,
    Capacitor,
    /// R, L and C in series. `c == 0` drops the capacitor (short in the chain).
    SeriesRlc,
    /// R, L and C in parallel. `l == 0` or `r == 0` drops that element (open).
    ParallelRlc,
}

impl BranchKind {
    pub fn is_capacitive(self) -> bool {
        matches!(self, BranchKind::Capacitor | BranchKind::SeriesRlc | BranchKind::ParallelRlc)
    }
}

/// One two-terminal element between `node_a` and `node_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlcBranch {
    pub id: String,
    pub kind: BranchKind,
    #[serde(rename = "a")]
    pub node_a: String,
    #[serde(rename = "b")]
    pub node_b: String,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub l: f64,
    #[serde(default)]
    pub c: f64,
    /// Per-element tolerance override (fraction, 3σ).
    #[serde(rename = "tol", default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl RlcBranch {
    pub fn new(id: impl Into<String>, kind: BranchKind, a: impl Into<String>, b: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            node_a: a.into(),
            node_b: b.into(),
            r: 0.0,
            l: 0.0,
            c: 0.0,
            tolerance: None,
        }
    }

    pub fn resistor(id: impl Into<String>, a: impl Into<String>, b: impl Into<String>, r: f64) -> Self {
        Self { r, ..Self::new(id, BranchKind::Resistor, a, b) }
    }

    pub fn inductor(id: impl Into<String>, a: impl Into<String>, b: impl Into<String>, l: f64) -> Self {
        Self { l, ..Self::new(id, BranchKind::Inductor, a, b) }
    }

    pub fn capacitor(id: impl Into<String>, a: impl Into<String>, b: impl Into<String>, c: f64) -> Self {
        Self { c, ..Self::new(id, BranchKind::Capacitor, a, b) }
    }

    pub fn series_rlc(
        id: impl Into<String>,
        a: impl Into<String>,
        b: impl Into<String>,
        r: f64,
        l: f64,
        c: f64,
    ) -> Self {
        Self { r, l, c, ..Self::new(id, BranchKind::SeriesRlc, a, b) }
    }

    pub fn parallel_rlc(
        id: impl Into<String>,
        a: impl Into<String>,
        b: impl Into<String>,
        r: f64,
        l: f64,
        c: f64,
    ) -> Self {
        Self { r, l, c, ..Self::new(id, BranchKind::ParallelRlc, a, b) }
    }

    /// True when the branch would be an ideal short (or has no element at all).
    fn is_degenerate(&self) -> bool {
        match self.kind {
            BranchKind::Resistor => self.r == 0.0,
            BranchKind::Inductor => self.l == 0.0,
            BranchKind::Capacitor => self.c == 0.0,
            BranchKind::SeriesRlc => self.r == 0.0 && self.l == 0.0 && self.c == 0.0,
            BranchKind::ParallelRlc => self.r == 0.0 && self.l == 0.0 && self.c == 0.0,
        }
    }

    fn touches(&self, node: &str) -> bool {
        self.node_a == node || self.node_b == node
    }
}

/// A physical decoupling capacitor, possibly repeated in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitorSpec {
    pub nominal_c: f64,
    pub esr: f64,
    pub esl: f64,
    pub count: usize,
}

impl CapacitorSpec {
    /// Expands into `count` identical series-RLC branches from `node` to ground,
    /// with ids `{prefix}_1 .. {prefix}_{count}`.
    pub fn expand(&self, prefix: &str, node: &str) -> Vec<RlcBranch> {
        assert!(self.nominal_c > 0.0 && self.count >= 1, "invalid capacitor spec");
        (1..=self.count)
            .map(|i| RlcBranch::series_rlc(format!("{prefix}_{i}"), node, GROUND, self.esr, self.esl, self.nominal_c))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// New branch between `target` node and ground.
    ParallelRlcAtNode,
    /// Splits branch `target` and inserts a series resistor `r`.
    SeriesRInBranch,
    RemoveBranch,
    /// Overwrites the element values (and optionally kind) of branch `target`.
    ReplaceBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalySpec {
    pub id: String,
    pub kind: AnomalyKind,
    pub target: String,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub l: f64,
    #[serde(default)]
    pub c: f64,
    /// Branch kind used by `parallel_rlc_at_node` (default series RLC) and
    /// `replace_branch` (default: keep the target's kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_kind: Option<BranchKind>,
}

impl AnomalySpec {
    /// A chip modelled as a series RLC from `node` to ground.
    pub fn chip_at(id: impl Into<String>, node: impl Into<String>, r: f64, l: f64, c: f64) -> Self {
        Self {
            id: id.into(),
            kind: AnomalyKind::ParallelRlcAtNode,
            target: node.into(),
            r,
            l,
            c,
            branch_kind: None,
        }
    }

    /// Scales the element values, leaving structure alone.
    pub fn scaled(&self, r: f64, l: f64, c: f64) -> Self {
        Self {
            r: self.r * r,
            l: self.l * l,
            c: self.c * c,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSpec {
    /// 1-based port number.
    pub index: usize,
    pub node: String,
    #[serde(default = "default_z0")]
    pub z0: f64,
}

fn default_z0() -> f64 {
    50.0
}

fn default_format_version() -> u32 {
    NETLIST_FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdnNetlist {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub label: String,
    pub nodes: Vec<String>,
    pub branches: Vec<RlcBranch>,
    pub ports: Vec<PortSpec>,
    #[serde(default)]
    pub anomalies: Vec<AnomalySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationDistribution {
    Gaussian,
}

/// Component process variation: each value is scaled by `1 + ε`, ε ~ N(0, (t/3)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceModel {
    pub distribution: VariationDistribution,
    /// Tolerance `t` as a fraction; `t` is the 3σ bound.
    pub tolerance: f64,
    pub seed: u64,
}

impl ToleranceModel {
    pub fn gaussian(tolerance: f64, seed: u64) -> Self {
        Self {
            distribution: VariationDistribution::Gaussian,
            tolerance,
            seed,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.tolerance / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    FormatVersion,
    EmptyLabel,
    NoPorts,
    DuplicateNode,
    UnknownNode,
    SelfLoop,
    NegativeValue,
    NonFiniteValue,
    ToleranceOutOfRange,
    DegenerateBranch,
    DuplicateBranchId,
    DuplicatePort,
    DuplicatePortIndex,
    PortIndexGap,
    InvalidZ0,
    PortOnGround,
    FloatingPort,
    FloatingNode,
}

/// One validation finding, naming the offending branch, port or node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    fn new(kind: DiagnosticKind, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind,
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} [{}]: {}", self.kind, self.subject, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NetlistError {
    #[error("unknown anomaly id `{0}`")]
    UnknownAnomaly(String),
    #[error("anomaly `{anomaly}` references missing branch `{branch}`")]
    MissingBranch { anomaly: String, branch: String },
    #[error("anomaly `{anomaly}` references missing node `{node}`")]
    MissingNode { anomaly: String, node: String },
    #[error("anomaly `{anomaly}` would create duplicate branch id `{id}`")]
    DuplicateBranch { anomaly: String, id: String },
    #[error("anomaly `{anomaly}`: {reason}")]
    InvalidAnomaly { anomaly: String, reason: String },
    #[error("netlist is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("netlist json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Union-find over node indices, used for ground connectivity.
struct Components {
    parent: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

impl PdnNetlist {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            format_version: NETLIST_FORMAT_VERSION,
            label: label.into(),
            nodes: Vec::new(),
            branches: Vec::new(),
            ports: Vec::new(),
            anomalies: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, NetlistError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("netlist serializes")
    }

    pub fn add_node(&mut self, node: impl Into<String>) {
        let node = node.into();
        if node != GROUND && !self.nodes.contains(&node) {
            self.nodes.push(node);
        }
    }

    /// Appends a port on `node` with the next free index.
    pub fn add_port(&mut self, node: impl Into<String>, z0: f64) {
        let index = self.ports.len() + 1;
        self.ports.push(PortSpec { index, node: node.into(), z0 });
    }

    pub fn branch(&self, id: &str) -> Option<&RlcBranch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn n_ports(&self) -> usize {
        self.ports.len()
    }

    /// Number of branches that contain a capacitor.
    pub fn capacitor_count(&self) -> usize {
        self.branches
            .iter()
            .filter(|b| b.kind.is_capacitive() && b.c > 0.0)
            .count()
    }

    /// Non-ground nodes in solver order: declared nodes first, then any
    /// undeclared branch endpoints in order of appearance.
    pub fn solver_nodes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        let endpoints = self
            .branches
            .iter()
            .flat_map(|b| [b.node_a.as_str(), b.node_b.as_str()]);
        for n in self.nodes.iter().map(String::as_str).chain(endpoints) {
            if n != GROUND && seen.insert(n.to_string()) {
                out.push(n.to_string());
            }
        }
        out
    }

    /// Nodes (other than ground) that have no finite-impedance path to ground.
    /// Every branch kind conducts at some frequency, so this is plain graph
    /// connectivity.
    pub fn floating_nodes(&self) -> Vec<String> {
        let nodes = self.solver_nodes();
        let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i + 1)).collect();
        let mut comps = Components::new(nodes.len() + 1);
        for b in &self.branches {
            if b.is_degenerate() {
                continue;
            }
            let ia = if b.node_a == GROUND { Some(0) } else { index.get(b.node_a.as_str()).copied() };
            let ib = if b.node_b == GROUND { Some(0) } else { index.get(b.node_b.as_str()).copied() };
            if let (Some(a), Some(b)) = (ia, ib) {
                comps.union(a, b);
            }
        }
        let ground = comps.find(0);
        nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| comps.find(i + 1) != ground)
            .map(|(_, n)| n.clone())
            .collect()
    }

    /// Checks every netlist invariant. An empty result means the netlist can
    /// be solved.
    pub fn validate(&self) -> Vec<Diagnostic> {
        use DiagnosticKind as K;
        let mut out = Vec::new();

        if self.format_version != NETLIST_FORMAT_VERSION {
            out.push(Diagnostic::new(
                K::FormatVersion,
                "netlist",
                format!("unsupported format_version {}", self.format_version),
            ));
        }
        if self.ports.is_empty() {
            out.push(Diagnostic::new(K::NoPorts, "netlist", "netlist declares no ports"));
        }

        let mut declared = BTreeSet::new();
        for n in &self.nodes {
            if n != GROUND && !declared.insert(n.as_str()) {
                out.push(Diagnostic::new(K::DuplicateNode, n, "node declared twice"));
            }
        }
        let known = |n: &str| n == GROUND || declared.contains(n);

        let mut ids = BTreeSet::new();
        for b in &self.branches {
            if !ids.insert(b.id.as_str()) {
                out.push(Diagnostic::new(K::DuplicateBranchId, &b.id, "branch id used twice"));
            }
            for n in [&b.node_a, &b.node_b] {
                if !known(n) {
                    out.push(Diagnostic::new(K::UnknownNode, &b.id, format!("node `{n}` is not declared")));
                }
            }
            if b.node_a == b.node_b {
                out.push(Diagnostic::new(K::SelfLoop, &b.id, "branch connects a node to itself"));
            }
            for (name, v) in [("r", b.r), ("l", b.l), ("c", b.c)] {
                if !v.is_finite() {
                    out.push(Diagnostic::new(K::NonFiniteValue, &b.id, format!("{name} is not finite")));
                } else if v < 0.0 {
                    out.push(Diagnostic::new(K::NegativeValue, &b.id, format!("{name} = {v} is negative")));
                }
            }
            if let Some(t) = b.tolerance {
                if !(0.0..1.0).contains(&t) {
                    out.push(Diagnostic::new(K::ToleranceOutOfRange, &b.id, format!("tol = {t} outside [0, 1)")));
                }
            }
            if b.is_degenerate() {
                out.push(Diagnostic::new(K::DegenerateBranch, &b.id, "branch has no element (ideal short or empty)"));
            }
        }

        let mut port_nodes = BTreeSet::new();
        let mut port_indices = BTreeSet::new();
        let floating: BTreeSet<String> = self.floating_nodes().into_iter().collect();
        for p in &self.ports {
            let subject = format!("port{}", p.index);
            if !port_indices.insert(p.index) {
                out.push(Diagnostic::new(K::DuplicatePortIndex, &subject, "port index used twice"));
            }
            if !port_nodes.insert(p.node.as_str()) {
                out.push(Diagnostic::new(
                    K::DuplicatePort,
                    &subject,
                    format!("another port already sits on node `{}`", p.node),
                ));
            }
            if !(p.z0 > 0.0 && p.z0.is_finite()) {
                out.push(Diagnostic::new(K::InvalidZ0, &subject, format!("z0 = {} must be > 0", p.z0)));
            }
            if p.node == GROUND {
                out.push(Diagnostic::new(K::PortOnGround, &subject, "port positive node is ground"));
            } else if !known(&p.node) {
                out.push(Diagnostic::new(K::UnknownNode, &subject, format!("node `{}` is not declared", p.node)));
            } else if floating.contains(&p.node) || !self.branches.iter().any(|b| b.touches(&p.node)) {
                out.push(Diagnostic::new(
                    K::FloatingPort,
                    &subject,
                    format!("node `{}` has no path to ground", p.node),
                ));
            }
        }
        if let (Some(&first), Some(&last)) = (port_indices.iter().next(), port_indices.iter().last()) {
            if first != 1 || last != port_indices.len() {
                out.push(Diagnostic::new(K::PortIndexGap, "ports", "port indices must be 1..=n without gaps"));
            }
        }

        let port_set: BTreeSet<&str> = self.ports.iter().map(|p| p.node.as_str()).collect();
        for n in &floating {
            if !port_set.contains(n.as_str()) {
                out.push(Diagnostic::new(K::FloatingNode, n, "node has no path to ground"));
            }
        }
        out
    }

    /// Materializes the selected anomalies (by id, in the order given). The
    /// applied specs are removed from the returned netlist's anomaly list.
    pub fn apply_anomalies(&self, which: &[&str]) -> Result<PdnNetlist, NetlistError> {
        let mut out = self.clone();
        for id in which {
            let spec = self
                .anomalies
                .iter()
                .find(|a| a.id == *id)
                .ok_or_else(|| NetlistError::UnknownAnomaly(id.to_string()))?;
            out = out.apply_anomaly(spec)?;
            out.anomalies.retain(|a| a.id != *id);
        }
        Ok(out)
    }

    /// Materializes one anomaly spec, whether or not it is registered.
    pub fn apply_anomaly(&self, spec: &AnomalySpec) -> Result<PdnNetlist, NetlistError> {
        let mut out = self.clone();
        let missing_branch = || NetlistError::MissingBranch {
            anomaly: spec.id.clone(),
            branch: spec.target.clone(),
        };
        match spec.kind {
            AnomalyKind::ParallelRlcAtNode => {
                if spec.target == GROUND || !out.solver_nodes().contains(&spec.target) {
                    return Err(NetlistError::MissingNode {
                        anomaly: spec.id.clone(),
                        node: spec.target.clone(),
                    });
                }
                if out.branch(&spec.id).is_some() {
                    return Err(NetlistError::DuplicateBranch {
                        anomaly: spec.id.clone(),
                        id: spec.id.clone(),
                    });
                }
                let kind = spec.branch_kind.unwrap_or(BranchKind::SeriesRlc);
                out.branches.push(RlcBranch {
                    r: spec.r,
                    l: spec.l,
                    c: spec.c,
                    ..RlcBranch::new(&spec.id, kind, &spec.target, GROUND)
                });
            }
            AnomalyKind::SeriesRInBranch => {
                if spec.r.is_nan() || spec.r <= 0.0 {
                    return Err(NetlistError::InvalidAnomaly {
                        anomaly: spec.id.clone(),
                        reason: "series resistance must be > 0".into(),
                    });
                }
                if out.branch(&spec.id).is_some() {
                    return Err(NetlistError::DuplicateBranch {
                        anomaly: spec.id.clone(),
                        id: spec.id.clone(),
                    });
                }
                let pos = out.branches.iter().position(|b| b.id == spec.target).ok_or_else(missing_branch)?;
                let mid = format!("{}~{}", spec.target, spec.id);
                let far = std::mem::replace(&mut out.branches[pos].node_b, mid.clone());
                out.add_node(mid.clone());
                out.branches.insert(pos + 1, RlcBranch::resistor(&spec.id, mid, far, spec.r));
            }
            AnomalyKind::RemoveBranch => {
                let pos = out.branches.iter().position(|b| b.id == spec.target).ok_or_else(missing_branch)?;
                out.branches.remove(pos);
            }
            AnomalyKind::ReplaceBranch => {
                let b = out.branches.iter_mut().find(|b| b.id == spec.target).ok_or_else(missing_branch)?;
                if let Some(kind) = spec.branch_kind {
                    b.kind = kind;
                }
                b.r = spec.r;
                b.l = spec.l;
                b.c = spec.c;
            }
        }
        Ok(out)
    }

    /// Draws one process-variation instance. Deterministic in
    /// `(model.seed, trial)`; three normal deviates are consumed per branch
    /// (r, l, c) whether or not the element is present, so appending a branch
    /// never changes the draws of earlier branches.
    pub fn sample_variation(&self, model: &ToleranceModel, trial: u64) -> PdnNetlist {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[model.seed, trial]));
        let mut out = self.clone();
        for b in &mut out.branches {
            let sigma = b.tolerance.unwrap_or(model.tolerance) / 3.0;
            for v in [&mut b.r, &mut b.l, &mut b.c] {
                let z: f64 = StandardNormal.sample(&mut rng);
                if *v > 0.0 {
                    let nominal = *v;
                    *v = (nominal * (1.0 + sigma * z)).max(VARIATION_FLOOR * nominal);
                }
            }
        }
        out
    }
}
