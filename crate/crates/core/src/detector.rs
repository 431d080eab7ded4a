//! Golden-model thresholding, FD-KNN classification and ROC metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frechet::{all_port_pairs, fd_prime_pairs, EmbeddedBoard, FdConfig, FrechetError};
use crate::solver::BoardSignature;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("golden model needs at least 2 genuine boards, got {0}")]
    TooFewBoards(usize),
    #[error(transparent)]
    Shape(#[from] FrechetError),
    #[error("library is empty")]
    EmptyLibrary,
    #[error("k = {k} must be odd and between 1 and the library size {n}")]
    BadK { k: usize, n: usize },
    #[error("statistic list is empty")]
    EmptyInput,
    #[error("confusion counts sum to zero")]
    ZeroTotal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Min,
    Mean,
}

impl Statistic {
    pub fn reduce(self, values: &[f64]) -> f64 {
        match self {
            Statistic::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(Statistic::Min),
            "mean" => Ok(Statistic::Mean),
            other => Err(format!("unknown statistic `{other}` (expected min or mean)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Genuine,
    Anomalous,
}

/// μ, σ and threshold of a set of intra-genuine distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraStats {
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
    pub threshold: f64,
    pub warnings: Vec<String>,
}

impl IntraStats {
    pub fn from_fds(fds: &[f64], k: f64) -> Self {
        let n = fds.len() as f64;
        let mu = fds.iter().sum::<f64>() / n;
        let mut warnings = Vec::new();
        let sigma = if fds.len() < 2 {
            warnings.push("only one intra-genuine distance; sigma set to 0".to_string());
            0.0
        } else {
            (fds.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self {
            mu,
            sigma,
            k,
            threshold: mu + k * sigma,
            warnings,
        }
    }
}

/// All unordered pairwise FD′ among `boards`, in (i, j), i < j order.
pub fn intra_distances(
    boards: &[EmbeddedBoard],
    cfg: &FdConfig,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>, DetectError> {
    let idx: Vec<(usize, usize)> = (0..boards.len())
        .flat_map(|i| ((i + 1)..boards.len()).map(move |j| (i, j)))
        .collect();
    Ok(idx
        .par_iter()
        .map(|&(i, j)| fd_prime_pairs(&boards[i], &boards[j], cfg, pairs))
        .collect::<Result<Vec<_>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenModel {
    pub format_version: u32,
    pub genuine: Vec<BoardSignature>,
    /// Port pairs (1-based, x ≤ y) that FD′ is computed over.
    pub pairs: Vec<(usize, usize)>,
    pub intra_fds: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
    pub threshold: f64,
    pub cfg: FdConfig,
    pub warnings: Vec<String>,
}

pub fn fit_golden(genuine: &[BoardSignature], cfg: FdConfig, k: f64) -> Result<GoldenModel, DetectError> {
    let n_ports = genuine.first().map(|g| g.n_ports()).unwrap_or(0);
    fit_golden_pairs(genuine, cfg, k, &all_port_pairs(n_ports))
}

/// Golden model restricted to the given port pairs.
pub fn fit_golden_pairs(
    genuine: &[BoardSignature],
    cfg: FdConfig,
    k: f64,
    pairs: &[(usize, usize)],
) -> Result<GoldenModel, DetectError> {
    if genuine.len() < 2 {
        return Err(DetectError::TooFewBoards(genuine.len()));
    }
    let embedded = genuine
        .iter()
        .map(EmbeddedBoard::new)
        .collect::<Result<Vec<_>, _>>()?;
    let intra_fds = intra_distances(&embedded, &cfg, pairs)?;
    let stats = IntraStats::from_fds(&intra_fds, k);
    Ok(GoldenModel {
        format_version: REPORT_FORMAT_VERSION,
        genuine: genuine.to_vec(),
        pairs: pairs.to_vec(),
        intra_fds,
        mu: stats.mu,
        sigma: stats.sigma,
        k,
        threshold: stats.threshold,
        cfg,
        warnings: stats.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub format_version: u32,
    pub board_label: String,
    pub fds_to_training: Vec<f64>,
    pub statistic: Statistic,
    pub decision_statistic: f64,
    pub threshold_used: f64,
    pub verdict: Verdict,
    pub cfg: FdConfig,
}

impl DetectionReport {
    pub fn new(label: &str, fds: Vec<f64>, statistic: Statistic, threshold: f64, cfg: FdConfig) -> Self {
        let decision = statistic.reduce(&fds);
        let verdict = if decision > threshold { Verdict::Anomalous } else { Verdict::Genuine };
        Self {
            format_version: REPORT_FORMAT_VERSION,
            board_label: label.to_string(),
            fds_to_training: fds,
            statistic,
            decision_statistic: decision,
            threshold_used: threshold,
            verdict,
            cfg,
        }
    }
}

pub fn detect(model: &GoldenModel, test: &BoardSignature, statistic: Statistic) -> Result<DetectionReport, DetectError> {
    let t = EmbeddedBoard::new(test)?;
    let fds = model
        .genuine
        .par_iter()
        .map(|g| fd_prime_pairs(&EmbeddedBoard::new(g)?, &t, &model.cfg, &model.pairs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DetectionReport::new(&test.label, fds, statistic, model.threshold, model.cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBoard {
    pub class: String,
    pub signature: BoardSignature,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledLibrary {
    pub format_version: u32,
    pub entries: Vec<LabeledBoard>,
}

/// Majority vote over the `k` nearest of `(distance, class)` entries.
///
/// Distances sort ascending with ties kept in entry order. Vote ties go to
/// the class with the smallest summed distance among its votes, then to the
/// class that appears first among the neighbours.
pub fn knn_vote<'a>(dists: &[(f64, &'a str)], k: usize) -> Result<&'a str, DetectError> {
    if dists.is_empty() {
        return Err(DetectError::EmptyLibrary);
    }
    if k == 0 || k.is_multiple_of(2) || k > dists.len() {
        return Err(DetectError::BadK { k, n: dists.len() });
    }
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by(|&a, &b| dists[a].0.total_cmp(&dists[b].0).then(a.cmp(&b)));
    // (class, votes, summed distance), in first-seen order
    let mut tally: Vec<(&str, usize, f64)> = Vec::new();
    for &i in &order[..k] {
        let (d, class) = dists[i];
        match tally.iter_mut().find(|t| t.0 == class) {
            Some(t) => {
                t.1 += 1;
                t.2 += d;
            }
            None => tally.push((class, 1, d)),
        }
    }
    let best = tally
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(ia.cmp(ib)))
        .map(|(_, t)| t.0)
        .expect("k >= 1");
    Ok(best)
}

pub fn fd_knn(lib: &LabeledLibrary, test: &BoardSignature, k: usize, cfg: FdConfig) -> Result<String, DetectError> {
    if lib.entries.is_empty() {
        return Err(DetectError::EmptyLibrary);
    }
    let t = EmbeddedBoard::new(test)?;
    let pairs = all_port_pairs(test.n_ports());
    let d = lib
        .entries
        .par_iter()
        .map(|e| fd_prime_pairs(&EmbeddedBoard::new(&e.signature)?, &t, &cfg, &pairs))
        .collect::<Result<Vec<_>, _>>()?;
    let dists: Vec<(f64, &str)> = d.into_iter().zip(lib.entries.iter().map(|e| e.class.as_str())).collect();
    knn_vote(&dists, k).map(str::to_string)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Ordered by decreasing threshold, so fpr and tpr are non-decreasing.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// Best (TP+TN)/total over the swept thresholds.
    pub best_accuracy: f64,
    pub best_threshold: f64,
}

/// ROC over thresholds drawn from the union of both lists plus ±∞. A board
/// is flagged when its statistic is strictly above the threshold.
pub fn roc(genuine_stats: &[f64], anomalous_stats: &[f64]) -> Result<RocCurve, DetectError> {
    if genuine_stats.is_empty() || anomalous_stats.is_empty() {
        return Err(DetectError::EmptyInput);
    }
    let mut g = genuine_stats.to_vec();
    let mut a = anomalous_stats.to_vec();
    g.sort_by(f64::total_cmp);
    a.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&a).copied().collect();
    thresholds.push(f64::INFINITY);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.sort_by(|x, y| y.total_cmp(x));
    thresholds.dedup();

    let above = |sorted: &[f64], t: f64| sorted.len() - sorted.partition_point(|v| *v <= t);
    let (ng, na) = (g.len() as f64, a.len() as f64);
    let total = ng + na;
    let mut points = Vec::with_capacity(thresholds.len());
    let (mut best_accuracy, mut best_threshold) = (f64::NEG_INFINITY, f64::INFINITY);
    for &t in &thresholds {
        let fp = above(&g, t) as f64;
        let tp = above(&a, t) as f64;
        let acc = (tp + (ng - fp)) / total;
        if acc > best_accuracy {
            best_accuracy = acc;
            best_threshold = t;
        }
        points.push(RocPoint {
            fpr: fp / ng,
            tpr: tp / na,
            threshold: t,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve {
        points,
        auc,
        best_accuracy,
        best_threshold,
    })
}

/// Best (TP+TN)/total over all thresholds.
pub fn best_accuracy(genuine_stats: &[f64], anomalous_stats: &[f64]) -> Result<f64, DetectError> {
    Ok(roc(genuine_stats, anomalous_stats)?.best_accuracy)
}

/// (TP+TN)/(TP+TN+FP+FN)
pub fn accuracy(tp: u64, tn: u64, fp: u64, fn_: u64) -> Result<f64, DetectError> {
    let total = tp + tn + fp + fn_;
    if total == 0 {
        return Err(DetectError::ZeroTotal);
    }
    Ok((tp + tn) as f64 / total as f64)
}

/// Shared-bin histogram of genuine and anomalous distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub genuine: Vec<u64>,
    pub anomalous: Vec<u64>,
}

pub fn histogram(genuine: &[f64], anomalous: &[f64], bins: usize) -> Result<Histogram, DetectError> {
    if genuine.is_empty() && anomalous.is_empty() {
        return Err(DetectError::EmptyInput);
    }
    let bins = bins.max(1);
    let all = genuine.iter().chain(anomalous);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let mut hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let count = |values: &[f64]| {
        let mut c = vec![0u64; bins];
        for v in values {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            c[i] += 1;
        }
        c
    };
    Ok(Histogram {
        edges,
        genuine: count(genuine),
        anomalous: count(anomalous),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::solver::Provenance;
    use num_complex::Complex64;

    fn flat_board(label: &str, level: f64) -> BoardSignature {
        let freqs: Vec<f64> = (1..=16).map(|i| i as f64 * 1e6).collect();
        BoardSignature {
            label: label.into(),
            provenance: Provenance::Simulated,
            z: freqs
                .iter()
                .map(|f| CMatrix::from_diag(&[Complex64::new(level, f * 1e-9)]))
                .collect(),
            freqs,
            z0: vec![50.0],
        }
    }

    #[test]
    fn identical_golden_boards() {
        let b = flat_board("g", 1.0);
        let m = fit_golden(&[b.clone(), b.clone(), b.clone()], FdConfig::default(), 3.0).unwrap();
        assert_eq!(m.intra_fds, vec![0.0; 3]);
        assert_eq!((m.mu, m.sigma, m.threshold), (0.0, 0.0, 0.0));
        let r = detect(&m, &b, Statistic::Min).unwrap();
        assert_eq!(r.verdict, Verdict::Genuine);
    }

    #[test]
    fn two_boards_warn_and_zero_sigma() {
        let m = fit_golden(&[flat_board("a", 1.0), flat_board("b", 1.1)], FdConfig::default(), 3.0).unwrap();
        assert_eq!(m.sigma, 0.0);
        assert_eq!(m.threshold, m.mu);
        assert_eq!(m.warnings.len(), 1);
        assert!(fit_golden(&[flat_board("a", 1.0)], FdConfig::default(), 3.0).is_err());
    }

    #[test]
    fn pair_count_and_k_zero() {
        let boards: Vec<_> = (0..5).map(|i| flat_board("g", 1.0 + 0.01 * i as f64)).collect();
        let m = fit_golden(&boards, FdConfig::default(), 0.0).unwrap();
        assert_eq!(m.intra_fds.len(), 10);
        assert_eq!(m.threshold, m.mu);
        let huge = fit_golden(&boards, FdConfig::default(), 1e9).unwrap();
        assert_eq!(detect(&huge, &flat_board("x", 100.0), Statistic::Min).unwrap().verdict, Verdict::Genuine);
        let r = detect(&m, &flat_board("x", 100.0), Statistic::Mean).unwrap();
        assert_eq!(r.verdict, Verdict::Anomalous);
        assert!(r.decision_statistic > r.threshold_used);
    }

    #[test]
    fn sample_sigma() {
        let s = IntraStats::from_fds(&[1.0, 2.0, 3.0, 4.0], 3.0);
        assert_eq!(s.mu, 2.5);
        assert!((s.sigma - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn knn_basics_and_ties() {
        let d = [(0.3, "a"), (0.1, "b"), (0.2, "a")];
        assert_eq!(knn_vote(&d, 1).unwrap(), "b");
        assert_eq!(knn_vote(&d, 3).unwrap(), "a");
        // three classes, one vote each: smallest summed distance wins
        let d = [(0.5, "a"), (0.4, "b"), (0.6, "c")];
        assert_eq!(knn_vote(&d, 3).unwrap(), "b");
        // equal distances: entry order decides
        let d = [(0.5, "x"), (0.5, "y"), (0.9, "z")];
        assert_eq!(knn_vote(&d, 1).unwrap(), "x");
        assert!(knn_vote(&d, 2).is_err());
        assert!(knn_vote(&d, 5).is_err());
        assert!(knn_vote(&[], 1).is_err());
    }

    #[test]
    fn knn_on_library() {
        let lib = LabeledLibrary {
            format_version: 1,
            entries: vec![
                LabeledBoard { class: "lo".into(), signature: flat_board("a", 1.0) },
                LabeledBoard { class: "hi".into(), signature: flat_board("b", 5.0) },
                LabeledBoard { class: "lo".into(), signature: flat_board("c", 1.1) },
            ],
        };
        assert_eq!(fd_knn(&lib, &flat_board("t", 5.0), 1, FdConfig::default()).unwrap(), "hi");
        assert_eq!(fd_knn(&lib, &flat_board("t", 4.0), 3, FdConfig::default()).unwrap(), "lo");
    }

    #[test]
    fn roc_extremes() {
        let r = roc(&[0.1, 0.2, 0.3], &[0.5, 0.6]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.best_accuracy, 1.0);
        let same = [0.1, 0.2, 0.2, 0.5];
        assert_eq!(roc(&same, &same).unwrap().auc, 0.5);
        let r = roc(&[0.5, 0.6], &[0.1, 0.2]).unwrap();
        assert_eq!(r.auc, 0.0);
        assert!(roc(&[], &[1.0]).is_err());
        let p = &r.points;
        assert_eq!((p[0].fpr, p[0].tpr), (0.0, 0.0));
        assert_eq!((p[p.len() - 1].fpr, p[p.len() - 1].tpr), (1.0, 1.0));
    }

    #[test]
    fn accuracy_formula() {
        assert_eq!(accuracy(10, 10, 0, 0).unwrap(), 1.0);
        assert_eq!(accuracy(0, 0, 10, 10).unwrap(), 0.0);
        assert_eq!(accuracy(52, 52, 48, 48).unwrap(), 0.52);
        assert!(accuracy(0, 0, 0, 0).is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.1, 0.2], &[0.9, 1.0], 4).unwrap();
        assert_eq!(h.edges.len(), 5);
        assert_eq!(h.genuine.iter().sum::<u64>(), 3);
        assert_eq!(h.anomalous, vec![0, 0, 0, 2]);
    }
}
