//! Curve embedding of impedance profiles, discrete Frechet distance, and the
//! port-pair aggregate FD′.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::solver::{same_grid, BoardSignature};

/// |Z| floor applied before taking log10.
pub const MAGNITUDE_FLOOR: f64 = 1e-12;

/// A profile as points `(u, v)`: normalized log-frequency and log10 |Z|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub points: Vec<[f64; 2]>,
}

impl ProfileCurve {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn u_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1][0] > w[0][0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
    Linf,
}

impl Norm {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Norm::L1 => values.iter().sum(),
            Norm::L2 => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Linf => values.iter().copied().fold(0.0, f64::max),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            other => Err(format!("unknown norm `{other}` (expected l1, l2 or linf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    #[serde(default)]
    pub norm: Norm,
}

/// Monotone coupling between two curves as 0-based index pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingPath {
    pub steps: Vec<(usize, usize)>,
}

impl CouplingPath {
    /// Starts at (0, 0), ends at the last points, and every step advances
    /// one or both indices by exactly one.
    pub fn is_valid(&self, len_a: usize, len_b: usize) -> bool {
        let s = &self.steps;
        if s.first() != Some(&(0, 0)) || s.last() != Some(&(len_a - 1, len_b - 1)) {
            return false;
        }
        s.windows(2).all(|w| {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrechetError {
    #[error("curve is empty")]
    EmptyCurve,
    #[error("port pair ({x}, {y}) outside 1..={n_ports} or not x <= y")]
    PortOutOfRange { x: usize, y: usize, n_ports: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Embeds |Z[x][y]| (1-based ports, x ≤ y) as a [`ProfileCurve`].
pub fn embed_profile(sig: &BoardSignature, x: usize, y: usize) -> Result<ProfileCurve, FrechetError> {
    let n = sig.n_ports();
    if x < 1 || x > y || y > n {
        return Err(FrechetError::PortOutOfRange { x, y, n_ports: n });
    }
    if sig.freqs.is_empty() {
        return Err(FrechetError::EmptyCurve);
    }
    let lo = sig.freqs[0].log10();
    let span = sig.freqs[sig.freqs.len() - 1].log10() - lo;
    let points = sig
        .freqs
        .iter()
        .zip(&sig.z)
        .map(|(f, m)| {
            let u = if span > 0.0 { (f.log10() - lo) / span } else { 0.0 };
            let v = m[(x - 1, y - 1)].norm().max(MAGNITUDE_FLOOR).log10();
            [u, v]
        })
        .collect();
    Ok(ProfileCurve { points })
}

#[inline]
fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    let (du, dv) = (p[0] - q[0], p[1] - q[1]);
    du * du + dv * dv
}

/// Squared discrete Frechet distance by the rolling-row DP.
///
/// For equal-length curves with increasing `u`, the diagonal coupling gives
/// an upper bound `ub`; cells whose u-gap alone exceeds it can never lie on
/// an optimal coupling, so each row only visits a band around the diagonal.
/// The result is bit-identical to the full DP.
fn frechet_sq(a: &[[f64; 2]], b: &[[f64; 2]], banded: bool) -> f64 {
    let m = b.len();
    let ub2 = if banded {
        a.iter().zip(b).map(|(p, q)| dist2(*p, *q)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    // band of the row currently stored in `cur` (stale, two rows back)
    let (mut stale_lo, mut stale_hi) = (0, 0);
    let (mut prev_lo, mut prev_hi) = (0, 0);
    let (mut lo, mut hi) = (0usize, 0usize);
    for (i, &p) in a.iter().enumerate() {
        if banded {
            while lo < m && b[lo][0] < p[0] && (p[0] - b[lo][0]).powi(2) > ub2 {
                lo += 1;
            }
            if hi < lo {
                hi = lo;
            }
            while hi < m && (b[hi][0] <= p[0] || (b[hi][0] - p[0]).powi(2) <= ub2) {
                hi += 1;
            }
        } else {
            hi = m;
        }
        cur[stale_lo..stale_hi].fill(f64::INFINITY);
        for j in lo..hi {
            let d = dist2(p, b[j]);
            let best = if i == 0 && j == 0 {
                f64::NEG_INFINITY
            } else {
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let (up, diag) = if i > 0 {
                    (prev[j], if j > 0 { prev[j - 1] } else { f64::INFINITY })
                } else {
                    (f64::INFINITY, f64::INFINITY)
                };
                up.min(left).min(diag)
            };
            cur[j] = d.max(best);
        }
        std::mem::swap(&mut prev, &mut cur);
        stale_lo = prev_lo;
        stale_hi = prev_hi;
        prev_lo = lo;
        prev_hi = hi;
    }
    prev[m - 1]
}

/// Discrete Frechet distance with Euclidean point distance in (u, v).
pub fn frechet(a: &ProfileCurve, b: &ProfileCurve) -> Result<f64, FrechetError> {
    if a.is_empty() || b.is_empty() {
        return Err(FrechetError::EmptyCurve);
    }
    let banded = a.len() == b.len() && a.u_increasing() && b.u_increasing();
    Ok(frechet_sq(&a.points, &b.points, banded).sqrt())
}

/// Frechet distance together with one optimal coupling.
pub fn frechet_with_coupling(a: &ProfileCurve, b: &ProfileCurve) -> Result<(f64, CouplingPath), FrechetError> {
    if a.is_empty() || b.is_empty() {
        return Err(FrechetError::EmptyCurve);
    }
    let (n, m) = (a.len(), b.len());
    let mut ca = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = dist2(a.points[i], b.points[j]);
            let best = match (i, j) {
                (0, 0) => f64::NEG_INFINITY,
                (0, _) => ca[j - 1],
                (_, 0) => ca[(i - 1) * m],
                _ => ca[(i - 1) * m + j].min(ca[i * m + j - 1]).min(ca[(i - 1) * m + j - 1]),
            };
            ca[i * m + j] = d.max(best);
        }
    }
    let mut steps = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let options = [(i - 1, j - 1), (i - 1, j), (i, j - 1)];
                *options
                    .iter()
                    .min_by(|p, q| ca[p.0 * m + p.1].total_cmp(&ca[q.0 * m + q.1]))
                    .expect("three options")
            }
        };
        steps.push((i, j));
    }
    steps.reverse();
    Ok((ca[n * m - 1].sqrt(), CouplingPath { steps }))
}

/// All (x, y) with 1 ≤ x ≤ y ≤ n, lexicographic.
pub fn all_port_pairs(n: usize) -> Vec<(usize, usize)> {
    (1..=n).flat_map(|x| (x..=n).map(move |y| (x, y))).collect()
}

/// Port pairs among a subset of (1-based) ports, lexicographic by the
/// subset's own order.
pub fn subset_port_pairs(ports: &[usize]) -> Vec<(usize, usize)> {
    let mut sorted = ports.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
        .iter()
        .enumerate()
        .flat_map(|(i, &x)| sorted[i..].iter().map(move |&y| (x, y)))
        .collect()
}

/// A board with every port-pair profile embedded once, for repeated FD′
/// evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedBoard {
    pub label: String,
    pub n_ports: usize,
    pub freqs: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    curves: Vec<ProfileCurve>,
}

impl EmbeddedBoard {
    pub fn new(sig: &BoardSignature) -> Result<Self, FrechetError> {
        let pairs = all_port_pairs(sig.n_ports());
        let curves = pairs
            .iter()
            .map(|&(x, y)| embed_profile(sig, x, y))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            label: sig.label.clone(),
            n_ports: sig.n_ports(),
            freqs: sig.freqs.clone(),
            pairs,
            curves,
        })
    }

    pub fn curve(&self, x: usize, y: usize) -> Result<&ProfileCurve, FrechetError> {
        let (x, y) = (x.min(y), x.max(y));
        self.pairs
            .iter()
            .position(|&p| p == (x, y))
            .map(|i| &self.curves[i])
            .ok_or(FrechetError::PortOutOfRange { x, y, n_ports: self.n_ports })
    }

    fn check_shape(&self, other: &Self) -> Result<(), FrechetError> {
        if self.n_ports != other.n_ports {
            return Err(FrechetError::ShapeMismatch(format!(
                "{} has {} ports, {} has {}",
                self.label, self.n_ports, other.label, other.n_ports
            )));
        }
        if !same_grid(&self.freqs, &other.freqs) {
            return Err(FrechetError::ShapeMismatch(format!(
                "{} and {} use different frequency grids",
                self.label, other.label
            )));
        }
        Ok(())
    }
}

/// Per-pair Frechet distances between two embedded boards, in the order of
/// `pairs`.
pub fn pair_distances(
    a: &EmbeddedBoard,
    b: &EmbeddedBoard,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>, FrechetError> {
    a.check_shape(b)?;
    pairs
        .iter()
        .map(|&(x, y)| frechet(a.curve(x, y)?, b.curve(x, y)?))
        .collect()
}

/// Aggregates per-pair distances: ‖fds‖ / count.
pub fn aggregate(fds: &[f64], cfg: &FdConfig) -> f64 {
    if fds.is_empty() {
        return 0.0;
    }
    cfg.norm.apply(fds) / fds.len() as f64
}

/// FD′ restricted to the given port pairs.
pub fn fd_prime_pairs(
    a: &EmbeddedBoard,
    b: &EmbeddedBoard,
    cfg: &FdConfig,
    pairs: &[(usize, usize)],
) -> Result<f64, FrechetError> {
    if pairs.is_empty() {
        return Err(FrechetError::ShapeMismatch("no port pairs selected".into()));
    }
    Ok(aggregate(&pair_distances(a, b, pairs)?, cfg))
}

/// FD′ over all (n²+n)/2 port pairs of two embedded boards.
pub fn fd_prime_embedded(a: &EmbeddedBoard, b: &EmbeddedBoard, cfg: &FdConfig) -> Result<f64, FrechetError> {
    a.check_shape(b)?;
    let fds = a
        .pairs
        .par_iter()
        .map(|&(x, y)| frechet(a.curve(x, y)?, b.curve(x, y)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&fds, cfg))
}

/// FD′ between two signatures.
pub fn fd_prime(b1: &BoardSignature, b2: &BoardSignature, cfg: &FdConfig) -> Result<f64, FrechetError> {
    if b1.n_ports() != b2.n_ports() || !same_grid(&b1.freqs, &b2.freqs) {
        return Err(FrechetError::ShapeMismatch(format!(
            "{} ({} ports, {} points) vs {} ({} ports, {} points)",
            b1.label,
            b1.n_ports(),
            b1.n_freqs(),
            b2.label,
            b2.n_ports(),
            b2.n_freqs()
        )));
    }
    fd_prime_embedded(&EmbeddedBoard::new(b1)?, &EmbeddedBoard::new(b2)?, cfg)
}
