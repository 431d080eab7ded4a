//! Frequency-domain nodal analysis of a netlist into a port impedance matrix
//! per frequency.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::linalg::{CMatrix, Lu};
use crate::netlist::{BranchKind, Diagnostic, PdnNetlist, RlcBranch, GROUND};

/// Largest tolerated relative asymmetry of a solved Z matrix.
const RECIPROCITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("netlist is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidNetlist(Vec<Diagnostic>),
    #[error("node matrix is singular at {freq_hz} Hz")]
    Singular { freq_hz: f64 },
    #[error("impedance matrix is not reciprocal at {freq_hz} Hz (relative asymmetry {asymmetry:.3e})")]
    NonReciprocal { freq_hz: f64, asymmetry: f64 },
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
}

impl FrequencyGrid {
    /// `n` log-spaced points from `start` to `stop` inclusive.
    pub fn log(start: f64, stop: f64, n: usize) -> Result<Self, SolveError> {
        if !(start > 0.0 && stop > start && start.is_finite() && stop.is_finite()) || n < 2 {
            return Err(SolveError::InvalidGrid(format!(
                "need 0 < start < stop and n >= 2, got {start}..{stop} with {n} points"
            )));
        }
        let (a, b) = (start.log10(), stop.log10());
        let step = (b - a) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| 10f64.powf(a + step * i as f64)).collect();
        points[0] = start;
        points[n - 1] = stop;
        Ok(Self { points })
    }

    /// `n` evenly spaced points from `start` to `stop` inclusive.
    pub fn linear(start: f64, stop: f64, n: usize) -> Result<Self, SolveError> {
        if !(start > 0.0 && stop > start && stop.is_finite()) || n < 2 {
            return Err(SolveError::InvalidGrid(format!(
                "need 0 < start < stop and n >= 2, got {start}..{stop} with {n} points"
            )));
        }
        let step = (stop - start) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| start + step * i as f64).collect();
        points[n - 1] = stop;
        Ok(Self { points })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self, SolveError> {
        if points.is_empty() {
            return Err(SolveError::InvalidGrid("no frequency points".into()));
        }
        if points.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(SolveError::InvalidGrid("frequencies must be finite and > 0".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SolveError::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// 1024 log-spaced points over 300 kHz – 3 GHz.
    pub fn default_pdn() -> Self {
        Self::log(300e3, 3e9, 1024).expect("valid default grid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// True when two frequency lists agree point by point within 1e-9 relative.
pub fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    Measured,
}

/// Port impedance matrices of one board over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardSignature {
    pub label: String,
    pub provenance: Provenance,
    pub freqs: Vec<f64>,
    /// Reference impedance per port (carried for S-parameter export).
    pub z0: Vec<f64>,
    /// One `n_ports × n_ports` matrix per frequency.
    pub z: Vec<CMatrix>,
}

impl BoardSignature {
    pub fn n_ports(&self) -> usize {
        self.z0.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs.len()
    }

    /// Z[x][y] over frequency, 0-based port indices.
    pub fn trace(&self, x: usize, y: usize) -> Vec<Complex64> {
        self.z.iter().map(|m| m[(x, y)]).collect()
    }

    /// Keeps only the listed ports (0-based), in the given order.
    pub fn select_ports(&self, ports: &[usize]) -> BoardSignature {
        let n = ports.len();
        let z = self
            .z
            .iter()
            .map(|m| {
                let mut out = CMatrix::zeros(n);
                for (i, &pi) in ports.iter().enumerate() {
                    for (j, &pj) in ports.iter().enumerate() {
                        out[(i, j)] = m[(pi, pj)];
                    }
                }
                out
            })
            .collect();
        BoardSignature {
            label: self.label.clone(),
            provenance: self.provenance,
            freqs: self.freqs.clone(),
            z0: ports.iter().map(|&p| self.z0[p]).collect(),
            z,
        }
    }
}

fn series_impedance(b: &RlcBranch, omega: f64) -> Complex64 {
    let mut z = Complex64::new(b.r, omega * b.l);
    if b.c > 0.0 {
        z += Complex64::new(0.0, -1.0 / (omega * b.c));
    }
    z
}

/// Complex admittance of one branch at `freq_hz`.
pub fn branch_admittance(b: &RlcBranch, freq_hz: f64) -> Complex64 {
    admittance_at(b, 2.0 * PI * freq_hz)
}

fn admittance_at(b: &RlcBranch, omega: f64) -> Complex64 {
    match b.kind {
        BranchKind::Resistor => Complex64::new(1.0 / b.r, 0.0),
        BranchKind::Inductor => Complex64::new(0.0, -1.0 / (omega * b.l)),
        BranchKind::Capacitor => Complex64::new(0.0, omega * b.c),
        BranchKind::SeriesRlc => series_impedance(b, omega).inv(),
        BranchKind::ParallelRlc => {
            let mut y = Complex64::new(0.0, omega * b.c);
            if b.r > 0.0 {
                y += 1.0 / b.r;
            }
            if b.l > 0.0 {
                y += Complex64::new(0.0, -1.0 / (omega * b.l));
            }
            y
        }
    }
}

/// Netlist with node names resolved to matrix indices.
struct Compiled<'a> {
    n_nodes: usize,
    /// (branch, index of a, index of b); `None` is ground.
    stamps: Vec<(&'a RlcBranch, Option<usize>, Option<usize>)>,
    port_nodes: Vec<usize>,
}

impl<'a> Compiled<'a> {
    fn new(netlist: &'a PdnNetlist) -> Result<Self, SolveError> {
        let diags = netlist.validate();
        if !diags.is_empty() {
            return Err(SolveError::InvalidNetlist(diags));
        }
        let nodes = netlist.solver_nodes();
        let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let lookup = |n: &str| if n == GROUND { None } else { Some(index[n]) };
        let stamps = netlist
            .branches
            .iter()
            .map(|b| (b, lookup(&b.node_a), lookup(&b.node_b)))
            .collect();
        let mut ports = netlist.ports.clone();
        ports.sort_by_key(|p| p.index);
        let port_nodes = ports.iter().map(|p| index[p.node.as_str()]).collect();
        Ok(Self {
            n_nodes: nodes.len(),
            stamps,
            port_nodes,
        })
    }

    fn node_matrix(&self, omega: f64) -> CMatrix {
        let mut y = CMatrix::zeros(self.n_nodes);
        for &(b, ia, ib) in &self.stamps {
            let g = admittance_at(b, omega);
            if let Some(a) = ia {
                y[(a, a)] += g;
            }
            if let Some(b) = ib {
                y[(b, b)] += g;
            }
            if let (Some(a), Some(b)) = (ia, ib) {
                y[(a, b)] -= g;
                y[(b, a)] -= g;
            }
        }
        y
    }

    fn solve(&self, freq_hz: f64) -> Result<CMatrix, SolveError> {
        let omega = 2.0 * PI * freq_hz;
        let lu = Lu::factor(self.node_matrix(omega)).map_err(|_| SolveError::Singular { freq_hz })?;
        let n = self.port_nodes.len();
        let mut z = CMatrix::zeros(n);
        for (k, &nk) in self.port_nodes.iter().enumerate() {
            let v = lu.solve_unit(nk);
            for (x, &nx) in self.port_nodes.iter().enumerate() {
                z[(x, k)] = v[nx];
            }
        }
        if !z.is_finite() {
            return Err(SolveError::Singular { freq_hz });
        }
        let scale = z.max_abs();
        let asymmetry = if scale > 0.0 { z.max_asymmetry() / scale } else { 0.0 };
        if asymmetry > RECIPROCITY_TOL {
            return Err(SolveError::NonReciprocal { freq_hz, asymmetry });
        }
        Ok(z.symmetrized())
    }
}

/// Port impedance matrix at a single frequency.
pub fn solve_at_frequency(netlist: &PdnNetlist, freq_hz: f64) -> Result<CMatrix, SolveError> {
    if !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(SolveError::InvalidGrid(format!("frequency {freq_hz} must be > 0")));
    }
    Compiled::new(netlist)?.solve(freq_hz)
}

/// Port impedance matrices over the whole grid; frequencies are solved in
/// parallel and returned in grid order.
pub fn solve_z(netlist: &PdnNetlist, grid: &FrequencyGrid) -> Result<BoardSignature, SolveError> {
    let compiled = Compiled::new(netlist)?;
    let z = grid
        .points()
        .par_iter()
        .map(|&f| compiled.solve(f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(signature(netlist, grid, z))
}

/// Same as [`solve_z`] on the calling thread only. Used inside Monte-Carlo
/// loops that already parallelize over trials.
pub fn solve_z_serial(netlist: &PdnNetlist, grid: &FrequencyGrid) -> Result<BoardSignature, SolveError> {
    let compiled = Compiled::new(netlist)?;
    let z = grid
        .points()
        .iter()
        .map(|&f| compiled.solve(f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(signature(netlist, grid, z))
}

fn signature(netlist: &PdnNetlist, grid: &FrequencyGrid, z: Vec<CMatrix>) -> BoardSignature {
    let mut ports = netlist.ports.clone();
    ports.sort_by_key(|p| p.index);
    BoardSignature {
        label: netlist.label.clone(),
        provenance: Provenance::Simulated,
        freqs: grid.points().to_vec(),
        z0: ports.iter().map(|p| p.z0).collect(),
        z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::RlcBranch;

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1e-300)
    }

    #[test]
    fn single_capacitor_impedance() {
        let mut n = PdnNetlist::new("c");
        n.add_node("p");
        n.branches.push(RlcBranch::capacitor("c1", "p", GROUND, 1e-6));
        n.add_port("p", 50.0);
        let z = solve_at_frequency(&n, 1e3).unwrap();
        let want = Complex64::new(0.0, -1.0 / (2.0 * PI * 1e3 * 1e-6));
        assert!(close(z[(0, 0)], want, 1e-12), "{}", z[(0, 0)]);
        assert!((z[(0, 0)].im + 159.154_943).abs() < 1e-5);
    }

    #[test]
    fn series_rlc_resonance_is_resistive() {
        let (r, l, c): (f64, f64, f64) = (0.01, 1e-9, 1e-6);
        let f0 = 1.0 / (2.0 * PI * (l * c).sqrt());
        let mut n = PdnNetlist::new("rlc");
        n.add_node("p");
        n.branches.push(RlcBranch::series_rlc("s", "p", GROUND, r, l, c));
        n.add_port("p", 50.0);
        let z = solve_at_frequency(&n, f0).unwrap()[(0, 0)];
        assert!((z.re - r).abs() < 1e-12 && z.im.abs() < 1e-9, "{z}");
    }

    #[test]
    fn parallel_rlc_drops_absent_elements() {
        let b = RlcBranch::parallel_rlc("p", "a", GROUND, 0.0, 0.0, 1e-9);
        let y = branch_admittance(&b, 1e6);
        assert!(close(y, Complex64::new(0.0, 2.0 * PI * 1e6 * 1e-9), 1e-15));
    }

    #[test]
    fn element_stamps() {
        let c = RlcBranch::capacitor("c", "a", GROUND, 1e-9);
        assert!(close(branch_admittance(&c, 1e6), Complex64::new(0.0, 6.283_185_307e-3), 1e-9));
        let r = RlcBranch::resistor("r", "a", GROUND, 1.0);
        assert_eq!(branch_admittance(&r, 123.0), Complex64::new(1.0, 0.0));
        let l = RlcBranch::inductor("l", "a", GROUND, 1e-6);
        assert!(close(branch_admittance(&l, 1e6), Complex64::new(0.0, -1.0 / (2.0 * PI)), 1e-12));
        let chip = RlcBranch::series_rlc("s", "a", GROUND, 3.0, 21e-9, 0.9e-9);
        let f0 = 1.0 / (2.0 * PI * (21e-9 * 0.9e-9f64).sqrt());
        assert!((f0 / 36.6e6 - 1.0).abs() < 1e-3);
        let y = branch_admittance(&chip, f0);
        assert!(close(y, Complex64::new(1.0 / 3.0, 0.0), 1e-9), "{y}");
    }

    #[test]
    fn two_port_resistive_tee() {
        // p1 --R1-- m --R2-- p2, m --R3-- gnd
        let mut n = PdnNetlist::new("tee");
        for node in ["p1", "p2", "m"] {
            n.add_node(node);
        }
        n.branches.push(RlcBranch::resistor("r1", "p1", "m", 1.0));
        n.branches.push(RlcBranch::resistor("r2", "m", "p2", 2.0));
        n.branches.push(RlcBranch::resistor("r3", "m", GROUND, 3.0));
        n.add_port("p1", 50.0);
        n.add_port("p2", 50.0);
        let z = solve_at_frequency(&n, 1e3).unwrap();
        assert!(close(z[(0, 0)], Complex64::new(4.0, 0.0), 1e-12));
        assert!(close(z[(1, 1)], Complex64::new(5.0, 0.0), 1e-12));
        assert!(close(z[(0, 1)], Complex64::new(3.0, 0.0), 1e-12));
        assert_eq!(z[(0, 1)], z[(1, 0)]);
    }

    #[test]
    fn invalid_netlist_is_rejected() {
        let mut n = PdnNetlist::new("bad");
        n.add_node("p");
        n.add_port("p", 50.0);
        assert!(matches!(solve_at_frequency(&n, 1e6), Err(SolveError::InvalidNetlist(_))));
    }

    #[test]
    fn grids() {
        let g = FrequencyGrid::default_pdn();
        assert_eq!(g.len(), 1024);
        assert_eq!(g.points()[0], 300e3);
        assert_eq!(g.points()[1023], 3e9);
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        assert!(FrequencyGrid::from_points(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::log(0.0, 1.0, 10).is_err());
        let l = FrequencyGrid::linear(1.0, 2.0, 3).unwrap();
        assert_eq!(l.points(), &[1.0, 1.5, 2.0]);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let mut n = PdnNetlist::new("rc");
        n.add_node("p");
        n.branches.push(RlcBranch::series_rlc("s", "p", GROUND, 0.1, 1e-9, 1e-6));
        n.branches.push(RlcBranch::resistor("r", "p", GROUND, 10.0));
        n.add_port("p", 50.0);
        let g = FrequencyGrid::log(1e3, 1e9, 64).unwrap();
        assert_eq!(solve_z(&n, &g).unwrap(), solve_z_serial(&n, &g).unwrap());
    }
}
