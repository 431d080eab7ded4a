//! Canonical board factories and chip parasitic presets.

use serde::{Deserialize, Serialize};

use crate::netlist::{AnomalySpec, CapacitorSpec, PdnNetlist, RlcBranch};

/// Parasitics of an 8-pin microcontroller package (R, L, C).
pub const ATTINY85_RLC: (f64, f64, f64) = (3.0, 21e-9, 0.9e-9);
/// Parasitics of a SOT-23 package (R, L, C).
pub const SOT23_RLC: (f64, f64, f64) = (3.0, 1.4e-9, 0.12e-12);

/// Number of positions along the decap chain (1 = VRM, 6 = SoC).
pub const CHAIN_LEN: usize = 6;

/// Element values for the decoupling-capacitor chain board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecapChainParams {
    /// Series resistance of each wireline segment between positions.
    pub segment_r: f64,
    /// Series inductance of each wireline segment.
    pub segment_l: f64,
    pub esr: f64,
    pub esl: f64,
    /// (chain index, nominal capacitance, count) per group.
    pub groups: Vec<(usize, f64, usize)>,
}

impl Default for DecapChainParams {
    fn default() -> Self {
        Self {
            segment_r: 0.02,
            segment_l: 30e-9,
            esr: 1.2,
            esl: 10e-9,
            groups: vec![(2, 10e-6, 1), (3, 4.7e-6, 1), (4, 470e-9, 2), (5, 47e-9, 2)],
        }
    }
}

impl DecapChainParams {
    /// Multiplies every group's capacitance by `factor`.
    pub fn with_cap_scale(mut self, factor: f64) -> Self {
        for g in &mut self.groups {
            g.1 *= factor;
        }
        self
    }
}

/// Node name of chain position `index` (1-based).
pub fn chain_node(index: usize) -> String {
    format!("n{index}")
}

/// Decap chain with ports at the given chain positions, numbered in order.
/// The VRM at position 1 is unpowered and therefore absent (open).
pub fn decap_chain_board(params: &DecapChainParams, doubled: bool, port_positions: &[usize]) -> PdnNetlist {
    let mut n = PdnNetlist::new(if doubled { "decap-chain-12" } else { "decap-chain-6" });
    for i in 1..=CHAIN_LEN {
        n.add_node(chain_node(i));
    }
    for i in 1..CHAIN_LEN {
        n.branches.push(RlcBranch::series_rlc(
            format!("w{i}{}", i + 1),
            chain_node(i),
            chain_node(i + 1),
            params.segment_r,
            params.segment_l,
            0.0,
        ));
    }
    for &(index, c, count) in &params.groups {
        let spec = CapacitorSpec {
            nominal_c: c,
            esr: params.esr,
            esl: params.esl,
            count: if doubled { 2 * count } else { count },
        };
        n.branches.extend(spec.expand(&format!("c{index}"), &chain_node(index)));
    }
    for &p in port_positions {
        n.add_port(chain_node(p), 50.0);
    }
    n
}

/// Default decap chain with a port at every position.
pub fn make_decap_chain_board(doubled: bool) -> PdnNetlist {
    let all: Vec<usize> = (1..=CHAIN_LEN).collect();
    decap_chain_board(&DecapChainParams::default(), doubled, &all)
}

/// A chip with the given (R, L, C) parasitics at chain position `index`.
pub fn chip_at_position(id: &str, index: usize, rlc: (f64, f64, f64)) -> AnomalySpec {
    AnomalySpec::chip_at(id, chain_node(index), rlc.0, rlc.1, rlc.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::AnomalyKind;

    #[test]
    fn group_counts() {
        let single = make_decap_chain_board(false);
        let double = make_decap_chain_board(true);
        assert_eq!(single.capacitor_count(), 6);
        assert_eq!(double.capacitor_count(), 12);
        let per_node = |n: &PdnNetlist| -> Vec<usize> {
            (1..=6)
                .map(|i| n.branches.iter().filter(|b| b.c > 0.0 && b.node_a == chain_node(i)).count())
                .collect()
        };
        assert_eq!(per_node(&single), vec![0, 1, 1, 2, 2, 0]);
        assert_eq!(per_node(&double), vec![0, 2, 2, 4, 4, 0]);
    }

    #[test]
    fn both_variants_validate() {
        assert!(make_decap_chain_board(false).validate().is_empty());
        assert!(make_decap_chain_board(true).validate().is_empty());
    }

    #[test]
    fn non_capacitor_branches_identical() {
        let strip = |n: PdnNetlist| n.branches.into_iter().filter(|b| b.c == 0.0).collect::<Vec<_>>();
        assert_eq!(strip(make_decap_chain_board(false)), strip(make_decap_chain_board(true)));
    }

    #[test]
    fn chip_anomaly_at_soc() {
        let mut n = make_decap_chain_board(false);
        n.anomalies.push(chip_at_position("attiny85", 6, ATTINY85_RLC));
        let m = n.apply_anomalies(&["attiny85"]).unwrap();
        let b = m.branch("attiny85").unwrap();
        assert_eq!((b.r, b.l, b.c), (3.0, 21e-9, 0.9e-9));
        assert_eq!(b.node_a, "n6");
        assert_eq!(m.branches.len(), n.branches.len() + 1);
    }

    #[test]
    fn sampling_resistor_in_series() {
        let mut n = make_decap_chain_board(false);
        n.anomalies.push(AnomalySpec {
            kind: AnomalyKind::SeriesRInBranch,
            ..AnomalySpec::chip_at("rsense", "w56", 1.0, 0.0, 0.0)
        });
        let m = n.apply_anomalies(&["rsense"]).unwrap();
        assert_eq!(m.branches.len(), n.branches.len() + 1);
        assert!(m.validate().is_empty());
    }
}
