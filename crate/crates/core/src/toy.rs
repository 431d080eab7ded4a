//! Reduced three-port example network with closed-form Z11 and Z13.
//!
//! ```text
//!        Zd
//!   P1 ------ P2     Za: P1-gnd   Zb: P2-gnd
//!    |  \            Zc: P3-gnd   Zd: P1-P2
//!    |   Ze          Ze: P1-P3
//!    |    \
//!    Za    P3
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::netlist::{PdnNetlist, RlcBranch, GROUND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyNetwork {
    pub za: Complex64,
    pub zb: Complex64,
    pub zc: Complex64,
    pub zd: Complex64,
    pub ze: Complex64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("toy network: zero denominator in {0}")]
pub struct DomainError(pub &'static str);

fn parallel(a: Complex64, b: Complex64, what: &'static str) -> Result<Complex64, DomainError> {
    let den = a + b;
    if den.norm() == 0.0 {
        return Err(DomainError(what));
    }
    Ok(a * b / den)
}

impl ToyNetwork {
    pub fn uniform(z: Complex64) -> Self {
        Self { za: z, zb: z, zc: z, zd: z, ze: z }
    }

    /// Za ∥ (Zb + Zd): everything seen from P1 except the Ze–Zc arm.
    fn left(&self) -> Result<Complex64, DomainError> {
        parallel(self.za, self.zb + self.zd, "Za ∥ (Zb + Zd)")
    }

    /// Realizes every element as a series R-L or R-C branch at `freq_hz`.
    /// Real parts must be ≥ 0 and no element may be exactly zero. Ports 1, 2
    /// and 3 sit on P1, P2 and P3.
    pub fn to_netlist(&self, freq_hz: f64) -> PdnNetlist {
        let omega = 2.0 * PI * freq_hz;
        let element = |id: &str, a: &str, b: &str, z: Complex64| {
            assert!(z.re >= 0.0, "element {id} has negative resistance");
            let (l, c) = if z.im > 0.0 {
                (z.im / omega, 0.0)
            } else if z.im < 0.0 {
                (0.0, -1.0 / (omega * z.im))
            } else {
                (0.0, 0.0)
            };
            RlcBranch::series_rlc(id, a, b, z.re, l, c)
        };
        let mut n = PdnNetlist::new("toy");
        for node in ["P1", "P2", "P3"] {
            n.add_node(node);
        }
        n.branches = vec![
            element("Za", "P1", GROUND, self.za),
            element("Zb", "P2", GROUND, self.zb),
            element("Zc", "P3", GROUND, self.zc),
            element("Zd", "P1", "P2", self.zd),
            element("Ze", "P1", "P3", self.ze),
        ];
        for node in ["P1", "P2", "P3"] {
            n.add_port(node, 50.0);
        }
        n
    }
}

/// Self-impedance at P1: Za ∥ (Zb + Zd) ∥ (Zc + Ze).
pub fn toy_z11(t: &ToyNetwork) -> Result<Complex64, DomainError> {
    parallel(t.left()?, t.zc + t.ze, "Z11")
}

/// Transfer impedance P1 → P3: X·Zc / (X + Zc + Ze) with X = Za ∥ (Zb + Zd).
pub fn toy_z13(t: &ToyNetwork) -> Result<Complex64, DomainError> {
    let x = t.left()?;
    let den = x + t.zc + t.ze;
    if den.norm() == 0.0 {
        return Err(DomainError("Z13"));
    }
    Ok(x * t.zc / den)
}
