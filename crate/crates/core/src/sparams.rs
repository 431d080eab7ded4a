//! Conversions between impedance and scattering parameters with real,
//! per-port reference impedances, plus the shunt-through transfer-impedance
//! formula.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::solver::{BoardSignature, Provenance};

/// Scattering parameters over frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SParamSweep {
    pub label: String,
    pub freqs: Vec<f64>,
    pub z0: Vec<f64>,
    pub s: Vec<CMatrix>,
}

impl SParamSweep {
    pub fn n_ports(&self) -> usize {
        self.z0.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConversionError {
    #[error("conversion matrix is singular at {freq_hz} Hz")]
    Singular { freq_hz: f64 },
    #[error("reference impedance {0} must be finite and > 0")]
    BadReference(f64),
    #[error("shunt-through denominator is zero")]
    ZeroDenominator,
}

fn check_z0(z0: &[f64]) -> Result<(), ConversionError> {
    match z0.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
        Some(&bad) => Err(ConversionError::BadReference(bad)),
        None => Ok(()),
    }
}

fn diag(values: impl Iterator<Item = f64>) -> CMatrix {
    let d: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
    CMatrix::from_diag(&d)
}

/// S = R⁻¹ (Z − Z0)(Z + Z0)⁻¹ R with R = diag(√z0).
pub fn z_to_s_matrix(z: &CMatrix, z0: &[f64], freq_hz: f64) -> Result<CMatrix, ConversionError> {
    check_z0(z0)?;
    let g = diag(z0.iter().copied());
    let r = diag(z0.iter().map(|v| v.sqrt()));
    let r_inv = diag(z0.iter().map(|v| 1.0 / v.sqrt()));
    let inv = z.add(&g).inverse().map_err(|_| ConversionError::Singular { freq_hz })?;
    Ok(r_inv.mul(&z.sub(&g).mul(&inv)).mul(&r))
}

/// Z = (I − S′)⁻¹ (I + S′) Z0 with S′ = R S R⁻¹.
pub fn s_to_z_matrix(s: &CMatrix, z0: &[f64], freq_hz: f64) -> Result<CMatrix, ConversionError> {
    check_z0(z0)?;
    let n = s.dim();
    let g = diag(z0.iter().copied());
    let r = diag(z0.iter().map(|v| v.sqrt()));
    let r_inv = diag(z0.iter().map(|v| 1.0 / v.sqrt()));
    let sp = r.mul(s).mul(&r_inv);
    let id = CMatrix::identity(n);
    let inv = id.sub(&sp).inverse().map_err(|_| ConversionError::Singular { freq_hz })?;
    Ok(inv.mul(&id.add(&sp)).mul(&g))
}

pub fn z_to_s(sig: &BoardSignature) -> Result<SParamSweep, ConversionError> {
    let s = sig
        .z
        .iter()
        .zip(&sig.freqs)
        .map(|(z, &f)| z_to_s_matrix(z, &sig.z0, f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SParamSweep {
        label: sig.label.clone(),
        freqs: sig.freqs.clone(),
        z0: sig.z0.clone(),
        s,
    })
}

/// Inverse of [`z_to_s`]. The result is not symmetrized, so a round trip
/// reproduces the input to rounding error.
pub fn s_to_z(sweep: &SParamSweep, provenance: Provenance) -> Result<BoardSignature, ConversionError> {
    let z = sweep
        .s
        .iter()
        .zip(&sweep.freqs)
        .map(|(s, &f)| s_to_z_matrix(s, &sweep.z0, f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BoardSignature {
        label: sweep.label.clone(),
        provenance,
        freqs: sweep.freqs.clone(),
        z0: sweep.z0.clone(),
        z,
    })
}

/// Transfer impedance from a shunt-through S21 measurement:
///
/// Z21 = S21 · (Z0/2) · (1 + Z11/Z0 + Z22/Z0 + Z11·Z22/Z0²) / (1 + S21·Z11/(2·Z0))
///
/// This is exact when both probes sit on the same node, i.e. Z21 = Z11.
pub fn shunt_through_z21(
    s21: Complex64,
    z11: Complex64,
    z22: Complex64,
    z0: f64,
) -> Result<Complex64, ConversionError> {
    let den = 1.0 + s21 * z11 / (2.0 * z0);
    if den.norm() == 0.0 {
        return Err(ConversionError::ZeroDenominator);
    }
    let num = 1.0 + z11 / z0 + z22 / z0 + (z11 / z0) * (z22 / z0);
    Ok(s21 * (z0 / 2.0) * num / den)
}
