//! CSV tables for signatures, curves, ROC curves, histograms and FD′
//! matrices.

use num_complex::Complex64;
use std::fmt::Write as _;

use crate::detector::{Histogram, RocCurve};
use crate::frechet::ProfileCurve;
use crate::linalg::CMatrix;
use crate::solver::{BoardSignature, Provenance};

pub const SIGNATURE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("signature csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("signature csv line {line}: {message}")]
    Content { line: u64, message: String },
}

/// Signature as CSV rows `freq_hz,x,y,re_ohm,im_ohm` (1-based ports, every
/// matrix entry), preceded by one `#` metadata line.
pub fn signature_to_csv(sig: &BoardSignature) -> String {
    let provenance = match sig.provenance {
        Provenance::Simulated => "simulated",
        Provenance::Measured => "measured",
    };
    let z0: Vec<String> = sig.z0.iter().map(|z| z.to_string()).collect();
    let mut out = format!(
        "# format_version={SIGNATURE_FORMAT_VERSION} label={} provenance={provenance} z0={}\n",
        sig.label.replace(char::is_whitespace, "_"),
        z0.join(";")
    );
    out.push_str("freq_hz,x,y,re_ohm,im_ohm\n");
    let n = sig.n_ports();
    for (f, m) in sig.freqs.iter().zip(&sig.z) {
        for x in 0..n {
            for y in 0..n {
                let z = m[(x, y)];
                let _ = writeln!(out, "{f},{},{},{},{}", x + 1, y + 1, z.re, z.im);
            }
        }
    }
    out
}

fn content(line: u64, message: impl Into<String>) -> ReportError {
    ReportError::Content {
        line,
        message: message.into(),
    }
}

/// Reads [`signature_to_csv`] output. The metadata line is optional; without
/// it the label is `fallback_label`, z0 is 50 Ω and provenance is measured.
pub fn signature_from_csv(text: &str, fallback_label: &str) -> Result<BoardSignature, ReportError> {
    let mut label = fallback_label.to_string();
    let mut provenance = Provenance::Measured;
    let mut z0: Option<Vec<f64>> = None;
    if let Some(meta) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("format_version", v)) if v != SIGNATURE_FORMAT_VERSION.to_string() => {
                    return Err(content(1, format!("unsupported format_version {v}")));
                }
                Some(("label", v)) => label = v.to_string(),
                Some(("provenance", "simulated")) => provenance = Provenance::Simulated,
                Some(("z0", v)) => {
                    let parsed = v
                        .split(';')
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| content(1, format!("bad z0 list `{v}`")))?;
                    z0 = Some(parsed);
                }
                _ => {}
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(u64, f64, usize, usize, Complex64)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 5 {
            return Err(content(line, format!("expected 5 fields, found {}", rec.len())));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| content(line, format!("`{}` is not a number", &rec[i])));
        let port = |i: usize| match rec[i].parse::<usize>() {
            Ok(p) if p >= 1 => Ok(p),
            _ => Err(content(line, format!("`{}` is not a port number", &rec[i]))),
        };
        rows.push((line, num(0)?, port(1)?, port(2)?, Complex64::new(num(3)?, num(4)?)));
    }
    let n = rows.iter().map(|r| r.2.max(r.3)).max().ok_or_else(|| content(2, "no data rows"))?;
    let mut freqs: Vec<f64> = Vec::new();
    let mut z: Vec<CMatrix> = Vec::new();
    let mut filled: Vec<usize> = Vec::new();
    for (line, f, x, y, v) in rows {
        if freqs.last() != Some(&f) {
            if let Some(&last) = freqs.last() {
                if f <= last {
                    return Err(content(line, format!("frequency {f} is not above {last}")));
                }
            }
            if f.is_nan() || f <= 0.0 {
                return Err(content(line, format!("frequency {f} must be > 0")));
            }
            freqs.push(f);
            z.push(CMatrix::zeros(n));
            filled.push(0);
        }
        let k = z.len() - 1;
        z[k][(x - 1, y - 1)] = v;
        filled[k] += 1;
    }
    if let Some(i) = filled.iter().position(|&c| c != n * n) {
        return Err(content(0, format!("frequency {} has {} of {} entries", freqs[i], filled[i], n * n)));
    }
    let z0 = z0.unwrap_or_else(|| vec![50.0; n]);
    if z0.len() != n {
        return Err(content(1, format!("z0 lists {} ports, data has {n}", z0.len())));
    }
    Ok(BoardSignature {
        label,
        provenance,
        freqs,
        z0,
        z,
    })
}

pub fn curve_to_csv(curve: &ProfileCurve) -> String {
    let mut out = String::from("u,v\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{}", p[0], p[1]);
    }
    out
}

pub fn roc_to_csv(roc: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in &roc.points {
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    out
}

pub fn histogram_to_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,genuine,anomalous\n");
    for i in 0..h.genuine.len() {
        let _ = writeln!(out, "{},{},{},{}", h.edges[i], h.edges[i + 1], h.genuine[i], h.anomalous[i]);
    }
    out
}

/// Square FD′ table with a label column and a header row.
pub fn fd_matrix_to_csv(labels: &[String], values: &[Vec<f64>]) -> String {
    let mut out = String::from("board");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(values) {
        out.push_str(l);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
