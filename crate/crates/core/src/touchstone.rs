//! Touchstone v1.0 (`.sNp`) reading and writing.
//!
//! Z-parameter data is read and written in ohms. S-parameter documents
//! convert to impedance with the document's reference resistance on every
//! port.

use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::Path;

use crate::linalg::CMatrix;
use crate::solver::{BoardSignature, Provenance};
use crate::sparams::{s_to_z, z_to_s, ConversionError, SParamSweep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    pub fn multiplier(self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            FreqUnit::Hz => "HZ",
            FreqUnit::KHz => "KHZ",
            FreqUnit::MHz => "MHZ",
            FreqUnit::GHz => "GHZ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    S,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real, imaginary.
    Ri,
    /// Magnitude, angle in degrees.
    Ma,
    /// 20·log10 magnitude, angle in degrees.
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchstoneOptions {
    pub unit: FreqUnit,
    pub kind: ParamKind,
    pub format: DataFormat,
    pub reference: f64,
}

impl Default for TouchstoneOptions {
    /// The v1.0 defaults: `# GHZ S MA R 50`.
    fn default() -> Self {
        Self {
            unit: FreqUnit::GHz,
            kind: ParamKind::S,
            format: DataFormat::Ma,
            reference: 50.0,
        }
    }
}

impl TouchstoneOptions {
    pub fn option_line(&self) -> String {
        let kind = match self.kind {
            ParamKind::S => "S",
            ParamKind::Z => "Z",
        };
        let format = match self.format {
            DataFormat::Ri => "RI",
            DataFormat::Ma => "MA",
            DataFormat::Db => "DB",
        };
        format!("# {} {kind} {format} R {}", self.unit.keyword(), self.reference)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TouchstoneDocument {
    pub options: TouchstoneOptions,
    pub n_ports: usize,
    /// Frequencies in Hz.
    pub freqs: Vec<f64>,
    /// One matrix per frequency, S (unitless) or Z (ohms).
    pub data: Vec<CMatrix>,
    /// Comment lines without the leading `!`.
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TouchstoneError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot infer port count from `{0}` (expected a .sNp extension)")]
    Extension(String),
    #[error(transparent)]
    Conversion(#[from] ConversionError),
}

fn syntax(line: usize, message: impl Into<String>) -> TouchstoneError {
    TouchstoneError::Syntax {
        line,
        message: message.into(),
    }
}

/// Port count from a `.sNp` file name.
pub fn n_ports_from_path(path: &Path) -> Result<usize, TouchstoneError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    ext.strip_prefix('s')
        .and_then(|r| r.strip_suffix('p'))
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .ok_or_else(|| TouchstoneError::Extension(path.display().to_string()))
}

fn parse_options(line_no: usize, text: &str) -> Result<TouchstoneOptions, TouchstoneError> {
    let mut opts = TouchstoneOptions::default();
    let mut tokens = text.split_whitespace().skip(1);
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opts.unit = FreqUnit::Hz,
            "KHZ" => opts.unit = FreqUnit::KHz,
            "MHZ" => opts.unit = FreqUnit::MHz,
            "GHZ" => opts.unit = FreqUnit::GHz,
            "S" => opts.kind = ParamKind::S,
            "Z" => opts.kind = ParamKind::Z,
            "Y" | "H" | "G" => return Err(syntax(line_no, format!("parameter type {tok} is not supported (use S or Z)"))),
            "RI" => opts.format = DataFormat::Ri,
            "MA" => opts.format = DataFormat::Ma,
            "DB" => opts.format = DataFormat::Db,
            "R" => {
                let v = tokens
                    .next()
                    .ok_or_else(|| syntax(line_no, "R needs a reference resistance"))?;
                let r: f64 = v
                    .parse()
                    .map_err(|_| syntax(line_no, format!("bad reference resistance `{v}`")))?;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(syntax(line_no, format!("reference resistance {r} must be > 0")));
                }
                opts.reference = r;
            }
            other => return Err(syntax(line_no, format!("unknown option `{other}`"))),
        }
    }
    Ok(opts)
}

fn to_complex(format: DataFormat, a: f64, b: f64) -> Complex64 {
    match format {
        DataFormat::Ri => Complex64::new(a, b),
        DataFormat::Ma => Complex64::from_polar(a, b.to_radians()),
        DataFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

fn from_complex(format: DataFormat, z: Complex64) -> (f64, f64) {
    match format {
        DataFormat::Ri => (z.re, z.im),
        DataFormat::Ma => (z.norm(), z.arg().to_degrees()),
        DataFormat::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
    }
}

/// Matrix position of the k-th value in a record. Two-port files use the
/// column-major S11 S21 S12 S22 order; all others are row-major.
fn position(n: usize, k: usize) -> (usize, usize) {
    if n == 2 {
        (k % 2, k / 2)
    } else {
        (k / n, k % n)
    }
}

/// Parses a v1.0 document with `n_ports` ports.
pub fn parse_touchstone(text: &str, n_ports: usize) -> Result<TouchstoneDocument, TouchstoneError> {
    if n_ports == 0 {
        return Err(syntax(0, "port count must be >= 1"));
    }
    let record_len = 1 + 2 * n_ports * n_ports;
    let mut options: Option<TouchstoneOptions> = None;
    let mut comments = Vec::new();
    let mut freqs = Vec::new();
    let mut data = Vec::new();
    let mut pending: Vec<f64> = Vec::with_capacity(record_len);
    let mut record_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let (content, comment) = match raw.find('!') {
            Some(p) => (&raw[..p], Some(&raw[p + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment {
            if content.trim().is_empty() && options.is_none() && freqs.is_empty() {
                comments.push(c.trim().to_string());
            }
        }
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(syntax(
                line_no,
                format!("Touchstone 2.0 keyword `{content}` is not supported (v1.0 only)"),
            ));
        }
        if content.starts_with('#') {
            if options.is_none() {
                options = Some(parse_options(line_no, content)?);
            }
            continue;
        }
        let opts = options.unwrap_or_default();
        if pending.is_empty() {
            record_line = line_no;
        }
        for tok in content.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| syntax(line_no, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(syntax(line_no, format!("non-finite value `{tok}`")));
            }
            pending.push(v);
            if pending.len() > record_len {
                return Err(syntax(
                    line_no,
                    format!("expected {record_len} values per frequency for {n_ports} ports"),
                ));
            }
        }
        if pending.len() == record_len {
            let f = pending[0] * opts.unit.multiplier();
            if f.is_nan() || f <= 0.0 {
                return Err(syntax(record_line, format!("frequency {f} must be > 0")));
            }
            if let Some(&last) = freqs.last() {
                if f <= last {
                    return Err(syntax(record_line, format!("frequency {f} Hz is not above the previous {last} Hz")));
                }
            }
            let mut m = CMatrix::zeros(n_ports);
            for k in 0..n_ports * n_ports {
                let (a, b) = (pending[1 + 2 * k], pending[2 + 2 * k]);
                m[position(n_ports, k)] = to_complex(opts.format, a, b);
            }
            freqs.push(f);
            data.push(m);
            pending.clear();
        } else if n_ports <= 2 {
            return Err(syntax(
                line_no,
                format!("expected {record_len} values on one line for {n_ports} ports, found {}", pending.len()),
            ));
        }
    }
    if !pending.is_empty() {
        return Err(syntax(
            record_line,
            format!("incomplete record: {} of {record_len} values", pending.len()),
        ));
    }
    if freqs.is_empty() {
        return Err(syntax(text.lines().count(), "no data records"));
    }
    Ok(TouchstoneDocument {
        options: options.unwrap_or_default(),
        n_ports,
        freqs,
        data,
        comments,
    })
}

/// Shortest text that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Emits a v1.0 document. Two-port records sit on one line; larger matrices
/// put each row on its own line(s), at most four pairs per line.
pub fn write_touchstone(doc: &TouchstoneDocument) -> String {
    let mut out = String::new();
    for c in &doc.comments {
        let _ = writeln!(out, "! {c}");
    }
    let _ = writeln!(out, "{}", doc.options.option_line());
    let n = doc.n_ports;
    let mult = doc.options.unit.multiplier();
    for (f, m) in doc.freqs.iter().zip(&doc.data) {
        let pair = |k: usize| {
            let (a, b) = from_complex(doc.options.format, m[position(n, k)]);
            format!("{} {}", num(a), num(b))
        };
        if n <= 2 {
            let values: Vec<String> = (0..n * n).map(pair).collect();
            let _ = writeln!(out, "{} {}", num(f / mult), values.join(" "));
        } else {
            for row in 0..n {
                for (chunk_idx, chunk) in (0..n).collect::<Vec<_>>().chunks(4).enumerate() {
                    let values: Vec<String> = chunk.iter().map(|&col| pair(row * n + col)).collect();
                    let lead = if row == 0 && chunk_idx == 0 {
                        num(f / mult)
                    } else {
                        " ".repeat(num(f / mult).len())
                    };
                    let _ = writeln!(out, "{lead} {}", values.join(" "));
                }
            }
        }
    }
    out
}

impl TouchstoneDocument {
    /// Impedance signature of the document's data.
    pub fn to_signature(&self, label: &str) -> Result<BoardSignature, TouchstoneError> {
        let z0 = vec![self.options.reference; self.n_ports];
        match self.options.kind {
            ParamKind::Z => Ok(BoardSignature {
                label: label.to_string(),
                provenance: Provenance::Measured,
                freqs: self.freqs.clone(),
                z0,
                z: self.data.clone(),
            }),
            ParamKind::S => {
                let sweep = SParamSweep {
                    label: label.to_string(),
                    freqs: self.freqs.clone(),
                    z0,
                    s: self.data.clone(),
                };
                Ok(s_to_z(&sweep, Provenance::Measured)?)
            }
        }
    }

    /// Document holding `sig` as Z (ohms) or as S referenced to
    /// `options.reference` on every port.
    pub fn from_signature(sig: &BoardSignature, options: TouchstoneOptions, comments: Vec<String>) -> Result<Self, TouchstoneError> {
        let data = match options.kind {
            ParamKind::Z => sig.z.clone(),
            ParamKind::S => {
                let mut s = sig.clone();
                s.z0 = vec![options.reference; sig.n_ports()];
                z_to_s(&s)?.s
            }
        };
        Ok(Self {
            options,
            n_ports: sig.n_ports(),
            freqs: sig.freqs.clone(),
            data,
            comments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn one_port_z_direct() {
        let doc = parse_touchstone("# HZ Z RI R 50\n1e6 1 0\n", 1).unwrap();
        assert_eq!(doc.freqs, vec![1e6]);
        assert_eq!(doc.data[0][(0, 0)], c(1.0, 0.0));
        let sig = doc.to_signature("x").unwrap();
        assert_eq!(sig.z[0][(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn matched_s_gives_reference() {
        let doc = parse_touchstone("! measured\n# MHZ S MA R 50\n10 0 0\n", 1).unwrap();
        assert_eq!(doc.freqs, vec![10e6]);
        assert_eq!(doc.comments, vec!["measured".to_string()]);
        let z = doc.to_signature("m").unwrap().z[0][(0, 0)];
        assert!((z - c(50.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_port_column_order() {
        let doc = parse_touchstone("# HZ S RI R 50\n1 0.11 0 0.21 0 0.12 0 0.22 0\n", 2).unwrap();
        let m = &doc.data[0];
        assert_eq!(m[(0, 0)].re, 0.11);
        assert_eq!(m[(1, 0)].re, 0.21);
        assert_eq!(m[(0, 1)].re, 0.12);
        assert_eq!(m[(1, 1)].re, 0.22);
    }

    #[test]
    fn three_port_three_lines_per_frequency() {
        let mut m = CMatrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = c((10 * i + j) as f64, 1.0);
            }
        }
        let doc = TouchstoneDocument {
            options: TouchstoneOptions {
                unit: FreqUnit::Hz,
                kind: ParamKind::Z,
                format: DataFormat::Ri,
                reference: 50.0,
            },
            n_ports: 3,
            freqs: vec![1.0, 2.0],
            data: vec![m.clone(), m],
            comments: vec![],
        };
        let text = write_touchstone(&doc);
        assert_eq!(text.lines().count(), 1 + 6);
        assert_eq!(parse_touchstone(&text, 3).unwrap(), doc);
    }

    #[test]
    fn one_port_constant_writes_two_rows() {
        let doc = TouchstoneDocument {
            options: TouchstoneOptions {
                unit: FreqUnit::Hz,
                kind: ParamKind::Z,
                format: DataFormat::Ri,
                reference: 50.0,
            },
            n_ports: 1,
            freqs: vec![1e6, 2e6],
            data: vec![CMatrix::from_diag(&[c(1.0, 0.0)]); 2],
            comments: vec![],
        };
        let text = write_touchstone(&doc);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# HZ Z RI R 50");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = |t: &str, n| parse_touchstone(t, n).unwrap_err().to_string();
        assert!(err("# HZ Z RI R 50\n2 1 0\n1 1 0\n", 1).starts_with("line 3:"));
        assert!(err("# HZ Z RI R 50\n1 1 0 5\n", 1).starts_with("line 2:"));
        assert!(err("# HZ Q RI R 50\n1 1 0\n", 1).starts_with("line 1:"));
        assert!(err("[Version] 2.0\n", 1).contains("2.0"));
        assert!(err("# HZ Z RI R 50\n1 1 x\n", 1).starts_with("line 2:"));
        assert!(err("# HZ Z RI R 50\n1 1 0 0 0 0 0\n", 3).contains("incomplete"));
    }

    #[test]
    fn default_options_are_ghz_s_ma() {
        let doc = parse_touchstone("1 0.5 90\n", 1).unwrap();
        assert_eq!(doc.freqs, vec![1e9]);
        assert!((doc.data[0][(0, 0)] - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn extension() {
        assert_eq!(n_ports_from_path(Path::new("a/b.s2p")).unwrap(), 2);
        assert_eq!(n_ports_from_path(Path::new("b.S12P")).unwrap(), 12);
        assert!(n_ports_from_path(Path::new("b.txt")).is_err());
    }
}
