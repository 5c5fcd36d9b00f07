//! Plain-text checkpoints.
//!
//! ```text
//! vrtrace-lstm 1
//! head regression|classification
//! dims <D> <H> <O or K>
//! mean <D reals>
//! std <D reals>
//! tensor <name> <rows> <cols>
//! <one line of reals per row>
//! ...
//! sha256 <hex digest of every byte above this line>
//! ```
//!
//! Reals carry 17 significant digits, so a load reproduces the saved
//! model exactly.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Head, HeadKind, LstmError, LstmParams, Matrix};
use crate::features::Standardizer;
use crate::io::{fmt_real, write_atomic};

const MAGIC: &str = "vrtrace-lstm 1";

/// A trained network plus the input standardization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: LstmParams,
    pub head: Head,
    pub standardizer: Standardizer,
}

impl Model {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let kind = match self.head.kind() {
            HeadKind::Regression => "regression",
            HeadKind::Classification => "classification",
        };
        let _ = writeln!(s, "head {kind}");
        let _ = writeln!(
            s,
            "dims {} {} {}",
            p.input_dim,
            p.hidden_dim,
            self.head.outputs()
        );
        write_row(&mut s, "mean", &self.standardizer.mean);
        write_row(&mut s, "std", &self.standardizer.std);
        let shapes = [p.w_i.cols(); 4];
        for (k, (name, data)) in LstmParams::TENSOR_NAMES.iter().zip(p.tensors()).enumerate() {
            let cols = if k < 4 { shapes[k] } else { data.len() };
            write_tensor(&mut s, name, data, cols);
        }
        let (w, b) = self.head.weights();
        write_tensor(&mut s, "w_y", w.as_slice(), w.cols());
        write_tensor(&mut s, "b_y", b, b.len());
        let digest = Sha256::digest(s.as_bytes());
        let _ = writeln!(s, "sha256 {}", hex(&digest));
        s
    }

    pub fn from_text(text: &str) -> Result<Self, LstmError> {
        let body_end = text
            .rfind("sha256 ")
            .filter(|&i| i == 0 || text.as_bytes()[i - 1] == b'\n')
            .ok_or_else(|| fmt_err("missing checksum line"))?;
        let (body, tail) = text.split_at(body_end);
        let recorded = tail["sha256 ".len()..].trim();
        if recorded.len() != 64 || !tail.ends_with('\n') {
            return Err(fmt_err("malformed checksum line"));
        }
        if hex(&Sha256::digest(body.as_bytes())) != recorded {
            return Err(LstmError::ChecksumMismatch);
        }
        parse_body(body)
    }
}

fn fmt_err(m: impl Into<String>) -> LstmError {
    LstmError::Format(m.into())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_row(s: &mut String, label: &str, vals: &[f64]) {
    s.push_str(label);
    for v in vals {
        s.push(' ');
        s.push_str(&fmt_real(*v));
    }
    s.push('\n');
}

fn write_tensor(s: &mut String, name: &str, data: &[f64], cols: usize) {
    let rows = data.len().checked_div(cols).unwrap_or(0);
    let _ = writeln!(s, "tensor {name} {rows} {cols}");
    for r in 0..rows {
        let row: Vec<String> = data[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| fmt_real(*v))
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), LstmError> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| fmt_err(format!("unexpected end of file, expected {what}")))
    }

    fn labeled(&mut self, label: &str) -> Result<(usize, Vec<&'a str>), LstmError> {
        let (n, line) = self.next(label)?;
        let mut parts = line.split_ascii_whitespace();
        if parts.next() != Some(label) {
            return Err(fmt_err(format!("line {n}: expected `{label}`")));
        }
        Ok((n, parts.collect()))
    }
}

fn reals(n: usize, toks: &[&str]) -> Result<Vec<f64>, LstmError> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fmt_err(format!("line {n}: bad real `{t}`")))
        })
        .collect()
}

fn uint(n: usize, tok: Option<&&str>) -> Result<usize, LstmError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| fmt_err(format!("line {n}: expected integer")))
}

fn read_tensor(
    lines: &mut Lines<'_>,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Vec<f64>, LstmError> {
    let (n, toks) = lines.labeled("tensor")?;
    if toks.first() != Some(&name) || uint(n, toks.get(1))? != rows || uint(n, toks.get(2))? != cols
    {
        return Err(fmt_err(format!(
            "line {n}: expected tensor {name} {rows} {cols}"
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (n, line) = lines.next(name)?;
        let toks: Vec<&str> = line.split_ascii_whitespace().collect();
        if toks.len() != cols {
            return Err(fmt_err(format!(
                "line {n}: expected {cols} values, found {}",
                toks.len()
            )));
        }
        data.extend(reals(n, &toks)?);
    }
    Ok(data)
}

fn parse_body(body: &str) -> Result<Model, LstmError> {
    let mut lines = Lines {
        inner: body.lines().enumerate(),
    };
    let (_, magic) = lines.next("header")?;
    if magic != MAGIC {
        return Err(fmt_err(format!("line 1: expected `{MAGIC}`")));
    }
    let (n, kind) = lines.labeled("head")?;
    let kind = match kind.as_slice() {
        ["regression"] => HeadKind::Regression,
        ["classification"] => HeadKind::Classification,
        _ => return Err(fmt_err(format!("line {n}: unknown head kind"))),
    };
    let (n, dims) = lines.labeled("dims")?;
    if dims.len() != 3 {
        return Err(fmt_err(format!("line {n}: expected three dims")));
    }
    let (d, h, o) = (
        uint(n, dims.first())?,
        uint(n, dims.get(1))?,
        uint(n, dims.get(2))?,
    );
    if d == 0 || h == 0 || o == 0 {
        return Err(fmt_err(format!("line {n}: dims must be positive")));
    }
    let (n, mean) = lines.labeled("mean")?;
    let mean = reals(n, &mean)?;
    let (n, std) = lines.labeled("std")?;
    let std = reals(n, &std)?;
    if mean.len() != d || std.len() != d {
        return Err(fmt_err("standardizer width does not match input dim"));
    }

    let mut params = LstmParams::zeros(d, h);
    for (k, name) in LstmParams::TENSOR_NAMES.iter().enumerate() {
        let (rows, cols) = if k < 4 { (h, h + d) } else { (1, h) };
        let data = read_tensor(&mut lines, name, rows, cols)?;
        params.tensors_mut()[k].copy_from_slice(&data);
    }
    let w = read_tensor(&mut lines, "w_y", o, h)?;
    let b = read_tensor(&mut lines, "b_y", 1, o)?;
    let w = Matrix::from_vec(o, h, w).expect("sized by read_tensor");
    let head = match kind {
        HeadKind::Regression => Head::Regression { w, b },
        HeadKind::Classification => Head::Classification { w, b },
    };
    if let Ok((n, _)) = lines.next("end") {
        return Err(fmt_err(format!("line {n}: trailing content")));
    }
    Ok(Model {
        params,
        head,
        standardizer: Standardizer { mean, std },
    })
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), LstmError> {
    write_atomic(path, model.to_text().as_bytes())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, LstmError> {
    Model::from_text(&std::fs::read_to_string(path)?)
}
