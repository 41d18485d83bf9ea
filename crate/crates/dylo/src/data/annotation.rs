//! Plain-text box annotations: one `class cx cy w h [severity]` record per
//! line, geometry normalized to the image extent, severity coded m/d/s.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How far a coordinate may stray outside [0, 1] before it is an error
/// rather than silently clamped (absorbs accumulated float round-off).
const CLAMP_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Minor,
    Moderate,
    Severe,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Minor, Severity::Moderate, Severity::Severe];

    pub fn code(self) -> char {
        match self {
            Severity::Minor => 'm',
            Severity::Moderate => 'd',
            Severity::Severe => 's',
        }
    }

    pub fn from_code(c: &str) -> Option<Severity> {
        match c {
            "m" => Some(Severity::Minor),
            "d" => Some(Severity::Moderate),
            "s" => Some(Severity::Severe),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Severity::Minor => 0,
            Severity::Moderate => 1,
            Severity::Severe => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Severity::Minor => "minor",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        }
    }
}

/// One annotated box with normalized center/size geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub severity: Option<Severity>,
}

fn norm_field(raw: &str, what: &str, line: usize) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| {
        Error::Parse(format!("line {line}: {what} {raw:?} is not a number"))
    })?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: {what} {raw:?} is not finite")));
    }
    if v < -CLAMP_TOLERANCE || v > 1.0 + CLAMP_TOLERANCE {
        return Err(Error::Parse(format!(
            "line {line}: {what} {v} outside the normalized range [0, 1]"
        )));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Parse annotation text. Blank lines and `#` comment lines are ignored;
/// all errors carry 1-based line numbers.
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected 5 or 6 fields, found {}",
                fields.len()
            )));
        }
        let class_id: usize = fields[0].parse().map_err(|_| {
            Error::Parse(format!(
                "line {line_no}: class {:?} is not a non-negative integer",
                fields[0]
            ))
        })?;
        let cx = norm_field(fields[1], "center x", line_no)?;
        let cy = norm_field(fields[2], "center y", line_no)?;
        let w = norm_field(fields[3], "width", line_no)?;
        let h = norm_field(fields[4], "height", line_no)?;
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::Parse(format!(
                "line {line_no}: box size {w}x{h} must be positive"
            )));
        }
        let severity = match fields.get(5) {
            None => None,
            Some(code) => Some(Severity::from_code(code).ok_or_else(|| {
                Error::Parse(format!(
                    "line {line_no}: severity {code:?} is not one of m, d, s"
                ))
            })?),
        };
        out.push(Annotation {
            class_id,
            cx,
            cy,
            w,
            h,
            severity,
        });
    }
    Ok(out)
}

pub fn read_annotation_file(path: &Path) -> Result<Vec<Annotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Render annotations back to the line format (always 17 significant
/// digits so a write/read cycle is lossless).
pub fn format_annotations(anns: &[Annotation]) -> String {
    let mut out = String::new();
    for a in anns {
        out.push_str(&format!(
            "{} {:.17} {:.17} {:.17} {:.17}",
            a.class_id, a.cx, a.cy, a.w, a.h
        ));
        if let Some(s) = a.severity {
            out.push(' ');
            out.push(s.code());
        }
        out.push('\n');
    }
    out
}

pub fn write_annotation_file(path: &Path, anns: &[Annotation]) -> Result<()> {
    std::fs::write(path, format_annotations(anns)).map_err(|e| Error::io(path, e))
}
