//! DOTA text annotations: `x1 y1 x2 y2 x3 y3 x4 y4 category difficulty` per
//! line, optionally preceded by `imagesource:` / `gsd:` header lines.

use std::io::BufRead;

use crate::assigner::GtInstance;
use crate::error::{Error, Result};
use crate::geometry::{cross, min_area_rect, Point};

const HEADER_PREFIXES: [&str; 2] = ["imagesource:", "gsd:"];

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub quad: [f64; 8],
    pub category: String,
    /// Carried through unchanged; assignment does not filter on it.
    pub difficulty: i64,
}

impl AnnotationRecord {
    pub fn points(&self) -> [Point; 4] {
        std::array::from_fn(|i| Point::new(self.quad[2 * i], self.quad[2 * i + 1]))
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(&(b - a), &(c - a));
    let d2 = cross(&(b - a), &(d - a));
    let d3 = cross(&(d - c), &(a - c));
    let d4 = cross(&(d - c), &(b - c));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn is_simple_quad(p: &[Point; 4]) -> bool {
    !segments_cross(p[0], p[1], p[2], p[3]) && !segments_cross(p[1], p[2], p[3], p[0])
}

fn parse_line(line_no: usize, line: &str) -> Result<Option<AnnotationRecord>> {
    if HEADER_PREFIXES.iter().any(|h| line.starts_with(h)) {
        return Ok(None);
    }
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.is_empty() {
        return Ok(None);
    }
    if tokens.len() != 10 {
        return Err(parse_err(
            line_no,
            format!(
                "expected 10 fields (8 coordinates, category, difficulty), found {}",
                tokens.len()
            ),
        ));
    }
    let mut quad = [0.0; 8];
    for (slot, tok) in quad.iter_mut().zip(&tokens[..8]) {
        *slot = tok
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err(line_no, format!("non-numeric coordinate `{tok}`")))?;
    }
    let difficulty = tokens[9]
        .parse::<i64>()
        .map_err(|_| parse_err(line_no, format!("non-integer difficulty `{}`", tokens[9])))?;
    let rec = AnnotationRecord {
        quad,
        category: tokens[8].to_string(),
        difficulty,
    };
    if !is_simple_quad(&rec.points()) {
        return Err(parse_err(line_no, "self-intersecting quad"));
    }
    Ok(Some(rec))
}

/// Parses annotations from a byte stream. Line numbers in errors are 1-based.
pub fn parse_dota_reader<R: BufRead>(mut reader: R) -> Result<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| parse_err(line_no + 1, format!("read failed: {e}")))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let text = std::str::from_utf8(&buf).map_err(|_| parse_err(line_no, "invalid UTF-8"))?;
        let text = text.trim_end_matches(['\n', '\r']);
        if let Some(rec) = parse_line(line_no, text)? {
            records.push(rec);
        }
    }
    Ok(records)
}

pub fn parse_dota_annotation(text: &str) -> Result<Vec<AnnotationRecord>> {
    parse_dota_reader(text.as_bytes())
}

/// Category name to class index.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    names: Vec<String>,
}

impl ClassMap {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    /// The 18 DOTA-v2.0 categories in devkit order.
    pub fn dota_v2() -> Self {
        Self::from_names([
            "plane",
            "ship",
            "storage-tank",
            "baseball-diamond",
            "tennis-court",
            "basketball-court",
            "ground-track-field",
            "harbor",
            "bridge",
            "large-vehicle",
            "small-vehicle",
            "helicopter",
            "roundabout",
            "soccer-ball-field",
            "swimming-pool",
            "container-crane",
            "airport",
            "helipad",
        ])
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

pub fn record_to_gt(rec: &AnnotationRecord, classes: &ClassMap) -> Result<GtInstance> {
    let class_id = classes
        .index(&rec.category)
        .ok_or_else(|| Error::UnknownCategory(rec.category.clone()))?;
    let bbox = min_area_rect(&rec.points())?;
    GtInstance::new(bbox, class_id)
}
