//! "SBD v1" text format for grid densities and masks.
//!
//! ```text
//! sbd 1 density          (or: sbd 1 mask)
//! <d>
//! <lo> <hi> <count>      (one line per axis)
//! <values...>            (row-major, last axis fastest, whitespace separated)
//! ```
//!
//! Reals are written with 17 significant digits so that a write/read cycle
//! reproduces every `f64` exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridDensity, GridSpec, RegionMask};

#[derive(Debug, Clone, PartialEq)]
pub enum SbdContent {
    Density(GridDensity),
    Mask(RegionMask),
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_header(out: &mut String, kind: &str, spec: &GridSpec) {
    let _ = writeln!(out, "sbd 1 {kind}");
    let _ = writeln!(out, "{}", spec.dim());
    for (&(lo, hi), &n) in spec.extents().iter().zip(spec.counts()) {
        let _ = writeln!(out, "{} {} {}", fmt_real(lo), fmt_real(hi), n);
    }
}

fn write_rows<T>(out: &mut String, spec: &GridSpec, items: &[T], fmt: impl Fn(&T) -> String) {
    let row = *spec.counts().last().unwrap_or(&1);
    for chunk in items.chunks(row.max(1)) {
        let line: Vec<String> = chunk.iter().map(&fmt).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

pub fn format_density(f: &GridDensity) -> String {
    let mut out = String::new();
    write_header(&mut out, "density", f.spec());
    write_rows(&mut out, f.spec(), f.values(), |v| fmt_real(*v));
    out
}

pub fn format_mask(m: &RegionMask) -> String {
    let mut out = String::new();
    write_header(&mut out, "mask", m.spec());
    write_rows(&mut out, m.spec(), m.included(), |b| {
        if *b { "1" } else { "0" }.to_string()
    });
    out
}

pub fn format_sbd(content: &SbdContent) -> String {
    match content {
        SbdContent::Density(f) => format_density(f),
        SbdContent::Mask(m) => format_mask(m),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_sbd(text: &str) -> Result<SbdContent> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_nonblank = || loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            other => return other,
        }
    };

    let (n, header) = next_nonblank().ok_or_else(|| parse_err(1, "empty input"))?;
    let is_mask = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["sbd", "1", "density"] => false,
        ["sbd", "1", "mask"] => true,
        _ => return Err(parse_err(n, format!("bad header {header:?}"))),
    };

    let (n, dim_line) = next_nonblank().ok_or_else(|| parse_err(n + 1, "missing dimension"))?;
    let dim: usize = dim_line
        .trim()
        .parse()
        .map_err(|_| parse_err(n, format!("bad dimension {dim_line:?}")))?;
    if dim == 0 {
        return Err(parse_err(n, "dimension must be at least 1"));
    }

    let mut extents = Vec::with_capacity(dim);
    let mut counts = Vec::with_capacity(dim);
    let mut last = n;
    for _ in 0..dim {
        let (n, axis) = next_nonblank().ok_or_else(|| parse_err(last + 1, "missing axis line"))?;
        last = n;
        let toks: Vec<&str> = axis.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(n, "axis line must be `lo hi count`"));
        }
        let lo: f64 = toks[0].parse().map_err(|_| parse_err(n, "bad lo"))?;
        let hi: f64 = toks[1].parse().map_err(|_| parse_err(n, "bad hi"))?;
        let count: usize = toks[2].parse().map_err(|_| parse_err(n, "bad count"))?;
        extents.push((lo, hi));
        counts.push(count);
    }
    let spec = GridSpec::new(extents, counts)?;

    let mut tokens = Vec::with_capacity(spec.len());
    for (n, l) in lines.by_ref() {
        for tok in l.split_whitespace() {
            tokens.push((n, tok));
        }
    }
    if tokens.len() != spec.len() {
        return Err(parse_err(
            last,
            format!(
                "expected {} cell values, found {}",
                spec.len(),
                tokens.len()
            ),
        ));
    }

    if is_mask {
        let included = tokens
            .into_iter()
            .map(|(n, t)| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(parse_err(n, format!("mask entry {t:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SbdContent::Mask(RegionMask::new(spec, included)?))
    } else {
        let values = tokens
            .into_iter()
            .map(|(n, t)| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(n, format!("bad value {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SbdContent::Density(GridDensity::new(spec, values)?))
    }
}

pub fn read_sbd_file(path: impl AsRef<Path>) -> Result<SbdContent> {
    parse_sbd(&std::fs::read_to_string(path)?)
}

pub fn read_density_file(path: impl AsRef<Path>) -> Result<GridDensity> {
    match read_sbd_file(&path)? {
        SbdContent::Density(f) => Ok(f),
        SbdContent::Mask(_) => Err(Error::InvalidDensity(format!(
            "{} holds a mask, expected a density",
            path.as_ref().display()
        ))),
    }
}

pub fn read_mask_file(path: impl AsRef<Path>) -> Result<RegionMask> {
    match read_sbd_file(&path)? {
        SbdContent::Mask(m) => Ok(m),
        SbdContent::Density(_) => Err(Error::InvalidDensity(format!(
            "{} holds a density, expected a mask",
            path.as_ref().display()
        ))),
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place.
pub fn write_file_atomic(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
