//! Grayscale Portable Float Map I/O (little-endian, rows bottom to top) and
//! the ESDF sidecar metadata file.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::EsdfGrid2D;
use crate::error::{Error, Result};

/// Single-channel float image; `rows[0]` is the bottom row.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

pub fn write_pfm<W: Write>(img: &PfmImage, mut out: W) -> Result<()> {
    if img.data.len() != img.width * img.height {
        return Err(Error::DimensionMismatch("PFM data length".into()));
    }
    write!(out, "Pf\n{} {}\n-1.0\n", img.width, img.height)?;
    let mut buf = Vec::with_capacity(img.data.len() * 4);
    for v in &img.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Parse("truncated PFM header".into()));
        }
        let t = line.trim();
        if !t.is_empty() {
            return Ok(t.to_string());
        }
    }
}

pub fn read_pfm<R: Read>(input: R) -> Result<PfmImage> {
    let mut r = BufReader::new(input);
    if header_token(&mut r)? != "Pf" {
        return Err(Error::Parse("only grayscale 'Pf' maps are supported".into()));
    }
    let dims = header_token(&mut r)?;
    let mut it = dims.split_whitespace().map(|t| t.parse::<usize>());
    let (Some(Ok(width)), Some(Ok(height))) = (it.next(), it.next()) else {
        return Err(Error::Parse(format!("bad PFM dimensions {dims:?}")));
    };
    let scale: f64 = header_token(&mut r)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad PFM scale: {e}")))?;
    let mut raw = vec![0u8; width * height * 4];
    r.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if scale < 0.0 {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    Ok(PfmImage { width, height, data })
}

/// Writes `<path>` as PFM (width = nx, height = ny, grid row 0 first) and
/// `<path>.meta` next to it. Returns the metadata path.
pub fn write_esdf(esdf: &EsdfGrid2D, path: &Path, d_max: f64) -> Result<PathBuf> {
    let img = PfmImage {
        width: esdf.spec.nx,
        height: esdf.spec.ny,
        data: esdf.d.iter().map(|&v| v as f32).collect(),
    };
    let mut f = fs::File::create(path)?;
    write_pfm(&img, &mut f)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("esdf");
    let meta = path.with_file_name(format!("{stem}.meta"));
    let text = format!(
        "resolution {}\norigin {} {}\nd_max {}\n",
        esdf.spec.resolution, esdf.spec.origin[0], esdf.spec.origin[1], d_max
    );
    fs::write(&meta, text)?;
    Ok(meta)
}
