//! File formats: PGM masks (P2/P5), float image and sinogram containers with
//! small text headers, and run reports.
//!
//! Float container layout: a text header terminated by a `DATA` line, then
//! raw little-endian 64-bit floats in row-major order.

use crate::ct::{ProjectionGeometry, Sinogram};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::masking::Mask;

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const IMAGE_MAGIC: &str = "MRIMG1";
const SINO_MAGIC: &str = "MRSINO1";

/// Writes a mask as binary PGM; 255 marks interior pixels.
pub fn write_mask_pgm(path: &Path, mask: &Mask) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let n = mask.side();
    write!(w, "P5\n{n} {n}\n255\n")?;
    let bytes: Vec<u8> = mask
        .as_bools()
        .iter()
        .map(|&b| if b { 255u8 } else { 0 })
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads a PGM (P2 or P5) as a mask; any nonzero sample is inside.
pub fn read_mask_pgm(path: &Path) -> Result<Mask> {
    let mut file = std::fs::File::open(path)?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    let (magic, rest) = next_token(&raw)?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => {
            return Err(Error::invalid("pgm", format!("unsupported magic {other}")));
        }
    };
    let (w_tok, rest) = next_token(rest)?;
    let (h_tok, rest) = next_token(rest)?;
    let (maxval_tok, rest) = next_token(rest)?;
    let width: usize = parse_tok(&w_tok, "pgm width")?;
    let height: usize = parse_tok(&h_tok, "pgm height")?;
    let maxval: usize = parse_tok(&maxval_tok, "pgm maxval")?;
    if width != height {
        return Err(Error::invalid("pgm", "mask must be square"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::invalid("pgm", "maxval must be in 1..=255"));
    }
    let count = width * height;
    let inside: Vec<bool> = if binary {
        // a single whitespace byte separates the header from raster data
        let data = &rest[1..];
        if data.len() < count {
            return Err(Error::invalid("pgm", "truncated raster"));
        }
        data[..count].iter().map(|&b| b != 0).collect()
    } else {
        let text = std::str::from_utf8(rest)
            .map_err(|_| Error::invalid("pgm", "non-utf8 ascii raster"))?;
        let values: Vec<usize> = text
            .split_whitespace()
            .take(count)
            .map(|t| parse_tok(t, "pgm sample"))
            .collect::<Result<_>>()?;
        if values.len() != count {
            return Err(Error::invalid("pgm", "truncated raster"));
        }
        values.into_iter().map(|v| v != 0).collect()
    };
    Mask::from_bools(width, inside)
}

fn next_token(raw: &[u8]) -> Result<(String, &[u8])> {
    let mut i = 0;
    // skip whitespace and comment lines
    loop {
        while i < raw.len() && raw[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < raw.len() && raw[i] == b'#' {
            while i < raw.len() && raw[i] != b'\n' {
                i += 1;
            }
        } else {
            break;
        }
    }
    let start = i;
    while i < raw.len() && !raw[i].is_ascii_whitespace() {
        i += 1;
    }
    if start == i {
        return Err(Error::invalid("pgm", "unexpected end of header"));
    }
    Ok((
        String::from_utf8_lossy(&raw[start..i]).into_owned(),
        &raw[i..],
    ))
}

fn parse_tok<T: std::str::FromStr>(tok: &str, what: &'static str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::invalid(what, format!("cannot parse {tok:?}")))
}

/// Writes an image in the exact float container.
pub fn write_image_f64(path: &Path, image: &Image) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{IMAGE_MAGIC}")?;
    writeln!(w, "n {}", image.side())?;
    writeln!(w, "DATA")?;
    for v in image.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_image_f64(path: &Path) -> Result<Image> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut header = read_header(&mut reader, IMAGE_MAGIC)?;
    let n: usize = take_field(&mut header, "n")?;
    let data = read_f64_payload(&mut reader, n * n)?;
    Image::from_vec(n, data)
}

/// Writes a sinogram: text header (magic, K, d, pitch, origin, angle list)
/// followed by row-major little-endian f64 data.
pub fn write_sinogram(path: &Path, sino: &Sinogram) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let geom = sino.geometry();
    writeln!(w, "{SINO_MAGIC}")?;
    writeln!(w, "K {}", geom.num_angles())?;
    writeln!(w, "d {}", geom.detectors())?;
    writeln!(w, "pitch {}", geom.pitch())?;
    writeln!(w, "origin {}", geom.origin())?;
    let angle_list: Vec<String> = geom.angles().iter().map(|a| a.to_string()).collect();
    writeln!(w, "angles {}", angle_list.join(" "))?;
    writeln!(w, "DATA")?;
    for v in sino.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut header = read_header(&mut reader, SINO_MAGIC)?;
    let k: usize = take_field(&mut header, "K")?;
    let d: usize = take_field(&mut header, "d")?;
    let pitch: f64 = take_field(&mut header, "pitch")?;
    let origin: f64 = take_field(&mut header, "origin")?;
    let angles_line = header
        .remove("angles")
        .ok_or_else(|| Error::invalid("sinogram header", "missing angles"))?;
    let angles: Vec<f64> = angles_line
        .split_whitespace()
        .map(|t| parse_tok(t, "sinogram angle"))
        .collect::<Result<_>>()?;
    if angles.len() != k {
        return Err(Error::invalid("sinogram header", "angle count mismatch"));
    }
    let geom = ProjectionGeometry::new(angles, d, pitch, origin)?;
    let data = read_f64_payload(&mut reader, k * d)?;
    Sinogram::new(geom, data)
}

fn read_header<R: BufRead>(
    reader: &mut R,
    magic: &str,
) -> Result<std::collections::HashMap<String, String>> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim() != magic {
        return Err(Error::invalid(
            "file header",
            format!("expected magic {magic}, found {:?}", line.trim()),
        ));
    }
    let mut fields = std::collections::HashMap::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::invalid("file header", "missing DATA marker"));
        }
        let trimmed = line.trim_end();
        if trimmed == "DATA" {
            return Ok(fields);
        }
        match trimmed.split_once(' ') {
            Some((key, value)) => {
                fields.insert(key.to_string(), value.to_string());
            }
            None => {
                return Err(Error::invalid(
                    "file header",
                    format!("malformed line {trimmed:?}"),
                ));
            }
        }
    }
}

fn take_field<T: std::str::FromStr>(
    fields: &mut std::collections::HashMap<String, String>,
    key: &'static str,
) -> Result<T> {
    let value = fields
        .remove(key)
        .ok_or_else(|| Error::invalid("file header", format!("missing field {key}")))?;
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid("file header", format!("bad value for {key}: {value:?}")))
}

fn read_f64_payload<R: Read>(reader: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    reader.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// 8-bit preview of an image, linearly rescaled to its own range.
pub fn write_image_pgm(path: &Path, image: &Image) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let n = image.side();
    write!(w, "P5\n{n} {n}\n255\n")?;
    let lo = image.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = image
        .data()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bytes: Vec<u8> = image
        .data()
        .iter()
        .map(|&v| (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}
