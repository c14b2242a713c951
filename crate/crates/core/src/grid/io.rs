//! Portable grid file formats.
//!
//! * Masks: binary PGM (`P5`). Written with maxval 255; read with maxval 1
//!   or 255, where 255 means foreground.
//! * Scalar grids: `PSG1`, a 16-byte header (magic, height, width, channel
//!   count as little-endian `u32`) followed by `channels * height * width`
//!   little-endian `f32` values, channel-major then row-major. Values are
//!   narrowed to `f32` on write, so a grid read back from a file re-writes to
//!   the identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BinaryMask, GridDomain, MultiClassStack, ScalarGrid};
use crate::error::{Error, Result};

const PSG_MAGIC: &[u8; 4] = b"PSG1";

pub fn write_pgm<W: Write>(mut w: W, mask: &BinaryMask) -> Result<()> {
    let d = mask.domain();
    write!(w, "P5\n{} {}\n255\n", d.width(), d.height())?;
    let bytes: Vec<u8> = mask
        .values()
        .iter()
        .map(|&v| if v != 0 { 255 } else { 0 })
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn read_token<R: Read>(r: &mut R) -> Result<String> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format("unexpected end of PGM header".into()));
        }
        let b = byte[0];
        if b == b'#' {
            // comment runs to end of line
            loop {
                if r.read(&mut byte)? == 0 {
                    return Err(Error::Format("unexpected end of PGM header".into()));
                }
                if byte[0] == b'\n' || byte[0] == b'\r' {
                    break;
                }
            }
            if !token.is_empty() {
                return Ok(token);
            }
            continue;
        }
        if b.is_ascii_whitespace() {
            if !token.is_empty() {
                return Ok(token);
            }
            continue;
        }
        token.push(b as char);
    }
}

fn parse_header_number<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let tok = read_token(r)?;
    tok.parse()
        .map_err(|_| Error::Format(format!("bad PGM {what}: {tok:?}")))
}

pub fn read_pgm<R: Read>(r: R) -> Result<BinaryMask> {
    let mut r = BufReader::new(r);
    let magic = read_token(&mut r)?;
    if magic != "P5" {
        return Err(Error::Format(format!(
            "expected PGM magic P5, found {magic:?}"
        )));
    }
    let width = parse_header_number(&mut r, "width")?;
    let height = parse_header_number(&mut r, "height")?;
    let maxval = parse_header_number(&mut r, "maxval")?;
    if maxval != 1 && maxval != 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let domain = GridDomain::new(height, width)?;
    let mut raw = vec![0u8; domain.len()];
    r.read_exact(&mut raw)?;
    let on = maxval as u8;
    let mut values = Vec::with_capacity(raw.len());
    for (index, &b) in raw.iter().enumerate() {
        match b {
            0 => values.push(0),
            b if b == on => values.push(1),
            other => {
                return Err(Error::NotBinary {
                    index,
                    value: f64::from(other),
                })
            }
        }
    }
    BinaryMask::new(domain, values)
}

pub fn write_psg<W: Write>(mut w: W, channels: &[&ScalarGrid]) -> Result<()> {
    let first = channels
        .first()
        .ok_or_else(|| Error::param("PSG1 needs at least one channel"))?;
    let d = first.domain();
    for c in channels {
        d.ensure_same(&c.domain())?;
    }
    let mut buf = Vec::with_capacity(16 + 4 * d.len() * channels.len());
    buf.extend_from_slice(PSG_MAGIC);
    for n in [d.height(), d.width(), channels.len()] {
        let n = u32::try_from(n).map_err(|_| Error::param("PSG1 dimension exceeds u32"))?;
        buf.extend_from_slice(&n.to_le_bytes());
    }
    for c in channels {
        for &v in c.values() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_psg<R: Read>(mut r: R) -> Result<MultiClassStack<ScalarGrid>> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != PSG_MAGIC {
        return Err(Error::Format("missing PSG1 magic".into()));
    }
    let field = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (height, width, channels) = (field(4), field(8), field(12));
    if channels == 0 {
        return Err(Error::Format("PSG1 file with zero channels".into()));
    }
    let domain = GridDomain::new(height, width)?;
    let mut raw = vec![0u8; 4 * domain.len() * channels];
    r.read_exact(&mut raw)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after PSG1 payload".into()));
    }
    let layers = raw
        .chunks_exact(4 * domain.len())
        .map(|chunk| {
            let values = chunk
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect();
            ScalarGrid::new(domain, values)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiClassStack::new(layers)
}

pub fn write_pgm_file(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_pgm(BufWriter::new(File::create(path)?), mask)
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<BinaryMask> {
    read_pgm(File::open(path)?)
}

pub fn write_psg_file(path: impl AsRef<Path>, channels: &[&ScalarGrid]) -> Result<()> {
    write_psg(BufWriter::new(File::create(path)?), channels)
}

pub fn read_psg_file(path: impl AsRef<Path>) -> Result<MultiClassStack<ScalarGrid>> {
    read_psg(BufReader::new(File::open(path)?))
}
