//! Binary Netpbm images: graymaps (P5, 8 or 16 bit) and pixmaps (P6, 8 bit).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGray {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRgb {
    pub width: usize,
    pub height: usize,
    /// Interleaved `r, g, b` bytes, row-major.
    pub rgb: Vec<u8>,
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::Format("file too short for a netpbm header".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), None | Some(b'\n')) {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("malformed netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("netpbm header value out of range".into()))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after netpbm header".into()));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("unsupported maxval {maxval}")));
    }
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

pub fn decode_pgm(bytes: &[u8]) -> Result<RawGray> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(Error::Format(format!(
            "expected binary graymap (P5), found {:?}",
            String::from_utf8_lossy(&h.magic)
        )));
    }
    let n = h.width * h.height;
    let raster = &bytes[h.data_start..];
    let samples: Vec<u16> = if h.maxval < 256 {
        if raster.len() < n {
            return Err(Error::Format(format!(
                "truncated 8-bit raster: {} of {n} bytes",
                raster.len()
            )));
        }
        raster[..n].iter().map(|&b| u16::from(b)).collect()
    } else {
        if raster.len() < 2 * n {
            return Err(Error::Format(format!(
                "truncated 16-bit raster: {} of {} bytes",
                raster.len(),
                2 * n
            )));
        }
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    let maxval = h.maxval as u16;
    if let Some(bad) = samples.iter().find(|&&s| s > maxval) {
        return Err(Error::Format(format!("sample {bad} exceeds maxval {maxval}")));
    }
    Ok(RawGray {
        width: h.width,
        height: h.height,
        maxval,
        samples,
    })
}

pub fn encode_pgm(img: &RawGray) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval < 256 {
        out.extend(img.samples.iter().map(|&s| s as u8));
    } else {
        out.extend(img.samples.iter().flat_map(|s| s.to_be_bytes()));
    }
    out
}

pub fn read_pgm(path: &Path) -> Result<RawGray> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: &Path, img: &RawGray) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RawRgb> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(Error::Format(format!(
            "expected binary pixmap (P6), found {:?}",
            String::from_utf8_lossy(&h.magic)
        )));
    }
    if h.maxval != 255 {
        return Err(Error::Format(format!("unsupported pixmap maxval {}", h.maxval)));
    }
    let n = 3 * h.width * h.height;
    let raster = &bytes[h.data_start..];
    if raster.len() < n {
        return Err(Error::Format(format!(
            "truncated pixmap raster: {} of {n} bytes",
            raster.len()
        )));
    }
    Ok(RawRgb {
        width: h.width,
        height: h.height,
        rgb: raster[..n].to_vec(),
    })
}

pub fn encode_ppm(img: &RawRgb) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.rgb);
    out
}

pub fn read_ppm(path: &Path) -> Result<RawRgb> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(path: &Path, img: &RawRgb) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ppm(img))?;
    Ok(())
}
