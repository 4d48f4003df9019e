//! Binary portable graymap (`P5`) encoding and decoding.
//!
//! Supports 8-bit (`maxval` ≤ 255) and 16-bit big-endian (`maxval` ≤ 65535)
//! rasters. Comments in the header are skipped.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, one per pixel.
    pub data: Vec<u16>,
}

impl Graymap {
    pub fn new(width: usize, height: usize, maxval: u16, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Graymap(format!("empty raster {width}x{height}")));
        }
        if maxval == 0 {
            return Err(Error::Graymap("maxval must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::Graymap(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > maxval) {
            return Err(Error::Graymap(format!("sample {v} exceeds maxval {maxval}")));
        }
        Ok(Self {
            width,
            height,
            maxval,
            data,
        })
    }

    pub fn is_16bit(&self) -> bool {
        self.maxval > 255
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval);
        let bytes_per = if self.is_16bit() { 2 } else { 1 };
        let mut out = Vec::with_capacity(header.len() + self.data.len() * bytes_per);
        out.extend_from_slice(header.as_bytes());
        if self.is_16bit() {
            for &v in &self.data {
                out.extend_from_slice(&v.to_be_bytes());
            }
        } else {
            out.extend(self.data.iter().map(|&v| v as u8));
        }
        out
    }

    /// Parses one graymap from the start of `bytes`, returning it together
    /// with the number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos)?;
        if magic != b"P5" {
            return Err(Error::Graymap(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let width = parse_number(next_token(bytes, &mut pos)?)?;
        let height = parse_number(next_token(bytes, &mut pos)?)?;
        let maxval = parse_number(next_token(bytes, &mut pos)?)?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Graymap(format!("maxval {maxval} out of range")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(Error::Graymap("missing raster separator".into())),
        }
        let count = width
            .checked_mul(height)
            .ok_or_else(|| Error::Graymap("dimensions overflow".into()))?;
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let end = pos + count * bytes_per;
        if bytes.len() < end {
            return Err(Error::Graymap(format!(
                "truncated raster: need {} bytes, have {}",
                count * bytes_per,
                bytes.len() - pos
            )));
        }
        let raw = &bytes[pos..end];
        let data = if bytes_per == 2 {
            raw.chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            raw.iter().map(|&b| b as u16).collect()
        };
        Ok((Self::new(width, height, maxval as u16, data)?, end))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        Self::decode_prefix(bytes).map(|(g, _)| g)
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Graymap("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while let Some(b) = bytes.get(*pos) {
        if b.is_ascii_whitespace() || *b == b'#' {
            break;
        }
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn parse_number(token: &[u8]) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            Error::Graymap(format!(
                "expected a number, found {:?}",
                String::from_utf8_lossy(token)
            ))
        })
}
