//! Portable graymap reader and writer: `P2` (plain) and `P5` (raw), 8 and
//! 16 bit samples. Raw 16-bit samples are big-endian.

use std::path::Path;

use crate::error::{read_file, write_file, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each at most `maxval`.
    pub data: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    Plain,
    Raw,
}

impl GrayImage {
    /// Smallest conventional `maxval` (255 or 65535) that fits `data`.
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Self {
        let maxval = if data.iter().all(|&v| v <= 255) { 255 } else { u16::MAX };
        Self { width, height, maxval, data }
    }
}

/// Whitespace-separated header tokens, with `#` comments running to the end
/// of the line.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn next(&mut self) -> Option<&'a [u8]> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, path: &Path, what: &str) -> Result<u64> {
        let tok = self.next().ok_or_else(|| Error::format(path, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, format!("bad {what} {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Parses graymap bytes; `path` only labels errors.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut tok = Tokens { bytes, pos: 0 };
    let encoding = match tok.next() {
        Some(b"P2") => PgmEncoding::Plain,
        Some(b"P5") => PgmEncoding::Raw,
        _ => return Err(Error::format(path, "not a P2 or P5 graymap")),
    };
    let width = tok.number(path, "width")? as usize;
    let height = tok.number(path, "height")? as usize;
    let maxval = tok.number(path, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "empty image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(path, format!("maxval {maxval} outside 1..=65535")));
    }
    let maxval = maxval as u16;
    let n = width.checked_mul(height).ok_or_else(|| Error::format(path, "image too large"))?;
    let mut data = Vec::with_capacity(n);
    match encoding {
        PgmEncoding::Plain => {
            for i in 0..n {
                let v = tok.number(path, &format!("sample {i}"))?;
                if v > maxval as u64 {
                    return Err(Error::format(path, format!("sample {i} = {v} exceeds maxval {maxval}")));
                }
                data.push(v as u16);
            }
        }
        PgmEncoding::Raw => {
            // exactly one whitespace byte separates the header from the raster
            let start = tok.pos + 1;
            let wide = maxval > 255;
            let need = n * if wide { 2 } else { 1 };
            let raster = bytes
                .get(start..start + need)
                .ok_or_else(|| Error::format(path, format!("raster truncated: need {need} bytes")))?;
            if wide {
                data.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])));
            } else {
                data.extend(raster.iter().map(|&b| b as u16));
            }
            if let Some(i) = data.iter().position(|&v| v > maxval) {
                return Err(Error::format(path, format!("sample {i} exceeds maxval {maxval}")));
            }
        }
    }
    Ok(GrayImage { width, height, maxval, data })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    parse_pgm(&read_file(path)?, path)
}

pub fn encode_pgm(img: &GrayImage, encoding: PgmEncoding) -> Vec<u8> {
    let mut out = Vec::new();
    match encoding {
        PgmEncoding::Plain => {
            out.extend_from_slice(format!("P2\n{} {}\n{}\n", img.width, img.height, img.maxval).as_bytes());
            for row in img.data.chunks(img.width) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmEncoding::Raw => {
            out.extend_from_slice(format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).as_bytes());
            if img.maxval > 255 {
                img.data.iter().for_each(|v| out.extend_from_slice(&v.to_be_bytes()));
            } else {
                out.extend(img.data.iter().map(|&v| v as u8));
            }
        }
    }
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage, encoding: PgmEncoding) -> Result<()> {
    if img.data.len() != img.width * img.height {
        return Err(Error::format(path, "sample count does not match dimensions"));
    }
    if let Some(v) = img.data.iter().find(|&&v| v > img.maxval) {
        return Err(Error::format(path, format!("sample {v} exceeds maxval {}", img.maxval)));
    }
    write_file(path, &encode_pgm(img, encoding))
}
