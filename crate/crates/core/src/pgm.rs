//! Binary PGM (P5) reading and writing.
//!
//! Only maxval 255 (8-bit samples) and 65535 (16-bit big-endian samples)
//! are supported. Headers are written as `P5\n<w> <h>\n<maxval>\n`; on read
//! any whitespace and `#` comments between header tokens are accepted.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::{BinaryMap, SoftMap};

/// Upper bound on decoded pixel count, keeps hostile headers from
/// requesting absurd allocations.
pub const MAX_PIXELS: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Maxval {
    Eight,
    Sixteen,
}

impl Maxval {
    pub fn value(self) -> u32 {
        match self {
            Maxval::Eight => 255,
            Maxval::Sixteen => 65535,
        }
    }

    pub fn from_value(v: u32) -> Result<Self> {
        match v {
            255 => Ok(Maxval::Eight),
            65535 => Ok(Maxval::Sixteen),
            other => Err(Error::UnsupportedMaxval(other)),
        }
    }

    fn bytes_per_sample(self) -> usize {
        match self {
            Maxval::Eight => 1,
            Maxval::Sixteen => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: Maxval,
    /// Row-major, each `<= maxval`.
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_separators(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.data.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u32::from(b - b'0')))
                .ok_or_else(|| Error::MalformedHeader(format!("{what} is too large")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return match self.data.get(self.pos) {
                None => Err(Error::TruncatedData {
                    expected: self.pos + 1,
                    found: self.data.len(),
                }),
                Some(&b) => Err(Error::MalformedHeader(format!(
                    "expected {what}, found byte 0x{b:02x}"
                ))),
            };
        }
        Ok(value)
    }
}

pub fn decode(data: &[u8]) -> Result<PgmImage> {
    if data.len() < 2 {
        return Err(Error::TruncatedData {
            expected: 2,
            found: data.len(),
        });
    }
    if &data[..2] != b"P5" {
        return Err(Error::MalformedHeader("missing P5 magic".into()));
    }
    let mut cur = Cursor { data, pos: 2 };
    match data.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        Some(_) => return Err(Error::MalformedHeader("no separator after magic".into())),
        None => {
            return Err(Error::TruncatedData {
                expected: 3,
                found: data.len(),
            })
        }
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = Maxval::from_value(cur.number("maxval")?)?;
    match data.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(Error::MalformedHeader("no whitespace after maxval".into())),
        None => {
            return Err(Error::TruncatedData {
                expected: cur.pos + 1,
                found: data.len(),
            })
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    let pixels = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| Error::MalformedHeader(format!("{width}x{height} is too large")))?;
    let needed = pixels * maxval.bytes_per_sample();
    let body = &data[cur.pos..];
    if body.len() < needed {
        return Err(Error::TruncatedData {
            expected: cur.pos + needed,
            found: data.len(),
        });
    }
    let samples = match maxval {
        Maxval::Eight => body[..needed].iter().map(|&b| u16::from(b)).collect(),
        Maxval::Sixteen => body[..needed]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
    };
    Ok(PgmImage {
        width,
        height,
        maxval,
        samples,
    })
}

pub fn encode(img: &PgmImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval.value()).into_bytes();
    match img.maxval {
        Maxval::Eight => out.extend(img.samples.iter().map(|&s| s as u8)),
        Maxval::Sixteen => out.extend(img.samples.iter().flat_map(|s| s.to_be_bytes())),
    }
    out
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&data)
}

pub fn write_pgm(img: &PgmImage, path: &Path) -> Result<()> {
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

impl PgmImage {
    pub fn to_soft(&self) -> SoftMap {
        let max = f64::from(self.maxval.value());
        let values = self.samples.iter().map(|&s| f64::from(s) / max).collect();
        SoftMap::new(self.height, self.width, values).expect("decoded samples are within maxval")
    }

    /// Quantizes with `round(value * maxval)`, ties away from zero.
    pub fn from_soft(map: &SoftMap, maxval: Maxval) -> Self {
        let max = f64::from(maxval.value());
        Self {
            width: map.width(),
            height: map.height(),
            maxval,
            samples: map.values().iter().map(|&v| (v * max).round() as u16).collect(),
        }
    }

    pub fn to_binary(&self, positive_threshold: f64) -> BinaryMap {
        let soft = self.to_soft();
        let values = soft
            .values()
            .iter()
            .map(|&v| u8::from(v >= positive_threshold))
            .collect();
        BinaryMap::new(self.height, self.width, values).expect("binary by construction")
    }
}

pub fn read_soft(path: &Path) -> Result<SoftMap> {
    Ok(read_pgm(path)?.to_soft())
}

pub fn read_binary(path: &Path, positive_threshold: f64) -> Result<BinaryMap> {
    Ok(read_pgm(path)?.to_binary(positive_threshold))
}

pub fn write_soft(map: &SoftMap, path: &Path, maxval: Maxval) -> Result<()> {
    write_pgm(&PgmImage::from_soft(map, maxval), path)
}

/// Writes `{0, 1}` as `{0, 255}` at maxval 255.
pub fn write_binary(map: &BinaryMap, path: &Path) -> Result<()> {
    write_soft(&SoftMap::from_binary(map), path, Maxval::Eight)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_eight_bit() {
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend([255, 0, 128, 64]);
        let soft = decode(&data).unwrap().to_soft();
        assert_eq!(soft.values(), &[1.0, 0.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn decodes_sixteen_bit_big_endian() {
        let mut data = b"P5 1 1 65535\n".to_vec();
        data.extend([0x01, 0x02]);
        assert_eq!(decode(&data).unwrap().samples, vec![0x0102]);
    }

    #[test]
    fn accepts_comments_and_mixed_whitespace() {
        let mut data = b"P5# a comment\n\t3 # width done\r\n1\n255\n".to_vec();
        data.extend([1, 2, 3]);
        let img = decode(&data).unwrap();
        assert_eq!((img.width, img.height), (3, 1));
        assert_eq!(img.samples, vec![1, 2, 3]);
    }

    #[test]
    fn zero_length_is_truncated() {
        assert!(matches!(decode(b""), Err(Error::TruncatedData { .. })));
    }

    #[test]
    fn short_body_is_truncated() {
        let data = b"P5\n2 2\n255\n\x00\x00\x00";
        assert!(matches!(decode(data), Err(Error::TruncatedData { .. })));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode(b"P5\n0 1\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode(b"P5\nx 1\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode(b"P5\n1 1\n1023\n\0\0"), Err(Error::UnsupportedMaxval(1023))));
        assert!(matches!(decode(b"P5\n99999999999 1\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode(b"P5\n65536 65536\n255\n"), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn write_rounding() {
        let m = SoftMap::from_rows(&[&[1.0, 0.5, 0.0]]).unwrap();
        let img = PgmImage::from_soft(&m, Maxval::Eight);
        assert_eq!(img.samples, vec![255, 128, 0]);
        let bytes = encode(&img);
        assert!(bytes.starts_with(b"P5\n3 1\n255\n"));
        assert_eq!(bytes.len(), 11 + 3);
    }

    #[test]
    fn binary_threshold() {
        let img = PgmImage {
            width: 3,
            height: 1,
            maxval: Maxval::Eight,
            samples: vec![0, 127, 128],
        };
        assert_eq!(img.to_binary(0.5).values(), &[0, 0, 1]);
    }
}
