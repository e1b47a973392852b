//! FRAW and PGM raster I/O.
//!
//! FRAW is a 32-byte ASCII header line, `FRAW 1 <W> <H> <f32|f64>`, padded
//! with spaces and terminated by `\n`, followed by the row-major
//! little-endian payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;

pub const FRAW_MAGIC: &str = "FRAW";
pub const FRAW_VERSION: u32 = 1;
pub const FRAW_HEADER_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    F32,
    F64,
}

impl ValueKind {
    pub fn byte_size(self) -> usize {
        match self {
            ValueKind::F32 => 4,
            ValueKind::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::F32 => "f32",
            ValueKind::F64 => "f64",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FRawHeader {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub value_kind: ValueKind,
}

impl FRawHeader {
    pub fn encode(&self) -> Result<[u8; FRAW_HEADER_LEN]> {
        let line = format!(
            "{FRAW_MAGIC} {} {} {} {}",
            self.version,
            self.width,
            self.height,
            self.value_kind.as_str()
        );
        if line.len() + 1 > FRAW_HEADER_LEN {
            return Err(Error::validation(format!(
                "FRAW header for {}x{} does not fit in {FRAW_HEADER_LEN} bytes",
                self.width, self.height
            )));
        }
        let mut out = [b' '; FRAW_HEADER_LEN];
        out[..line.len()].copy_from_slice(line.as_bytes());
        out[FRAW_HEADER_LEN - 1] = b'\n';
        Ok(out)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FRAW_HEADER_LEN {
            return Err(Error::format(format!(
                "FRAW header truncated: {} of {FRAW_HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        let head = &bytes[..FRAW_HEADER_LEN];
        if !head.starts_with(FRAW_MAGIC.as_bytes()) {
            return Err(Error::format("bad magic, expected \"FRAW\""));
        }
        if head[FRAW_HEADER_LEN - 1] != b'\n' {
            return Err(Error::format("FRAW header line is not newline-terminated at byte 32"));
        }
        let text = std::str::from_utf8(head).map_err(|_| Error::format("FRAW header is not ASCII"))?;
        let fields: Vec<&str> = text.split_ascii_whitespace().collect();
        let [_, version, width, height, kind] = fields[..] else {
            return Err(Error::format(format!("malformed FRAW header {:?}", text.trim_end())));
        };
        let version: u32 = version
            .parse()
            .map_err(|_| Error::format(format!("bad FRAW version {version:?}")))?;
        if version != FRAW_VERSION {
            return Err(Error::format(format!("unsupported FRAW version {version}")));
        }
        let dim = |s: &str| -> Result<usize> {
            let d: usize = s
                .parse()
                .map_err(|_| Error::format(format!("bad FRAW dimension {s:?}")))?;
            if d == 0 {
                return Err(Error::validation("FRAW dimensions must be positive"));
            }
            Ok(d)
        };
        let value_kind = match kind {
            "f32" => ValueKind::F32,
            "f64" => ValueKind::F64,
            other => return Err(Error::format(format!("unknown FRAW value kind {other:?}"))),
        };
        Ok(FRawHeader {
            version,
            width: dim(width)?,
            height: dim(height)?,
            value_kind,
        })
    }

    pub fn payload_len(&self) -> Result<usize> {
        self.width
            .checked_mul(self.height)
            .and_then(|n| n.checked_mul(self.value_kind.byte_size()))
            .ok_or_else(|| Error::format(format!("FRAW dimensions {}x{} overflow", self.width, self.height)))
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path.file_name().ok_or_else(|| {
        Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "no file name"))
    })?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn encode_fraw(raster: &Raster, kind: ValueKind) -> Result<Vec<u8>> {
    let header = FRawHeader {
        version: FRAW_VERSION,
        width: raster.width(),
        height: raster.height(),
        value_kind: kind,
    };
    let mut out = Vec::with_capacity(FRAW_HEADER_LEN + header.payload_len()?);
    out.extend_from_slice(&header.encode()?);
    match kind {
        ValueKind::F64 => raster.values().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        ValueKind::F32 => raster
            .values()
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    Ok(out)
}

pub fn decode_fraw(bytes: &[u8]) -> Result<(Raster, ValueKind)> {
    let header = FRawHeader::parse(bytes)?;
    let expected = header.payload_len()?;
    let payload = &bytes[FRAW_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::format(format!(
            "FRAW payload length mismatch: expected {expected} bytes for {}x{} {}, found {}",
            header.width,
            header.height,
            header.value_kind.as_str(),
            payload.len()
        )));
    }
    let values: Vec<f64> = match header.value_kind {
        ValueKind::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        ValueKind::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    Ok((Raster::new(header.width, header.height, values)?, header.value_kind))
}

pub fn read_fraw(path: impl AsRef<Path>) -> Result<Raster> {
    read_fraw_with_kind(path).map(|(r, _)| r)
}

pub fn read_fraw_with_kind(path: impl AsRef<Path>) -> Result<(Raster, ValueKind)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fraw(&bytes)
}

pub fn write_fraw(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    write_fraw_as(raster, path, ValueKind::F64)
}

pub fn write_fraw_as(raster: &Raster, path: impl AsRef<Path>, kind: ValueKind) -> Result<()> {
    write_atomic(path.as_ref(), &encode_fraw(raster, kind)?)
}

/// How raster values map onto PGM gray levels `0..=maxval`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PgmScaling {
    /// Values are used as gray levels directly, clamped to `[0, maxval]`.
    #[default]
    Clamp,
    /// `min → 0`, `max → maxval`, linear in between.
    MinMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PgmEncoding {
    /// `P2`
    Ascii,
    /// `P5`
    #[default]
    Binary,
}

/// Gray levels for `raster`; rounding is half away from zero.
pub fn pgm_levels(raster: &Raster, maxval: u16, scaling: PgmScaling) -> Vec<u16> {
    let top = maxval as f64;
    let (lo, hi) = raster
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    raster
        .values()
        .iter()
        .map(|&v| {
            let level = match scaling {
                PgmScaling::Clamp => v,
                PgmScaling::MinMax if hi > lo => (v - lo) / (hi - lo) * top,
                PgmScaling::MinMax => 0.0,
            };
            level.round().clamp(0.0, top) as u16
        })
        .collect()
}

pub fn encode_pgm(raster: &Raster, maxval: u16, scaling: PgmScaling, encoding: PgmEncoding) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::validation("PGM maxval must be in 1..=65535"));
    }
    let levels = pgm_levels(raster, maxval, scaling);
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", raster.width(), raster.height()).into_bytes();
    match encoding {
        PgmEncoding::Binary if maxval < 256 => out.extend(levels.iter().map(|&l| l as u8)),
        PgmEncoding::Binary => levels.iter().for_each(|l| out.extend_from_slice(&l.to_be_bytes())),
        PgmEncoding::Ascii => {
            for row in levels.chunks(raster.width()) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}

pub fn write_pgm(raster: &Raster, path: impl AsRef<Path>, maxval: u16) -> Result<()> {
    write_pgm_with(raster, path, maxval, PgmScaling::Clamp, PgmEncoding::Binary)
}

pub fn write_pgm_with(
    raster: &Raster,
    path: impl AsRef<Path>,
    maxval: u16,
    scaling: PgmScaling,
    encoding: PgmEncoding,
) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pgm(raster, maxval, scaling, encoding)?)
}

struct PgmTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmTokens<'_> {
    fn skip_space_and_comments(&mut self) {
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

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("PGM: expected {what} at byte {start}")))
    }
}

/// Decodes P2 or P5 data; gray levels are returned as-is.
pub fn decode_pgm(bytes: &[u8]) -> Result<Raster> {
    let magic = bytes.get(..2).unwrap_or_default();
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => {
            return Err(Error::format(format!(
                "unsupported PNM magic {:?}; only P2 and P5 grayscale are read",
                String::from_utf8_lossy(magic)
            )))
        }
    };
    let mut tok = PgmTokens { bytes, pos: 2 };
    let width = tok.number("width")? as usize;
    let height = tok.number("height")? as usize;
    let maxval = tok.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    if width == 0 || height == 0 {
        return Err(Error::validation("PGM dimensions must be positive"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::format("PGM dimensions overflow"))?;
    let values: Vec<f64> = if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        let start = tok.pos + 1;
        let sample = if maxval < 256 { 1 } else { 2 };
        let need = count
            .checked_mul(sample)
            .ok_or_else(|| Error::format("PGM dimensions overflow"))?;
        let data = bytes.get(start..).unwrap_or_default();
        if data.len() < need {
            return Err(Error::format(format!(
                "PGM payload truncated: expected {need} bytes, found {}",
                data.len()
            )));
        }
        if sample == 1 {
            data[..need].iter().map(|&b| b as f64).collect()
        } else {
            data[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect()
        }
    } else {
        (0..count)
            .map(|_| tok.number("sample").map(|v| v as f64))
            .collect::<Result<_>>()?
    };
    if let Some(v) = values.iter().find(|&&v| v > maxval as f64) {
        return Err(Error::format(format!("PGM sample {v} exceeds maxval {maxval}")));
    }
    Raster::new(width, height, values)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Reads FRAW or PGM, chosen by file content.
pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(FRAW_MAGIC.as_bytes()) {
        decode_fraw(&bytes).map(|(r, _)| r)
    } else {
        decode_pgm(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, |x, y| (x as f64).sin() * 1e3 + y as f64 / 7.0).unwrap()
    }

    #[test]
    fn fraw_header_layout() {
        let h = FRawHeader {
            version: 1,
            width: 128,
            height: 64,
            value_kind: ValueKind::F64,
        };
        let bytes = h.encode().unwrap();
        assert_eq!(&bytes[..], b"FRAW 1 128 64 f64              \n");
        assert_eq!(FRawHeader::parse(&bytes).unwrap(), h);
    }

    #[test]
    fn fraw_f64_round_trip_bit_exact() {
        let r = ramp(128, 128);
        let bytes = encode_fraw(&r, ValueKind::F64).unwrap();
        assert_eq!(bytes.len(), 32 + 128 * 128 * 8);
        let (back, kind) = decode_fraw(&bytes).unwrap();
        assert_eq!(kind, ValueKind::F64);
        let a: Vec<u64> = r.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(encode_fraw(&back, ValueKind::F64).unwrap(), bytes);
    }

    #[test]
    fn fraw_f32_round_trip_at_declared_precision() {
        let r = ramp(9, 4);
        let bytes = encode_fraw(&r, ValueKind::F32).unwrap();
        let (back, kind) = decode_fraw(&bytes).unwrap();
        assert_eq!(kind, ValueKind::F32);
        assert_eq!(encode_fraw(&back, ValueKind::F32).unwrap(), bytes);
    }

    #[test]
    fn fraw_truncated_reports_byte_counts() {
        let bytes = encode_fraw(&ramp(4, 4), ValueKind::F64).unwrap();
        let err = decode_fraw(&bytes[..bytes.len() - 3]).unwrap_err().to_string();
        assert!(err.contains("expected 128 bytes") && err.contains("found 125"), "{err}");
    }

    #[test]
    fn fraw_zero_width() {
        let mut bytes = *b"FRAW 1 0 4 f64                 \n";
        bytes[31] = b'\n';
        let err = FRawHeader::parse(&bytes[..32]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn fraw_bad_magic_and_overflow() {
        let mut bytes = encode_fraw(&ramp(2, 2), ValueKind::F64).unwrap();
        bytes[0] = b'G';
        assert!(matches!(decode_fraw(&bytes), Err(Error::Format(_))));
        let mut huge = b"FRAW 1 999999999 9999999999 f64".to_vec();
        huge.push(b'\n');
        assert_eq!(huge.len(), 32);
        huge.extend_from_slice(&[0u8; 16]);
        let err = decode_fraw(&huge).unwrap_err().to_string();
        assert!(err.contains("overflow"), "{err}");
    }

    #[test]
    fn pgm_8bit_round_trip_exact() {
        let r = Raster::from_fn(17, 5, |x, y| ((x * 31 + y * 7) % 256) as f64).unwrap();
        for enc in [PgmEncoding::Binary, PgmEncoding::Ascii] {
            let bytes = encode_pgm(&r, 255, PgmScaling::Clamp, enc).unwrap();
            assert_eq!(decode_pgm(&bytes).unwrap(), r);
        }
    }

    #[test]
    fn pgm_16bit_round_trip_exact() {
        let r = Raster::from_fn(6, 3, |x, y| (x * 10000 + y) as f64).unwrap();
        let bytes = encode_pgm(&r, 65535, PgmScaling::Clamp, PgmEncoding::Binary).unwrap();
        assert_eq!(decode_pgm(&bytes).unwrap(), r);
    }

    #[test]
    fn pgm_minmax_mapping_is_monotone() {
        let r = Raster::new(4, 1, vec![-3.0, -1.0, 0.5, 2.0]).unwrap();
        let levels = pgm_levels(&r, 255, PgmScaling::MinMax);
        assert_eq!(levels[0], 0);
        assert_eq!(levels[3], 255);
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        // (−1 + 3)/5 · 255 = 102 exactly; 0.5 → 3.5/5·255 = 178.5 → 179.
        assert_eq!(levels[1], 102);
        assert_eq!(levels[2], 179);
    }

    #[test]
    fn pgm_comments_are_skipped() {
        let bytes = b"P2\n# made by hand\n2 2\n# max\n9\n1 2\n3 9\n";
        let r = decode_pgm(bytes).unwrap();
        assert_eq!(r.values(), &[1.0, 2.0, 3.0, 9.0]);
    }

    #[test]
    fn pgm_rejects_color_and_bad_maxval() {
        assert!(matches!(decode_pgm(b"P3\n1 1\n255\n0 0 0\n"), Err(Error::Format(_))));
        assert!(matches!(decode_pgm(b"P2\n1 1\n70000\n0\n"), Err(Error::Format(_))));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\x01"), Err(Error::Format(_))));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.fraw");
        write_fraw(&ramp(3, 3), &p).unwrap();
        write_fraw(&ramp(2, 2), &p).unwrap();
        assert_eq!(read_fraw(&p).unwrap().width(), 2);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(read_raster(&p).unwrap(), ramp(2, 2));
    }
}
