//! Binary bank container.
//!
//! ```text
//! "SVRB"                      magic, 4 bytes
//! u32 version                 currently 1
//! u32 half_width (L)
//! u32 bin_count (N)
//! u32 n_reuse                 banks stored: n_reuse + 1
//! per bank:
//!   u32 iteration
//!   f64 p_min, f64 p_max
//!   N × f64                   atomic parameter per bin
//!   N × K² × f64              kernel coefficients, row-major per bin
//! u32 crc32                   over every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::fmt::Write as _;
use std::path::Path;

use super::{FilterBank, RecursiveBankSet};
use crate::error::{Error, Result};
use crate::kernels::{vrp, Kernel2D};
use crate::rasterio::write_atomic;

pub const BANK_MAGIC: &[u8; 4] = b"SVRB";
pub const BANK_FORMAT_VERSION: u32 = 1;

/// Serializes a bank set into the binary container.
pub fn write_bank(set: &RecursiveBankSet) -> Vec<u8> {
    let k2 = (2 * set.half_width() + 1).pow(2);
    let bins = set.bin_count();
    let mut out = Vec::with_capacity(24 + set.banks().len() * (20 + bins * (1 + k2) * 8));
    out.extend_from_slice(BANK_MAGIC);
    for v in [
        BANK_FORMAT_VERSION,
        set.half_width() as u32,
        bins as u32,
        set.n_reuse() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for bank in set.banks() {
        out.extend_from_slice(&(bank.iteration() as u32).to_le_bytes());
        out.extend_from_slice(&bank.p_min().to_le_bytes());
        out.extend_from_slice(&bank.p_max().to_le_bytes());
        for a in bank.a_values() {
            out.extend_from_slice(&a.to_le_bytes());
        }
        for k in bank.kernels() {
            for c in k.coeffs() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(format!(
                "bank file truncated: need {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.bytes.len().saturating_sub(self.pos)
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses the binary container, verifying magic, version and checksum.
pub fn read_bank(bytes: &[u8]) -> Result<RecursiveBankSet> {
    if bytes.len() < 4 || &bytes[..4] != BANK_MAGIC {
        return Err(Error::format("not a bank file (bad magic, expected \"SVRB\")"));
    }
    if bytes.len() < 24 {
        return Err(Error::format(format!(
            "bank file truncated: {} bytes is shorter than the header",
            bytes.len()
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let mut cur = Cursor { bytes: body, pos: 4 };
    let version = cur.u32()?;
    if version != BANK_FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported bank format version {version} (expected {BANK_FORMAT_VERSION})"
        )));
    }
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let half_width = cur.u32()? as usize;
    let bins = cur.u32()? as usize;
    let n_reuse = cur.u32()? as usize;
    if half_width == 0 || half_width > 1024 || bins < 2 {
        return Err(Error::format(format!(
            "implausible bank header: L={half_width}, bins={bins}"
        )));
    }
    let k2 = (2 * half_width + 1).pow(2);
    let mut banks = Vec::with_capacity(n_reuse.min(64) + 1);
    for _ in 0..=n_reuse {
        let iteration = cur.u32()? as usize;
        let p_min = cur.f64()?;
        let p_max = cur.f64()?;
        let a_values = (0..bins).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let mut kernels = Vec::with_capacity(bins);
        for _ in 0..bins {
            let coeffs = cur
                .take(k2 * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            kernels.push(Kernel2D::from_coeffs(half_width, coeffs)?);
        }
        banks.push(FilterBank::from_parts(half_width, iteration, p_min, p_max, a_values, kernels)?);
    }
    if cur.pos != body.len() {
        return Err(Error::format(format!(
            "{} unexpected trailing bytes in bank file",
            body.len() - cur.pos
        )));
    }
    RecursiveBankSet::new(banks)
}

pub fn save_bank(set: &RecursiveBankSet, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &write_bank(set))
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<RecursiveBankSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_bank(&bytes)
}

/// Text listing, one line per bin: `index p a vrp`.
pub fn dump_bank(set: &RecursiveBankSet) -> String {
    let mut s = String::new();
    let k = 2 * set.half_width() + 1;
    let _ = writeln!(
        s,
        "# bank set: {k}x{k} kernels, {} bins, {} banks (passes >= {} reuse the last)",
        set.bin_count(),
        set.banks().len(),
        set.n_reuse()
    );
    for bank in set.banks() {
        let _ = writeln!(
            s,
            "# pass {}: p_min={} p_max={}",
            bank.iteration(),
            bank.p_min(),
            bank.p_max()
        );
        let _ = writeln!(s, "pass,index,p,a,kernel_vrp");
        for (i, (a, kern)) in bank.a_values().iter().zip(bank.kernels()).enumerate() {
            let _ = writeln!(s, "{},{i},{},{a},{}", bank.iteration(), bank.bin_p(i), vrp(kern));
        }
    }
    s
}
