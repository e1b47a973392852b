use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use varfilt::rasterio::{decode_fraw, decode_pgm, encode_fraw, write_atomic, write_pgm, ValueKind, FRAW_MAGIC};
use varfilt::Raster;

/// Resolved configuration of one run, written as `<out>.meta`.
pub struct Meta {
    lines: Vec<(String, String)>,
}

impl Meta {
    pub fn new(command: &str) -> Self {
        let mut m = Meta { lines: Vec::new() };
        m.set("command", command).set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    pub fn set_path(&mut self, key: &str, path: &Path) -> &mut Self {
        self.set(key, path.display())
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: &Option<T>) -> &mut Self {
        match value {
            Some(v) => self.set(key, v),
            None => self.set(key, "none"),
        }
    }

    pub fn write_for(&self, out: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.lines {
            text.push_str(&format!("{k}={v}\n"));
        }
        let path = sidecar_path(out);
        write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// How a raster was stored, so outputs can mirror their input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoredAs {
    Fraw(ValueKind),
    Pgm,
}

pub fn read_raster_kind(path: &Path) -> Result<(Raster, StoredAs)> {
    let bytes = fs::read(path).map_err(|e| varfilt::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if bytes.starts_with(FRAW_MAGIC.as_bytes()) {
        let (r, kind) = decode_fraw(&bytes)?;
        Ok((r, StoredAs::Fraw(kind)))
    } else {
        Ok((decode_pgm(&bytes)?, StoredAs::Pgm))
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Writes `.pgm` paths as 8-bit binary PGM (values clamped to 0..=255) and
/// everything else as FRAW of the given kind.
pub fn write_raster(raster: &Raster, path: &Path, kind: ValueKind) -> Result<()> {
    if is_pgm(path) {
        write_pgm(raster, path, 255)?;
    } else {
        write_atomic(path, &encode_fraw(raster, kind)?)?;
    }
    Ok(())
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            // A closed pipe (`| head`) is not an error for text output.
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}
