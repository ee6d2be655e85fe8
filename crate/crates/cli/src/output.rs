//! Output directory handling and file writers.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Pick the output directory (`--out` wins over the config) and make sure it
/// is absent or empty unless `force` is set. Nothing is created here.
pub fn resolve_out_dir(cli: Option<&Path>, config: Option<&Path>, force: bool) -> Result<PathBuf> {
    let dir = cli
        .or(config)
        .ok_or_else(|| {
            HarnessError::config("output_dir", "no output directory; set it or pass --out")
        })?
        .to_path_buf();
    if dir.exists() {
        if !dir.is_dir() {
            return Err(HarnessError::config(
                "output_dir",
                format!("{} exists and is not a directory", dir.display()),
            ));
        }
        let non_empty = fs::read_dir(&dir)
            .map_err(|e| HarnessError::io(&dir, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(HarnessError::OutputNotEmpty(dir));
        }
    }
    Ok(dir)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| HarnessError::io(path, e))?,
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Serialize {
        what: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Write a CSV with a fixed header and string rows.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| HarnessError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Write through a closure that takes a buffered file handle.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let mut out = create(path)?;
    f(&mut out).map_err(|e| HarnessError::io(path, e))
}

/// Run `f` on a pool of `jobs` threads, or on rayon's default pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(HarnessError::config("--jobs", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::io("thread pool", std::io::Error::other(e)))?;
            Ok(pool.install(f))
        }
    }
}
