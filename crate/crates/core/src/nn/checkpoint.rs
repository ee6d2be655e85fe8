//! Model checkpoint format.
//!
//! ```text
//! {"format":"cilfair-mlp","version":1,"layer_sizes":[16,64,64,20]}\n
//! layer 0 weights  (rows x cols f64, little-endian, row-major)
//! layer 0 biases   (rows f64, little-endian)
//! layer 1 weights
//! ...
//! ```
//!
//! The header is one line of JSON; everything after the newline is binary.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mlp, Tensor2};
use crate::error::{Error, Result};

const FORMAT: &str = "cilfair-mlp";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
}

pub fn write_checkpoint<W: Write>(net: &Mlp, mut out: W) -> std::io::Result<()> {
    let header = Header {
        format: FORMAT.to_string(),
        version: VERSION,
        layer_sizes: net.layer_sizes().to_vec(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (w, b) in net.weights().iter().zip(net.biases()) {
        for v in w.as_slice().iter().chain(b) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<Mlp> {
    let mut line = String::new();
    input
        .read_line(&mut line)
        .map_err(|e| Error::Checkpoint(format!("reading header: {e}")))?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}",
            header.format, header.version
        )));
    }
    if header.layer_sizes.len() < 2 {
        return Err(Error::Checkpoint("need at least two layer sizes".into()));
    }
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        input
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated parameter block: {e}")))?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in header.layer_sizes.windows(2) {
        let (cols, rows) = (pair[0], pair[1]);
        weights.push(Tensor2::from_vec(rows, cols, read_f64s(rows * cols)?)?);
        biases.push(read_f64s(rows)?);
    }
    let mut rest = Vec::new();
    input
        .read_to_end(&mut rest)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Mlp::from_parts(weights, biases)
}

pub fn save_checkpoint(net: &Mlp, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(net, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
