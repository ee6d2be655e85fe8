//! Dataset CSV: header `id,label,f0,...,f{d-1}`, one sample per line.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{LabeledDataset, Sample};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

pub fn read_csv<R: Read>(input: R, path: &Path) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| parse_err(path, 1, e.to_string()))?,
        None => return Err(parse_err(path, 1, "missing header")),
    };
    if header.len() < 2 || &header[0] != "id" || &header[1] != "label" {
        return Err(parse_err(path, 1, "header must start with `id,label`"));
    }
    let dim = header.len() - 2;
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{j}") {
            return Err(parse_err(
                path,
                1,
                format!("expected column f{j}, found `{name}`"),
            ));
        }
    }

    let mut samples = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dim + 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", dim + 2, record.len()),
            ));
        }
        let id = record[0]
            .parse::<u64>()
            .map_err(|e| parse_err(path, line, format!("bad id `{}`: {e}", &record[0])))?;
        let label = record[1]
            .parse::<usize>()
            .map_err(|e| parse_err(path, line, format!("bad label `{}`: {e}", &record[1])))?;
        let features = record
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("non-numeric feature `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(Sample {
            id,
            features,
            label,
        });
    }
    LabeledDataset::from_samples(samples, dim).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_csv<W: Write>(ds: &LabeledDataset, out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..ds.feature_dim()).map(|j| format!("f{j}")));
    writer.write_record(&header)?;
    for s in ds.samples() {
        let mut row = vec![s.id.to_string(), s.label.to_string()];
        // `Display` for f64 prints the shortest string that parses back exactly.
        row.extend(s.features.iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()
}

pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path)
}

pub fn save_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, file).map_err(|e| Error::io(path, e))
}
