//! Flat-file checkpoints: named parameter matrices stored as little-endian
//! 64-bit floats alongside a plain-text shape manifest.
//!
//! Layout for a checkpoint named `foo`:
//! - `foo.manifest` — one line per tensor, `name rows cols`, in save order
//! - `foo.bin` — the concatenated matrix data, row-major

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Mat, Param, Scalar};

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed manifest line {line}: {text:?}")]
    Manifest { line: usize, text: String },
    #[error("tensor count mismatch: checkpoint has {found}, model expects {expected}")]
    Count { found: usize, expected: usize },
    #[error("tensor {name:?} shape mismatch: checkpoint {found_rows}x{found_cols}, model {rows}x{cols}")]
    Shape {
        name: String,
        found_rows: usize,
        found_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("binary payload length {found} bytes, expected {expected}")]
    Payload { found: usize, expected: usize },
}

/// Save named parameters to `<stem>.manifest` + `<stem>.bin`.
pub fn save<F: Scalar>(
    stem: &Path,
    tensors: &[(&str, &Param<F>)],
) -> Result<(), CheckpointError> {
    let mut manifest = String::new();
    let mut payload: Vec<u8> = Vec::new();
    for (name, p) in tensors {
        manifest.push_str(&format!("{} {} {}\n", name, p.value.rows, p.value.cols));
        for v in &p.value.data {
            let x = v.to_f64().expect("scalar to f64");
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(stem.with_extension("manifest"), manifest)?;
    let mut f = fs::File::create(stem.with_extension("bin"))?;
    f.write_all(&payload)?;
    Ok(())
}

/// Load a checkpoint into `tensors`, verifying names and shapes in order.
pub fn load<F: Scalar>(
    stem: &Path,
    tensors: &mut [(&str, &mut Param<F>)],
) -> Result<(), CheckpointError> {
    let manifest = fs::read_to_string(stem.with_extension("manifest"))?;
    let mut entries: Vec<(String, usize, usize)> = Vec::new();
    for (i, line) in manifest.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = (|| {
            let [name, r, c] = parts.as_slice() else {
                return None;
            };
            Some((name.to_string(), r.parse().ok()?, c.parse().ok()?))
        })();
        match parsed {
            Some(e) => entries.push(e),
            None => {
                return Err(CheckpointError::Manifest {
                    line: i + 1,
                    text: line.to_string(),
                })
            }
        }
    }
    if entries.len() != tensors.len() {
        return Err(CheckpointError::Count {
            found: entries.len(),
            expected: tensors.len(),
        });
    }
    let mut payload = Vec::new();
    fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut payload)?;
    let total: usize = entries.iter().map(|(_, r, c)| r * c).sum();
    if payload.len() != total * 8 {
        return Err(CheckpointError::Payload {
            found: payload.len(),
            expected: total * 8,
        });
    }
    let mut offset = 0usize;
    for ((name, rows, cols), (want_name, param)) in entries.iter().zip(tensors.iter_mut()) {
        if name != want_name
            || *rows != param.value.rows
            || *cols != param.value.cols
        {
            return Err(CheckpointError::Shape {
                name: name.clone(),
                found_rows: *rows,
                found_cols: *cols,
                rows: param.value.rows,
                cols: param.value.cols,
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&payload[offset..offset + 8]);
            offset += 8;
            data.push(F::from_f64(f64::from_le_bytes(buf)).expect("scalar from f64"));
        }
        param.value = Mat {
            rows: *rows,
            cols: *cols,
            data,
        };
    }
    Ok(())
}
