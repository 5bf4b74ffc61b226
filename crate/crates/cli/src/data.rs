//! Loading and saving tensors by file format.

use std::path::Path;

use clap::ValueEnum;
use gcp_core::io::{read_dense, read_dense_binary, read_tns, write_dense, write_dense_binary, write_tns};
use gcp_core::{DataTensor, Result, SparseTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Sparse coordinate text, 1-based indices.
    Tns,
    /// Dense text: shape header then one value per line.
    Dense,
    /// Raw little-endian f64 with a `.shape` sidecar.
    Bin,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tns") => Format::Tns,
            Some("bin") => Format::Bin,
            _ => Format::Dense,
        }
    }

    pub fn resolve(explicit: Option<Format>, path: &Path) -> Format {
        explicit.unwrap_or_else(|| Format::from_path(path))
    }
}

pub fn load(path: &Path, format: Option<Format>) -> Result<DataTensor> {
    Ok(match Format::resolve(format, path) {
        Format::Tns => DataTensor::Sparse(read_tns(path)?),
        Format::Dense => DataTensor::Dense(read_dense(path)?),
        Format::Bin => DataTensor::Dense(read_dense_binary(path)?),
    })
}

pub fn save(x: &DataTensor, path: &Path, format: Option<Format>) -> Result<()> {
    match (Format::resolve(format, path), x) {
        (Format::Tns, DataTensor::Sparse(s)) => write_tns(s, path),
        (Format::Tns, DataTensor::Dense(d)) => write_tns(&SparseTensor::from_dense(d), path),
        (Format::Dense, _) => write_dense(&x.to_dense()?, path),
        (Format::Bin, _) => write_dense_binary(&x.to_dense()?, path),
    }
}
