//! Binary tensor container: `GWCK`, u32 version, u32 tensor count, then per
//! tensor a u32-length-prefixed UTF-8 name, u32 rank, u64 dims and
//! little-endian f64 payload. Hyperparameters live in a JSON sidecar.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::NeuralError;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GWCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn vector<T: Scalar>(v: &[T]) -> Self {
        Tensor { shape: vec![v.len()], data: v.iter().map(|x| x.f64()).collect() }
    }

    pub fn matrix<T: Scalar>(m: &Matrix<T>) -> Self {
        Tensor {
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().iter().map(|x| x.f64()).collect(),
        }
    }

    pub fn scalar<T: Scalar>(x: T) -> Self {
        Tensor { shape: vec![], data: vec![x.f64()] }
    }

    pub fn to_vec<T: Scalar>(&self) -> Vec<T> {
        self.data.iter().map(|&x| T::of(x)).collect()
    }

    pub fn to_matrix<T: Scalar>(&self) -> Result<Matrix<T>, NeuralError> {
        match self.shape[..] {
            [r, c] => Ok(Matrix::from_vec(r, c, self.to_vec())),
            _ => Err(NeuralError::Checkpoint(format!("expected rank 2, got {:?}", self.shape))),
        }
    }
}

/// Named tensors, written in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorTable(pub BTreeMap<String, Tensor>);

impl TensorTable {
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.0.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NeuralError> {
        self.0
            .get(name)
            .ok_or_else(|| NeuralError::Checkpoint(format!("missing tensor {name}")))
    }

    pub fn vector<T: Scalar>(&self, name: &str) -> Result<Vec<T>, NeuralError> {
        Ok(self.get(name)?.to_vec())
    }

    pub fn matrix<T: Scalar>(&self, name: &str) -> Result<Matrix<T>, NeuralError> {
        self.get(name)?.to_matrix()
    }

    pub fn scalar<T: Scalar>(&self, name: &str) -> Result<T, NeuralError> {
        let t = self.get(name)?;
        t.data
            .first()
            .map(|&x| T::of(x))
            .ok_or_else(|| NeuralError::Checkpoint(format!("empty tensor {name}")))
    }
}

pub fn write_tensors<W: Write>(mut w: W, table: &TensorTable) -> Result<(), NeuralError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(table.0.len() as u32)?;
    for (name, t) in &table.0 {
        let expected: usize = t.shape.iter().product();
        if expected != t.data.len() {
            return Err(NeuralError::Checkpoint(format!(
                "tensor {name}: shape {:?} does not match {} values",
                t.shape,
                t.data.len()
            )));
        }
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u32::<LittleEndian>(t.shape.len() as u32)?;
        for &d in &t.shape {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        for &x in &t.data {
            w.write_f64::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<TensorTable, NeuralError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NeuralError::Checkpoint("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.read_u32::<LittleEndian>()?;
    let mut table = TensorTable::default();
    for _ in 0..count {
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NeuralError::Checkpoint("tensor name is not UTF-8".into()))?;
        let rank = r.read_u32::<LittleEndian>()? as usize;
        let shape = (0..rank)
            .map(|_| r.read_u64::<LittleEndian>().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let mut data = vec![0.0; n];
        r.read_f64_into::<LittleEndian>(&mut data)?;
        table.insert(name, Tensor { shape, data });
    }
    Ok(table)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes `path` and `path.json`.
pub fn save_checkpoint(
    path: &Path,
    table: &TensorTable,
    sidecar: &serde_json::Value,
) -> Result<(), NeuralError> {
    write_tensors(BufWriter::new(File::create(path)?), table)?;
    let json = serde_json::to_string_pretty(sidecar)
        .map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    std::fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(TensorTable, serde_json::Value), NeuralError> {
    let table = read_tensors(BufReader::new(File::open(path)?))?;
    let text = std::fs::read_to_string(sidecar_path(path))?;
    let sidecar = serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    Ok((table, sidecar))
}
