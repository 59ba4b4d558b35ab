//! On-disk container for model checkpoints.
//!
//! The format is a text header followed by a raw binary payload:
//!
//! ```text
//! ACDNECKPT v1
//! meta <key> <value>
//! ...
//! tensor <name> <rows> <cols>
//! ...
//! data
//! <rows*cols little-endian f64 per tensor, row-major, in header order>
//! ```
//!
//! Metadata keys are written in sorted order and tensors in insertion
//! order, so a given container always serializes to the same bytes.
//! Values may contain spaces but not newlines.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{CoreError, Result};

const MAGIC: &str = "ACDNECKPT v1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    meta: BTreeMap<String, String>,
    tensors: Vec<(String, Array2<f64>)>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| !c.is_whitespace())
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a metadata entry. Keys must be non-empty and free of
    /// whitespace; values must not contain newlines.
    pub fn set_meta(&mut self, key: &str, value: &str) -> Result<()> {
        if !valid_name(key) {
            return Err(CoreError::Argument(format!(
                "invalid metadata key {key:?}: must be non-empty without whitespace"
            )));
        }
        if value.contains('\n') || value.contains('\r') {
            return Err(CoreError::Argument(format!(
                "metadata value for {key:?} contains a line break"
            )));
        }
        self.meta.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn require_meta(&self, key: &str) -> Result<&str> {
        self.meta(key)
            .ok_or_else(|| CoreError::Validation(format!("checkpoint is missing metadata {key:?}")))
    }

    /// Appends a tensor. Names must be unique, non-empty, and free of
    /// whitespace; values must be finite.
    pub fn push_tensor(&mut self, name: &str, tensor: Array2<f64>) -> Result<()> {
        if !valid_name(name) {
            return Err(CoreError::Argument(format!(
                "invalid tensor name {name:?}: must be non-empty without whitespace"
            )));
        }
        if self.tensors.iter().any(|(n, _)| n == name) {
            return Err(CoreError::Argument(format!("duplicate tensor name {name:?}")));
        }
        if let Some(v) = tensor.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::Numeric(format!(
                "tensor {name:?} contains non-finite value {v}"
            )));
        }
        self.tensors.push((name.to_string(), tensor));
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require_tensor(&self, name: &str) -> Result<&Array2<f64>> {
        self.tensor(name)
            .ok_or_else(|| CoreError::Validation(format!("checkpoint is missing tensor {name:?}")))
    }

    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = String::new();
        header.push_str(MAGIC);
        header.push('\n');
        for (k, v) in &self.meta {
            header.push_str("meta ");
            header.push_str(k);
            header.push(' ');
            header.push_str(v);
            header.push('\n');
        }
        for (name, t) in &self.tensors {
            header.push_str(&format!("tensor {name} {} {}\n", t.nrows(), t.ncols()));
        }
        header.push_str("data\n");
        let payload_len: usize = self.tensors.iter().map(|(_, t)| t.len() * 8).sum();
        let mut bytes = Vec::with_capacity(header.len() + payload_len);
        bytes.extend_from_slice(header.as_bytes());
        for (_, t) in &self.tensors {
            // Row-major regardless of the array's internal layout.
            for row in t.rows() {
                for &v in row {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        bytes
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        let mut file =
            std::fs::File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        file.write_all(&bytes)
            .and_then(|_| file.flush())
            .map_err(|e| CoreError::io(path.display().to_string(), e))
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| CoreError::parse(origin, line, msg);
        // Split the text header off the binary payload by walking lines
        // until the `data` marker.
        let mut pos = 0usize;
        let mut line_no = 0usize;
        let mut meta = BTreeMap::new();
        let mut shapes: Vec<(String, usize, usize)> = Vec::new();
        let mut saw_magic = false;
        let payload_start = loop {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad(line_no + 1, "truncated header: no data marker".into()))?;
            let line = std::str::from_utf8(&rest[..nl])
                .map_err(|_| bad(line_no + 1, "header line is not valid UTF-8".into()))?;
            pos += nl + 1;
            line_no += 1;
            if !saw_magic {
                if line != MAGIC {
                    return Err(bad(line_no, format!("expected {MAGIC:?}, found {line:?}")));
                }
                saw_magic = true;
                continue;
            }
            if line == "data" {
                break pos;
            } else if let Some(rest) = line.strip_prefix("meta ") {
                let (key, value) = rest
                    .split_once(' ')
                    .ok_or_else(|| bad(line_no, format!("malformed metadata line {line:?}")))?;
                if meta.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(bad(line_no, format!("duplicate metadata key {key:?}")));
                }
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let fields: Vec<&str> = rest.split(' ').collect();
                if fields.len() != 3 {
                    return Err(bad(line_no, format!("malformed tensor line {line:?}")));
                }
                let rows: usize = fields[1]
                    .parse()
                    .map_err(|_| bad(line_no, format!("bad row count {:?}", fields[1])))?;
                let cols: usize = fields[2]
                    .parse()
                    .map_err(|_| bad(line_no, format!("bad column count {:?}", fields[2])))?;
                if shapes.iter().any(|(n, _, _)| n == fields[0]) {
                    return Err(bad(line_no, format!("duplicate tensor name {:?}", fields[0])));
                }
                shapes.push((fields[0].to_string(), rows, cols));
            } else {
                return Err(bad(line_no, format!("unrecognized header line {line:?}")));
            }
        };
        let expected: usize = shapes
            .iter()
            .map(|(_, r, c)| r.checked_mul(*c).map(|n| n * 8))
            .try_fold(0usize, |acc, n| n.and_then(|n| acc.checked_add(n)))
            .ok_or_else(|| bad(line_no, "tensor shapes overflow the payload size".into()))?;
        let payload = &bytes[payload_start..];
        if payload.len() != expected {
            return Err(CoreError::Validation(format!(
                "{origin}: payload holds {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        let mut tensors = Vec::with_capacity(shapes.len());
        let mut offset = 0usize;
        for (name, rows, cols) in shapes {
            let n = rows * cols;
            let mut data = Vec::with_capacity(n);
            for i in 0..n {
                let start = offset + i * 8;
                let raw: [u8; 8] = payload[start..start + 8].try_into().expect("length checked");
                data.push(f64::from_le_bytes(raw));
            }
            offset += n * 8;
            let tensor = Array2::from_shape_vec((rows, cols), data).expect("length matches shape");
            if let Some(v) = tensor.iter().find(|v| !v.is_finite()) {
                return Err(CoreError::Validation(format!(
                    "{origin}: tensor {name:?} contains non-finite value {v}"
                )));
            }
            tensors.push((name, tensor));
        }
        Ok(TensorContainer { meta, tensors })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}
