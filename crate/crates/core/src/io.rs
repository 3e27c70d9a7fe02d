//! On-disk formats: feature tensor files, model checkpoints, PGM images,
//! CSV reports, digests, and run manifests.

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::harness::ConfusionMatrix;
use crate::linalg::Mat;
use crate::neural::{EpochLog, TemporalModel, TemporalModelConfig};
use crate::num::Scalar;
use crate::types::{Label, NUM_CLASSES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const TENSOR_MAGIC: &[u8; 4] = b"TGFT";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TGCK";
pub const FORMAT_VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exactly(r: &mut impl Read, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

// ------------------------------------------------------------- tensor file

/// Header: magic, version, count, T, F (LE u32). Per sample: label byte,
/// region_id length + bytes, then T*F LE f64 values.
pub fn write_tensor_file<S: Scalar>(
    path: &Path,
    sequences: &[FeatureSequence<S>],
) -> Result<()> {
    let (t_len, f_dim) = match sequences.first() {
        Some(s) => (s.steps.rows(), s.steps.cols()),
        None => (0, 0),
    };
    for s in sequences {
        if s.steps.rows() != t_len || s.steps.cols() != f_dim {
            return Err(Error::data("inconsistent tensor shapes in dataset"));
        }
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(TENSOR_MAGIC)?;
    write_u32(&mut w, FORMAT_VERSION)?;
    write_u32(&mut w, sequences.len() as u32)?;
    write_u32(&mut w, t_len as u32)?;
    write_u32(&mut w, f_dim as u32)?;
    for s in sequences {
        w.write_all(&[s.label.index() as u8])?;
        write_u32(&mut w, s.region_id.len() as u32)?;
        w.write_all(s.region_id.as_bytes())?;
        for v in s.steps.data() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor_file<S: Scalar>(path: &Path) -> Result<Vec<FeatureSequence<S>>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let magic = read_exactly(&mut r, 4)?;
    if magic != TENSOR_MAGIC {
        return Err(Error::data("not a feature tensor file (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::data(format!("unsupported tensor file version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let t_len = read_u32(&mut r)? as usize;
    let f_dim = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let label_byte = read_exactly(&mut r, 1)?[0];
        let label = Label::from_index(label_byte as usize)
            .ok_or_else(|| Error::data(format!("bad label byte {label_byte}")))?;
        let id_len = read_u32(&mut r)? as usize;
        let region_id = String::from_utf8(read_exactly(&mut r, id_len)?)
            .map_err(|_| Error::data("region id is not UTF-8"))?;
        let mut values = Vec::with_capacity(t_len * f_dim);
        for _ in 0..t_len * f_dim {
            let raw = read_exactly(&mut r, 8)?;
            let v = f64::from_le_bytes(raw.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::data("non-finite feature value"));
            }
            values.push(v);
        }
        let mut steps = Mat::zeros(t_len, f_dim);
        for (dst, src) in steps.data_mut().iter_mut().zip(values) {
            *dst = S::of(src);
        }
        out.push(FeatureSequence { label, region_id, steps });
    }
    Ok(out)
}

// ------------------------------------------------------------- checkpoint

/// Magic + version, JSON-serialized config (length-prefixed), then parameter
/// tensors in declaration order as shape headers + LE f64 data.
pub fn write_checkpoint<S: Scalar>(path: &Path, model: &TemporalModel<S>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(&mut w, FORMAT_VERSION)?;
    let config = serde_json::to_vec(&model.config).map_err(|e| Error::data(e.to_string()))?;
    write_u32(&mut w, config.len() as u32)?;
    w.write_all(&config)?;
    let specs = model.tensor_specs();
    for (tensor, (_, shape)) in model.flat().iter().zip(&specs) {
        write_u32(&mut w, shape.len() as u32)?;
        for &d in shape {
            write_u32(&mut w, d as u32)?;
        }
        for v in tensor.iter() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<S: Scalar>(path: &Path) -> Result<TemporalModel<S>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let magic = read_exactly(&mut r, 4)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::data("not a checkpoint file (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::data(format!("unsupported checkpoint version {version}")));
    }
    let config_len = read_u32(&mut r)? as usize;
    let config: TemporalModelConfig = serde_json::from_slice(&read_exactly(&mut r, config_len)?)
        .map_err(|e| Error::data(format!("bad checkpoint config: {e}")))?;
    let mut model = TemporalModel::<S>::zeros(config)?;
    let specs = model.tensor_specs();
    for (tensor, (name, shape)) in model.flat_mut().into_iter().zip(&specs) {
        let ndim = read_u32(&mut r)? as usize;
        if ndim != shape.len() {
            return Err(Error::data(format!("tensor {name}: rank mismatch")));
        }
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(read_u32(&mut r)? as usize);
        }
        if dims != *shape {
            return Err(Error::data(format!("tensor {name}: shape mismatch")));
        }
        for slot in tensor.iter_mut() {
            let raw = read_exactly(&mut r, 8)?;
            *slot = S::of(f64::from_le_bytes(raw.try_into().unwrap()));
        }
    }
    Ok(model)
}

// ------------------------------------------------------------- images/CSV

/// Plain-text portable graymap (P2), maxval 255, value = round(255 * v).
pub fn write_pgm(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "P2")?;
    writeln!(w, "{cols} {rows}")?;
    writeln!(w, "255")?;
    for r in 0..rows {
        let line: Vec<String> = (0..cols)
            .map(|c| {
                let v = (values[r * cols + c].clamp(0.0, 1.0) * 255.0).round() as u32;
                v.to_string()
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_training_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,train_loss,val_acc")?;
    for e in log {
        writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.val_acc)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_confusion_csv(path: &Path, cm: &ConfusionMatrix) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "true\\pred,neutral,clumping,unclumping")?;
    for (c, label) in Label::ALL.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{}",
            label,
            cm.counts[c][0],
            cm.counts[c][1],
            cm.counts[c][2]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Confusion matrix as a small heat image, scaled by its max count.
pub fn write_confusion_pgm(path: &Path, cm: &ConfusionMatrix) -> Result<()> {
    let max = cm.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let values: Vec<f64> = cm
        .counts
        .iter()
        .flatten()
        .map(|&c| c as f64 / max)
        .collect();
    write_pgm(path, NUM_CLASSES, NUM_CLASSES, &values)
}

// ------------------------------------------------------------- manifest

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// input path -> sha256 hex digest
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed,
            inputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), body + "\n")?;
        Ok(())
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = std::fs::File::open(path)?;
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
