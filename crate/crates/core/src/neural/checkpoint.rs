//! Binary containers. Weights: `SELDCKPT`, version, JSON topology, then
//! named little-endian f32 tensors. Training state: `SELDSTAT`, version,
//! JSON header, then raw f64 vectors so that resuming is bit-exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::config::SeldnetConfig;
use super::model::SeldModel;
use super::train::{EpochRecord, Outcome, TrainState};
use crate::error::{Result, SeldError};

const WEIGHTS_MAGIC: &[u8; 8] = b"SELDCKPT";
const STATE_MAGIC: &[u8; 8] = b"SELDSTAT";
const VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> SeldError {
    SeldError::Format(msg.into())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_header(r: &mut impl Read, magic: &[u8; 8]) -> Result<Vec<u8>> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(format_err("bad magic bytes"));
    }
    let v = read_u32(r)?;
    if v != VERSION {
        return Err(format_err(format!("unsupported version {v}")));
    }
    let len = read_u64(r)? as usize;
    if len > 1 << 30 {
        return Err(format_err("header too large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    Ok(json)
}

fn write_header(w: &mut impl Write, magic: &[u8; 8], json: &[u8]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(json)?;
    Ok(())
}

/// Writes the topology and parameters (rounded to f32).
pub fn write_weights(w: &mut impl Write, model: &SeldModel) -> Result<()> {
    write_header(w, WEIGHTS_MAGIC, &serde_json::to_vec(&model.config)?)?;
    w.write_all(&(model.specs().len() as u32).to_le_bytes())?;
    for spec in model.specs() {
        w.write_all(&(spec.name.len() as u32).to_le_bytes())?;
        w.write_all(spec.name.as_bytes())?;
        w.write_all(&(spec.shape.len() as u32).to_le_bytes())?;
        for &d in &spec.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &model.values[spec.range()] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a weights file, checking every tensor against the stored topology.
pub fn read_weights(r: &mut impl Read) -> Result<SeldModel> {
    let config: SeldnetConfig = serde_json::from_slice(&read_header(r, WEIGHTS_MAGIC)?)?;
    let mut model = SeldModel::new(config)?;
    let count = read_u32(r)? as usize;
    if count != model.specs().len() {
        return Err(format_err(format!("{count} tensors stored, topology has {}", model.specs().len())));
    }
    for spec in model.specs().to_vec() {
        let name_len = read_u32(r)? as usize;
        if name_len > 4096 {
            return Err(format_err("tensor name too long"));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let rank = read_u32(r)? as usize;
        if rank > 8 {
            return Err(format_err("tensor rank too large"));
        }
        let shape = (0..rank).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if name != spec.name.as_bytes() || shape != spec.shape {
            return Err(format_err(format!("tensor {} does not match the topology", String::from_utf8_lossy(&name))));
        }
        let mut buf = vec![0u8; 4 * spec.len()];
        r.read_exact(&mut buf)?;
        for (v, b) in model.values[spec.range()].iter_mut().zip(buf.chunks_exact(4)) {
            *v = f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        }
    }
    if model.values.iter().any(|v| !v.is_finite()) {
        return Err(SeldError::NonFinite("checkpoint weights".into()));
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct StateHeader {
    config: SeldnetConfig,
    params: usize,
    epoch: usize,
    adam_t: u64,
    best_epoch: usize,
    best_score: Option<f64>,
    since_best: usize,
    history: Vec<EpochRecord>,
    outcome: Option<Outcome>,
}

fn write_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
}

/// Writes the full training state in double precision.
pub fn write_state(w: &mut impl Write, st: &TrainState) -> Result<()> {
    let header = StateHeader {
        config: st.model.config.clone(),
        params: st.model.values.len(),
        epoch: st.epoch,
        adam_t: st.adam.t,
        best_epoch: st.best_epoch,
        best_score: st.best_score.is_finite().then_some(st.best_score),
        since_best: st.since_best,
        history: st.history.clone(),
        outcome: st.outcome,
    };
    write_header(w, STATE_MAGIC, &serde_json::to_vec(&header)?)?;
    for v in [&st.model.values, &st.adam.m, &st.adam.v, &st.best_values] {
        write_f64s(w, v)?;
    }
    Ok(())
}

pub fn read_state(r: &mut impl Read) -> Result<TrainState> {
    let h: StateHeader = serde_json::from_slice(&read_header(r, STATE_MAGIC)?)?;
    let n = h.params;
    let model = SeldModel::with_values(h.config, read_f64s(r, n)?)?;
    let m = read_f64s(r, n)?;
    let v = read_f64s(r, n)?;
    let best_values = read_f64s(r, n)?;
    Ok(TrainState {
        model,
        adam: AdamState { t: h.adam_t, m, v },
        epoch: h.epoch,
        best_values,
        best_epoch: h.best_epoch,
        best_score: h.best_score.unwrap_or(f64::INFINITY),
        since_best: h.since_best,
        history: h.history,
        outcome: h.outcome,
    })
}
