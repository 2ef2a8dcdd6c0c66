//! Weight checkpoints.
//!
//! Header (little-endian): magic `LTMW`, version u16, input_dim u32,
//! output_dim u32, hidden layer count u8, each hidden width u32, activation
//! code u8, init_seed u64. Then for every layer its `fan_in × fan_out`
//! weight matrix row-major followed by its biases, all as f64.

use std::fs::File;
use std::io::{BufReader, ErrorKind, Read, Write};
use std::path::Path;

use ltm_core::neural::{Activation, Dense, HiddenLayers, NetConfig};
use ltm_core::Net;

use crate::error::{HarnessError, Result};
use crate::fsio::write_atomic;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LTMW";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint_to(w: &mut dyn Write, net: &Net) -> Result<()> {
    let config = net.config();
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(config.input_dim as u32).to_le_bytes())?;
    w.write_all(&(config.output_dim as u32).to_le_bytes())?;
    w.write_all(&[config.hidden.0.len() as u8])?;
    for &width in &config.hidden.0 {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    w.write_all(&[config.activation.code()])?;
    w.write_all(&config.init_seed.to_le_bytes())?;
    for layer in net.layers() {
        for x in layer.weights.iter().chain(&layer.bias) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => HarnessError::Corrupt("truncated checkpoint".into()),
        _ => HarnessError::Stream(e),
    })?;
    Ok(buf)
}

pub fn read_checkpoint_from(r: &mut impl Read) -> Result<Net> {
    let magic = take::<4>(r)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(HarnessError::BadMagic { expected: CHECKPOINT_MAGIC, found: magic });
    }
    let version = u16::from_le_bytes(take(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(HarnessError::UnsupportedVersion { found: version, supported: CHECKPOINT_VERSION });
    }
    let input_dim = u32::from_le_bytes(take(r)?) as usize;
    let output_dim = u32::from_le_bytes(take(r)?) as usize;
    let [depth] = take::<1>(r)?;
    let hidden = (0..depth).map(|_| Ok(u32::from_le_bytes(take(r)?) as usize)).collect::<Result<Vec<_>>>()?;
    let [activation] = take::<1>(r)?;
    let config = NetConfig {
        input_dim,
        hidden: HiddenLayers(hidden),
        output_dim,
        activation: Activation::from_code(activation).map_err(|e| HarnessError::Corrupt(e.to_string()))?,
        init_seed: u64::from_le_bytes(take(r)?),
    };
    config.validate().map_err(|e| HarnessError::Corrupt(e.to_string()))?;
    let mut layers = Vec::new();
    for (fan_in, fan_out) in config.shapes() {
        let mut read = |len: usize| (0..len).map(|_| Ok(f64::from_le_bytes(take(r)?))).collect::<Result<Vec<f64>>>();
        let weights = read(fan_in * fan_out)?;
        let bias = read(fan_out)?;
        layers.push(Dense { fan_in, fan_out, weights, bias });
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(HarnessError::Corrupt("trailing bytes after last layer".into()));
    }
    Ok(Net::from_layers(config, layers)?)
}

pub fn write_checkpoint(path: &Path, net: &Net) -> Result<()> {
    write_atomic(path, |w| write_checkpoint_to(w, net))
}

pub fn read_checkpoint(path: &Path) -> Result<Net> {
    let file = File::open(path).map_err(HarnessError::at(path))?;
    read_checkpoint_from(&mut BufReader::new(file))
}
