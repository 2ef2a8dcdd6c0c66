//! Binary dataset files of labeled instances.
//!
//! Header (little-endian): magic `LTMD`, version u16, method code u8, info
//! code u8, model code u8, n u16, m u8, labeling code u8, count u64,
//! feature_dim u32, num_classes u32. Each record is `feature_dim` f32 values
//! followed by `ceil(num_classes / 8)` label bytes, lowest bit first.

use std::fs::File;
use std::io::{BufReader, ErrorKind, Read, Write};
use std::path::Path;

use ltm_core::oracle::{num_classes, InstanceMeta, MAX_ORACLE_CANDIDATES};
use ltm_core::{InfoType, LabelMask, LabeledInstance, Labeling, MethodId, ProbModel};

use crate::error::{HarnessError, Result};
use crate::fsio::write_atomic;

pub const DATASET_MAGIC: [u8; 4] = *b"LTMD";
pub const DATASET_VERSION: u16 = 1;
/// Bytes in the fixed header.
pub const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 1 + 2 + 1 + 1 + 8 + 4 + 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetHeader {
    pub method: MethodId,
    pub info: InfoType,
    /// Only the model family is stored; a Mallows dispersion lives in the
    /// run manifest.
    pub model: ProbModel,
    pub n: usize,
    pub m: usize,
    pub labeling: Labeling,
    pub count: u64,
    pub feature_dim: u32,
    pub num_classes: u32,
}

impl DatasetHeader {
    pub fn new(method: MethodId, info: InfoType, model: ProbModel, n: usize, m: usize, labeling: Labeling, count: u64) -> Self {
        DatasetHeader {
            method,
            info,
            model,
            n,
            m,
            labeling,
            count,
            feature_dim: info.feature_len(m) as u32,
            num_classes: num_classes(m) as u32,
        }
    }

    pub fn label_bytes(&self) -> usize {
        (self.num_classes as usize).div_ceil(8)
    }

    pub fn record_len(&self) -> usize {
        4 * self.feature_dim as usize + self.label_bytes()
    }

    fn write_to(&self, w: &mut dyn Write) -> Result<()> {
        w.write_all(&DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&[self.method.code(), self.info.code(), self.model.code()])?;
        w.write_all(&(self.n as u16).to_le_bytes())?;
        w.write_all(&[self.m as u8, self.labeling.code()])?;
        w.write_all(&self.count.to_le_bytes())?;
        w.write_all(&self.feature_dim.to_le_bytes())?;
        w.write_all(&self.num_classes.to_le_bytes())?;
        Ok(())
    }

    fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut buf = [0u8; HEADER_LEN];
        read_exact(r, &mut buf, "header")?;
        let magic: [u8; 4] = buf[0..4].try_into().unwrap();
        if magic != DATASET_MAGIC {
            return Err(HarnessError::BadMagic { expected: DATASET_MAGIC, found: magic });
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != DATASET_VERSION {
            return Err(HarnessError::UnsupportedVersion { found: version, supported: DATASET_VERSION });
        }
        let corrupt = |e: ltm_core::Error| HarnessError::Corrupt(format!("header: {e}"));
        let header = DatasetHeader {
            method: MethodId::from_code(buf[6]).map_err(corrupt)?,
            info: InfoType::from_code(buf[7]).map_err(corrupt)?,
            model: ProbModel::from_code(buf[8]).map_err(corrupt)?,
            n: u16::from_le_bytes([buf[9], buf[10]]) as usize,
            m: buf[11] as usize,
            labeling: Labeling::from_code(buf[12]).map_err(corrupt)?,
            count: u64::from_le_bytes(buf[13..21].try_into().unwrap()),
            feature_dim: u32::from_le_bytes(buf[21..25].try_into().unwrap()),
            num_classes: u32::from_le_bytes(buf[25..29].try_into().unwrap()),
        };
        if !(2..=MAX_ORACLE_CANDIDATES).contains(&header.m) || header.n == 0 {
            return Err(HarnessError::Corrupt(format!("header: n={} m={}", header.n, header.m)));
        }
        let expected = DatasetHeader::new(header.method, header.info, header.model, header.n, header.m, header.labeling, header.count);
        if (header.feature_dim, header.num_classes) != (expected.feature_dim, expected.num_classes) {
            return Err(HarnessError::Corrupt(format!(
                "header: feature_dim {} / num_classes {} do not fit m={} and {}",
                header.feature_dim, header.num_classes, header.m, header.info
            )));
        }
        Ok(header)
    }

    fn meta(&self) -> InstanceMeta {
        InstanceMeta { method: self.method, info: self.info, n: self.n, m: self.m }
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => HarnessError::Corrupt(format!("truncated {what}")),
        _ => HarnessError::Stream(e),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub instances: Vec<LabeledInstance<f64>>,
}

/// Serializes `instances`; features are narrowed to f32.
pub fn write_dataset_to(w: &mut dyn Write, header: &DatasetHeader, instances: &[LabeledInstance<f64>]) -> Result<()> {
    if header.count != instances.len() as u64 {
        return Err(HarnessError::Corrupt(format!("header count {} for {} instances", header.count, instances.len())));
    }
    header.write_to(w)?;
    let mut record = Vec::with_capacity(header.record_len());
    for inst in instances {
        if inst.features.len() != header.feature_dim as usize || inst.labels.len() != header.num_classes as usize {
            return Err(HarnessError::Corrupt("instance shape differs from header".into()));
        }
        record.clear();
        for &x in &inst.features {
            record.extend_from_slice(&(x as f32).to_le_bytes());
        }
        record.extend(inst.labels.to_bytes());
        w.write_all(&record)?;
    }
    Ok(())
}

pub fn read_dataset_from(r: &mut impl Read) -> Result<Dataset> {
    let header = DatasetHeader::read_from(r)?;
    let meta = header.meta();
    let mut record = vec![0u8; header.record_len()];
    let features_len = 4 * header.feature_dim as usize;
    let mut instances = Vec::with_capacity(header.count.min(1 << 24) as usize);
    for i in 0..header.count {
        read_exact(r, &mut record, "record")?;
        let features =
            record[..features_len].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect();
        let labels = LabelMask::from_bytes(header.num_classes as usize, &record[features_len..])
            .map_err(|e| HarnessError::Corrupt(format!("record {i}: {e}")))?;
        if labels.is_empty() {
            return Err(HarnessError::Corrupt(format!("record {i}: empty label mask")));
        }
        instances.push(LabeledInstance { features, labels, meta });
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(HarnessError::Corrupt("trailing bytes after last record".into()));
    }
    Ok(Dataset { header, instances })
}

pub fn write_dataset(path: &Path, header: &DatasetHeader, instances: &[LabeledInstance<f64>]) -> Result<()> {
    write_atomic(path, |w| write_dataset_to(w, header, instances))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(HarnessError::at(path))?;
    read_dataset_from(&mut BufReader::new(file))
}

/// Reads only the header.
pub fn read_header(path: &Path) -> Result<DatasetHeader> {
    let file = File::open(path).map_err(HarnessError::at(path))?;
    DatasetHeader::read_from(&mut BufReader::new(file))
}
