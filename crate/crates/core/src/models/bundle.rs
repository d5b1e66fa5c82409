use std::fs;
use std::path::Path;

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, FormatError, Result};
use crate::models::{Architecture, Classifier, Network, Task};
use crate::numcore::Matrix;
use crate::pipeline::PreprocessState;

pub const MAGIC: [u8; 4] = *b"TSLT";
pub const FORMAT_VERSION: u16 = 1;
const RECORD_HEADER: usize = 1 + 4 + 4;

/// The deployable unit: weights, fitted preprocessing, class names and
/// task metadata.
///
/// Layout (all integers little-endian): magic, version `u16`, architecture
/// `u8`, task `u8`, input_dim `u32`, num_classes `u32`, class names
/// (`u32` length + UTF-8 each), preprocessing state, tensor count `u32`,
/// tensor records (layer id `u8`, rows `u32`, cols `u32`, `f32` values),
/// then a CRC32 of everything before it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    network: Network,
    preprocess: PreprocessState,
    task: Task,
}

struct RawRecord {
    layer_id: u8,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ModelBundle {
    pub fn new(network: Network, preprocess: PreprocessState, task: Task) -> Result<Self> {
        if preprocess.num_classes() != network.num_classes() {
            return Err(Error::InvalidArgument(format!(
                "{} class names for a {}-class network",
                preprocess.num_classes(),
                network.num_classes()
            )));
        }
        if preprocess.input_dim() != network.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "{} preprocessed features for a network with input_dim {}",
                preprocess.input_dim(),
                network.input_dim()
            )));
        }
        Ok(Self {
            network,
            preprocess,
            task,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn preprocess(&self) -> &PreprocessState {
        &self.preprocess
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn architecture(&self) -> Architecture {
        self.network.architecture()
    }

    pub fn class_names(&self) -> &[String] {
        self.preprocess.class_names()
    }

    /// The bundle as it will read back from disk.
    pub fn quantized(&self) -> ModelBundle {
        let mut out = self.clone();
        out.network.quantize_f32();
        out
    }

    /// Bytes occupied by tensor values alone.
    pub fn weight_payload_bytes(&self) -> usize {
        self.network.state().iter().map(|(_, t)| t.len() * 4).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(&MAGIC);
        w.u16(FORMAT_VERSION);
        w.u8(self.architecture().tag());
        w.u8(self.task.tag());
        w.len_u32(self.network.input_dim());
        w.len_u32(self.network.num_classes());
        for name in self.class_names() {
            w.str(name);
        }
        self.preprocess.encode(&mut w);
        let state = self.network.state();
        w.len_u32(state.len());
        for (info, t) in state {
            w.u8(info.layer_id);
            w.len_u32(t.rows());
            w.len_u32(t.cols());
            for &v in t.as_slice() {
                w.f32(v as f32);
            }
        }
        let crc = crc32fast::hash(w.as_slice());
        w.u32(crc);
        w.into_inner()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, FormatError> {
        let mut r = ByteReader::new(data);
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let arch_tag = r.u8()?;
        let task_tag = r.u8()?;
        let input_dim = r.u32()? as usize;
        let num_classes = r.u32()? as usize;
        if num_classes.saturating_mul(4) > r.remaining() {
            return Err(FormatError::Truncated);
        }
        let class_names = (0..num_classes).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
        let preprocess = PreprocessState::decode(&mut r, class_names)?;
        let n_records = r.count(RECORD_HEADER)?;
        let mut records = Vec::with_capacity(n_records);
        for _ in 0..n_records {
            let layer_id = r.u8()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = rows.checked_mul(cols).filter(|n| n.saturating_mul(4) <= r.remaining());
            let len = len.ok_or(FormatError::Truncated)?;
            let values = (0..len)
                .map(|_| r.f32().map(f64::from))
                .collect::<Result<Vec<_>, _>>()?;
            records.push(RawRecord {
                layer_id,
                rows,
                cols,
                values,
            });
        }
        let body_len = r.position();
        let stored = r.u32()?;
        if r.remaining() != 0 {
            return Err(FormatError::Malformed(format!(
                "{} trailing bytes after checksum",
                r.remaining()
            )));
        }
        let computed = crc32fast::hash(&data[..body_len]);
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed });
        }

        let arch = Architecture::from_tag(arch_tag)
            .ok_or_else(|| FormatError::Malformed(format!("unknown architecture tag {arch_tag}")))?;
        let task =
            Task::from_tag(task_tag).ok_or_else(|| FormatError::Malformed(format!("unknown task tag {task_tag}")))?;
        preprocess.validate()?;
        if preprocess.input_dim() != input_dim {
            return Err(FormatError::Malformed(format!(
                "header input_dim {input_dim} but {} preprocessed features",
                preprocess.input_dim()
            )));
        }
        let mut network = Network::build(arch, input_dim, num_classes, 0)
            .map_err(|e| FormatError::Malformed(format!("invalid dimensions: {e}")))?;
        let mut slots = network.state_mut();
        if slots.len() != records.len() {
            return Err(FormatError::Malformed(format!(
                "{} tensor records, {} expected for {}",
                records.len(),
                slots.len(),
                arch.name()
            )));
        }
        for ((info, slot), rec) in slots.iter_mut().zip(records) {
            if rec.layer_id != info.layer_id || (rec.rows, rec.cols) != slot.shape() {
                return Err(FormatError::Malformed(format!(
                    "record for layer {} is ({}, {}), expected {}.{} {:?}",
                    rec.layer_id,
                    rec.rows,
                    rec.cols,
                    info.layer,
                    info.name,
                    slot.shape()
                )));
            }
            **slot = Matrix::from_vec(rec.rows, rec.cols, rec.values).expect("shape checked");
        }
        drop(slots);
        Ok(ModelBundle {
            network,
            preprocess,
            task,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_bytes(&data)?)
    }
}
