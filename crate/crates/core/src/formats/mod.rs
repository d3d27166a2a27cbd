//! On-disk formats: binary feature files, model checkpoints, and the JSON
//! artifacts exchanged between pipeline stages.

mod checkpoint;
mod features;
mod text;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use checkpoint::{
    attrnet_from_checkpoint, attrnet_to_checkpoint, read_checkpoint, scn_from_checkpoint,
    scn_to_checkpoint, write_checkpoint, Checkpoint, NamedTensor, CHECKPOINT_MAGIC,
};
pub use features::{read_features, write_features, FeatureFile, FEATURE_MAGIC};
pub use text::{
    read_attributes, read_caption_records, read_embeddings, read_vocabulary, write_attributes,
    write_caption_records, write_vocabulary, AttributeFile, CaptionRecord, CaptionRecords,
};

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub command_line: String,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunMeta {
    pub fn new(command_line: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            command_line: command_line.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Bounds-checked little-endian cursor.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], context: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            context,
        }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::parse(
                self.context,
                format!(
                    "truncated at byte {}: need {n} more, have {}",
                    self.pos,
                    self.remaining()
                ),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(Error::parse(self.context, format!("{n} trailing bytes"))),
        }
    }
}

/// Converts a length read from a file, rejecting values that overflow.
pub(crate) fn to_usize(v: u64, context: &'static str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::parse(context, format!("length {v} too large")))
}
