//! Distinctive-attribute extraction (DaE) for image captioning.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`corpus`] ingests COCO-style caption annotations and groups them into
//!    one tokenized (optionally Porter-stemmed) document per image.
//! 2. [`semantics`] scores every word of a document with average term
//!    frequency times smoothed IDF, keeps the words under an IDF threshold and
//!    L2-normalizes the result into a ground-truth attribute vector.
//! 3. [`attrnet`] learns to predict those vectors from 2048-d image features
//!    with a four-layer fully connected network.
//! 4. [`scnlstm`] decodes captions with an LSTM whose gate weights are
//!    factorized and modulated by the predicted attributes.
//!
//! [`metrics`] evaluates both halves: binned F1 for attribute prediction and
//! BLEU, ROUGE-L and CIDEr-D for captions. [`formats`] holds every on-disk
//! format, and [`nncore`] is the small dense kernel both networks are built on.

pub mod attrnet;
pub mod corpus;
mod error;
pub mod formats;
pub mod metrics;
pub mod nncore;
pub mod scnlstm;
pub mod semantics;

pub use error::{Error, Result};

/// Dimension of the pooled image features consumed by the pipeline.
pub const FEATURE_DIM: usize = 2048;
