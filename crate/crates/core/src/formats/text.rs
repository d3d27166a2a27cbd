use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::RunMeta;
use crate::semantics::{AttributeVector, LogBase, Vocabulary};
use crate::{Error, Result};

fn utf8<'a>(bytes: &'a [u8], context: &'static str) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| Error::parse(context, format!("not UTF-8: {e}")))
}

#[derive(Serialize, Deserialize)]
struct VocabDoc {
    #[serde(default)]
    meta: Option<RunMeta>,
    stemmed: bool,
    threshold: f64,
    #[serde(default)]
    log_base: LogBase,
    words: Vec<String>,
    idf: Vec<f64>,
}

pub fn write_vocabulary(vocab: &Vocabulary, meta: &RunMeta) -> String {
    let doc = VocabDoc {
        meta: Some(meta.clone()),
        stemmed: vocab.stemmed(),
        threshold: vocab.threshold(),
        log_base: vocab.log_base(),
        words: vocab.words().to_vec(),
        idf: vocab.idf().to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("vocabulary serializes") + "\n"
}

pub fn read_vocabulary(bytes: &[u8]) -> Result<(Vocabulary, Option<RunMeta>)> {
    let doc: VocabDoc = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse("vocabulary file", e.to_string()))?;
    let vocab = Vocabulary::new(doc.words, doc.idf, doc.threshold, doc.stemmed, doc.log_base)?;
    Ok((vocab, doc.meta))
}

/// Dense vectors read from a sparse attribute file.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeFile {
    pub meta: Option<RunMeta>,
    pub n_attrs: usize,
    pub vectors: Vec<AttributeVector>,
}

#[derive(Serialize, Deserialize)]
struct AttrHeader {
    format: String,
    n_attrs: usize,
    #[serde(default)]
    meta: Option<RunMeta>,
}

#[derive(Deserialize)]
struct AttrLine {
    image_id: u64,
    attrs: Vec<(usize, f64)>,
}

const ATTR_FORMAT: &str = "dae-attributes";
const ATTR_CONTEXT: &str = "attribute file";

/// One JSON header line, then one line per image listing its non-zero
/// entries as `[index, value]` pairs in ascending index order. Values carry
/// 17 significant digits, enough to round-trip every `f64`.
pub fn write_attributes(
    vectors: &[AttributeVector],
    n_attrs: usize,
    meta: &RunMeta,
) -> Result<String> {
    let header = AttrHeader {
        format: ATTR_FORMAT.into(),
        n_attrs,
        meta: Some(meta.clone()),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for v in vectors {
        if v.values.len() != n_attrs {
            return Err(Error::dims(
                "attribute vector",
                &[v.values.len()],
                &[n_attrs],
            ));
        }
        out.push_str(&format!("{{\"image_id\":{},\"attrs\":[", v.image_id));
        let mut first = true;
        for (i, &x) in v.values.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(format!(
                    "attribute {i} of image {}",
                    v.image_id
                )));
            }
            if x != 0.0 {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format!("[{i},{x:.16e}]"));
            }
        }
        out.push_str("]}\n");
    }
    Ok(out)
}

pub fn read_attributes(bytes: &[u8]) -> Result<AttributeFile> {
    let text = utf8(bytes, ATTR_CONTEXT)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::parse(ATTR_CONTEXT, "missing header line"))?;
    let header: AttrHeader = serde_json::from_str(head)
        .map_err(|e| Error::parse_at(ATTR_CONTEXT, 0, format!("header: {e}")))?;
    if header.format != ATTR_FORMAT {
        return Err(Error::parse_at(
            ATTR_CONTEXT,
            0,
            format!("unknown format {:?}", header.format),
        ));
    }
    let mut seen = HashSet::new();
    let mut vectors = Vec::new();
    for (line_no, line) in lines {
        let rec: AttrLine = serde_json::from_str(line)
            .map_err(|e| Error::parse_at(ATTR_CONTEXT, line_no, e.to_string()))?;
        if !seen.insert(rec.image_id) {
            return Err(Error::parse_at(
                ATTR_CONTEXT,
                line_no,
                format!("duplicate image {}", rec.image_id),
            ));
        }
        let mut values = vec![0.0; header.n_attrs];
        let mut last = None;
        for (i, v) in rec.attrs {
            if i >= header.n_attrs || last.is_some_and(|l| i <= l) {
                return Err(Error::parse_at(
                    ATTR_CONTEXT,
                    line_no,
                    format!("index {i} out of order or beyond {}", header.n_attrs),
                ));
            }
            if !v.is_finite() {
                return Err(Error::parse_at(ATTR_CONTEXT, line_no, "non-finite value"));
            }
            values[i] = v;
            last = Some(i);
        }
        vectors.push(AttributeVector {
            image_id: rec.image_id,
            values,
        });
    }
    Ok(AttributeFile {
        meta: header.meta,
        n_attrs: header.n_attrs,
        vectors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_id: u64,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecords {
    #[serde(default)]
    pub meta: Option<RunMeta>,
    pub captions: Vec<CaptionRecord>,
}

pub fn write_caption_records(records: &CaptionRecords) -> String {
    serde_json::to_string_pretty(records).expect("caption records serialize") + "\n"
}

pub fn read_caption_records(bytes: &[u8]) -> Result<CaptionRecords> {
    let records: CaptionRecords = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse("caption records", e.to_string()))?;
    let mut seen = HashSet::new();
    for (i, r) in records.captions.iter().enumerate() {
        if !seen.insert(r.image_id) {
            return Err(Error::parse_at(
                "caption records",
                i,
                format!("duplicate image {}", r.image_id),
            ));
        }
    }
    Ok(records)
}

/// Word vectors in the word2vec text layout: an optional `count dim` line,
/// then `word v1 .. vd` per line.
pub fn read_embeddings(bytes: &[u8]) -> Result<HashMap<String, Vec<f64>>> {
    const CONTEXT: &str = "embedding file";
    let text = utf8(bytes, CONTEXT)?;
    let mut out = HashMap::new();
    let mut dim = None;
    for (line_no, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if line_no == 0
            && rest.len() == 1
            && word.parse::<usize>().is_ok()
            && rest[0].parse::<usize>().is_ok()
        {
            continue;
        }
        let values = rest
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::parse_at(CONTEXT, line_no, "bad number"))?;
        if values.is_empty() || dim.is_some_and(|d| d != values.len()) {
            return Err(Error::parse_at(
                CONTEXT,
                line_no,
                format!("{} values, expected {dim:?}", values.len()),
            ));
        }
        dim = Some(values.len());
        if out.insert(word.to_string(), values).is_some() {
            return Err(Error::parse_at(
                CONTEXT,
                line_no,
                format!("duplicate word {word:?}"),
            ));
        }
    }
    Ok(out)
}
