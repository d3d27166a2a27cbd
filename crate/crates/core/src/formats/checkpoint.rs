use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{to_usize, Reader, RunMeta};
use crate::attrnet::{AttrNetConfig, AttrNetParams};
use crate::nncore::{Parameters, Rng};
use crate::scnlstm::{CaptionVocab, ScnConfig, ScnLstmParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DAEC";
const VERSION: u32 = 1;
const CONTEXT: &str = "checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// A JSON header plus named 64-bit tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    fn total_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }
}

/// Layout: magic, u32 version, u64 header length, UTF-8 JSON header, u32
/// tensor count, then per tensor a u32 name length, the name, a u32 rank,
/// u64 dims and the f64 values. All little-endian.
pub fn write_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let header = serde_json::to_vec(&ckpt.header).expect("JSON values serialize");
    let mut out = Vec::with_capacity(header.len() + 24 + ckpt.total_scalars() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(ckpt.tensors.len() as u32).to_le_bytes());
    for t in &ckpt.tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, CONTEXT);
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::parse(CONTEXT, "bad magic, expected DAEC"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::parse(
            CONTEXT,
            format!("unsupported version {version}"),
        ));
    }
    let header_len = to_usize(r.u64()?, CONTEXT)?;
    let header: Value = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| Error::parse(CONTEXT, format!("header: {e}")))?;
    let count = r.u32()? as usize;
    let mut names = HashSet::new();
    let mut tensors = Vec::new();
    for i in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::parse_at(CONTEXT, i, "tensor name is not UTF-8"))?
            .to_string();
        if !names.insert(name.clone()) {
            return Err(Error::parse_at(
                CONTEXT,
                i,
                format!("duplicate tensor {name:?}"),
            ));
        }
        let rank = r.u32()? as usize;
        if rank.saturating_mul(8) > r.remaining() {
            return Err(Error::parse_at(CONTEXT, i, "truncated shape"));
        }
        let shape = (0..rank)
            .map(|_| to_usize(r.u64()?, CONTEXT))
            .collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
            .ok_or_else(|| {
                Error::parse_at(CONTEXT, i, format!("tensor {name:?} exceeds the file"))
            })?;
        let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse_at(
                CONTEXT,
                i,
                format!("tensor {name:?} holds a non-finite value"),
            ));
        }
        tensors.push(NamedTensor { name, shape, data });
    }
    r.finish()?;
    Ok(Checkpoint { header, tensors })
}

#[derive(Serialize, Deserialize)]
struct ModelHeader<C> {
    kind: String,
    members: usize,
    config: C,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab: Option<Vec<String>>,
    meta: RunMeta,
}

fn export<P>(
    tensors: &mut Vec<NamedTensor>,
    member: usize,
    params: &P,
    extra: Vec<crate::nncore::TensorRef<'_>>,
) where
    P: Parameters,
{
    for t in params.tensors().into_iter().chain(extra) {
        tensors.push(NamedTensor {
            name: format!("m{member}.{}", t.name),
            shape: t.shape.clone(),
            data: t.data.to_vec(),
        });
    }
}

/// Copies the checkpoint tensors of `member` into the slices described by
/// `layout` (names and shapes, in slice order).
fn import(
    by_name: &HashMap<&str, &NamedTensor>,
    member: usize,
    layout: &[(String, Vec<usize>)],
    slices: Vec<&mut [f64]>,
) -> Result<()> {
    for ((name, shape), slice) in layout.iter().zip(slices) {
        let key = format!("m{member}.{name}");
        let t = by_name
            .get(key.as_str())
            .ok_or_else(|| Error::parse(CONTEXT, format!("missing tensor {key:?}")))?;
        if &t.shape != shape {
            return Err(Error::dims(&key, &t.shape, shape));
        }
        slice.copy_from_slice(&t.data);
    }
    Ok(())
}

fn layout(refs: Vec<crate::nncore::TensorRef<'_>>) -> Vec<(String, Vec<usize>)> {
    refs.into_iter().map(|t| (t.name, t.shape)).collect()
}

fn parse_header<C: for<'de> Deserialize<'de>>(
    ckpt: &Checkpoint,
    kind: &str,
) -> Result<ModelHeader<C>> {
    let header: ModelHeader<C> = serde_json::from_value(ckpt.header.clone())
        .map_err(|e| Error::parse(CONTEXT, format!("header: {e}")))?;
    if header.kind != kind {
        return Err(Error::parse(
            CONTEXT,
            format!("expected a {kind} checkpoint, found {:?}", header.kind),
        ));
    }
    if header.members == 0 {
        return Err(Error::parse(CONTEXT, "no ensemble members"));
    }
    Ok(header)
}

/// Rejects configs whose parameter count disagrees with the stored tensors,
/// before any model is allocated.
fn check_scalars(ckpt: &Checkpoint, per_member: Option<usize>, members: usize) -> Result<()> {
    let expected = per_member.and_then(|n| n.checked_mul(members));
    if expected != Some(ckpt.total_scalars()) {
        return Err(Error::parse(
            CONTEXT,
            format!(
                "config implies {expected:?} values for {members} members, file holds {}",
                ckpt.total_scalars()
            ),
        ));
    }
    if ckpt.tensors.is_empty() {
        return Err(Error::parse(CONTEXT, "no tensors"));
    }
    Ok(())
}

fn attrnet_scalars(c: &AttrNetConfig) -> Option<usize> {
    let dims = [
        c.input_dim,
        c.hidden_dim,
        c.hidden_dim,
        c.hidden_dim,
        c.n_attrs,
    ];
    let mut total = 0usize;
    for k in 0..4 {
        let (i, o) = (dims[k], dims[k + 1]);
        total = total.checked_add(i.checked_mul(o)?.checked_add(o)?)?;
        if k < 3 || c.output_batch_norm {
            total = total.checked_add(o.checked_mul(4)?)?;
        }
    }
    Some(total)
}

fn scn_scalars(c: &ScnConfig) -> Option<usize> {
    let (v, e, h, f, n, d) = (
        c.vocab_size,
        c.embed_dim,
        c.hidden_dim,
        c.factor_dim,
        c.n_attrs,
        c.feature_dim,
    );
    let gate = [h * f, f * n, f * e, h * f, f * n, f * h]
        .iter()
        .try_fold(h, |acc, &x| acc.checked_add(x))?;
    [
        v.checked_mul(e)?,
        gate.checked_mul(4)?,
        h.checked_mul(d)?,
        v.checked_mul(h)?,
        v,
    ]
    .iter()
    .try_fold(0usize, |acc, &x| acc.checked_add(x))
}

fn check_dims(values: &[usize]) -> Result<()> {
    // Guards the unchecked products in the scalar counts.
    if values.iter().any(|&v| v > u32::MAX as usize) {
        return Err(Error::parse(CONTEXT, "model dimension too large"));
    }
    Ok(())
}

pub fn attrnet_to_checkpoint(members: &[AttrNetParams], meta: &RunMeta) -> Result<Checkpoint> {
    let first = members
        .first()
        .ok_or_else(|| Error::Empty("no attribute networks to save".into()))?;
    if members.iter().any(|m| m.config != first.config) {
        return Err(Error::Param(
            "ensemble members have different shapes".into(),
        ));
    }
    let mut tensors = Vec::new();
    for (k, m) in members.iter().enumerate() {
        export(&mut tensors, k, m, m.buffers());
    }
    let header = ModelHeader {
        kind: "attrnet".into(),
        members: members.len(),
        config: first.config.clone(),
        vocab: None,
        meta: meta.clone(),
    };
    Ok(Checkpoint {
        header: serde_json::to_value(header).expect("header serializes"),
        tensors,
    })
}

pub fn attrnet_from_checkpoint(ckpt: &Checkpoint) -> Result<(Vec<AttrNetParams>, RunMeta)> {
    let header: ModelHeader<AttrNetConfig> = parse_header(ckpt, "attrnet")?;
    let c = &header.config;
    check_dims(&[c.input_dim, c.hidden_dim, c.n_attrs])?;
    check_scalars(ckpt, attrnet_scalars(c), header.members)?;
    let by_name: HashMap<&str, &NamedTensor> =
        ckpt.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
    let mut members = Vec::with_capacity(header.members);
    for k in 0..header.members {
        let mut params = AttrNetParams::init(header.config.clone(), &mut Rng::new(0));
        let tensors = layout(params.tensors());
        let buffers = layout(params.buffers());
        import(&by_name, k, &tensors, params.tensors_mut())?;
        import(&by_name, k, &buffers, params.buffers_mut())?;
        members.push(params);
    }
    Ok((members, header.meta))
}

pub fn scn_to_checkpoint(members: &[ScnLstmParams], meta: &RunMeta) -> Result<Checkpoint> {
    let first = members
        .first()
        .ok_or_else(|| Error::Empty("no captioners to save".into()))?;
    if members
        .iter()
        .any(|m| m.config != first.config || m.vocab != first.vocab)
    {
        return Err(Error::Param(
            "ensemble members have different shapes or vocabularies".into(),
        ));
    }
    let mut tensors = Vec::new();
    for (k, m) in members.iter().enumerate() {
        export(&mut tensors, k, m, Vec::new());
    }
    let header = ModelHeader {
        kind: "scnlstm".into(),
        members: members.len(),
        config: first.config.clone(),
        vocab: Some(first.vocab.content_words().to_vec()),
        meta: meta.clone(),
    };
    Ok(Checkpoint {
        header: serde_json::to_value(header).expect("header serializes"),
        tensors,
    })
}

pub fn scn_from_checkpoint(ckpt: &Checkpoint) -> Result<(Vec<ScnLstmParams>, RunMeta)> {
    let header: ModelHeader<ScnConfig> = parse_header(ckpt, "scnlstm")?;
    let c = &header.config;
    check_dims(&[
        c.vocab_size,
        c.embed_dim,
        c.hidden_dim,
        c.factor_dim,
        c.n_attrs,
        c.feature_dim,
    ])?;
    check_scalars(ckpt, scn_scalars(c), header.members)?;
    let words = header
        .vocab
        .clone()
        .ok_or_else(|| Error::parse(CONTEXT, "captioner checkpoint lacks its vocabulary"))?;
    let vocab = CaptionVocab::from_words(words)?;
    let by_name: HashMap<&str, &NamedTensor> =
        ckpt.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
    let mut members = Vec::with_capacity(header.members);
    for k in 0..header.members {
        let mut params =
            ScnLstmParams::init(header.config.clone(), vocab.clone(), &mut Rng::new(0))?;
        let tensors = layout(params.tensors());
        import(&by_name, k, &tensors, params.tensors_mut())?;
        members.push(params);
    }
    Ok((members, header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_attrnet(seed: u64, output_bn: bool) -> AttrNetParams {
        let config = AttrNetConfig {
            input_dim: 5,
            hidden_dim: 4,
            n_attrs: 3,
            dropout: 0.3,
            output_batch_norm: output_bn,
            bn_momentum: 0.9,
        };
        let mut p = AttrNetParams::init(config, &mut Rng::new(seed));
        let mut rng = Rng::new(seed + 1);
        for b in p.buffers_mut() {
            for v in b.iter_mut() {
                *v = rng.uniform(0.1, 2.0);
            }
        }
        p
    }

    fn small_scn(seed: u64) -> ScnLstmParams {
        let vocab = CaptionVocab::from_words(vec!["dog".into(), "runs".into()]).unwrap();
        let config = ScnConfig {
            vocab_size: 5,
            embed_dim: 3,
            hidden_dim: 4,
            factor_dim: 2,
            n_attrs: 3,
            feature_dim: 6,
        };
        ScnLstmParams::init(config, vocab, &mut Rng::new(seed)).unwrap()
    }

    fn meta() -> RunMeta {
        RunMeta::new("dae train-attr --seed 3", Some(3))
    }

    #[test]
    fn attrnet_round_trip_is_bit_exact() {
        for output_bn in [true, false] {
            let members = vec![small_attrnet(1, output_bn), small_attrnet(2, output_bn)];
            let bytes = write_checkpoint(&attrnet_to_checkpoint(&members, &meta()).unwrap());
            let (back, m) = attrnet_from_checkpoint(&read_checkpoint(&bytes).unwrap()).unwrap();
            assert_eq!(back, members);
            assert_eq!(m, meta());
            let again = write_checkpoint(&attrnet_to_checkpoint(&back, &m).unwrap());
            assert_eq!(again, bytes);
        }
    }

    #[test]
    fn scn_round_trip_is_bit_exact() {
        let mut p = small_scn(4);
        p.out_b[2] = -0.0;
        p.embed[[0, 0]] = f64::MIN_POSITIVE / 4.0;
        let members = vec![p, small_scn(5)];
        let bytes = write_checkpoint(&scn_to_checkpoint(&members, &meta()).unwrap());
        let (back, _) = scn_from_checkpoint(&read_checkpoint(&bytes).unwrap()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&members) {
            for (x, y) in a.tensors().iter().zip(b.tensors()) {
                let bits = |d: &[f64]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(x.data), bits(y.data));
            }
            assert_eq!(a.vocab, b.vocab);
        }
    }

    #[test]
    fn kind_and_shape_mismatches() {
        let attr = attrnet_to_checkpoint(&[small_attrnet(1, true)], &meta()).unwrap();
        assert!(scn_from_checkpoint(&attr).is_err());
        let mut wrong = attr.clone();
        wrong.tensors[0].shape = vec![4, 5];
        assert!(attrnet_from_checkpoint(&wrong).is_err());
        let mut missing = attr.clone();
        missing.tensors[1].name = "m0.other".into();
        assert!(attrnet_from_checkpoint(&missing).is_err());
        let mut huge = attr;
        huge.header["config"]["hidden_dim"] = serde_json::json!(1u64 << 40);
        assert!(attrnet_from_checkpoint(&huge).is_err());
    }

    #[test]
    fn malformed_bytes() {
        let bytes = write_checkpoint(&scn_to_checkpoint(&[small_scn(1)], &meta()).unwrap());
        for cut in [0, 3, 10, 20, bytes.len() - 1] {
            assert!(read_checkpoint(&bytes[..cut]).is_err());
        }
        let mut trailing = bytes.clone();
        trailing.push(7);
        assert!(read_checkpoint(&trailing).is_err());
        let mut magic = bytes;
        magic[3] = b'F';
        assert!(read_checkpoint(&magic).is_err());
        let mut rank = write_checkpoint(&Checkpoint {
            header: serde_json::json!({}),
            tensors: vec![NamedTensor {
                name: "x".into(),
                shape: vec![1],
                data: vec![1.0],
            }],
        });
        // Rank field of the only tensor.
        let pos = 4 + 4 + 8 + 2 + 4 + 4 + 1;
        rank[pos..pos + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(read_checkpoint(&rank).is_err());
        let nan = write_checkpoint(&Checkpoint {
            header: serde_json::json!({}),
            tensors: vec![NamedTensor {
                name: "x".into(),
                shape: vec![2],
                data: vec![1.0, f64::NAN],
            }],
        });
        assert!(read_checkpoint(&nan).is_err());
    }
}
