use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use dae_core::attrnet::{
    attrnet_train_ensemble, ensemble_predict, feature_matrix, join_examples, to_attribute_vectors,
    AttrNetConfig, AttrTrainConfig, FeatureRecord,
};
use dae_core::corpus::{build_documents, parse_coco_captions, CaptionCorpus};
use dae_core::formats::{
    attrnet_from_checkpoint, attrnet_to_checkpoint, read_attributes, read_caption_records,
    read_checkpoint, read_embeddings, read_features, scn_from_checkpoint, scn_to_checkpoint,
    write_attributes, write_caption_records, write_checkpoint, write_vocabulary, AttributeFile,
    CaptionRecord, CaptionRecords, FeatureFile, RunMeta,
};
use dae_core::metrics::{attribute_f1, evaluate_captions};
use dae_core::nncore::Rng;
use dae_core::scnlstm::{
    beam_search, captioner_train, ensemble_beam_search, CaptionDataset, CaptionTrainConfig,
    CaptionVocab, ScnConfig, ScnLstmParams,
};
use dae_core::semantics::{ground_truth_attributes, CorpusStats, LogBase};
use ndarray::Array2;
use serde_json::{json, Value};

use crate::args::*;
use crate::Failure;

type Outcome = Result<(), Failure>;

pub fn dispatch(
    command: &Command,
    line: &str,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Outcome {
    let meta = RunMeta::new(line, Some(command.common().seed));
    match command {
        Command::Extract(a) => extract(a, &meta),
        Command::VocabReport(a) => vocab_report(a, &meta, stdout),
        Command::TrainAttr(a) => train_attr(a, &meta, stderr),
        Command::PredictAttr(a) => predict_attr(a, &meta),
        Command::TrainCaptioner(a) => train_captioner(a, &meta, stderr),
        Command::Caption(a) => caption(a, &meta),
        Command::EvalAttr(a) => eval_attr(a, &meta, stdout),
        Command::EvalCaptions(a) => eval_captions(a, &meta, stdout),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Reads and parses an input; every failure is a data error.
fn load<T>(path: &Path, parse: impl FnOnce(&[u8]) -> dae_core::Result<T>) -> Result<T, Failure> {
    parse(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, report: &Value, stdout: &mut dyn Write) -> Outcome {
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    match out {
        Some(path) => write(path, text.as_bytes()),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Data(format!("standard output: {e}"))),
    }
}

fn positive_threshold(th: f64) -> Outcome {
    if th > 0.0 && th.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "IDF threshold must be positive and finite, got {th}"
        )))
    }
}

fn extract(a: &ExtractArgs, meta: &RunMeta) -> Outcome {
    positive_threshold(a.idf_threshold)?;
    let corpus = load(&a.captions, parse_coco_captions)?;
    let docs = build_documents(&corpus, a.stem);
    let stats = CorpusStats::from_documents(&docs, LogBase::from(a.log_base));
    let vocab = stats.vocabulary(a.idf_threshold, a.stem)?;
    let attrs: Vec<_> = docs
        .iter()
        .map(|d| ground_truth_attributes(d, &vocab))
        .collect();
    write(&a.out_vocab, write_vocabulary(&vocab, meta).as_bytes())?;
    write(
        &a.out_attrs,
        write_attributes(&attrs, vocab.len(), meta)?.as_bytes(),
    )
}

fn vocab_report(a: &VocabReportArgs, meta: &RunMeta, stdout: &mut dyn Write) -> Outcome {
    for &th in &a.thresholds {
        positive_threshold(th)?;
    }
    let corpus = load(&a.captions, parse_coco_captions)?;
    let docs = build_documents(&corpus, a.stem);
    let base = LogBase::from(a.log_base);
    let report = CorpusStats::from_documents(&docs, base).vocabulary_report(&a.thresholds)?;
    let value = json!({
        "meta": meta,
        "stemmed": a.stem,
        "log_base": base,
        "n_captions": corpus.len(),
        "n_images": report.n_docs,
        "total_words": report.total_words,
        "rows": report.rows,
    });
    emit(a.out.as_deref(), &value, stdout)
}

fn features_by_id(file: &FeatureFile) -> HashMap<u64, &FeatureRecord> {
    file.records.iter().map(|r| (r.image_id, r)).collect()
}

fn missing_ids(ids: impl Iterator<Item = u64>, what: &str) -> Outcome {
    let mut missing: Vec<u64> = ids.collect();
    if missing.is_empty() {
        return Ok(());
    }
    missing.sort_unstable();
    missing.dedup();
    Err(Failure::Data(format!("images without {what}: {missing:?}")))
}

fn train_attr(a: &TrainAttrArgs, meta: &RunMeta, stderr: &mut dyn Write) -> Outcome {
    let features = load(&a.features, read_features)?;
    let attrs = load(&a.attrs, read_attributes)?;
    let by_id = features_by_id(&features);
    missing_ids(
        attrs
            .vectors
            .iter()
            .map(|v| v.image_id)
            .filter(|id| !by_id.contains_key(id)),
        "features",
    )?;
    let selected: Vec<FeatureRecord> = attrs
        .vectors
        .iter()
        .map(|v| by_id[&v.image_id].clone())
        .collect();
    let data = join_examples(&selected, &attrs.vectors)?;
    let net = AttrNetConfig {
        input_dim: features.dim,
        hidden_dim: a.hidden,
        dropout: a.dropout,
        ..AttrNetConfig::new(attrs.n_attrs)
    };
    let train = AttrTrainConfig {
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        seed: a.common.seed,
        ensemble_size: a.ensemble,
    };
    if a.ensemble == 0 {
        return Err(Failure::Usage("--ensemble must be at least 1".into()));
    }
    let outcomes = attrnet_train_ensemble(&data, &net, &train)?;
    for (k, o) in outcomes.iter().enumerate() {
        let last = o.epoch_losses.last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            stderr,
            "attribute member {k}: final training loss {last:.6e}"
        );
    }
    let members: Vec<_> = outcomes.into_iter().map(|o| o.params).collect();
    write(
        &a.out,
        &write_checkpoint(&attrnet_to_checkpoint(&members, meta)?),
    )
}

fn predict_attr(a: &PredictAttrArgs, meta: &RunMeta) -> Outcome {
    let features = load(&a.features, read_features)?;
    let (members, _) = load(&a.model, |b| attrnet_from_checkpoint(&read_checkpoint(b)?))?;
    let expected = members[0].config.input_dim;
    if features.dim != expected {
        return Err(Failure::Data(format!(
            "feature dimension {} does not match the model input {expected}",
            features.dim
        )));
    }
    let x = feature_matrix(&features.records, features.dim)?;
    let pred = ensemble_predict(&x, &members)?;
    let ids: Vec<u64> = features.records.iter().map(|r| r.image_id).collect();
    let vectors = to_attribute_vectors(&ids, &pred);
    write(
        &a.out,
        write_attributes(&vectors, members[0].n_attrs(), meta)?.as_bytes(),
    )
}

/// Feature and attribute rows of `corpus`'s images, in corpus image order.
fn caption_dataset(
    corpus: &CaptionCorpus,
    features: &FeatureFile,
    attrs: &AttributeFile,
    vocab: &CaptionVocab,
) -> Result<CaptionDataset, Failure> {
    let feat = features_by_id(features);
    let attr: HashMap<u64, &[f64]> = attrs
        .vectors
        .iter()
        .map(|v| (v.image_id, v.values.as_slice()))
        .collect();
    let ids = corpus.image_ids().to_vec();
    missing_ids(
        ids.iter().copied().filter(|id| !feat.contains_key(id)),
        "features",
    )?;
    missing_ids(
        ids.iter().copied().filter(|id| !attr.contains_key(id)),
        "attributes",
    )?;
    let mut x = Array2::zeros((ids.len(), features.dim));
    let mut d = Array2::zeros((ids.len(), attrs.n_attrs));
    let mut row_of = HashMap::with_capacity(ids.len());
    for (row, id) in ids.iter().enumerate() {
        x.row_mut(row)
            .assign(&ndarray::ArrayView1::from(&feat[id].feature));
        d.row_mut(row).assign(&ndarray::ArrayView1::from(attr[id]));
        row_of.insert(*id, row);
    }
    let pairs = corpus
        .records()
        .iter()
        .map(|(id, text)| (row_of[id], vocab.encode(text)))
        .collect();
    Ok(CaptionDataset::new(ids, x, d, pairs)?)
}

fn train_captioner(a: &TrainCaptionerArgs, meta: &RunMeta, stderr: &mut dyn Write) -> Outcome {
    if a.ensemble == 0 {
        return Err(Failure::Usage("--ensemble must be at least 1".into()));
    }
    let features = load(&a.features, read_features)?;
    let attrs = load(&a.attrs, read_attributes)?;
    let train_corpus = load(&a.captions, parse_coco_captions)?;
    let val_corpus = a
        .val_captions
        .as_deref()
        .map(|p| load(p, parse_coco_captions))
        .transpose()?;
    let embeddings = a
        .embeddings
        .as_deref()
        .map(|p| load(p, read_embeddings))
        .transpose()?;

    let vocab = CaptionVocab::build(
        train_corpus.records().iter().map(|(_, c)| c.as_str()),
        a.min_count,
    );
    let train = caption_dataset(&train_corpus, &features, &attrs, &vocab)?;
    let val = val_corpus
        .as_ref()
        .map(|c| caption_dataset(c, &features, &attrs, &vocab))
        .transpose()?;
    let config = ScnConfig {
        embed_dim: a.embed_dim,
        hidden_dim: a.hidden,
        factor_dim: a.factor,
        feature_dim: features.dim,
        ..ScnConfig::new(vocab.len(), attrs.n_attrs)
    };
    let mut members = Vec::with_capacity(a.ensemble);
    for k in 0..a.ensemble {
        let member_seed = Rng::derive(a.common.seed, 1_000_000 + k as u64).next_u64();
        let mut init = ScnLstmParams::init(
            config.clone(),
            vocab.clone(),
            &mut Rng::derive(member_seed, 0),
        )?;
        if let Some(vectors) = &embeddings {
            init.load_embeddings(vectors)?;
        }
        let train_config = CaptionTrainConfig {
            batch_size: a.batch_size,
            learning_rate: a.learning_rate,
            max_epochs: a.max_epochs,
            clip_norm: a.clip_norm,
            dropout: a.dropout,
            patience: a.patience,
            early_stopping: !a.no_early_stop,
            seed: member_seed,
        };
        let outcome = captioner_train(init, &train, val.as_ref(), &train_config)?;
        let last = outcome.train_losses.last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            stderr,
            "captioner member {k}: {} epochs, final training loss {last:.6e}, best epoch {:?}",
            outcome.train_losses.len(),
            outcome.best_epoch
        );
        members.push(outcome.params);
    }
    write(
        &a.out,
        &write_checkpoint(&scn_to_checkpoint(&members, meta)?),
    )
}

fn caption(a: &CaptionArgs, meta: &RunMeta) -> Outcome {
    if a.beam == 0 || a.max_len == 0 {
        return Err(Failure::Usage(
            "--beam and --max-len must be at least 1".into(),
        ));
    }
    let features = load(&a.features, read_features)?;
    let attrs = load(&a.attrs, read_attributes)?;
    let (members, _) = load(&a.model, |b| scn_from_checkpoint(&read_checkpoint(b)?))?;
    let config = &members[0].config;
    if features.dim != config.feature_dim || attrs.n_attrs != config.n_attrs {
        return Err(Failure::Data(format!(
            "inputs have feature dim {} and {} attributes; the model expects {} and {}",
            features.dim, attrs.n_attrs, config.feature_dim, config.n_attrs
        )));
    }
    let feat = features_by_id(&features);
    missing_ids(
        attrs
            .vectors
            .iter()
            .map(|v| v.image_id)
            .filter(|id| !feat.contains_key(id)),
        "features",
    )?;
    let mut captions = Vec::with_capacity(attrs.vectors.len());
    for v in &attrs.vectors {
        let feature = &feat[&v.image_id].feature;
        let seq = if members.len() == 1 {
            beam_search(feature, &v.values, &members[0], a.beam, a.max_len)?
        } else {
            ensemble_beam_search(&members, feature, &v.values, a.beam, a.max_len)?
        };
        captions.push(CaptionRecord {
            image_id: v.image_id,
            caption: members[0].vocab.decode(&seq),
        });
    }
    let records = CaptionRecords {
        meta: Some(meta.clone()),
        captions,
    };
    write(&a.out, write_caption_records(&records).as_bytes())
}

fn eval_attr(a: &EvalAttrArgs, meta: &RunMeta, stdout: &mut dyn Write) -> Outcome {
    let pred = load(&a.predictions, read_attributes)?;
    let truth = load(&a.truth, read_attributes)?;
    let report = attribute_f1(&pred.vectors, &truth.vectors)?;
    let value = json!({
        "meta": meta,
        "n_images": truth.vectors.len(),
        "macro_f1": report.macro_f1,
        "micro_f1": report.micro_f1,
        "per_bin_f1": report.per_bin,
        "confusion": report.confusion,
    });
    emit(a.out.as_deref(), &value, stdout)
}

fn eval_captions(a: &EvalCaptionsArgs, meta: &RunMeta, stdout: &mut dyn Write) -> Outcome {
    let records = load(&a.captions, read_caption_records)?;
    let refs = load(&a.references, parse_coco_captions)?;
    let predictions: Vec<(u64, String)> = records
        .captions
        .into_iter()
        .map(|r| (r.image_id, r.caption))
        .collect();
    let report = evaluate_captions(&predictions, &refs)?;
    let want = |m: Metric| a.metrics.contains(&m);
    let select = |bleu: &[f64; 4], rouge: f64, cider: f64| {
        let mut obj = serde_json::Map::new();
        if want(Metric::Bleu) {
            for (n, b) in bleu.iter().enumerate() {
                obj.insert(format!("bleu_{}", n + 1), json!(b));
            }
        }
        if want(Metric::RougeL) {
            obj.insert("rouge_l".into(), json!(rouge));
        }
        if want(Metric::CiderD) {
            obj.insert("cider_d".into(), json!(cider));
        }
        obj
    };
    let per_image: Vec<Value> = report
        .per_image
        .iter()
        .map(|s| {
            let mut obj = select(&s.bleu, s.rouge_l, s.cider_d);
            obj.insert("image_id".into(), json!(s.image_id));
            obj.insert("caption".into(), json!(s.caption));
            Value::Object(obj)
        })
        .collect();
    let value = json!({
        "meta": meta,
        "n_images": report.n_images,
        "scores": Value::Object(select(&report.bleu, report.rouge_l, report.cider_d)),
        "per_image": per_image,
    });
    emit(a.out.as_deref(), &value, stdout)
}
