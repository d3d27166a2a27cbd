use std::cmp::Ordering;

use ndarray::Array2;

use super::cell::{cell_forward, embed_tokens, row_vector, CellState, Conditioning};
use super::{CaptionSequence, ScnLstmParams, BOS, EOS};
use crate::{Error, Result};

/// An autoregressive next-token distribution.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    /// State before the first step.
    fn start(&self) -> Self::State;

    /// Feeds `token` at step `step` (1-based) and returns the new state with
    /// the probabilities of the next token.
    fn next_probs(
        &self,
        state: &Self::State,
        token: usize,
        step: usize,
    ) -> Result<(Self::State, Vec<f64>)>;
}

/// One image's decoder: the conditioning is computed once.
pub struct ImageDecoder<'a> {
    params: &'a ScnLstmParams,
    cond: Conditioning,
}

impl<'a> ImageDecoder<'a> {
    pub fn new(params: &'a ScnLstmParams, feature: &[f64], attrs: &[f64]) -> Result<Self> {
        let row = |v: &[f64]| row_vector(&ndarray::Array1::from(v.to_vec()));
        let cond = Conditioning::new(params, &row(attrs), &row(feature))?;
        Ok(Self { params, cond })
    }
}

fn softmax_row(logits: &Array2<f64>) -> Vec<f64> {
    let row = logits.row(0);
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

impl StepModel for ImageDecoder<'_> {
    type State = CellState;

    fn vocab_size(&self) -> usize {
        self.params.config.vocab_size
    }

    fn start(&self) -> CellState {
        CellState::zeros(1, self.params.config.hidden_dim)
    }

    fn next_probs(
        &self,
        state: &CellState,
        token: usize,
        step: usize,
    ) -> Result<(CellState, Vec<f64>)> {
        if token >= self.vocab_size() {
            return Err(Error::Param(format!(
                "token id {token} outside caption vocabulary"
            )));
        }
        let (next, _) = cell_forward(
            self.params,
            &self.cond,
            embed_tokens(self.params, &[token]),
            state,
            step == 1,
        );
        let logits = next.h.dot(&self.params.out_w.t()) + &self.params.out_b;
        Ok((next, softmax_row(&logits)))
    }
}

/// Members' next-token probabilities averaged arithmetically.
pub struct EnsembleModel<M> {
    members: Vec<M>,
}

impl<M: StepModel> EnsembleModel<M> {
    pub fn new(members: Vec<M>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::Empty("ensemble has no members".into()));
        };
        let v = first.vocab_size();
        if let Some(m) = members.iter().find(|m| m.vocab_size() != v) {
            return Err(Error::dims(
                "ensemble member vocabulary",
                &[m.vocab_size()],
                &[v],
            ));
        }
        Ok(Self { members })
    }
}

impl<M: StepModel> StepModel for EnsembleModel<M> {
    type State = Vec<M::State>;

    fn vocab_size(&self) -> usize {
        self.members[0].vocab_size()
    }

    fn start(&self) -> Self::State {
        self.members.iter().map(StepModel::start).collect()
    }

    fn next_probs(
        &self,
        state: &Self::State,
        token: usize,
        step: usize,
    ) -> Result<(Self::State, Vec<f64>)> {
        let mut states = Vec::with_capacity(self.members.len());
        let mut mean = vec![0.0; self.vocab_size()];
        for (k, (member, s)) in self.members.iter().zip(state).enumerate() {
            let (next, probs) = member.next_probs(s, token, step)?;
            for (m, p) in mean.iter_mut().zip(&probs) {
                *m += (p - *m) / (k + 1) as f64;
            }
            states.push(next);
        }
        Ok((states, mean))
    }
}

#[derive(Debug, Clone)]
pub struct BeamHypothesis<S> {
    /// Prefix starting with BOS.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: S,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutcome {
    pub sequence: CaptionSequence,
    /// Log-probability of the returned tokens; for an unfinished result the
    /// appended EOS is not scored.
    pub log_prob: f64,
    pub finished: bool,
}

/// Higher score first; equal scores by smaller token ids, then shorter prefix.
fn rank(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Beam search over sequences of at most `max_len` predicted tokens
/// (EOS included). Only EOS may be emitted at the last step; a hypothesis
/// that cannot end there is returned unfinished when nothing finished.
pub fn search<M: StepModel>(model: &M, beam: usize, max_len: usize) -> Result<BeamOutcome> {
    if beam == 0 {
        return Err(Error::Param("beam width must be at least 1".into()));
    }
    if max_len == 0 {
        return Err(Error::Param(
            "maximum caption length must be at least 1".into(),
        ));
    }
    let mut live = vec![BeamHypothesis {
        tokens: vec![BOS],
        log_prob: 0.0,
        state: model.start(),
        finished: false,
    }];
    let mut finished: Vec<BeamHypothesis<M::State>> = Vec::new();

    for step in 1..=max_len {
        let mut candidates: Vec<(f64, Vec<usize>, usize)> = Vec::new();
        let mut states = Vec::with_capacity(live.len());
        for (h, hyp) in live.iter().enumerate() {
            let (state, probs) =
                model.next_probs(&hyp.state, *hyp.tokens.last().expect("BOS"), step)?;
            if probs.len() != model.vocab_size() {
                return Err(Error::dims(
                    "next-token distribution",
                    &[probs.len()],
                    &[model.vocab_size()],
                ));
            }
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "next-token distribution at step {step}"
                )));
            }
            let mut tokens: Vec<(f64, usize)> = probs
                .iter()
                .enumerate()
                .filter(|&(k, p)| k != BOS && *p > 0.0 && (step < max_len || k == EOS))
                .map(|(k, p)| (p.ln(), k))
                .collect();
            tokens.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            tokens.truncate(beam);
            for (logp, k) in tokens {
                let mut prefix = hyp.tokens.clone();
                prefix.push(k);
                candidates.push((hyp.log_prob + logp, prefix, h));
            }
            states.push(state);
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));

        let mut next_live = Vec::new();
        for (log_prob, tokens, parent) in candidates {
            let done = *tokens.last().expect("non-empty") == EOS;
            if !done && next_live.len() == beam {
                continue;
            }
            let hyp = BeamHypothesis {
                tokens,
                log_prob,
                state: states[parent].clone(),
                finished: done,
            };
            if done {
                finished.push(hyp);
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;

        let best_finished = finished
            .iter()
            .map(|h| h.log_prob)
            .fold(f64::NEG_INFINITY, f64::max);
        let best_live = live
            .iter()
            .map(|h| h.log_prob)
            .fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || (!finished.is_empty() && best_finished > best_live) {
            break;
        }
    }

    let pool = if finished.is_empty() {
        &live
    } else {
        &finished
    };
    let best = pool
        .iter()
        .min_by(|a, b| rank((a.log_prob, &a.tokens), (b.log_prob, &b.tokens)))
        .expect("beam keeps at least one hypothesis");
    let mut tokens = best.tokens.clone();
    if !best.finished {
        tokens.push(EOS);
    }
    Ok(BeamOutcome {
        sequence: CaptionSequence::new(tokens)?,
        log_prob: best.log_prob,
        finished: best.finished,
    })
}

/// Beam search for one image with a single model.
pub fn beam_search(
    feature: &[f64],
    attrs: &[f64],
    params: &ScnLstmParams,
    beam: usize,
    max_len: usize,
) -> Result<CaptionSequence> {
    Ok(search(&ImageDecoder::new(params, feature, attrs)?, beam, max_len)?.sequence)
}

/// Beam search on the arithmetic mean of the members' distributions.
pub fn ensemble_beam_search(
    members: &[ScnLstmParams],
    feature: &[f64],
    attrs: &[f64],
    beam: usize,
    max_len: usize,
) -> Result<CaptionSequence> {
    if let Some(first) = members.first() {
        if let Some(m) = members.iter().find(|m| m.vocab != first.vocab) {
            return Err(Error::Param(format!(
                "ensemble members disagree on the caption vocabulary ({} vs {} words)",
                m.vocab.len(),
                first.vocab.len()
            )));
        }
    }
    let decoders = members
        .iter()
        .map(|p| ImageDecoder::new(p, feature, attrs))
        .collect::<Result<Vec<_>>>()?;
    Ok(search(&EnsembleModel::new(decoders)?, beam, max_len)?.sequence)
}
