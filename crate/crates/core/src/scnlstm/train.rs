use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::cell::{
    cell_backward, cell_forward, embed_tokens, CellState, Conditioning, ConditioningGrads,
    StepCache,
};
use super::{CaptionSequence, ScnLstmParams, EOS};
use crate::nncore::{AdamConfig, AdamState, Parameters, Rng};
use crate::{Error, Result};

/// Images (features and attributes, one row each) and their captions.
#[derive(Debug, Clone)]
pub struct CaptionDataset {
    pub image_ids: Vec<u64>,
    pub features: Array2<f64>,
    pub attrs: Array2<f64>,
    /// (image row, caption) pairs.
    pub pairs: Vec<(usize, CaptionSequence)>,
}

impl CaptionDataset {
    pub fn new(
        image_ids: Vec<u64>,
        features: Array2<f64>,
        attrs: Array2<f64>,
        pairs: Vec<(usize, CaptionSequence)>,
    ) -> Result<Self> {
        let n = image_ids.len();
        if features.nrows() != n || attrs.nrows() != n {
            return Err(Error::dims(
                "caption dataset rows",
                &[features.nrows(), attrs.nrows()],
                &[n, n],
            ));
        }
        if let Some((i, _)) = pairs.iter().enumerate().find(|(_, (row, _))| *row >= n) {
            return Err(Error::parse_at(
                "caption dataset",
                i,
                "image row out of range",
            ));
        }
        let mut has_caption = vec![false; n];
        for (row, _) in &pairs {
            has_caption[*row] = true;
        }
        if let Some(row) = has_caption.iter().position(|has| !has) {
            return Err(Error::Empty(format!(
                "image {} has no caption",
                image_ids[row]
            )));
        }
        Ok(Self {
            image_ids,
            features,
            attrs,
            pairs,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptionTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Global gradient-norm bound.
    pub clip_norm: f64,
    /// Dropout on `h` before the softmax layer.
    pub dropout: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub early_stopping: bool,
    pub seed: u64,
}

impl Default for CaptionTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 2e-4,
            max_epochs: 20,
            clip_norm: 5.0,
            dropout: 0.5,
            patience: 3,
            early_stopping: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaptionTrainOutcome {
    pub params: ScnLstmParams,
    /// Mean train-mode negative log-likelihood per token, per epoch.
    pub train_losses: Vec<f64>,
    /// Inference-mode validation loss per epoch, when validating.
    pub val_losses: Vec<f64>,
    /// Epoch (0-based) whose parameters were returned.
    pub best_epoch: Option<usize>,
}

struct Step {
    cell: StepCache,
    tokens_in: Vec<usize>,
    targets: Vec<usize>,
    live: Vec<bool>,
    dropped_h: Array2<f64>,
    mask: Option<Array2<f64>>,
    probs: Array2<f64>,
}

/// Row-wise log-softmax.
fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

fn check_tokens(params: &ScnLstmParams, seq: &CaptionSequence) -> Result<()> {
    match seq
        .tokens()
        .iter()
        .find(|&&t| t >= params.config.vocab_size)
    {
        Some(t) => Err(Error::Param(format!(
            "token id {t} outside caption vocabulary of {}",
            params.config.vocab_size
        ))),
        None => Ok(()),
    }
}

/// Teacher-forced pass over a batch. Returns the summed negative
/// log-likelihood, the token count and, if requested, the gradient of the
/// mean per-token loss.
#[allow(clippy::type_complexity)]
fn batch_pass(
    params: &ScnLstmParams,
    features: &Array2<f64>,
    attrs: &Array2<f64>,
    seqs: &[&CaptionSequence],
    mut dropout: Option<(f64, &mut Rng)>,
    want_grads: bool,
) -> Result<(f64, usize, Option<ScnLstmParams>, Vec<Array2<f64>>)> {
    for seq in seqs {
        check_tokens(params, seq)?;
    }
    let rows = seqs.len();
    let cond = Conditioning::new(params, attrs, features)?;
    let steps_total = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut state = CellState::zeros(rows, params.config.hidden_dim);
    let mut steps = Vec::with_capacity(steps_total);
    let mut nll = 0.0;
    let mut n_tokens = 0;
    let mut distributions = Vec::new();

    for t in 1..=steps_total {
        let tokens_in: Vec<usize> = seqs
            .iter()
            .map(|s| s.tokens().get(t - 1).copied().unwrap_or(EOS))
            .collect();
        let live: Vec<bool> = seqs.iter().map(|s| t <= s.len()).collect();
        let targets: Vec<usize> = seqs
            .iter()
            .map(|s| s.tokens().get(t).copied().unwrap_or(EOS))
            .collect();
        let (next, cell) = cell_forward(
            params,
            &cond,
            embed_tokens(params, &tokens_in),
            &state,
            t == 1,
        );
        let (dropped_h, mask) = match &mut dropout {
            Some((rate, rng)) => {
                crate::nncore::dropout(&next.h, *rate, rng, crate::nncore::Mode::Train)?
            }
            None => (next.h.clone(), None),
        };
        let logits = dropped_h.dot(&params.out_w.t()) + &params.out_b;
        let logp = log_softmax(&logits);
        for (b, (&target, &is_live)) in targets.iter().zip(&live).enumerate() {
            if is_live {
                nll -= logp[[b, target]];
                n_tokens += 1;
            }
        }
        let probs = logp.mapv(f64::exp);
        if !want_grads {
            distributions.push(probs.clone());
        }
        state = next;
        steps.push(Step {
            cell,
            tokens_in,
            targets,
            live,
            dropped_h,
            mask,
            probs,
        });
    }
    if !nll.is_finite() {
        return Err(Error::NonFinite("caption log-likelihood".into()));
    }
    if !want_grads {
        return Ok((nll, n_tokens, None, distributions));
    }

    let mut grads = params.zeros_like();
    let mut cond_grads = ConditioningGrads::zeros(&cond);
    let scale = 1.0 / n_tokens.max(1) as f64;
    let hidden = params.config.hidden_dim;
    let mut dh_next = Array2::zeros((rows, hidden));
    let mut dc_next = Array2::zeros((rows, hidden));
    for (t, step) in steps.iter().enumerate().rev() {
        let mut dlogits = step.probs.clone();
        for (b, mut row) in dlogits.rows_mut().into_iter().enumerate() {
            if step.live[b] {
                row[step.targets[b]] -= 1.0;
                row *= scale;
            } else {
                row.fill(0.0);
            }
        }
        grads.out_w += &dlogits.t().dot(&step.dropped_h);
        grads.out_b += &dlogits.sum_axis(Axis(0));
        let mut dh = dlogits.dot(&params.out_w);
        if let Some(mask) = &step.mask {
            dh *= mask;
        }
        dh += &dh_next;
        let (d_emb, dh_prev, dc_prev) = cell_backward(
            params,
            &cond,
            &step.cell,
            &dh,
            &dc_next,
            t == 0,
            &mut grads,
            &mut cond_grads,
        );
        for (b, &token) in step.tokens_in.iter().enumerate() {
            let mut row = grads.embed.row_mut(token);
            row += &d_emb.row(b);
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    cond_grads.accumulate(attrs, Some(features), &mut grads);
    Ok((nll, n_tokens, Some(grads), distributions))
}

fn single_row(v: &[f64]) -> Array2<f64> {
    ArrayView1::from(v).insert_axis(Axis(0)).to_owned()
}

/// `log p(X | f(I), D_p)`: the teacher-forced sum of log-probabilities of
/// `x_1 .. x_T`, with the image injected at the first step.
pub fn sequence_log_likelihood(
    caption: &CaptionSequence,
    feature: &[f64],
    attrs: &[f64],
    params: &ScnLstmParams,
) -> Result<f64> {
    let (nll, _, _, _) = batch_pass(
        params,
        &single_row(feature),
        &single_row(attrs),
        &[caption],
        None,
        false,
    )?;
    Ok(-nll)
}

/// Next-token distributions at every step of a teacher-forced pass.
pub fn step_distributions(
    caption: &CaptionSequence,
    feature: &[f64],
    attrs: &[f64],
    params: &ScnLstmParams,
) -> Result<Vec<Vec<f64>>> {
    let (_, _, _, dists) = batch_pass(
        params,
        &single_row(feature),
        &single_row(attrs),
        &[caption],
        None,
        false,
    )?;
    Ok(dists.iter().map(|d| d.row(0).to_vec()).collect())
}

fn gather<'a>(
    data: &'a CaptionDataset,
    idx: &[usize],
) -> (Array2<f64>, Array2<f64>, Vec<&'a CaptionSequence>) {
    let rows: Vec<usize> = idx.iter().map(|&i| data.pairs[i].0).collect();
    (
        data.features.select(Axis(0), &rows),
        data.attrs.select(Axis(0), &rows),
        idx.iter().map(|&i| &data.pairs[i].1).collect(),
    )
}

/// Mean negative log-likelihood per token over a dataset, without dropout.
pub fn mean_token_nll(params: &ScnLstmParams, data: &CaptionDataset) -> Result<f64> {
    let order: Vec<usize> = (0..data.len()).collect();
    let mut nll = 0.0;
    let mut tokens = 0;
    for chunk in order.chunks(64) {
        let (x, a, seqs) = gather(data, chunk);
        let (sum, n, _, _) = batch_pass(params, &x, &a, &seqs, None, false)?;
        nll += sum;
        tokens += n;
    }
    Ok(nll / tokens.max(1) as f64)
}

/// Mean per-token loss and its gradient on a set of pairs; dropout is off.
pub fn loss_and_grads(
    params: &ScnLstmParams,
    data: &CaptionDataset,
    idx: &[usize],
) -> Result<(f64, ScnLstmParams)> {
    let (x, a, seqs) = gather(data, idx);
    let (nll, n, grads, _) = batch_pass(params, &x, &a, &seqs, None, true)?;
    Ok((nll / n.max(1) as f64, grads.expect("requested")))
}

/// Minimizes the mean per-token negative log-likelihood with Adam, global
/// gradient clipping and output dropout. With a validation set and early
/// stopping enabled, returns the parameters of the best validation epoch.
pub fn captioner_train(
    init: ScnLstmParams,
    train: &CaptionDataset,
    validation: Option<&CaptionDataset>,
    config: &CaptionTrainConfig,
) -> Result<CaptionTrainOutcome> {
    if train.is_empty() {
        return Err(Error::Empty(
            "captioner training set has no captions".into(),
        ));
    }
    if config.batch_size == 0
        || config.learning_rate.is_nan()
        || config.learning_rate < 0.0
        || config.clip_norm.is_nan()
        || config.clip_norm <= 0.0
    {
        return Err(Error::Param(
            "batch size and clip norm must be positive, learning rate >= 0".into(),
        ));
    }
    init.validate()?;
    let mut params = init;
    let mut adam = AdamState::new(
        AdamConfig::with_learning_rate(config.learning_rate),
        &params,
    );
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut outcome = CaptionTrainOutcome {
        params: params.clone(),
        train_losses: Vec::new(),
        val_losses: Vec::new(),
        best_epoch: None,
    };
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..config.max_epochs {
        let mut rng = Rng::derive(config.seed, 1 + epoch as u64);
        rng.shuffle(&mut order);
        let mut nll = 0.0;
        let mut tokens = 0;
        for batch in order.chunks(config.batch_size) {
            let (x, a, seqs) = gather(train, batch);
            let drop = (config.dropout > 0.0).then_some((config.dropout, &mut rng));
            let (sum, n, grads, _) = batch_pass(&params, &x, &a, &seqs, drop, true)?;
            let mut grads = grads.expect("requested");
            grads.clip_global_norm(config.clip_norm);
            adam.step(&mut params, &grads)?;
            nll += sum;
            tokens += n;
        }
        outcome.train_losses.push(nll / tokens.max(1) as f64);

        match validation.filter(|_| config.early_stopping) {
            Some(val) => {
                let loss = mean_token_nll(&params, val)?;
                outcome.val_losses.push(loss);
                if loss < best {
                    best = loss;
                    stale = 0;
                    outcome.params = params.clone();
                    outcome.best_epoch = Some(epoch);
                } else {
                    stale += 1;
                    if stale >= config.patience {
                        break;
                    }
                }
            }
            None => outcome.best_epoch = Some(epoch),
        }
    }
    if validation.is_none() || !config.early_stopping {
        outcome.params = params;
    }
    Ok(outcome)
}
