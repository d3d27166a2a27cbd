//! Distinctive-attribute prediction network.
//!
//! A 2048-d image feature goes through four fully connected layers. Each is
//! followed by batch normalization and ReLU; the first three also apply
//! dropout. The final ReLU output is the attribute score vector `D_p`. There
//! is no softmax, so scores are unbounded above. Training minimizes the mean
//! squared error against the ground-truth vectors with Adam.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::nncore::{
    dropout, relu, relu_backward, slice_mut, AdamConfig, AdamState, Affine, BatchNorm, BatchStats,
    BnCache, Mode, Parameters, Rng, TensorRef,
};
use crate::semantics::AttributeVector;
use crate::{Error, Result, FEATURE_DIM};

/// One image's pooled CNN feature `f(I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub image_id: u64,
    pub feature: Vec<f64>,
}

/// Network shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrNetConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `N_w`, the vocabulary size.
    pub n_attrs: usize,
    /// Dropout after the first three layers.
    pub dropout: f64,
    /// Whether the fourth layer is batch-normalized before its ReLU.
    pub output_batch_norm: bool,
    pub bn_momentum: f64,
}

impl AttrNetConfig {
    pub fn new(n_attrs: usize) -> Self {
        Self {
            input_dim: FEATURE_DIM,
            hidden_dim: 2048,
            n_attrs,
            dropout: 0.3,
            output_batch_norm: true,
            bn_momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttrTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub ensemble_size: usize,
}

impl Default for AttrTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 3e-3,
            epochs: 100,
            seed: 0,
            ensemble_size: 5,
        }
    }
}

const LAYERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AttrNetParams {
    pub config: AttrNetConfig,
    pub fc: Vec<Affine>,
    /// One per layer; the last is only used when `output_batch_norm` is set.
    pub bn: Vec<BatchNorm>,
}

struct LayerCache {
    input: Array2<f64>,
    pre_bn: Array2<f64>,
    bn: Option<BnCache>,
    pre_relu: Array2<f64>,
    mask: Option<Array2<f64>>,
}

/// Intermediate values of one forward pass, consumed by `backward`.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    stats: Vec<Option<BatchStats>>,
}

impl AttrNetParams {
    /// Xavier-initialized weights, zero biases, unit BN scale.
    pub fn init(config: AttrNetConfig, rng: &mut Rng) -> Self {
        let dims = [
            config.input_dim,
            config.hidden_dim,
            config.hidden_dim,
            config.hidden_dim,
            config.n_attrs,
        ];
        let fc = (0..LAYERS)
            .map(|k| Affine::xavier(dims[k], dims[k + 1], rng))
            .collect();
        let bn = (0..LAYERS)
            .map(|k| {
                let mut bn = BatchNorm::new(dims[k + 1]);
                bn.momentum = config.bn_momentum;
                bn
            })
            .collect();
        Self { config, fc, bn }
    }

    /// Same shapes, every tensor (including BN statistics) zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.fill(0.0);
        for bn in &mut out.bn {
            bn.running_mean.fill(0.0);
            bn.running_var.fill(0.0);
        }
        out
    }

    pub fn n_attrs(&self) -> usize {
        self.config.n_attrs
    }

    fn uses_bn(&self, layer: usize) -> bool {
        layer < LAYERS - 1 || self.config.output_batch_norm
    }

    /// Forward pass over a batch of features (one per row). BN uses batch
    /// statistics in train mode; dropout is applied only when `dropout_rng`
    /// is given.
    pub fn forward_batch(
        &self,
        x: &Array2<f64>,
        bn_mode: Mode,
        mut dropout_rng: Option<&mut Rng>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::dims(
                "attribute network input",
                x.shape(),
                &[x.nrows(), self.config.input_dim],
            ));
        }
        let mut h = x.clone();
        let mut layers = Vec::with_capacity(LAYERS);
        let mut stats = Vec::with_capacity(LAYERS);
        for k in 0..LAYERS {
            let pre_bn = self.fc[k].forward(&h)?;
            let (pre_relu, bn_cache) = if self.uses_bn(k) {
                let (y, cache, batch) = self.bn[k].forward(&pre_bn, bn_mode)?;
                stats.push(batch);
                (y, Some(cache))
            } else {
                stats.push(None);
                (pre_bn.clone(), None)
            };
            let activated = relu(&pre_relu);
            let (out, mask) = match (&mut dropout_rng, k < LAYERS - 1) {
                (Some(rng), true) => dropout(&activated, self.config.dropout, rng, Mode::Train)?,
                _ => (activated, None),
            };
            layers.push(LayerCache {
                input: std::mem::replace(&mut h, out),
                pre_bn,
                bn: bn_cache,
                pre_relu,
                mask,
            });
        }
        Ok((h, ForwardCache { layers, stats }))
    }

    /// Gradients of every trainable tensor given `d_out = dL/dD_p`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> AttrNetParams {
        let mut grads = self.zeros_like();
        let mut d = d_out.clone();
        for k in (0..LAYERS).rev() {
            let layer = &cache.layers[k];
            if let Some(mask) = &layer.mask {
                d *= mask;
            }
            d = relu_backward(&layer.pre_relu, &d);
            if let Some(bn_cache) = &layer.bn {
                let (dx, dgamma, dbeta) = self.bn[k].backward(bn_cache, &d);
                grads.bn[k].gamma = dgamma;
                grads.bn[k].beta = dbeta;
                d = dx;
            }
            let (dx, fc_grads) = self.fc[k].backward(&layer.input, &d);
            grads.fc[k] = fc_grads;
            d = dx;
        }
        debug_assert!(cache.layers.iter().all(|l| l.pre_bn.nrows() == d.nrows()));
        grads
    }

    /// Folds train-mode batch statistics into the running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (bn, stats) in self.bn.iter_mut().zip(&cache.stats) {
            if let Some(stats) = stats {
                bn.update_running(stats);
            }
        }
    }

    /// Inference-mode predictions, one row per feature row.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_batch(x, Mode::Inference, None)?.0)
    }

    /// Running BN statistics, which are checkpointed but not trained.
    pub fn buffers(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (k, bn) in self.bn.iter().enumerate() {
            if self.uses_bn(k) {
                out.push(TensorRef::of(
                    format!("bn{k}.running_mean"),
                    &bn.running_mean,
                ));
                out.push(TensorRef::of(format!("bn{k}.running_var"), &bn.running_var));
            }
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let output_bn = self.config.output_batch_norm;
        let mut out = Vec::new();
        for (k, bn) in self.bn.iter_mut().enumerate() {
            if k < LAYERS - 1 || output_bn {
                out.push(slice_mut(&mut bn.running_mean));
                out.push(slice_mut(&mut bn.running_var));
            }
        }
        out
    }
}

impl Parameters for AttrNetParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (k, (fc, bn)) in self.fc.iter().zip(&self.bn).enumerate() {
            out.push(TensorRef::of(format!("fc{k}.w"), &fc.w));
            out.push(TensorRef::of(format!("fc{k}.b"), &fc.b));
            if self.uses_bn(k) {
                out.push(TensorRef::of(format!("bn{k}.gamma"), &bn.gamma));
                out.push(TensorRef::of(format!("bn{k}.beta"), &bn.beta));
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let output_bn = self.config.output_batch_norm;
        let mut out = Vec::new();
        for (k, (fc, bn)) in self.fc.iter_mut().zip(&mut self.bn).enumerate() {
            out.push(slice_mut(&mut fc.w));
            out.push(slice_mut(&mut fc.b));
            if k < LAYERS - 1 || output_bn {
                out.push(slice_mut(&mut bn.gamma));
                out.push(slice_mut(&mut bn.beta));
            }
        }
        out
    }
}

/// Mean squared error over every element of the batch.
pub fn attrnet_loss(pred: &Array2<f64>, gt: &Array2<f64>) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::dims(
            "prediction vs ground truth",
            pred.shape(),
            gt.shape(),
        ));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok((pred - gt).mapv(|d| d * d).sum() / pred.len() as f64)
}

/// `dC/dD_p` for [`attrnet_loss`].
pub fn attrnet_loss_grad(pred: &Array2<f64>, gt: &Array2<f64>) -> Array2<f64> {
    (pred - gt) * (2.0 / pred.len() as f64)
}

/// Features and targets aligned row by row.
#[derive(Debug, Clone)]
pub struct AttrDataset {
    pub image_ids: Vec<u64>,
    pub features: Array2<f64>,
    pub targets: Array2<f64>,
}

/// Stacks feature records into a matrix, checking the dimension.
pub fn feature_matrix(records: &[FeatureRecord], dim: usize) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((records.len(), dim));
    for (i, record) in records.iter().enumerate() {
        if record.feature.len() != dim {
            return Err(Error::dims(
                "feature record length",
                &[record.feature.len()],
                &[dim],
            ));
        }
        x.row_mut(i).assign(&ArrayView1::from(&record.feature));
    }
    Ok(x)
}

/// Inner-joins features and attribute vectors on image id, in attribute
/// order. Any id present on one side only is an error.
pub fn join_examples(features: &[FeatureRecord], attrs: &[AttributeVector]) -> Result<AttrDataset> {
    let by_id: HashMap<u64, &FeatureRecord> = features.iter().map(|f| (f.image_id, f)).collect();
    let attr_ids: std::collections::HashSet<u64> = attrs.iter().map(|a| a.image_id).collect();
    let mut missing: Vec<u64> = attrs
        .iter()
        .map(|a| a.image_id)
        .filter(|id| !by_id.contains_key(id))
        .chain(
            features
                .iter()
                .map(|f| f.image_id)
                .filter(|id| !attr_ids.contains(id)),
        )
        .collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        missing.dedup();
        return Err(Error::Join { missing });
    }
    let n_attrs = attrs.first().map_or(0, |a| a.values.len());
    let dim = features.first().map_or(0, |f| f.feature.len());
    let ordered: Vec<FeatureRecord> = attrs.iter().map(|a| by_id[&a.image_id].clone()).collect();
    let mut targets = Array2::zeros((attrs.len(), n_attrs));
    for (i, a) in attrs.iter().enumerate() {
        if a.values.len() != n_attrs {
            return Err(Error::dims(
                "attribute vector length",
                &[a.values.len()],
                &[n_attrs],
            ));
        }
        targets.row_mut(i).assign(&ArrayView1::from(&a.values));
    }
    Ok(AttrDataset {
        image_ids: attrs.iter().map(|a| a.image_id).collect(),
        features: feature_matrix(&ordered, dim)?,
        targets,
    })
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct AttrTrainOutcome {
    pub params: AttrNetParams,
    /// Mean train-mode loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Splits shuffled indices into batches; a trailing batch of one example is
/// folded into its predecessor since BN needs two rows.
pub(crate) fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size.max(1)).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        let merged = out.len() - 1;
        out[merged] = &order[start..];
    }
    out
}

/// Trains one network from scratch. The outcome is a pure function of the
/// data, both configs and `train.seed`.
pub fn attrnet_train(
    data: &AttrDataset,
    net: &AttrNetConfig,
    train: &AttrTrainConfig,
) -> Result<AttrTrainOutcome> {
    let mut rng = Rng::derive(train.seed, 0);
    let params = AttrNetParams::init(net.clone(), &mut rng);
    attrnet_train_from(params, data, train)
}

/// Continues training from `params`.
pub fn attrnet_train_from(
    mut params: AttrNetParams,
    data: &AttrDataset,
    train: &AttrTrainConfig,
) -> Result<AttrTrainOutcome> {
    let m = data.features.nrows();
    if m < 2 {
        return Err(Error::Empty(
            "attribute training needs at least 2 examples".into(),
        ));
    }
    if data.targets.ncols() != params.n_attrs() {
        return Err(Error::dims(
            "targets vs network outputs",
            data.targets.shape(),
            &[m, params.n_attrs()],
        ));
    }
    if train.batch_size == 0 || train.learning_rate.is_nan() || train.learning_rate < 0.0 {
        return Err(Error::Param(
            "batch size must be positive and learning rate >= 0".into(),
        ));
    }

    let mut adam = AdamState::new(AdamConfig::with_learning_rate(train.learning_rate), &params);
    let mut epoch_losses = Vec::with_capacity(train.epochs);
    let mut order: Vec<usize> = (0..m).collect();
    for epoch in 0..train.epochs {
        let mut rng = Rng::derive(train.seed, 1 + epoch as u64);
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in batches(&order, train.batch_size) {
            let x = data.features.select(Axis(0), batch);
            let y = data.targets.select(Axis(0), batch);
            let (pred, cache) = params.forward_batch(&x, Mode::Train, Some(&mut rng))?;
            total += attrnet_loss(&pred, &y)? * batch.len() as f64;
            let grads = params.backward(&cache, &attrnet_loss_grad(&pred, &y));
            adam.step(&mut params, &grads)?;
            params.update_running_stats(&cache);
        }
        let loss = total / m as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        epoch_losses.push(loss);
    }
    Ok(AttrTrainOutcome {
        params,
        epoch_losses,
    })
}

/// Trains `train.ensemble_size` members, each from its own seed stream.
pub fn attrnet_train_ensemble(
    data: &AttrDataset,
    net: &AttrNetConfig,
    train: &AttrTrainConfig,
) -> Result<Vec<AttrTrainOutcome>> {
    (0..train.ensemble_size.max(1))
        .map(|k| {
            let member = AttrTrainConfig {
                seed: Rng::derive(train.seed, 1_000_000 + k as u64).next_u64(),
                ..*train
            };
            attrnet_train(data, net, &member)
        })
        .collect()
}

/// Mean of member predictions (inference mode). The running mean
/// `m += (x - m) / k` keeps identical members bit-exact.
pub fn ensemble_predict(x: &Array2<f64>, members: &[AttrNetParams]) -> Result<Array2<f64>> {
    let first = members
        .first()
        .ok_or_else(|| Error::Empty("ensemble has no members".into()))?;
    if let Some(bad) = members
        .iter()
        .find(|p| p.config.n_attrs != first.config.n_attrs)
    {
        return Err(Error::dims(
            "ensemble member outputs",
            &[bad.config.n_attrs],
            &[first.config.n_attrs],
        ));
    }
    let mut mean = first.predict(x)?;
    for (k, member) in members.iter().enumerate().skip(1) {
        let pred = member.predict(x)?;
        let weight = 1.0 / (k + 1) as f64;
        ndarray::Zip::from(&mut mean)
            .and(&pred)
            .for_each(|m, &p| *m += (p - *m) * weight);
    }
    Ok(mean)
}

/// Wraps prediction rows as attribute vectors.
pub fn to_attribute_vectors(image_ids: &[u64], pred: &Array2<f64>) -> Vec<AttributeVector> {
    image_ids
        .iter()
        .zip(pred.outer_iter())
        .map(|(id, row)| AttributeVector {
            image_id: *id,
            values: row.to_vec(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::gradient_check;
    use ndarray::array;

    fn small_config() -> AttrNetConfig {
        AttrNetConfig {
            input_dim: 6,
            hidden_dim: 5,
            n_attrs: 4,
            dropout: 0.3,
            output_batch_norm: true,
            bn_momentum: 0.9,
        }
    }

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn loss_values() {
        let gt = array![[0.2, 0.4], [0.6, 0.8]];
        assert_eq!(attrnet_loss(&gt, &gt).unwrap(), 0.0);
        let off = &gt + 0.1;
        assert!((attrnet_loss(&off, &gt).unwrap() - 0.01).abs() < 1e-15);
        let pred = array![[0.0], [1.0]];
        let gt = array![[1.0], [1.0]];
        assert_eq!(attrnet_loss(&pred, &gt).unwrap(), 0.5);
        assert!(attrnet_loss(&pred, &array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut params = AttrNetParams::init(small_config(), &mut Rng::new(1));
        params.fill(0.0);
        let x = random(3, 6, &mut Rng::new(2));
        assert!(params.predict(&x).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn outputs_are_nonnegative_and_deterministic() {
        let params = AttrNetParams::init(small_config(), &mut Rng::new(3));
        let x = random(7, 6, &mut Rng::new(4)) * 10.0;
        let a = params.predict(&x).unwrap();
        assert!(a.iter().all(|v| *v >= 0.0));
        assert_eq!(a, params.predict(&x).unwrap());
        let (train, _) = params
            .forward_batch(&x, Mode::Train, Some(&mut Rng::new(5)))
            .unwrap();
        assert!(train.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn wrong_input_width_is_a_dimension_error() {
        let params = AttrNetParams::init(small_config(), &mut Rng::new(3));
        assert!(matches!(
            params.predict(&Array2::zeros((2, 5))),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn gradients_pass_finite_differences() {
        let mut rng = Rng::new(17);
        let mut params = AttrNetParams::init(small_config(), &mut rng);
        let x = random(6, 6, &mut rng);
        let y = Array2::from_shape_simple_fn((6, 4), || rng.uniform(0.0, 1.0));
        for bn in &mut params.bn {
            bn.gamma.mapv_inplace(|_| rng.uniform(0.5, 1.5));
            bn.beta.mapv_inplace(|_| rng.uniform(0.0, 0.5));
        }
        // Freeze BN at the statistics of this batch.
        let (_, cache) = params.forward_batch(&x, Mode::Train, None).unwrap();
        for bn in &mut params.bn {
            bn.momentum = 0.0;
        }
        params.update_running_stats(&cache);

        let (pred, cache) = params.forward_batch(&x, Mode::Inference, None).unwrap();
        let grads = params.backward(&cache, &attrnet_loss_grad(&pred, &y));
        let report = gradient_check(&params, &grads, 1e-5, |p| {
            attrnet_loss(&p.forward_batch(&x, Mode::Inference, None)?.0, &y)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn batch_splitting() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b, vec![&[0, 1, 2, 3][..], &[4, 5, 6, 7, 8][..]]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
        let b = batches(&order[..1], 4);
        assert_eq!(b.len(), 1);
    }

    fn toy_data(rng: &mut Rng) -> AttrDataset {
        let features = random(8, 6, rng);
        let targets = Array2::from_shape_simple_fn((8, 4), || rng.uniform(0.0, 1.0));
        AttrDataset {
            image_ids: (0..8).collect(),
            features,
            targets,
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = toy_data(&mut Rng::new(8));
        let train = AttrTrainConfig {
            epochs: 0,
            seed: 4,
            ..Default::default()
        };
        let out = attrnet_train(&data, &small_config(), &train).unwrap();
        let init = AttrNetParams::init(small_config(), &mut Rng::derive(4, 0));
        assert_eq!(out.params, init);
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn training_is_seed_deterministic_and_learns() {
        let data = toy_data(&mut Rng::new(9));
        let mut config = small_config();
        config.hidden_dim = 32;
        let train = AttrTrainConfig {
            epochs: 300,
            batch_size: 8,
            learning_rate: 1e-2,
            seed: 12,
            ensemble_size: 1,
        };
        let a = attrnet_train(&data, &config, &train).unwrap();
        let b = attrnet_train(&data, &config, &train).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert!(a.epoch_losses.last().unwrap() < &a.epoch_losses[0]);
    }

    #[test]
    fn too_few_examples() {
        let mut data = toy_data(&mut Rng::new(1));
        data.features = data.features.slice(ndarray::s![..1, ..]).to_owned();
        data.targets = data.targets.slice(ndarray::s![..1, ..]).to_owned();
        assert!(attrnet_train(&data, &small_config(), &AttrTrainConfig::default()).is_err());
    }

    #[test]
    fn join_reports_missing_ids() {
        let f = |id| FeatureRecord {
            image_id: id,
            feature: vec![0.0; 3],
        };
        let a = |id| AttributeVector {
            image_id: id,
            values: vec![0.5, 0.5],
        };
        let joined = join_examples(&[f(2), f(1)], &[a(1), a(2)]).unwrap();
        assert_eq!(joined.image_ids, vec![1, 2]);
        match join_examples(&[f(1), f(5)], &[a(1), a(3)]) {
            Err(Error::Join { missing }) => assert_eq!(missing, vec![3, 5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ensemble_identities() {
        let x = random(5, 6, &mut Rng::new(30));
        let a = AttrNetParams::init(small_config(), &mut Rng::new(31));
        let single = a.predict(&x).unwrap();
        assert_eq!(
            ensemble_predict(&x, std::slice::from_ref(&a)).unwrap(),
            single
        );
        let copies = vec![a.clone(), a.clone(), a.clone()];
        assert_eq!(ensemble_predict(&x, &copies).unwrap(), single);

        let mut bigger = small_config();
        bigger.n_attrs = 5;
        let b = AttrNetParams::init(bigger, &mut Rng::new(32));
        assert!(ensemble_predict(&x, &[a, b]).is_err());
        assert!(ensemble_predict(&x, &[]).is_err());
    }

    #[test]
    fn ensemble_is_the_mean() {
        let mut a = AttrNetParams::init(small_config(), &mut Rng::new(1));
        a.fill(0.0);
        let mut b = a.clone();
        // Constant outputs via the final BN shift.
        a.bn[3].beta.fill(0.2);
        b.bn[3].beta.fill(0.4);
        let x = random(2, 6, &mut Rng::new(2));
        let mean = ensemble_predict(&x, &[a.clone(), b.clone()]).unwrap();
        assert!(mean.iter().all(|v| (v - 0.3).abs() < 1e-15));
        let swapped = ensemble_predict(&x, &[b, a]).unwrap();
        assert!((&mean - &swapped).iter().all(|d| d.abs() < 1e-15));
    }
}
