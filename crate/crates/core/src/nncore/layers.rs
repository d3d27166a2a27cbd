use ndarray::{Array1, Array2, Axis, Zip};

use super::{slice_mut, Parameters, Rng, TensorRef};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Fully connected layer `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Affine {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn xavier(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Self {
            w: xavier_init(inputs, outputs, rng),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.w.nrows() || self.b.len() != self.w.ncols() {
            return Err(Error::dims("affine input x W", x.shape(), self.w.shape()));
        }
        Ok(x.dot(&self.w) + &self.b)
    }

    /// Returns `dL/dx` and the parameter gradients for upstream `dy`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>) -> (Array2<f64>, Affine) {
        let grads = Affine {
            w: x.t().dot(dy),
            b: dy.sum_axis(Axis(0)),
        };
        (dy.dot(&self.w.t()), grads)
    }
}

impl Parameters for Affine {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![TensorRef::of("w", &self.w), TensorRef::of("b", &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice_mut(&mut self.w), slice_mut(&mut self.b)]
    }
}

/// Per-channel batch normalization with learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    /// Weight of the old running statistics in each update.
    pub momentum: f64,
    pub eps: f64,
}

/// Batch mean and (biased) variance per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct BnCache {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
    mode: Mode,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.9,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes `x`. In train mode batch statistics are used and returned so
    /// the caller can fold them into the running averages; inference mode uses
    /// the running statistics only.
    pub fn forward(
        &self,
        x: &Array2<f64>,
        mode: Mode,
    ) -> Result<(Array2<f64>, BnCache, Option<BatchStats>)> {
        if x.ncols() != self.channels() {
            return Err(Error::dims(
                "batch norm channels",
                x.shape(),
                self.gamma.shape(),
            ));
        }
        let (mean, var, stats) = match mode {
            Mode::Train => {
                if x.nrows() < 2 {
                    return Err(Error::Param(
                        "batch norm in train mode needs a batch of at least 2".into(),
                    ));
                }
                let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
                let var = x.var_axis(Axis(0), 0.0);
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: var.clone(),
                };
                (mean, var, Some(stats))
            }
            Mode::Inference => (self.running_mean.clone(), self.running_var.clone(), None),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let x_hat = (x - &mean) * &inv_std;
        let y = &x_hat * &self.gamma + &self.beta;
        Ok((
            y,
            BnCache {
                x_hat,
                inv_std,
                mode,
            },
            stats,
        ))
    }

    pub fn update_running(&mut self, stats: &BatchStats) {
        let m = self.momentum;
        Zip::from(&mut self.running_mean)
            .and(&stats.mean)
            .for_each(|r, &b| *r = m * *r + (1.0 - m) * b);
        Zip::from(&mut self.running_var)
            .and(&stats.var)
            .for_each(|r, &b| *r = m * *r + (1.0 - m) * b);
    }

    /// Returns `dL/dx`, `dL/dgamma`, `dL/dbeta`.
    pub fn backward(
        &self,
        cache: &BnCache,
        dy: &Array2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
        let dbeta = dy.sum_axis(Axis(0));
        let dgamma = (dy * &cache.x_hat).sum_axis(Axis(0));
        let dx_hat = dy * &self.gamma;
        let dx = match cache.mode {
            Mode::Inference => dx_hat * &cache.inv_std,
            Mode::Train => {
                let n = dy.nrows() as f64;
                let sum_dx_hat = dx_hat.sum_axis(Axis(0));
                let sum_dx_hat_xhat = (&dx_hat * &cache.x_hat).sum_axis(Axis(0));
                let centered = dx_hat * n - &sum_dx_hat - &cache.x_hat * &sum_dx_hat_xhat;
                centered * &(&cache.inv_std / n)
            }
        };
        (dx, dgamma, dbeta)
    }
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Passes `dy` where the ReLU input was positive.
pub fn relu_backward(pre_activation: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(pre_activation).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0
        }
    });
    dx
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; the returned mask holds
/// those multipliers. Inference mode is the identity.
pub fn dropout(
    x: &Array2<f64>,
    rate: f64,
    rng: &mut Rng,
    mode: Mode,
) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Param(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if mode == Mode::Inference || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask =
        Array2::from_shape_simple_fn(
            x.raw_dim(),
            || {
                if rng.next_f64() < rate {
                    0.0
                } else {
                    keep
                }
            },
        );
    Ok((x * &mask, Some(mask)))
}

/// Glorot-uniform matrix on `[-sqrt(6 / (rows + cols)), sqrt(6 / (rows + cols))]`.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.uniform(-bound, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::gradient_check;
    use ndarray::array;

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn affine_identity_and_bias() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let layer = Affine {
            w: Array2::eye(2),
            b: Array1::zeros(2),
        };
        assert_eq!(layer.forward(&x).unwrap(), x);
        let layer = Affine {
            w: array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
            b: array![0.5, -1.0, 2.0],
        };
        let y = layer.forward(&Array2::zeros((2, 2))).unwrap();
        assert_eq!(y, array![[0.5, -1.0, 2.0], [0.5, -1.0, 2.0]]);
    }

    #[test]
    fn affine_shape_error_names_shapes() {
        let layer = Affine::zeros(3, 2);
        let err = layer.forward(&Array2::zeros((4, 5))).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("[4, 5]") && text.contains("[3, 2]"), "{text}");
    }

    /// Loss `sum(y * probe)` so every output coordinate gets a distinct weight.
    fn probe_loss(y: &Array2<f64>, probe: &Array2<f64>) -> f64 {
        (y * probe).sum()
    }

    #[test]
    fn affine_gradients_match_finite_differences() {
        let mut rng = Rng::new(5);
        let x = random(3, 4, &mut rng);
        let probe = random(3, 2, &mut rng);
        let layer = Affine {
            w: random(4, 2, &mut rng),
            b: Array1::from_shape_simple_fn(2, || rng.uniform(-1.0, 1.0)),
        };
        let (dx, grads) = layer.backward(&x, &probe);
        let report = gradient_check(&layer, &grads, 1e-5, |p| {
            Ok(probe_loss(&p.forward(&x)?, &probe))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-7, "{report:?}");

        let xs: Vec<f64> = x.iter().copied().collect();
        let dxs: Vec<f64> = dx.iter().copied().collect();
        let report = gradient_check(&xs, &dxs, 1e-5, |xv| {
            let x = Array2::from_shape_vec((3, 4), xv.clone()).unwrap();
            Ok(probe_loss(&layer.forward(&x)?, &probe))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-7, "{report:?}");
    }

    #[test]
    fn batchnorm_standardizes() {
        let mut rng = Rng::new(9);
        let x = random(16, 3, &mut rng) * 4.0 + 1.5;
        let mut bn = BatchNorm::new(3);
        bn.eps = 0.0;
        let (y, _, stats) = bn.forward(&x, Mode::Train).unwrap();
        let mean = y.mean_axis(Axis(0)).unwrap();
        let var = y.var_axis(Axis(0), 0.0);
        for c in 0..3 {
            assert!(mean[c].abs() < 1e-9);
            assert!((var[c] - 1.0).abs() < 1e-9);
        }

        let stats = stats.unwrap();
        bn.running_mean = stats.mean.clone();
        bn.running_var = stats.var.clone();
        let (y_inf, _, none) = bn.forward(&x, Mode::Inference).unwrap();
        assert!(none.is_none());
        assert!((&y_inf - &y).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn batchnorm_running_update_and_batch_of_one() {
        let mut bn = BatchNorm::new(1);
        let stats = BatchStats {
            mean: array![2.0],
            var: array![3.0],
        };
        bn.update_running(&stats);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - 1.2).abs() < 1e-15);
        assert!(bn.forward(&array![[1.0]], Mode::Train).is_err());
        assert!(bn.forward(&array![[1.0]], Mode::Inference).is_ok());
    }

    #[derive(Clone)]
    struct BnParams(BatchNorm);

    impl Parameters for BnParams {
        fn tensors(&self) -> Vec<TensorRef<'_>> {
            vec![
                TensorRef::of("gamma", &self.0.gamma),
                TensorRef::of("beta", &self.0.beta),
            ]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![slice_mut(&mut self.0.gamma), slice_mut(&mut self.0.beta)]
        }
    }

    #[test]
    fn batchnorm_gradients_match_finite_differences() {
        let mut rng = Rng::new(21);
        let x = random(5, 3, &mut rng);
        let probe = random(5, 3, &mut rng);
        let mut bn = BatchNorm::new(3);
        bn.gamma = Array1::from_shape_simple_fn(3, || rng.uniform(0.5, 1.5));
        bn.beta = Array1::from_shape_simple_fn(3, || rng.uniform(-0.5, 0.5));
        bn.running_mean = Array1::from_shape_simple_fn(3, || rng.uniform(-0.5, 0.5));
        bn.running_var = Array1::from_shape_simple_fn(3, || rng.uniform(0.5, 1.5));

        for mode in [Mode::Train, Mode::Inference] {
            let (_, cache, _) = bn.forward(&x, mode).unwrap();
            let (dx, dgamma, dbeta) = bn.backward(&cache, &probe);

            let mut analytic = BnParams(bn.clone());
            analytic.0.gamma = dgamma;
            analytic.0.beta = dbeta;
            let report = gradient_check(&BnParams(bn.clone()), &analytic, 1e-5, |p| {
                Ok(probe_loss(&p.0.forward(&x, mode)?.0, &probe))
            })
            .unwrap();
            assert!(report.max_rel_error < 1e-6, "{mode:?} params {report:?}");

            let xs: Vec<f64> = x.iter().copied().collect();
            let dxs: Vec<f64> = dx.iter().copied().collect();
            let report = gradient_check(&xs, &dxs, 1e-5, |xv| {
                let x = Array2::from_shape_vec((5, 3), xv.clone()).unwrap();
                Ok(probe_loss(&bn.forward(&x, mode)?.0, &probe))
            })
            .unwrap();
            assert!(report.max_rel_error < 1e-6, "{mode:?} input {report:?}");
        }
    }

    #[test]
    fn relu_values_and_gradient() {
        let x = array![[-2.0, 3.0, 0.0]];
        assert_eq!(relu(&x), array![[0.0, 3.0, 0.0]]);
        assert_eq!(
            relu_backward(&x, &array![[1.0, 1.0, 1.0]]),
            array![[0.0, 1.0, 0.0]]
        );
    }

    #[test]
    fn dropout_rates() {
        let mut rng = Rng::new(1);
        let x = Array2::from_elem((4, 5), 2.0);
        for mode in [Mode::Train, Mode::Inference] {
            assert_eq!(dropout(&x, 0.0, &mut rng, mode).unwrap().0, x);
        }
        assert_eq!(dropout(&x, 0.3, &mut rng, Mode::Inference).unwrap().0, x);
        assert!(dropout(&x, 1.0, &mut rng, Mode::Train).is_err());
        assert!(dropout(&x, -0.1, &mut rng, Mode::Train).is_err());
    }

    #[test]
    fn dropout_survivor_fraction() {
        let mut rng = Rng::new(2024);
        let x = Array2::from_elem((1000, 1000), 1.0);
        let (y, _) = dropout(&x, 0.3, &mut rng, Mode::Train).unwrap();
        let survivors = y.iter().filter(|v| **v != 0.0).count() as f64 / 1e6;
        assert!((survivors - 0.7).abs() < 0.002, "{survivors}");
        assert!(y
            .iter()
            .all(|v| *v == 0.0 || (*v - 1.0 / 0.7).abs() < 1e-15));
    }

    #[test]
    fn xavier_bounds_seed_and_variance() {
        let a = xavier_init(100, 1000, &mut Rng::new(4));
        let b = xavier_init(100, 1000, &mut Rng::new(4));
        assert_eq!(a, b);
        let bound = (6.0f64 / 1100.0).sqrt();
        assert!(a.iter().all(|v| v.abs() <= bound));
        let mean = a.mean().unwrap();
        let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (a.len() - 1) as f64;
        let expected = 2.0 / 1100.0;
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }
}
