//! Minimal dense numerical kernel shared by both networks.
//!
//! Everything is 64-bit. Each layer exposes a forward pass and a hand-written
//! backward pass; there is no autodiff graph. Models describe their trainable
//! tensors through [`Parameters`], which the optimizer, gradient clipping,
//! gradient checking and checkpointing all consume.

mod adam;
mod gradcheck;
mod layers;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use layers::{
    dropout, relu, relu_backward, xavier_init, Affine, BatchNorm, BatchStats, BnCache, Mode,
};
pub use rng::Rng;

use ndarray::{Array, Array2, Dimension};

/// Row-major 2-d tensor of 64-bit values.
pub type Tensor2 = Array2<f64>;

/// Borrowed view of one named parameter tensor.
#[derive(Debug, Clone)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub fn of<D: Dimension>(name: impl Into<String>, array: &'a Array<f64, D>) -> Self {
        Self {
            name: name.into(),
            shape: array.shape().to_vec(),
            data: array
                .as_slice()
                .expect("parameters are kept in standard layout"),
        }
    }
}

pub(crate) fn slice_mut<D: Dimension>(array: &mut Array<f64, D>) -> &mut [f64] {
    array
        .as_slice_mut()
        .expect("parameters are kept in standard layout")
}

/// A set of named tensors. `tensors` and `tensors_mut` must list the same
/// tensors in the same order.
pub trait Parameters {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the norm
    /// before clipping.
    fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for t in self.tensors_mut() {
                t.iter_mut().for_each(|v| *v *= scale);
            }
        }
        norm
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![TensorRef {
            name: "values".into(),
            shape: vec![self.len()],
            data: self,
        }]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_scales_to_max_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(g.clip_global_norm(1.0), 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-15);
        let mut small = vec![0.3, 0.4];
        small.clip_global_norm(1.0);
        assert_eq!(small, vec![0.3, 0.4]);
    }
}
