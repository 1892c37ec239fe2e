use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named trainable tensors in the canonical order of
/// [`ModelConfig::parameter_shapes`].
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    entries: Vec<(String, Tensor)>,
}

impl Params {
    /// He-uniform weights, zero biases, residuals uniform in
    /// `[-residual_init_scale, residual_init_scale]`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Params> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = config
            .parameter_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let tensor = if name.ends_with(".bias") {
                    Tensor::zeros(&shape)
                } else if name.ends_with(".residual") {
                    uniform(&shape, config.residual_init_scale, &mut rng)
                } else {
                    let fan_in: usize = shape[..shape.len() - 1].iter().product();
                    let limit = (6.0 / fan_in as f64).sqrt();
                    uniform(&shape, limit, &mut rng)
                };
                (name, tensor)
            })
            .collect();
        Ok(Params { entries })
    }

    /// Wraps existing tensors after checking names and shapes against `config`.
    pub fn from_entries(config: &ModelConfig, entries: Vec<(String, Tensor)>) -> Result<Params> {
        let expected = config.parameter_shapes();
        if expected.len() != entries.len() {
            return Err(Error::contract(format!(
                "expected {} parameter tensors, got {}",
                expected.len(),
                entries.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&entries) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::contract(format!(
                    "parameter `{}` {:?} does not match expected `{}` {:?}",
                    got_name,
                    t.shape(),
                    name,
                    shape
                )));
            }
        }
        Ok(Params { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub(crate) fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }
}

fn uniform(shape: &[usize], limit: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let numel = shape.iter().product();
    let data = if limit == 0.0 {
        vec![0.0; numel]
    } else {
        (0..numel).map(|_| rng.random_range(-limit..=limit)).collect()
    };
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}
