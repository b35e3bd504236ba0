//! Named parameter storage with gradients and Adam moments.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub trainable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub params: Vec<Param>,
    /// Adam step counter.
    pub t: u64,
}

impl ParamStore {
    pub fn add(&mut self, name: &str, shape: Vec<usize>, value: Vec<f64>, trainable: bool) -> ParamId {
        let len = value.len();
        debug_assert_eq!(len, shape.iter().product::<usize>());
        self.params.push(Param {
            name: name.into(),
            shape,
            value,
            grad: alloc::vec![0.0; len],
            m: alloc::vec![0.0; len],
            v: alloc::vec![0.0; len],
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) initialization.
    pub fn add_uniform(&mut self, name: &str, shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> ParamId {
        let len = shape.iter().product();
        let a = 1.0 / (fan_in as f64).sqrt();
        let value = (0..len).map(|_| rng.random_range(-a..a)).collect();
        self.add(name, shape, value, true)
    }

    pub fn add_const(&mut self, name: &str, shape: Vec<usize>, c: f64) -> ParamId {
        let len = shape.iter().product();
        self.add(name, shape, alloc::vec![c; len], true)
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].grad
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].grad
    }

    /// Value and gradient of one parameter, borrowed together.
    pub fn value_and_grad(&mut self, id: ParamId) -> (&[f64], &mut [f64]) {
        let p = &mut self.params[id.0];
        (&p.value, &mut p.grad)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn count(&self, trainable_only: bool) -> usize {
        self.params.iter().filter(|p| p.trainable || !trainable_only).map(|p| p.value.len()).sum()
    }

    pub fn grad_norm(&self) -> f64 {
        self.params.iter().flat_map(|p| p.grad.iter()).map(|g| g * g).sum::<f64>().sqrt()
    }

    /// One bias-corrected Adam step on every trainable parameter.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
                p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
                let mh = p.m[i] / bc1;
                let vh = p.v[i] / bc2;
                p.value[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
            }
        }
    }
}
