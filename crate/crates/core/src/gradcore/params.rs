use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{shape_err, GradError, Gradients, Result, Tape, Tensor, Var};

/// Initial value rule for a parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Const(f64),
    /// Uniform on `[-bound, bound]`.
    Uniform(f64),
    Values(Vec<f64>),
}

/// Declared parameter: name, shape and initial value rule.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: impl Into<Vec<usize>>, init: Init) -> Self {
        Self {
            name: name.into(),
            shape: shape.into(),
            init,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Named parameter tensors, ordered by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: BTreeMap<String, Tensor>,
}

/// Per-name RNG stream, so a parameter's initial value depends only on the
/// master seed and its own name.
fn name_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(bytes)
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_specs(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut set = Self::new();
        for spec in specs {
            if set.tensors.contains_key(&spec.name) {
                return Err(shape_err("param", format!("duplicate parameter `{}`", spec.name)));
            }
            let n = spec.numel();
            let data = match &spec.init {
                Init::Zeros => vec![0.0; n],
                Init::Const(v) => vec![*v; n],
                Init::Uniform(b) => {
                    let mut rng = name_rng(seed, &spec.name);
                    (0..n).map(|_| rng.random_range(-b..=*b)).collect()
                }
                Init::Values(v) => v.clone(),
            };
            set.insert(spec.name.clone(), Tensor::new(spec.shape.clone(), data)?);
        }
        Ok(set)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.tensors.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Parameters whose name starts with `prefix`.
    pub fn subset(&self, prefix: &str) -> ParamSet {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn extend(&mut self, other: ParamSet) {
        self.tensors.extend(other.tensors);
    }

    /// Rounds every value to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors.values_mut() {
            for v in t.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// Binds parameters of a [`ParamSet`] onto a tape. Every use of the same
/// name within one pass yields the same leaf.
pub struct Binder<'t, 'p> {
    tape: &'t Tape,
    params: &'p ParamSet,
    frozen: Vec<String>,
    bound: RefCell<BTreeMap<String, Var<'t>>>,
}

impl<'t, 'p> Binder<'t, 'p> {
    pub fn new(tape: &'t Tape, params: &'p ParamSet) -> Self {
        Self {
            tape,
            params,
            frozen: Vec::new(),
            bound: RefCell::new(BTreeMap::new()),
        }
    }

    /// Parameters under `prefix` are bound as constants.
    pub fn freeze(mut self, prefix: impl Into<String>) -> Self {
        self.frozen.push(prefix.into());
        self
    }

    /// Uses `var` for `name` instead of a fresh leaf, e.g. to finite-difference
    /// a parameter through [`grad_check_many`](super::grad_check_many).
    pub fn bind(&self, name: impl Into<String>, var: Var<'t>) {
        self.bound.borrow_mut().insert(name.into(), var);
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn has(&self, name: &str) -> bool {
        self.params.contains(name)
    }

    pub fn get(&self, name: &str) -> Result<Var<'t>> {
        if let Some(v) = self.bound.borrow().get(name) {
            return Ok(*v);
        }
        let value = self
            .params
            .get(name)
            .ok_or_else(|| GradError::UnknownParam(name.to_string()))?
            .clone();
        let var = if self.frozen.iter().any(|p| name.starts_with(p.as_str())) {
            self.tape.constant(value)
        } else {
            self.tape.leaf(value)
        };
        self.bound.borrow_mut().insert(name.to_string(), var);
        Ok(var)
    }

    /// Names bound so far.
    pub fn bound_names(&self) -> Vec<String> {
        self.bound.borrow().keys().cloned().collect()
    }

    /// Gradients of every trainable parameter bound during the pass.
    pub fn grads(&self, grads: &Gradients) -> BTreeMap<String, Tensor> {
        self.bound
            .borrow()
            .iter()
            .filter(|(_, v)| v.requires_grad())
            .map(|(k, v)| (k.clone(), grads.wrt(*v)))
            .collect()
    }
}
