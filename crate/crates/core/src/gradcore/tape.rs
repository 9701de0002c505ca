use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;

use super::{GradError, Result, Tensor};

/// Vector-Jacobian rule of one recorded op.
///
/// Receives the cotangent of the op output and a mask telling which parents
/// need a cotangent; returns one entry per parent, in parent order.
pub type Backward = Box<dyn Fn(&Tensor, &[bool]) -> Vec<Option<Tensor>>>;

struct Node {
    op: &'static str,
    parents: Vec<usize>,
    requires_grad: bool,
    backward: Option<Backward>,
}

/// Ordered record of a forward pass.
#[derive(Default)]
pub struct Tape {
    values: RefCell<Vec<Rc<Tensor>>>,
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
}

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Rc<Tensor>, node: Node) -> Var<'_> {
        let mut values = self.values.borrow_mut();
        let id = values.len();
        values.push(value);
        self.nodes.borrow_mut().push(node);
        Var { tape: self, id }
    }

    /// Differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(
            Rc::new(value),
            Node {
                op: "leaf",
                parents: Vec::new(),
                requires_grad: true,
                backward: None,
            },
        )
    }

    /// Non-differentiable input.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(
            Rc::new(value),
            Node {
                op: "constant",
                parents: Vec::new(),
                requires_grad: false,
                backward: None,
            },
        )
    }

    /// Records the result of an op. The backward rule is dropped when no
    /// parent requires a gradient.
    pub fn record<'t>(
        &'t self,
        op: &'static str,
        parents: &[Var<'t>],
        value: Rc<Tensor>,
        backward: Backward,
    ) -> Result<Var<'t>> {
        if !value.all_finite() {
            return Err(GradError::NonFinite { op });
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        Ok(self.push(
            value,
            Node {
                op,
                parents: parents.iter().map(|p| p.id).collect(),
                requires_grad,
                backward: requires_grad.then_some(backward),
            },
        ))
    }

    pub fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.values.borrow()[id])
    }

    pub fn op_name(&self, id: usize) -> &'static str {
        self.nodes.borrow()[id].op
    }

    /// Propagates cotangents from the scalar `loss` to every value that
    /// requires a gradient. A tape supports a single backward pass.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if self.consumed.replace(true) {
            return Err(GradError::TapeConsumed);
        }
        let seed = self.value(loss.id);
        if seed.numel() != 1 {
            return Err(GradError::NonScalarOutput(seed.shape().to_vec()));
        }
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::full(seed.shape().to_vec(), 1.0));
        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            let Some(backward) = node.backward.as_ref() else {
                continue;
            };
            let Some(g) = grads[id].take() else {
                continue;
            };
            let mask: Vec<bool> = node
                .parents
                .iter()
                .map(|&p| nodes[p].requires_grad)
                .collect();
            let parent_grads = backward(&g, &mask);
            debug_assert_eq!(parent_grads.len(), node.parents.len(), "op {}", node.op);
            for ((&p, pg), &needed) in node.parents.iter().zip(parent_grads).zip(&mask) {
                let (Some(pg), true) = (pg, needed) else {
                    continue;
                };
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
            // keep the cotangent of leaves and anything the caller may ask for
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.values.borrow()[self.id].shape().to_vec()
    }

    pub fn item(&self) -> Result<f64> {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }
}

/// Cotangents produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros when the loss does not depend on it.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(v.shape()))
    }
}
