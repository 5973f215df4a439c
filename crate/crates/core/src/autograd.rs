//! Dynamic reverse-mode tape.
//!
//! Every differentiable op appends one node holding its parents and whatever
//! forward values its vector-Jacobian product needs. Append order is a valid
//! topological order, so backward is a single reverse sweep. A fresh tape is
//! built for each forward pass.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Vector-Jacobian product of one recorded op.
pub trait Backward<T: Scalar>: Send {
    /// Given the gradient of the loss w.r.t. the op output, returns the
    /// gradient w.r.t. each parent (in recording order). Entries whose
    /// `needs` flag is false may be `None`.
    fn backward(&self, grad_out: &Tensor<T>, needs: &[bool]) -> Vec<Option<Tensor<T>>>;
}

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A tensor value, optionally linked to the tape that produced it.
#[derive(Debug, Clone)]
pub struct Var<T> {
    value: Arc<Tensor<T>>,
    node: Option<NodeId>,
}

impl<T: Scalar> Var<T> {
    /// An untracked value; it never receives a gradient.
    pub fn constant(value: impl Into<Arc<Tensor<T>>>) -> Self {
        Var {
            value: value.into(),
            node: None,
        }
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub fn shared(&self) -> &Arc<Tensor<T>> {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn node(&self) -> Option<NodeId> {
        self.node
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }
}

struct Node<T: Scalar> {
    parents: Vec<Option<NodeId>>,
    backward: Option<Box<dyn Backward<T>>>,
    shape: Vec<usize>,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    enabled: bool,
    kink_margin: f64,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    /// A recording tape.
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            enabled: true,
            kink_margin: f64::INFINITY,
        }
    }

    /// A tape that records nothing: ops compute values only and
    /// intermediates are freed as soon as they go out of scope.
    pub fn no_grad() -> Self {
        Tape {
            nodes: Vec::new(),
            enabled: false,
            kink_margin: f64::INFINITY,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// Smallest `|x|` seen at the input of a recorded ReLU: how far the
    /// recorded point is from the nearest non-differentiable one.
    pub fn kink_margin(&self) -> f64 {
        self.kink_margin
    }

    pub(crate) fn note_kink(&mut self, distance: f64) {
        self.kink_margin = self.kink_margin.min(distance);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a gradient-receiving input. On a `no_grad` tape this is the
    /// same as [`Var::constant`].
    pub fn leaf(&mut self, value: impl Into<Arc<Tensor<T>>>) -> Var<T> {
        let value = value.into();
        if !self.enabled {
            return Var::constant(value);
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            parents: Vec::new(),
            backward: None,
            shape: value.shape().to_vec(),
        });
        Var {
            value,
            node: Some(id),
        }
    }

    /// True if an op over `inputs` must be recorded.
    pub fn tracks(&self, inputs: &[&Var<T>]) -> bool {
        self.enabled && inputs.iter().any(|v| v.node.is_some())
    }

    /// Appends an op node. When nothing upstream is tracked the result is an
    /// untracked value and `backward` is dropped.
    pub fn record(
        &mut self,
        value: Tensor<T>,
        inputs: &[&Var<T>],
        backward: impl Backward<T> + 'static,
    ) -> Var<T> {
        if !self.tracks(inputs) {
            return Var::constant(value);
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            parents: inputs.iter().map(|v| v.node).collect(),
            backward: Some(Box::new(backward)),
            shape: value.shape().to_vec(),
        });
        Var {
            value: Arc::new(value),
            node: Some(id),
        }
    }

    /// Reverse sweep from a scalar loss. Nodes the loss does not depend on
    /// receive no entry.
    pub fn backward(&self, loss: &Var<T>) -> Result<Gradients<T>> {
        if loss.value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        let root = loss
            .node
            .ok_or_else(|| Error::Contract("backward on a loss that is not tape-linked".into()))?;
        if root.0 >= self.nodes.len() {
            return Err(Error::Contract("loss belongs to a different tape".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::full(loss.shape().to_vec(), T::one()));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            let Some(backward) = node.backward.as_ref() else {
                continue;
            };
            let Some(grad) = grads[i].as_ref() else {
                continue;
            };
            let needs: Vec<bool> = node.parents.iter().map(Option::is_some).collect();
            let parent_grads = backward.backward(grad, &needs);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (parent, pg) in node.parents.iter().zip(parent_grads) {
                let (Some(parent), Some(pg)) = (parent, pg) else {
                    continue;
                };
                debug_assert_eq!(pg.shape(), self.nodes[parent.0].shape.as_slice());
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: &Var<T>) -> Option<&Tensor<T>> {
        var.node.and_then(|id| self.by_node(id))
    }

    pub fn by_node(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient for `var`, or zeros of its shape if the loss does not reach it.
    pub fn get_or_zeros(&self, var: &Var<T>) -> Tensor<T> {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.shape().to_vec()))
    }

    /// Number of nodes that received a gradient.
    pub fn len(&self) -> usize {
        self.grads.iter().filter(|g| g.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T, F> Backward<T> for F
where
    T: Scalar,
    F: Fn(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>> + Send,
{
    fn backward(&self, grad_out: &Tensor<T>, needs: &[bool]) -> Vec<Option<Tensor<T>>> {
        self(grad_out, needs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.leaf(Tensor::scalar(5.0));
        let loss = tape.mul(&x, &y).unwrap();
        let grads = tape.backward(&loss).unwrap();
        assert_eq!(grads.get(&x).unwrap().item().unwrap(), 5.0);
        assert_eq!(grads.get(&y).unwrap().item().unwrap(), 3.0);
    }

    #[test]
    fn dead_relu_unit() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(-2.0));
        let r = tape.relu(&x);
        let loss = tape.sum(&r);
        let grads = tape.backward(&loss).unwrap();
        assert_eq!(grads.get(&x).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn unreachable_leaf_has_no_entry() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(1.0));
        let unused = tape.leaf(Tensor::scalar(2.0));
        let loss = tape.scale(&x, 4.0);
        let grads = tape.backward(&loss).unwrap();
        assert_eq!(grads.get(&x).unwrap().item().unwrap(), 4.0);
        assert!(grads.get(&unused).is_none());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros([2]));
        assert!(matches!(tape.backward(&x), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_never_receive_gradients() {
        let mut tape = Tape::<f64>::new();
        let c = Var::constant(Tensor::scalar(2.0));
        let x = tape.leaf(Tensor::scalar(3.0));
        let loss = tape.mul(&c, &x).unwrap();
        let grads = tape.backward(&loss).unwrap();
        assert!(grads.get(&c).is_none());
        assert_eq!(grads.get(&x).unwrap().item().unwrap(), 2.0);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // loss = x*x + x => d/dx = 2x + 1
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(1.5));
        let sq = tape.mul(&x, &x).unwrap();
        let loss = tape.add(&sq, &x).unwrap();
        let grads = tape.backward(&loss).unwrap();
        assert_eq!(grads.get(&x).unwrap().item().unwrap(), 4.0);
    }

    #[test]
    fn no_grad_tape_records_nothing() {
        let mut tape = Tape::<f32>::no_grad();
        let x = tape.leaf(Tensor::scalar(1.0));
        let y = tape.relu(&x);
        assert!(!y.is_tracked());
        assert!(tape.is_empty());
    }
}
