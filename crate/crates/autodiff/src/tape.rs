use crate::error::{shape_err, Error, Result};
use crate::ops::{self, ConvGeom};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product of a user-supplied operation.
///
/// Receives the upstream gradient, the input values and the output value and
/// returns one gradient buffer per input, each the length of that input.
pub type VjpFn = dyn Fn(&[f64], &[&Tensor], &Tensor) -> Vec<Vec<f64>> + Send + Sync;

pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    SumSquares(Var),
    Reshape(Var),
    SliceRows {
        input: Var,
        start: usize,
    },
    AddBias(Var, Var),
    MatMul(Var, Var),
    Conv2d {
        input: Var,
        kernel: Var,
        geom: ConvGeom,
    },
    Depthwise {
        input: Var,
        kernel: Var,
        geom: ConvGeom,
    },
    MeanPool(Var),
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    LeakyRelu {
        input: Var,
        alpha: f64,
    },
    Softmax(Var),
    MaskMul {
        input: Var,
        mask: Vec<f64>,
    },
    CrossEntropy {
        probs: Var,
        labels: Vec<usize>,
    },
    Mse {
        pred: Var,
        target: Vec<f64>,
    },
    Custom {
        inputs: Vec<Var>,
        vjp: Box<VjpFn>,
    },
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Append-only record of tensor operations for reverse-mode differentiation.
///
/// Nodes are stored in creation order, which is a topological order: every
/// operation's inputs were created before it. Gradients are retained for leaf
/// tensors created with [`Tape::leaf`]; intermediate adjoints are discarded
/// once propagated.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable input; receives a gradient on [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_raw(value, true, Op::Leaf)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0].as_ref().map(|g| {
            Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone())
                .expect("gradient matches value shape")
        })
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Records an operation with a caller-provided gradient rule.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, vjp: Box<VjpFn>) -> Var {
        self.push(
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                vjp,
            },
        )
    }

    fn push_raw(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op_inputs(&op)
            .iter()
            .any(|v| self.nodes[v.0].requires_grad);
        self.push_raw(value, requires_grad, op)
    }

    /// Propagates d`loss`/d`leaf` to every leaf that requires a gradient.
    ///
    /// Gradients accumulate across calls until [`Tape::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(shape_err!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            ));
        }
        if !root.requires_grad {
            return Ok(());
        }
        let mut adjoints: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adjoints[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adjoints[i].take() else {
                continue;
            };
            if let Op::Leaf = self.nodes[i].op {
                match &mut self.grads[i] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(g),
                }
                continue;
            }
            for (input, contribution) in self.vjp(i, &g) {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut adjoints[input.0] {
                    Some(acc) => acc
                        .iter_mut()
                        .zip(&contribution)
                        .for_each(|(a, b)| *a += b),
                    slot => *slot = Some(contribution),
                }
            }
        }
        Ok(())
    }

    fn vjp(&self, i: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Scale(a, c) => vec![(*a, g.iter().map(|x| x * c).collect())],
            Op::Sum(a) => vec![(*a, vec![g[0]; val(*a).len()])],
            Op::SumSquares(a) => vec![(*a, val(*a).data().iter().map(|x| 2.0 * x * g[0]).collect())],
            Op::Reshape(a) => vec![(*a, g.to_vec())],
            Op::SliceRows { input, start } => {
                let x = val(*input);
                let row: usize = x.shape()[1..].iter().product();
                let mut gx = vec![0.0; x.len()];
                gx[start * row..start * row + g.len()].copy_from_slice(g);
                vec![(*input, gx)]
            }
            Op::AddBias(x, b) => {
                let c = val(*b).len();
                let mut gb = vec![0.0; c];
                for row in g.chunks_exact(c) {
                    gb.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                }
                vec![(*x, g.to_vec()), (*b, gb)]
            }
            Op::MatMul(a, b) => {
                let (ga, gb) = ops::linalg::matmul_backward(val(*a), val(*b), g);
                vec![(*a, ga), (*b, gb)]
            }
            Op::Conv2d {
                input,
                kernel,
                geom,
            } => {
                let (gx, gk) = ops::conv::conv2d_backward(val(*input), val(*kernel), geom, g);
                vec![(*input, gx), (*kernel, gk)]
            }
            Op::Depthwise {
                input,
                kernel,
                geom,
            } => {
                let (gx, gk) = ops::conv::depthwise_backward(val(*input), val(*kernel), geom, g);
                vec![(*input, gx), (*kernel, gk)]
            }
            Op::MeanPool(x) => vec![(*x, ops::conv::mean_pool_backward(val(*x), g))],
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let (gx, ggamma, gbeta) =
                    ops::norm::batch_norm_backward(val(*gamma), xhat, inv_std, *batch_stats, g);
                vec![(*input, gx), (*gamma, ggamma), (*beta, gbeta)]
            }
            Op::LeakyRelu { input, alpha } => {
                let gx = val(*input)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(x, g)| if *x >= 0.0 { *g } else { alpha * g })
                    .collect();
                vec![(*input, gx)]
            }
            Op::Softmax(x) => vec![(*x, ops::activation::softmax_backward(&node.value, g))],
            Op::MaskMul { input, mask } => {
                vec![(*input, g.iter().zip(mask).map(|(g, m)| g * m).collect())]
            }
            Op::CrossEntropy { probs, labels } => {
                vec![(*probs, ops::loss::cross_entropy_backward(val(*probs), labels, g[0]))]
            }
            Op::Mse { pred, target } => {
                let p = val(*pred).data();
                let n = p.len() as f64;
                let gp = p
                    .iter()
                    .zip(target)
                    .map(|(p, t)| 2.0 * (p - t) / n * g[0])
                    .collect();
                vec![(*pred, gp)]
            }
            Op::Custom { inputs, vjp } => {
                let values: Vec<&Tensor> = inputs.iter().map(|v| val(*v)).collect();
                let grads = vjp(g, &values, &node.value);
                inputs.iter().copied().zip(grads).collect()
            }
        }
    }

    /// Fails with [`Error::NonFinite`] if any recorded value is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.nodes.iter().position(|n| !n.value.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("tape node {i}"))),
            None => Ok(()),
        }
    }
}

fn op_inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b) | Op::AddBias(a, b) | Op::MatMul(a, b) => vec![*a, *b],
        Op::Scale(a, _) | Op::Sum(a) | Op::SumSquares(a) | Op::Reshape(a) => vec![*a],
        Op::SliceRows { input, .. } => vec![*input],
        Op::Conv2d { input, kernel, .. } | Op::Depthwise { input, kernel, .. } => {
            vec![*input, *kernel]
        }
        Op::MeanPool(x) | Op::Softmax(x) => vec![*x],
        Op::BatchNorm {
            input, gamma, beta, ..
        } => vec![*input, *gamma, *beta],
        Op::LeakyRelu { input, .. } | Op::MaskMul { input, .. } => vec![*input],
        Op::CrossEntropy { probs, .. } => vec![*probs],
        Op::Mse { pred, .. } => vec![*pred],
        Op::Custom { inputs, .. } => inputs.clone(),
    }
}
