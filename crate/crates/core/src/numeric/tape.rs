//! Reverse-mode differentiation by operation recording.
//!
//! Every value produced while building a graph lives in the tape's arena and
//! is addressed by a [`TensorId`]. [`GradTape::backward`] replays the
//! recorded operations in reverse creation order.

use std::borrow::Cow;

use super::{ops, Tensor};
use crate::error::{bail, Result};
use crate::training::loss;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorId(usize);

impl TensorId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    Conv2d {
        input: TensorId,
        kernels: TensorId,
        bias: TensorId,
        stride: usize,
    },
    Relu(TensorId),
    MaxPool {
        input: TensorId,
        argmax: Vec<usize>,
    },
    Dense {
        input: TensorId,
        weights: TensorId,
        bias: TensorId,
    },
    Flatten(TensorId),
    Sum(TensorId),
    Square(TensorId),
    Contrastive {
        a: TensorId,
        b: TensorId,
        is_same: bool,
        margin: f64,
    },
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
}

/// Single-owner record of a forward computation. Leaves may borrow their
/// values for the tape's lifetime `'a`.
#[derive(Debug, Default)]
pub struct GradTape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients indexed by tensor id. Tensors that do not influence the loss
/// have no entry.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: TensorId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Removes and returns the gradient for `id`.
    pub fn take(&mut self, id: TensorId) -> Option<Tensor> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

impl<'a> GradTape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> TensorId {
        self.push_cow(Cow::Owned(value), op)
    }

    fn push_cow(&mut self, value: Cow<'a, Tensor>, op: Op) -> TensorId {
        self.nodes.push(Node { value, op });
        TensorId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> TensorId {
        self.push(value, Op::Leaf)
    }

    /// A leaf borrowing its value, for parameters that outlive the tape.
    pub fn leaf_ref(&mut self, value: &'a Tensor) -> TensorId {
        self.push_cow(Cow::Borrowed(value), Op::Leaf)
    }

    /// A leaf that needs no gradient, such as an input image. Operations
    /// skip computing gradients into it.
    pub fn constant(&mut self, value: Tensor) -> TensorId {
        self.push(value, Op::Constant)
    }

    fn is_constant(&self, id: TensorId) -> bool {
        matches!(self.nodes[id.0].op, Op::Constant)
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn conv2d(
        &mut self,
        input: TensorId,
        kernels: TensorId,
        bias: TensorId,
        stride: usize,
    ) -> Result<TensorId> {
        let out = ops::conv2d(self.value(input), self.value(kernels), self.value(bias), stride)?;
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                kernels,
                bias,
                stride,
            },
        ))
    }

    pub fn relu(&mut self, x: TensorId) -> TensorId {
        let out = ops::relu(self.value(x));
        self.push(out, Op::Relu(x))
    }

    pub fn max_pool2d(&mut self, input: TensorId, k: usize) -> Result<TensorId> {
        let (out, argmax) = ops::max_pool2d(self.value(input), k)?;
        Ok(self.push(out, Op::MaxPool { input, argmax }))
    }

    pub fn dense(&mut self, input: TensorId, weights: TensorId, bias: TensorId) -> Result<TensorId> {
        let out = ops::dense(self.value(input), self.value(weights), self.value(bias))?;
        Ok(self.push(
            out,
            Op::Dense {
                input,
                weights,
                bias,
            },
        ))
    }

    pub fn flatten(&mut self, x: TensorId) -> TensorId {
        let v = self.value(x);
        let out = Tensor::from_parts(vec![v.len()], v.data().to_vec());
        self.push(out, Op::Flatten(x))
    }

    pub fn sum(&mut self, x: TensorId) -> TensorId {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn square(&mut self, x: TensorId) -> TensorId {
        let out = self.value(x).map(|v| v * v);
        self.push(out, Op::Square(x))
    }

    /// Contrastive loss between two embeddings at their Euclidean distance.
    pub fn contrastive(
        &mut self,
        a: TensorId,
        b: TensorId,
        is_same: bool,
        margin: f64,
    ) -> Result<TensorId> {
        let d = distance(self.value(a), self.value(b))?;
        let l = loss::contrastive_loss(d, is_same, margin)?;
        Ok(self.push(
            Tensor::scalar(l),
            Op::Contrastive {
                a,
                b,
                is_same,
                margin,
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every tensor it
    /// depends on.
    pub fn backward(&self, loss: TensorId) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            bail!(Contract, "tensor id {} is not on this tape", loss.0);
        }
        if !self.value(loss).is_scalar() {
            bail!(
                Contract,
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            );
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Constant => {}
                Op::Conv2d {
                    input,
                    kernels,
                    bias,
                    stride,
                } => {
                    let (x, k) = (self.value(*input), self.value(*kernels));
                    if !self.is_constant(*input) {
                        accumulate(&mut grads, *input, ops::conv2d_input_grad(x, k, *stride, &g));
                    }
                    let (dk, db) = ops::conv2d_param_grads(x, k, *stride, &g);
                    accumulate(&mut grads, *kernels, dk);
                    accumulate(&mut grads, *bias, db);
                }
                Op::Relu(x) => {
                    let dx = ops::relu_backward(self.value(*x), &g);
                    accumulate(&mut grads, *x, dx);
                }
                Op::MaxPool { input, argmax } => {
                    let dx = ops::max_pool2d_backward(self.value(*input).shape(), argmax, &g);
                    accumulate(&mut grads, *input, dx);
                }
                Op::Dense {
                    input,
                    weights,
                    bias,
                } => {
                    let (dx, dw, db) = ops::dense_backward(self.value(*input), self.value(*weights), &g);
                    accumulate(&mut grads, *input, dx);
                    accumulate(&mut grads, *weights, dw);
                    accumulate(&mut grads, *bias, db);
                }
                Op::Flatten(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    accumulate(&mut grads, *x, Tensor::from_parts(shape, g.data().to_vec()));
                }
                Op::Sum(x) => {
                    let dx = Tensor::filled(self.value(*x).shape(), g.data()[0]);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Square(x) => {
                    let xv = self.value(*x);
                    let data = xv.data().iter().zip(g.data()).map(|(v, gv)| 2.0 * v * gv).collect();
                    accumulate(&mut grads, *x, Tensor::from_parts(xv.shape().to_vec(), data));
                }
                Op::Contrastive {
                    a,
                    b,
                    is_same,
                    margin,
                } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let d = distance(av, bv)?;
                    // dL/da = dL/dd · (a − b)/d; for same pairs L = d² so the
                    // factor is 2 and stays defined at d = 0.
                    let coeff = if *is_same {
                        2.0
                    } else if d > 0.0 {
                        loss::contrastive_loss_derivative(d, false, *margin) / d
                    } else {
                        0.0
                    } * g.data()[0];
                    let da: Vec<f64> = av.data().iter().zip(bv.data()).map(|(x, y)| coeff * (x - y)).collect();
                    let db: Vec<f64> = da.iter().map(|v| -v).collect();
                    accumulate(&mut grads, *a, Tensor::from_parts(av.shape().to_vec(), da));
                    accumulate(&mut grads, *b, Tensor::from_parts(bv.shape().to_vec(), db));
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: TensorId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Euclidean distance between two equally sized tensors.
pub fn distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.len() != b.len() {
        bail!(
            Dimension,
            "distance between vectors of length {} and {}",
            a.len(),
            b.len()
        );
    }
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numeric::grad_check;
    use crate::Error;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = GradTape::new();
        let x = tape.leaf(Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.0, 5.0, 6.0]).unwrap());
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &Tensor::filled(&[2, 3], 1.0));
        assert_eq!(g.get(s).unwrap().data(), &[1.0]);
    }

    #[test]
    fn square_gradient_at_three() {
        let mut tape = GradTape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let sq = tape.square(x);
        let l = tape.sum(sq);
        assert_eq!(tape.backward(l).unwrap().get(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn unreachable_leaf_has_no_gradient() {
        let mut tape = GradTape::new();
        let x = tape.leaf(Tensor::scalar(1.0));
        let unused = tape.leaf(Tensor::scalar(2.0));
        let l = tape.sum(x);
        let g = tape.backward(l).unwrap();
        assert!(g.get(unused).is_none());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = GradTape::new();
        let x = tape.leaf(Tensor::zeros(&[2]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn gradients_match_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tape = GradTape::new();
        let x = tape.leaf(random(&[2, 6, 6], &mut rng));
        let k = tape.leaf(random(&[3, 2, 3, 3], &mut rng));
        let b = tape.leaf(random(&[3], &mut rng));
        let c = tape.conv2d(x, k, b, 1).unwrap();
        let r = tape.relu(c);
        let p = tape.max_pool2d(r, 2).unwrap();
        let w = tape.leaf(random(&[4, 12], &mut rng));
        let bd = tape.leaf(random(&[4], &mut rng));
        let f = tape.flatten(p);
        let d = tape.dense(f, w, bd).unwrap();
        let l = tape.sum(d);
        let g = tape.backward(l).unwrap();
        for id in [x, k, b, c, r, p, w, bd, f, d] {
            assert_eq!(g.get(id).unwrap().shape(), tape.value(id).shape());
        }
    }

    // Per-layer finite-difference checks on random small tensors. A fixed
    // random projection turns each layer output into a scalar.
    fn project(t: &mut GradTape, y: TensorId, seed: u64) -> Result<TensorId> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = t.value(y).len();
        let flat = t.flatten(y);
        let w = t.leaf(random(&[1, n], &mut rng));
        let b = t.leaf(Tensor::zeros(&[1]));
        let d = t.dense(flat, w, b)?;
        Ok(t.sum(d))
    }

    #[test]
    fn conv_gradients_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[2, 7, 7], &mut rng);
        let k = random(&[3, 2, 3, 3], &mut rng);
        let b = random(&[3], &mut rng);
        for stride in [1, 2] {
            let (k1, b1) = (k.clone(), b.clone());
            let err = grad_check(
                |t, x| {
                    let k = t.leaf(k1.clone());
                    let b = t.leaf(b1.clone());
                    let y = t.conv2d(x, k, b, stride)?;
                    project(t, y, 5)
                },
                &x,
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "input grad stride {stride}: {err}");
            let x1 = x.clone();
            let b1 = b.clone();
            let err = grad_check(
                |t, k| {
                    let x = t.leaf(x1.clone());
                    let b = t.leaf(b1.clone());
                    let y = t.conv2d(x, k, b, stride)?;
                    project(t, y, 5)
                },
                &k,
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "kernel grad stride {stride}: {err}");
            let (x1, k1) = (x.clone(), k.clone());
            let err = grad_check(
                |t, b| {
                    let x = t.leaf(x1.clone());
                    let k = t.leaf(k1.clone());
                    let y = t.conv2d(x, k, b, stride)?;
                    project(t, y, 5)
                },
                &b,
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "bias grad stride {stride}: {err}");
        }
    }

    #[test]
    fn relu_pool_dense_gradients_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random(&[2, 4, 6], &mut rng);
        let err = grad_check(
            |t, x| {
                let y = t.relu(x);
                project(t, y, 1)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-4, "relu: {err}");

        let err = grad_check(
            |t, x| {
                let y = t.max_pool2d(x, 2)?;
                project(t, y, 2)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-4, "pool: {err}");

        let w = random(&[5, 48], &mut rng);
        let b = random(&[5], &mut rng);
        let err = grad_check(
            |t, x| {
                let w = t.leaf(w.clone());
                let b = t.leaf(b.clone());
                let y = t.dense(x, w, b)?;
                project(t, y, 3)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-4, "dense input: {err}");
        let err = grad_check(
            |t, w| {
                let x = t.leaf(x.clone());
                let b = t.leaf(b.clone());
                let y = t.dense(x, w, b)?;
                project(t, y, 3)
            },
            &w,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-4, "dense weights: {err}");
    }

    #[test]
    fn contrastive_gradients_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (is_same, scale) in [(true, 1.0), (false, 0.1), (false, 1.0)] {
            let a = random(&[6], &mut rng).map(|v| v * scale);
            let b = random(&[6], &mut rng).map(|v| v * scale);
            let err = grad_check(
                |t, a| {
                    let b = t.leaf(b.clone());
                    t.contrastive(a, b, is_same, 1.0)
                },
                &a,
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "same={is_same} scale={scale}: {err}");
        }
    }

    #[test]
    fn contrastive_at_zero_distance_is_finite() {
        let mut tape = GradTape::new();
        let a = tape.leaf(Tensor::zeros(&[3]));
        let b = tape.leaf(Tensor::zeros(&[3]));
        let l = tape.contrastive(a, b, false, 1.0).unwrap();
        assert_eq!(tape.value(l).data(), &[1.0]);
        let g = tape.backward(l).unwrap();
        assert!(g.get(a).unwrap().is_finite());
    }
}
