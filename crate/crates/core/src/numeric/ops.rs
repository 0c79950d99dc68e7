//! Forward kernels and their local backward rules. The tape calls these;
//! they are also usable directly for inference without recording.

use super::Tensor;
use crate::error::{bail, Result};

fn expect_rank(t: &Tensor, rank: usize, what: &str) -> Result<()> {
    if t.shape().len() != rank {
        bail!(
            Dimension,
            "{what} must have rank {rank}, got shape {:?}",
            t.shape()
        );
    }
    Ok(())
}

/// Output spatial size of a valid convolution.
pub fn conv_output_size(size: usize, kernel: usize, stride: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || kernel > size {
        return None;
    }
    Some((size - kernel) / stride + 1)
}

/// Valid (unpadded) 2-D convolution of a `C_in×H×W` input with
/// `C_out×C_in×k×k` kernels.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    expect_rank(input, 3, "conv2d input")?;
    expect_rank(kernels, 4, "conv2d kernels")?;
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, kc, kh, kw) = (
        kernels.shape()[0],
        kernels.shape()[1],
        kernels.shape()[2],
        kernels.shape()[3],
    );
    if kc != c_in {
        bail!(
            Dimension,
            "kernels expect {kc} input channels, input has {c_in}"
        );
    }
    if kh != kw {
        bail!(Dimension, "kernels must be square, got {kh}×{kw}");
    }
    if bias.len() != c_out {
        bail!(Dimension, "bias has {} entries for {c_out} kernels", bias.len());
    }
    let (Some(oh), Some(ow)) = (
        conv_output_size(h, kh, stride),
        conv_output_size(w, kw, stride),
    ) else {
        bail!(
            Dimension,
            "kernel {kh}×{kw} with stride {stride} does not fit a {h}×{w} input"
        );
    };

    let cols = im2col(input.data(), c_in, h, w, kh, stride, oh, ow);
    let (q, p) = (c_in * kh * kh, oh * ow);
    let kd = kernels.data();
    let mut out = vec![0.0; c_out * p];
    for (o, plane) in out.chunks_exact_mut(p).enumerate() {
        plane.fill(bias.data()[o]);
        for (&kv, col) in kd[o * q..(o + 1) * q].iter().zip(cols.chunks_exact(p)) {
            axpy(plane, kv, col);
        }
    }
    Ok(Tensor::from_parts(vec![c_out, oh, ow], out))
}

/// Gradients of [`conv2d`] with respect to input, kernels and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    stride: usize,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (dk, db) = conv2d_param_grads(input, kernels, stride, grad_out);
    (conv2d_input_grad(input, kernels, stride, grad_out), dk, db)
}

pub(crate) fn conv2d_param_grads(input: &Tensor, kernels: &Tensor, stride: usize, grad_out: &Tensor) -> (Tensor, Tensor) {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, k) = (kernels.shape()[0], kernels.shape()[2]);
    let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
    let cols = im2col(input.data(), c_in, h, w, k, stride, oh, ow);
    let p = oh * ow;
    let mut dk = Vec::with_capacity(kernels.len());
    let mut db = Vec::with_capacity(c_out);
    for gp in grad_out.data().chunks_exact(p) {
        db.push(gp.iter().sum());
        dk.extend(cols.chunks_exact(p).map(|col| dot(col, gp)));
    }
    (
        Tensor::from_parts(kernels.shape().to_vec(), dk),
        Tensor::from_parts(vec![c_out], db),
    )
}

pub(crate) fn conv2d_input_grad(input: &Tensor, kernels: &Tensor, stride: usize, grad_out: &Tensor) -> Tensor {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let k = kernels.shape()[2];
    let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
    let (q, p) = (c_in * k * k, oh * ow);
    let mut dcols = vec![0.0; q * p];
    for (kernel, gp) in kernels.data().chunks_exact(q).zip(grad_out.data().chunks_exact(p)) {
        for (&kv, dcol) in kernel.iter().zip(dcols.chunks_exact_mut(p)) {
            axpy(dcol, kv, gp);
        }
    }
    // Scatter the column gradients back onto the input positions.
    let mut dx = vec![0.0; input.len()];
    let mut rows = dcols.chunks_exact(p);
    for c in 0..c_in {
        for i in 0..k {
            for j in 0..k {
                let dcol = rows.next().expect("one column per kernel tap");
                for y in 0..oh {
                    let base = (c * h + y * stride + i) * w + j;
                    let src = &dcol[y * ow..(y + 1) * ow];
                    if stride == 1 {
                        axpy(&mut dx[base..base + ow], 1.0, src);
                    } else {
                        for (xo, &v) in src.iter().enumerate() {
                            dx[base + xo * stride] += v;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_parts(input.shape().to_vec(), dx)
}

/// Unrolls every `k×k` receptive field: row `(c, i, j)` holds the input
/// value under kernel tap `(i, j)` of channel `c` for each output position.
#[allow(clippy::too_many_arguments)]
fn im2col(x: &[f64], c_in: usize, h: usize, w: usize, k: usize, stride: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut cols = Vec::with_capacity(c_in * k * k * oh * ow);
    for c in 0..c_in {
        for i in 0..k {
            for j in 0..k {
                for y in 0..oh {
                    let base = (c * h + y * stride + i) * w + j;
                    if stride == 1 {
                        cols.extend_from_slice(&x[base..base + ow]);
                    } else {
                        cols.extend((0..ow).map(|xo| x[base + xo * stride]));
                    }
                }
            }
        }
    }
    cols
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, &v) in dst.iter_mut().zip(x) {
        *d += a * v;
    }
}

/// Dot product with four independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (p, q) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += p[l] * q[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_parts(x.shape().to_vec(), data)
}

/// Non-overlapping `k×k` max pooling. Returns the pooled tensor and, for
/// each output cell, the flat input index that won (first maximum in
/// row-major window order).
pub fn max_pool2d(x: &Tensor, k: usize) -> Result<(Tensor, Vec<usize>)> {
    expect_rank(x, 3, "max_pool2d input")?;
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if k == 0 || h % k != 0 || w % k != 0 {
        bail!(Dimension, "pool size {k} does not divide {h}×{w}");
    }
    let (oh, ow) = (h / k, w / k);
    let d = x.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let mut best = (ch * h + y * k) * w + xo * k;
                for i in 0..k {
                    for j in 0..k {
                        let idx = (ch * h + y * k + i) * w + xo * k + j;
                        if d[idx] > d[best] {
                            best = idx;
                        }
                    }
                }
                out.push(d[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_parts(vec![c, oh, ow], out), argmax))
}

pub fn max_pool2d_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    let buf = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        buf[idx] += g;
    }
    dx
}

/// `W·x + b` where `x` is read as a flat vector of length `n` and `W` is `m×n`.
pub fn dense(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    expect_rank(weights, 2, "dense weights")?;
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    if x.len() != n {
        bail!(Dimension, "dense layer expects {n} inputs, got {}", x.len());
    }
    if bias.len() != m {
        bail!(Dimension, "dense bias has {} entries for {m} outputs", bias.len());
    }
    let xd = x.data();
    let out = weights
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, &b)| row.iter().zip(xd).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect();
    Ok(Tensor::from_parts(vec![m], out))
}

pub fn dense_backward(x: &Tensor, weights: &Tensor, grad_out: &Tensor) -> (Tensor, Tensor, Tensor) {
    let n = weights.shape()[1];
    let g = grad_out.data();
    let mut dx = vec![0.0; n];
    let mut dw = vec![0.0; weights.len()];
    for ((row, drow), &gv) in weights
        .data()
        .chunks_exact(n)
        .zip(dw.chunks_exact_mut(n))
        .zip(g)
    {
        for ((d, &xv), (dxv, &wv)) in drow.iter_mut().zip(x.data()).zip(dx.iter_mut().zip(row)) {
            *d = gv * xv;
            *dxv += gv * wv;
        }
    }
    (
        Tensor::from_parts(x.shape().to_vec(), dx),
        Tensor::from_parts(weights.shape().to_vec(), dw),
        grad_out.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv_identity_kernel() {
        let x = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let y = conv2d(&x, &t(&[1, 1, 1, 1], &[1.0]), &t(&[1], &[0.0]), 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_all_ones_window_sums() {
        let x = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let y = conv2d(&x, &Tensor::filled(&[1, 1, 2, 2], 1.0), &t(&[1], &[0.0]), 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn conv_zero_kernel_gives_zeros() {
        let x = Tensor::new(vec![2, 7, 5], (0..70).map(|i| i as f64 * 0.3 - 4.0).collect()).unwrap();
        let y = conv2d(&x, &Tensor::zeros(&[3, 2, 3, 3]), &Tensor::zeros(&[3]), 2).unwrap();
        assert_eq!(y.shape(), &[3, 3, 2]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_strided_matches_direct_sum() {
        let x = Tensor::new(vec![2, 5, 6], (0..60).map(|i| ((i * 7) % 11) as f64 - 5.0).collect()).unwrap();
        let k = Tensor::new(vec![2, 2, 3, 3], (0..36).map(|i| ((i * 5) % 7) as f64 - 3.0).collect()).unwrap();
        let b = t(&[2], &[0.5, -1.0]);
        let y = conv2d(&x, &k, &b, 2).unwrap();
        assert_eq!(y.shape(), &[2, 2, 2]);
        for o in 0..2 {
            for oy in 0..2 {
                for ox in 0..2 {
                    let mut s = b.data()[o];
                    for c in 0..2 {
                        for i in 0..3 {
                            for j in 0..3 {
                                s += k.data()[((o * 2 + c) * 3 + i) * 3 + j] * x.at3(c, oy * 2 + i, ox * 2 + j);
                            }
                        }
                    }
                    assert_eq!(y.at3(o, oy, ox), s);
                }
            }
        }
    }

    #[test]
    fn conv_channel_mismatch() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let r = conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]), &Tensor::zeros(&[1]), 1);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn conv_kernel_larger_than_input() {
        let x = Tensor::zeros(&[1, 2, 2]);
        assert!(conv2d(&x, &Tensor::zeros(&[1, 1, 3, 3]), &Tensor::zeros(&[1]), 1).is_err());
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&t(&[3], &[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&t(&[2], &[-3.0, -0.1])).data().iter().all(|&v| v == 0.0));
        let pos = t(&[3], &[0.1, 5.0, 2.0]);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn pool_examples() {
        let (y, arg) = max_pool2d(&t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(arg, vec![3]);

        let (y, _) = max_pool2d(&Tensor::filled(&[2, 4, 4], 3.5), 2).unwrap();
        assert_eq!(y, Tensor::filled(&[2, 2, 2], 3.5));

        let x = Tensor::new(vec![1, 3, 3], (0..9).map(f64::from).collect()).unwrap();
        assert_eq!(max_pool2d(&x, 1).unwrap().0, x);
        assert!(matches!(max_pool2d(&x, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn pool_tie_routes_to_first_index() {
        let x = Tensor::filled(&[1, 2, 2], 1.0);
        let (_, arg) = max_pool2d(&x, 2).unwrap();
        let g = max_pool2d_backward(x.shape(), &arg, &t(&[1, 1, 1], &[1.0]));
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_examples() {
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let y = dense(&t(&[2], &[5.0, -1.0]), &eye, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.data(), &[5.0, -1.0]);

        let y = dense(&t(&[2], &[2.0, 3.0]), &t(&[1, 2], &[1.0, 1.0]), &t(&[1], &[1.0])).unwrap();
        assert_eq!(y.data(), &[6.0]);

        let y = dense(&t(&[3], &[9.0, -2.0, 4.0]), &Tensor::zeros(&[1, 3]), &t(&[1], &[7.0])).unwrap();
        assert_eq!(y.data(), &[7.0]);

        assert!(dense(&t(&[3], &[1.0; 3]), &eye, &Tensor::zeros(&[2])).is_err());
    }
}
