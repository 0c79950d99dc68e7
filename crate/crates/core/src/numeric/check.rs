use super::{GradTape, Tensor, TensorId};
use crate::error::{bail, Result};

/// Compares the tape gradient of a scalar graph against central
/// differences and returns the largest relative error over all elements of
/// `x`.
///
/// `build` receives a fresh tape and the id of `x` on it and must return the
/// id of a scalar loss. It is called once for the analytic pass and twice per
/// element for the finite differences.
pub fn grad_check<F>(build: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut GradTape, TensorId) -> Result<TensorId>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        bail!(Contract, "finite-difference step must be positive, got {eps}");
    }
    let eval = |point: Tensor| -> Result<f64> {
        let mut tape = GradTape::new();
        let id = tape.leaf(point);
        let loss = build(&mut tape, id)?;
        let value = tape.value(loss);
        if !value.is_scalar() {
            bail!(Contract, "gradient check needs a scalar function");
        }
        Ok(value.data()[0])
    };

    let mut tape = GradTape::new();
    let id = tape.leaf(x.clone());
    let loss = build(&mut tape, id)?;
    let grads = tape.backward(loss)?;
    let analytic = grads
        .get(id)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.shape()));

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let central = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        let err = (a - central).abs() / a.abs().max(central.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
