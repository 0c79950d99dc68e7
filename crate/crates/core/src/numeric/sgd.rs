use super::Tensor;
use crate::error::{bail, Result};

fn check(params: &[Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        bail!(Contract, "learning rate must be finite and non-negative, got {lr}");
    }
    if params.len() != grads.len() {
        bail!(
            Contract,
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        );
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            bail!(
                Contract,
                "gradient {i} has shape {:?}, parameter has {:?}",
                g.shape(),
                p.shape()
            );
        }
    }
    Ok(())
}

/// Plain stochastic gradient descent: `p ← p − lr·g`.
pub fn sgd_step(params: &[Tensor], grads: &[Tensor], lr: f64) -> Result<Vec<Tensor>> {
    let mut out = params.to_vec();
    sgd_update(&mut out, grads, lr)?;
    Ok(out)
}

/// In-place form of [`sgd_step`]. Parameters are left untouched on error.
pub fn sgd_update(params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
    check(params, grads, lr)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn single_step_arithmetic() {
        let p = sgd_step(&[Tensor::scalar(1.0)], &[Tensor::scalar(0.5)], 0.1).unwrap();
        assert_eq!(p[0].data(), &[0.95]);
    }

    #[test]
    fn zero_gradient_or_rate_is_noop() {
        let p = vec![Tensor::new(vec![3], vec![1.0, -2.0, 0.3]).unwrap()];
        assert_eq!(sgd_step(&p, &[Tensor::zeros(&[3])], 0.1).unwrap(), p);
        let g = vec![Tensor::filled(&[3], 4.0)];
        assert_eq!(sgd_step(&p, &g, 0.0).unwrap(), p);
    }

    #[test]
    fn missing_or_misshaped_gradient() {
        let p = vec![Tensor::zeros(&[2]), Tensor::zeros(&[3])];
        assert!(matches!(
            sgd_step(&p, &[Tensor::zeros(&[2])], 0.1),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            sgd_step(&p, &[Tensor::zeros(&[2]), Tensor::zeros(&[4])], 0.1),
            Err(Error::Contract(_))
        ));
    }
}
