//! Margin-based contrastive objective on embedding distances.

use crate::error::{bail, Result};

fn check(d: f64, margin: f64) -> Result<()> {
    if !(d >= 0.0) || !d.is_finite() {
        bail!(Contract, "distance must be finite and non-negative, got {d}");
    }
    if !(margin > 0.0) || !margin.is_finite() {
        bail!(Contract, "margin must be positive, got {margin}");
    }
    Ok(())
}

/// `d²` for a same-identity pair, `max(0, margin − d)²` otherwise.
pub fn contrastive_loss(d: f64, is_same: bool, margin: f64) -> Result<f64> {
    check(d, margin)?;
    Ok(if is_same {
        d * d
    } else {
        let gap = (margin - d).max(0.0);
        gap * gap
    })
}

/// Derivative of [`contrastive_loss`] with respect to the distance.
pub(crate) fn contrastive_loss_derivative(d: f64, is_same: bool, margin: f64) -> f64 {
    if is_same {
        2.0 * d
    } else {
        -2.0 * (margin - d).max(0.0)
    }
}
