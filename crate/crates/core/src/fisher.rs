//! Observed Fisher information at the MAP estimate and the RMSE lower
//! bounds it implies.
//!
//! The expected-information term and the latent-label term cancel in the
//! second derivative of the log posterior, leaving only the prior's
//! curvature. The matrix is therefore diagonal with
//!
//! ```text
//! I_uu = (alpha - 1) / theta_u^2 + (beta - 1) / (1 - theta_u)^2
//! ```
//!
//! and the per-reviewer MSE bound is simply `1 / I_uu`.

use crate::error::{Error, Result};
use crate::synthesis::PriorParams;

/// Diagonal of the observed information matrix. Off-diagonal entries are
/// zero and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedInformation {
    diagonal: Vec<f64>,
    prior: PriorParams,
}

impl ObservedInformation {
    /// Wrap a precomputed diagonal. Entries are not checked here;
    /// [`bcrlb_report`] rejects nonpositive ones.
    pub fn from_diagonal(diagonal: Vec<f64>, prior: PriorParams) -> Self {
        Self { diagonal, prior }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn prior(&self) -> &PriorParams {
        &self.prior
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub mse_lower: Vec<f64>,
    pub rmse_lower: Vec<f64>,
    pub mean_rmse_lower: f64,
}

/// Information at a single reliability value.
pub fn information_at(theta_hat: f64, prior: &PriorParams) -> f64 {
    let q = 1.0 - theta_hat;
    (prior.alpha() - 1.0) / (theta_hat * theta_hat) + (prior.beta() - 1.0) / (q * q)
}

/// Observed information at `theta_hat`. Boundary values are rejected, not
/// clamped.
pub fn observed_information(theta_hat: &[f64], prior: &PriorParams) -> Result<ObservedInformation> {
    if let Some(u) = theta_hat.iter().position(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Domain(format!(
            "theta_hat[{u}] = {} is on or outside the boundary; information diverges",
            theta_hat[u]
        )));
    }
    Ok(ObservedInformation {
        diagonal: theta_hat.iter().map(|&t| information_at(t, prior)).collect(),
        prior: *prior,
    })
}

/// The reliability at which the information is smallest (the estimate is
/// most uncertain).
///
/// Setting `dI/dtheta = -2(alpha-1)/theta^3 + 2(beta-1)/(1-theta)^3` to zero
/// gives `theta* = 1 / (1 + ((beta - 1) / (alpha - 1))^(1/3))`. Note the
/// cube root: the fourth-root form sometimes quoted for this extremum does
/// not minimize the information.
pub fn theta_star(prior: &PriorParams) -> f64 {
    let ratio = (prior.beta() - 1.0) / (prior.alpha() - 1.0);
    1.0 / (1.0 + ratio.cbrt())
}

/// Per-reviewer MSE and RMSE lower bounds, and their mean RMSE.
pub fn bcrlb_report(info: &ObservedInformation) -> Result<BoundReport> {
    if let Some(u) = info.diagonal.iter().position(|&v| !(v > 0.0) || v.is_infinite()) {
        return Err(Error::Parameter(format!(
            "information entry {u} = {} must be positive and finite",
            info.diagonal[u]
        )));
    }
    let mse_lower: Vec<f64> = info.diagonal.iter().map(|v| 1.0 / v).collect();
    let rmse_lower: Vec<f64> = mse_lower.iter().map(|m| m.sqrt()).collect();
    let mean_rmse_lower = if rmse_lower.is_empty() {
        0.0
    } else {
        rmse_lower.iter().sum::<f64>() / rmse_lower.len() as f64
    };
    Ok(BoundReport {
        mse_lower,
        rmse_lower,
        mean_rmse_lower,
    })
}
