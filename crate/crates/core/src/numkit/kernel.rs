use serde::{Deserialize, Serialize};

use crate::error::{CsteError, Result};

/// Smoothing kernel family. All are symmetric densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Gaussian,
    Uniform,
}

impl Kernel {
    /// Unscaled density K(u).
    pub fn density(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Kernel::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the support in units of the bandwidth (infinite for Gaussian).
    pub fn support_radius(self) -> f64 {
        match self {
            Kernel::Gaussian => f64::INFINITY,
            _ => 1.0,
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = CsteError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "gaussian" => Ok(Kernel::Gaussian),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(CsteError::Parameter(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Scaled kernel weight K(u/h)/h.
pub fn kernel_weight(u: f64, h: f64, k: Kernel) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(CsteError::Parameter(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(k.density(u / h) / h)
}

/// Rule-of-thumb bandwidth 1.06 * sd * n^(-1/5).
pub fn rule_of_thumb_bandwidth(values: &[f64]) -> f64 {
    let sd = super::stats::sample_sd(values);
    1.06 * sd * (values.len() as f64).powf(-0.2)
}
