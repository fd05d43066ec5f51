//! Scalar distribution functions used throughout the monitor.
//!
//! Everything here is a pure function of its arguments. The error function
//! and `ln Γ` come from `libm`; the rest is implemented locally.

mod chisq;
mod ks;
mod logistic;
mod normal;

pub use chisq::{chi_square_cdf, regularized_gamma_p, ChiSquareCdf};
pub use ks::{kolmogorov_sf, ks_uniform};
pub use logistic::{logistic_cdf, logistic_pdf, logistic_quantile};
pub use normal::{normal_cdf, normal_pdf, normal_quantile};

use crate::error::{Error, Result};

/// A value known to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside [0, 1]")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    Probability::new(p).map(|_| ())
}
