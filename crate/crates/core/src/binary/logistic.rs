//! Logistic log-likelihood over a fixed design, optionally with offsets,
//! observation weights and a ridge on the coefficients.

use ndarray::{Array1, Array2, Axis};

use crate::numkit::stats::{log1pexp, logistic};
use crate::numkit::SmoothObjective;

pub(crate) struct LogisticDesign<'a> {
    pub design: &'a Array2<f64>,
    pub y: &'a [f64],
    pub offset: Option<&'a [f64]>,
    pub weights: Option<&'a [f64]>,
    /// Subtracts `ridge/2 * |beta|^2` from the log-likelihood.
    pub ridge: f64,
}

impl LogisticDesign<'_> {
    pub fn eta(&self, beta: &Array1<f64>) -> Array1<f64> {
        let mut eta = self.design.dot(beta);
        if let Some(off) = self.offset {
            for (e, o) in eta.iter_mut().zip(off) {
                *e += o;
            }
        }
        eta
    }

    fn w(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }
}

impl SmoothObjective for LogisticDesign<'_> {
    fn value(&self, beta: &Array1<f64>) -> f64 {
        let eta = self.eta(beta);
        eta.iter()
            .enumerate()
            .map(|(i, &e)| self.w(i) * (self.y[i] * e - log1pexp(e)))
            .sum::<f64>()
            - 0.5 * self.ridge * beta.dot(beta)
    }

    fn derivatives(&self, beta: &Array1<f64>) -> (f64, Array1<f64>, Array2<f64>) {
        let eta = self.eta(beta);
        let n = eta.len();
        let mut value = 0.0;
        let mut resid = Array1::zeros(n);
        let mut curv = Array1::zeros(n);
        for i in 0..n {
            let e = eta[i];
            let w = self.w(i);
            let mu = logistic(e);
            value += w * (self.y[i] * e - log1pexp(e));
            resid[i] = w * (self.y[i] - mu);
            curv[i] = w * mu * (1.0 - mu);
        }
        let mut grad = self.design.t().dot(&resid);
        let weighted = self.design * &curv.insert_axis(Axis(1));
        let mut hess = -self.design.t().dot(&weighted);
        if self.ridge > 0.0 {
            value -= 0.5 * self.ridge * beta.dot(beta);
            grad.scaled_add(-self.ridge, beta);
            for j in 0..beta.len() {
                hess[[j, j]] -= self.ridge;
            }
        }
        (value, grad, hess)
    }
}
