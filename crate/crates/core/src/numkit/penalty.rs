use serde::{Deserialize, Serialize};

/// Smoothly clipped absolute deviation penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScadPenalty {
    pub lambda: f64,
    pub a: f64,
}

impl ScadPenalty {
    pub const DEFAULT_A: f64 = 3.7;

    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            a: Self::DEFAULT_A,
        }
    }

    /// p_lambda(theta) for theta >= 0.
    pub fn value(&self, theta: f64) -> f64 {
        let (l, a) = (self.lambda, self.a);
        let t = theta.abs();
        if t <= l {
            l * t
        } else if t <= a * l {
            (2.0 * a * l * t - t * t - l * l) / (2.0 * (a - 1.0))
        } else {
            l * l * (a + 1.0) / 2.0
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        scad_derivative(theta, self)
    }
}

/// p'_lambda(theta) = lambda [theta <= lambda] + max(a lambda - theta, 0)/(a - 1) [theta > lambda].
pub fn scad_derivative(theta: f64, p: &ScadPenalty) -> f64 {
    let t = theta.abs();
    if t <= p.lambda {
        p.lambda
    } else {
        (p.a * p.lambda - t).max(0.0) / (p.a - 1.0)
    }
}

/// Sparsity penalty applied to the index coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Penalty {
    Scad { lambda: f64, a: f64 },
    L1 { lambda: f64 },
}

impl Penalty {
    pub fn scad(lambda: f64) -> Self {
        Penalty::Scad {
            lambda,
            a: ScadPenalty::DEFAULT_A,
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Penalty::Scad { lambda, .. } | Penalty::L1 { lambda } => lambda,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        match *self {
            Penalty::Scad { a, .. } => Penalty::Scad { lambda, a },
            Penalty::L1 { .. } => Penalty::L1 { lambda },
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        match *self {
            Penalty::Scad { lambda, a } => ScadPenalty { lambda, a }.value(theta),
            Penalty::L1 { lambda } => lambda * theta.abs(),
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match *self {
            Penalty::Scad { lambda, a } => scad_derivative(theta, &ScadPenalty { lambda, a }),
            Penalty::L1 { lambda } => lambda,
        }
    }
}
