//! Clamped B-spline bases evaluated with the Cox–de Boor recursion.

use serde::{Deserialize, Serialize};

use crate::error::{CsteError, Result};

/// Clamped knot vector: each boundary knot is repeated `degree + 1` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    degree: usize,
    interior: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl KnotVector {
    pub fn new(degree: usize, interior: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(CsteError::Parameter(format!(
                "knot boundary must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        for w in interior.windows(2) {
            if w[1] < w[0] {
                return Err(CsteError::Parameter(
                    "interior knots must be non-decreasing".into(),
                ));
            }
        }
        if interior.iter().any(|&k| !(k > lo && k < hi)) {
            return Err(CsteError::Parameter(format!(
                "interior knots must lie strictly inside ({lo}, {hi})"
            )));
        }
        Ok(Self {
            degree,
            interior,
            lo,
            hi,
        })
    }

    /// Cubic-or-other basis over the range of `values` with interior knots at
    /// equally spaced sample quantiles. Falls back to equally spaced knots when
    /// quantiles collapse onto the boundary (heavily tied data).
    pub fn from_quantiles(values: &[f64], n_interior: usize, degree: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(CsteError::Input("cannot place knots on empty data".into()));
        }
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let lo = sorted[0];
        let hi = sorted[sorted.len() - 1];
        if !(hi > lo) {
            return Err(CsteError::Input(
                "cannot place knots: values have zero range".into(),
            ));
        }
        let interior: Vec<f64> = (1..=n_interior)
            .map(|j| super::stats::quantile_sorted(&sorted, j as f64 / (n_interior + 1) as f64))
            .collect();
        let ok = interior.iter().all(|&k| k > lo && k < hi)
            && interior.windows(2).all(|w| w[1] > w[0]);
        if ok {
            Self::new(degree, interior, lo, hi)
        } else {
            let step = (hi - lo) / (n_interior + 1) as f64;
            let interior = (1..=n_interior).map(|j| lo + step * j as f64).collect();
            Self::new(degree, interior, lo, hi)
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        self.degree + 1 + self.interior.len()
    }

    /// Full knot sequence with repeated boundary knots.
    pub fn full_knots(&self) -> Vec<f64> {
        let p = self.degree;
        let mut t = Vec::with_capacity(self.interior.len() + 2 * (p + 1));
        t.extend(std::iter::repeat(self.lo).take(p + 1));
        t.extend_from_slice(&self.interior);
        t.extend(std::iter::repeat(self.hi).take(p + 1));
        t
    }

    /// Clamp `u` into the knot range.
    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.lo, self.hi)
    }

    fn span(&self, u: f64, t: &[f64]) -> usize {
        let q = self.dim();
        if u >= self.hi {
            return q - 1;
        }
        // largest s in [p, q-1] with t[s] <= u
        let p = self.degree;
        let mut s = p;
        while s + 1 < q && t[s + 1] <= u {
            s += 1;
        }
        s
    }

    fn check(&self, u: f64) -> Result<()> {
        if !(u >= self.lo && u <= self.hi) {
            return Err(CsteError::Domain(format!(
                "u = {u} outside knot range [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Non-zero basis values of degree `p` on knot span `span`: entries for
/// indices `span - p ..= span`.
fn local_values(span: usize, u: f64, p: usize, t: &[f64]) -> Vec<f64> {
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = u - t[span + 1 - j];
        right[j] = t[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// All `dim()` basis values at `u`. They are non-negative and sum to one.
pub fn bspline_basis(u: f64, knots: &KnotVector) -> Result<Vec<f64>> {
    knots.check(u)?;
    let t = knots.full_knots();
    let p = knots.degree;
    let span = knots.span(u, &t);
    let local = local_values(span, u, p, &t);
    let mut out = vec![0.0; knots.dim()];
    out[span - p..=span].copy_from_slice(&local);
    Ok(out)
}

/// First derivative of every basis function at `u`.
pub fn bspline_basis_derivative(u: f64, knots: &KnotVector) -> Result<Vec<f64>> {
    knots.check(u)?;
    let mut out = vec![0.0; knots.dim()];
    let p = knots.degree;
    if p == 0 {
        return Ok(out);
    }
    let t = knots.full_knots();
    let span = knots.span(u, &t);
    // degree p-1 values for indices span-p+1 ..= span
    let lower = local_values(span, u, p - 1, &t);
    let lower_at = |i: usize| -> f64 {
        if i + p < span + 1 || i > span {
            0.0
        } else {
            lower[i + p - 1 - span]
        }
    };
    let pf = p as f64;
    for i in span - p..=span {
        let d1 = t[i + p] - t[i];
        let d2 = t[i + p + 1] - t[i + 1];
        let a = if d1 > 0.0 { lower_at(i) / d1 } else { 0.0 };
        let b = if d2 > 0.0 { lower_at(i + 1) / d2 } else { 0.0 };
        out[i] = pf * (a - b);
    }
    Ok(out)
}
