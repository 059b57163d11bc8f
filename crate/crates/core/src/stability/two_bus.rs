//! Closed form for one load fed through one line.
//!
//! With `U = V2²`, a constant power factor (`tan φ = Q/P`) and a constant
//! X/R ratio (`tan θ`), the receiving-end voltage satisfies
//!
//! ```text
//! U² + (2PR(tan φ tan θ + 1) - V1²) U + (PR)² (sec φ sec θ)² = 0
//! ```
//!
//! so P and R enter only through their product.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBusCase {
    pub v1: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub x: f64,
}

impl TwoBusCase {
    pub fn tan_phi(&self) -> f64 {
        self.q / self.p
    }

    pub fn tan_theta(&self) -> f64 {
        self.x / self.r
    }

    /// Linear and constant coefficients of the monic quadratic in `U`.
    pub fn coefficients(&self) -> (f64, f64) {
        let v1_sq = self.v1 * self.v1;
        if self.p > 0.0 && self.r > 0.0 {
            let (tp, tt) = (self.tan_phi(), self.tan_theta());
            let pr = self.p * self.r;
            let sec_sq = (1.0 + tp * tp) * (1.0 + tt * tt);
            (2.0 * pr * (tp * tt + 1.0) - v1_sq, pr * pr * sec_sq)
        } else {
            // limit of the same expression when P or R vanishes
            let b = 2.0 * (self.p * self.r + self.q * self.x) - v1_sq;
            let c = (self.p * self.p + self.q * self.q) * (self.r * self.r + self.x * self.x);
            (b, c)
        }
    }

    pub fn discriminant(&self) -> f64 {
        let (b, c) = self.coefficients();
        b * b - 4.0 * c
    }

    /// Same power factor and X/R with the load scaled.
    pub fn with_load_scale(&self, s: f64) -> Self {
        Self {
            p: self.p * s,
            q: self.q * s,
            ..*self
        }
    }

    /// Same power factor and X/R with the line scaled.
    pub fn with_line_scale(&self, s: f64) -> Self {
        Self {
            r: self.r * s,
            x: self.x * s,
            ..*self
        }
    }
}

/// Both roots `(U_high, U_low)`; `V2 = sqrt(U)`.
pub fn two_bus_roots(c: &TwoBusCase) -> Result<(f64, f64)> {
    let (b, k) = c.coefficients();
    let disc = b * b - 4.0 * k;
    if !(disc >= 0.0) {
        return Err(Error::NoSolution { discriminant: disc });
    }
    // avoid cancellation: form the larger-magnitude root first
    let big = -0.5 * (b + disc.sqrt().copysign(b));
    if big == 0.0 {
        return Ok((0.0, 0.0));
    }
    let other = k / big;
    Ok((big.max(other), big.min(other)))
}

/// Whether scaling the load by `scale` gives the same roots as scaling the line by it.
pub fn two_bus_pr_equivalence_check(c: &TwoBusCase, scale: f64) -> Result<bool> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let by_load = two_bus_roots(&c.with_load_scale(scale));
    let by_line = two_bus_roots(&c.with_line_scale(scale));
    Ok(match (by_load, by_line) {
        (Ok(a), Ok(b)) => close(a.0, b.0) && close(a.1, b.1),
        (Err(_), Err(_)) => true,
        _ => false,
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}
