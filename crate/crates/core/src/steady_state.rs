//! Sinusoidal steady state (AC analysis), the truncation-free reference.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dae::{LinearDae, Sinusoid};
use crate::error::SteadyStateError;
use crate::linalg::pivot_ratio;

/// Pivot ratio below which the 2N x 2N phasor system counts as singular.
const RESONANCE_TOL: f64 = 1e-13;

/// `x_ss(t) = X_c cos(omega t) + X_s sin(omega t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorSolution {
    response: Sinusoid,
}

impl PhasorSolution {
    pub fn cos_amp(&self) -> &DVector<f64> {
        &self.response.cos_amp
    }

    pub fn sin_amp(&self) -> &DVector<f64> {
        &self.response.sin_amp
    }

    pub fn omega(&self) -> f64 {
        self.response.omega
    }

    pub fn waveform(&self) -> &Sinusoid {
        &self.response
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        self.response.value(t)
    }

    /// `d^i/dt^i x_ss(t)`.
    pub fn derivative(&self, i: usize, t: f64) -> DVector<f64> {
        self.response.derivative(i, t)
    }

    /// Relative residual of the phasor equations
    /// `G X_c + w C X_s = b_c`, `G X_s - w C X_c = b_s`.
    pub fn residual(&self, dae: &LinearDae) -> f64 {
        let (c, g) = (dae.c(), dae.g());
        let w = self.omega();
        let (xc, xs) = (self.cos_amp(), self.sin_amp());
        let src = dae.source();
        let r1 = g * xc + c * xs * w - &src.cos_amp;
        let r2 = g * xs - c * xc * w - &src.sin_amp;
        let scale = (g.norm() + w * c.norm()) * (xc.norm() + xs.norm())
            + src.cos_amp.norm()
            + src.sin_amp.norm();
        if scale == 0.0 {
            return 0.0;
        }
        (r1.norm_squared() + r2.norm_squared()).sqrt() / scale
    }

    pub fn to_export(&self, dae: &LinearDae) -> PhasorExport {
        PhasorExport {
            x_c: self.cos_amp().iter().copied().collect(),
            x_s: self.sin_amp().iter().copied().collect(),
            omega: self.omega(),
            residual: self.residual(dae),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhasorExport {
    #[serde(rename = "X_c")]
    pub x_c: Vec<f64>,
    #[serde(rename = "X_s")]
    pub x_s: Vec<f64>,
    pub omega: f64,
    pub residual: f64,
}

/// Solves `(G + j w C)(X_c - j X_s) = b_c - j b_s` as the real block system
/// `[[G, wC], [-wC, G]] [X_c; X_s] = [b_c; b_s]`.
pub fn ac_solve(dae: &LinearDae) -> Result<PhasorSolution, SteadyStateError> {
    let n = dae.dim();
    let w = dae.omega();
    let (c, g) = (dae.c(), dae.g());
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(g);
    block.view_mut((0, n), (n, n)).copy_from(&(c * w));
    block.view_mut((n, 0), (n, n)).copy_from(&(c * -w));
    block.view_mut((n, n), (n, n)).copy_from(g);
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(&dae.source().cos_amp);
    rhs.rows_mut(n, n).copy_from(&dae.source().sin_amp);

    let lu = block.clone().lu();
    if pivot_ratio(&lu.u()) <= RESONANCE_TOL {
        return Err(SteadyStateError::Resonant { omega: w });
    }
    let mut x = lu.solve(&rhs).ok_or(SteadyStateError::Resonant { omega: w })?;
    for _ in 0..2 {
        let r = &rhs - &block * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    Ok(PhasorSolution {
        response: Sinusoid::new(x.rows(0, n).into_owned(), x.rows(n, n).into_owned(), w),
    })
}
