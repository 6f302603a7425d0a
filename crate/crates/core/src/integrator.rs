//! The augmented per-step system of the Obreshkov method and fixed-step
//! time marching.
//!
//! One step solves for `xi = [x_n, h x_n', ..., h^m x_n^(m)]`:
//!
//! ```text
//! block row i < m :  G xi_i + (C / h) xi_{i+1} = h^i b^(i)(t_n)
//! block row m     :  sum_i (-1)^i a(i,l,m) xi_i = sum_i a(i,m,l) h^i x_{n-1}^(i)
//! ```

use nalgebra::{DMatrix, DVector, LU};

use crate::coefficients::ObreshkovScheme;
use crate::dae::LinearDae;
use crate::error::IntegratorError;
use crate::linalg::pivot_ratio;
use crate::steady_state::PhasorSolution;

/// Approximation at one time point, stored as h-scaled derivatives
/// `scaled[i] = h^i x^(i)(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub t: f64,
    pub h: f64,
    pub scaled: Vec<DVector<f64>>,
}

impl StepState {
    pub fn value(&self) -> &DVector<f64> {
        &self.scaled[0]
    }

    /// Unscaled `x^(i)(t)`.
    pub fn derivative(&self, i: usize) -> DVector<f64> {
        &self.scaled[i] / self.h.powi(i as i32)
    }

    pub fn block_count(&self) -> usize {
        self.scaled.len()
    }

    /// Same derivatives, re-expressed for step size `h`.
    pub fn rescaled(&self, h: f64) -> StepState {
        let ratio = h / self.h;
        StepState {
            t: self.t,
            h,
            scaled: self
                .scaled
                .iter()
                .enumerate()
                .map(|(i, v)| v * ratio.powi(i as i32))
                .collect(),
        }
    }
}

/// The `(m+1)N` square matrix `C~ + G~` for one `(h, l, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub matrix: DMatrix<f64>,
    pub h: f64,
    pub l: usize,
    pub m: usize,
}

fn check_step(h: f64) -> Result<(), IntegratorError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(IntegratorError::InvalidStep(h))
    }
}

pub fn assemble(
    dae: &LinearDae,
    scheme: &ObreshkovScheme,
    h: f64,
) -> Result<AugmentedSystem, IntegratorError> {
    check_step(h)?;
    let n = dae.dim();
    let m = scheme.m();
    let size = (m + 1) * n;
    let mut matrix = DMatrix::zeros(size, size);
    let c_over_h = dae.c() / h;
    for i in 0..m {
        matrix.view_mut((i * n, i * n), (n, n)).copy_from(dae.g());
        matrix
            .view_mut((i * n, (i + 1) * n), (n, n))
            .copy_from(&c_over_h);
    }
    for (j, &a) in scheme.current_weights().iter().enumerate() {
        let signed = if j % 2 == 0 { a } else { -a };
        for d in 0..n {
            matrix[(m * n + d, j * n + d)] = signed;
        }
    }
    Ok(AugmentedSystem {
        matrix,
        h,
        l: scheme.l(),
        m,
    })
}

/// Right-hand side for the step `t_n - h -> t_n`. `prev` is rescaled if it
/// was stored with a different step size.
pub fn build_rhs(
    dae: &LinearDae,
    scheme: &ObreshkovScheme,
    prev: &StepState,
    t_n: f64,
    h: f64,
) -> Result<DVector<f64>, IntegratorError> {
    check_step(h)?;
    let n = dae.dim();
    let (l, m) = (scheme.l(), scheme.m());
    if prev.block_count() < l + 1 {
        return Err(IntegratorError::InsufficientHistory {
            have: prev.block_count(),
            need: l + 1,
        });
    }
    if let Some(bad) = prev.scaled.iter().find(|v| v.len() != n) {
        return Err(IntegratorError::Dimension {
            expected: n,
            got: bad.len(),
        });
    }
    let history = if prev.h == h {
        prev.clone()
    } else {
        prev.rescaled(h)
    };

    let mut rhs = DVector::zeros((m + 1) * n);
    for i in 0..m {
        let block = dae.source_derivative(i, t_n) * h.powi(i as i32);
        rhs.rows_mut(i * n, n).copy_from(&block);
    }
    let mut last = DVector::zeros(n);
    for (i, &a) in scheme.past_weights().iter().enumerate() {
        last.axpy(a, &history.scaled[i], 1.0);
    }
    rhs.rows_mut(m * n, n).copy_from(&last);
    Ok(rhs)
}

/// Factorized augmented system, reusable for every step with the same
/// `(h, l, m)`.
pub struct Stepper<'a> {
    dae: &'a LinearDae,
    scheme: &'a ObreshkovScheme,
    system: AugmentedSystem,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        dae: &'a LinearDae,
        scheme: &'a ObreshkovScheme,
        h: f64,
    ) -> Result<Self, IntegratorError> {
        let system = assemble(dae, scheme, h)?;
        let lu = system.matrix.clone().lu();
        let tol = system.matrix.nrows() as f64 * f64::EPSILON;
        if pivot_ratio(&lu.u()) <= tol {
            return Err(IntegratorError::Singular {
                h,
                l: scheme.l(),
                m: scheme.m(),
            });
        }
        Ok(Self {
            dae,
            scheme,
            system,
            lu,
        })
    }

    pub fn system(&self) -> &AugmentedSystem {
        &self.system
    }

    pub fn advance(&self, prev: &StepState) -> Result<StepState, IntegratorError> {
        self.advance_to(prev, prev.t + self.system.h)
    }

    /// Like [`Stepper::advance`] with the new time given explicitly, so
    /// long marches can use `t0 + n h` instead of accumulating `h`.
    pub fn advance_to(&self, prev: &StepState, t_n: f64) -> Result<StepState, IntegratorError> {
        let h = self.system.h;
        let n = self.dae.dim();
        let rhs = build_rhs(self.dae, self.scheme, prev, t_n, h)?;
        let singular = || IntegratorError::Singular {
            h,
            l: self.system.l,
            m: self.system.m,
        };
        let mut xi = self.lu.solve(&rhs).ok_or_else(singular)?;
        let residual = &rhs - &self.system.matrix * &xi;
        xi += self.lu.solve(&residual).ok_or_else(singular)?;
        let scaled = (0..=self.system.m)
            .map(|i| xi.rows(i * n, n).into_owned())
            .collect();
        Ok(StepState { t: t_n, h, scaled })
    }
}

pub fn step(
    dae: &LinearDae,
    scheme: &ObreshkovScheme,
    prev: &StepState,
    h: f64,
) -> Result<StepState, IntegratorError> {
    Stepper::new(dae, scheme, h)?.advance(prev)
}

/// `steps` fixed-size steps from `initial`; the returned list excludes the
/// initial state. Needs `l <= m` beyond the first step, since each step
/// only produces derivatives up to order `m`.
pub fn march(
    dae: &LinearDae,
    scheme: &ObreshkovScheme,
    initial: &StepState,
    h: f64,
    steps: usize,
) -> Result<Vec<StepState>, IntegratorError> {
    if steps == 0 {
        return Err(IntegratorError::NoSteps);
    }
    let stepper = Stepper::new(dae, scheme, h)?;
    let mut out = Vec::with_capacity(steps);
    let mut current = initial.clone();
    for k in 1..=steps {
        current = stepper.advance_to(&current, initial.t + k as f64 * h)?;
        out.push(current.clone());
    }
    Ok(out)
}

/// Exact start at `t = 0` taken from the steady state:
/// `h^i x_0^(i) = h^i d^i/dt^i x_ss(0)` for `i = 0..=max(l, m)`.
pub fn initial_state_from_steady_state(
    phasor: &PhasorSolution,
    scheme: &ObreshkovScheme,
    h: f64,
) -> StepState {
    initial_state_at(phasor, scheme, h, 0.0)
}

/// Like [`initial_state_from_steady_state`] at an arbitrary `t0`.
pub fn initial_state_at(
    phasor: &PhasorSolution,
    scheme: &ObreshkovScheme,
    h: f64,
    t0: f64,
) -> StepState {
    let blocks = scheme.l().max(scheme.m()) + 1;
    StepState {
        t: t0,
        h,
        scaled: (0..blocks)
            .map(|i| phasor.derivative(i, t0) * h.powi(i as i32))
            .collect(),
    }
}

/// Start from a given `x(t0)` for systems with nonsingular `C`, deriving
/// higher derivatives from `x^(i+1) = C^-1 (b^(i) - G x^(i))`.
pub fn initial_state_from_value(
    dae: &LinearDae,
    x0: &DVector<f64>,
    scheme: &ObreshkovScheme,
    h: f64,
    t0: f64,
) -> Result<StepState, IntegratorError> {
    check_step(h)?;
    let n = dae.dim();
    if x0.len() != n {
        return Err(IntegratorError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let lu = dae.c().clone().lu();
    if pivot_ratio(&lu.u()) <= n as f64 * f64::EPSILON {
        return Err(IntegratorError::SingularC);
    }
    let blocks = scheme.l().max(scheme.m()) + 1;
    let mut raw = vec![x0.clone()];
    for i in 0..blocks - 1 {
        let rhs = dae.source_derivative(i, t0) - dae.g() * &raw[i];
        raw.push(lu.solve(&rhs).ok_or(IntegratorError::SingularC)?);
    }
    Ok(StepState {
        t: t0,
        h,
        scaled: raw
            .into_iter()
            .enumerate()
            .map(|(i, v)| v * h.powi(i as i32))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::Sinusoid;
    use crate::steady_state::ac_solve;

    fn scalar(c: f64, g: f64, bc: f64, bs: f64, w: f64) -> LinearDae {
        LinearDae::new(
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, g),
            Sinusoid::new(DVector::from_element(1, bc), DVector::from_element(1, bs), w),
        )
        .unwrap()
    }

    fn state(t: f64, h: f64, blocks: &[f64]) -> StepState {
        StepState {
            t,
            h,
            scaled: blocks.iter().map(|&v| DVector::from_element(1, v)).collect(),
        }
    }

    #[test]
    fn scalar_assembly_m1() {
        let (c, g, h) = (3.0, 5.0, 0.25);
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        let sys = assemble(&scalar(c, g, 0.0, 0.0, 0.0), &scheme, h).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[g, c / h, 1.0, -0.5]);
        assert_eq!(sys.matrix, expected);
    }

    #[test]
    fn zero_c_gives_block_diagonal_plus_last_row() {
        let dae = LinearDae::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            Sinusoid::zeros(2, 1.0),
        )
        .unwrap();
        let scheme = ObreshkovScheme::new(0, 2).unwrap();
        let sys = assemble(&dae, &scheme, 0.1).unwrap();
        for i in 0..4 {
            for j in 0..6 {
                let same_block = i / 2 == j / 2;
                if !same_block {
                    assert_eq!(sys.matrix[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn backward_euler_step() {
        // x' = -2x + 0, scheme (0,1): x1 = x0 / (1 + 2h)
        let dae = scalar(1.0, 2.0, 0.0, 0.0, 0.0);
        let scheme = ObreshkovScheme::new(0, 1).unwrap();
        let sys = assemble(&dae, &scheme, 0.1).unwrap();
        assert_eq!(sys.matrix[(1, 0)], 1.0);
        assert_eq!(sys.matrix[(1, 1)], -1.0);
        let next = step(&dae, &scheme, &state(0.0, 0.1, &[1.0]), 0.1).unwrap();
        assert!((next.value()[0] - 1.0 / 1.2).abs() < 1e-15);
        assert!((next.t - 0.1).abs() < 1e-16);
    }

    #[test]
    fn trapezoidal_decay_step() {
        let dae = scalar(1.0, 1.0, 0.0, 0.0, 0.0);
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        let h = 0.3;
        let next = step(&dae, &scheme, &state(0.0, h, &[1.0, -h]), h).unwrap();
        let expected = (1.0 - h / 2.0) / (1.0 + h / 2.0);
        assert!((next.value()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn rhs_examples() {
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        let dae = scalar(1.0, 1.0, 0.0, 0.0, 1.0);
        let rhs = build_rhs(&dae, &scheme, &state(0.0, 0.5, &[1.0, 2.0]), 0.5, 0.5).unwrap();
        assert_eq!(rhs.as_slice(), &[0.0, 2.0]);

        let be = ObreshkovScheme::new(0, 1).unwrap();
        let rhs = build_rhs(&dae, &be, &state(0.0, 0.5, &[7.0]), 0.5, 0.5).unwrap();
        assert_eq!(rhs.as_slice(), &[0.0, 7.0]);

        // m = 2 at t = 0: blocks b(0) = b_c and h b'(0) = h w b_s
        let (w, h) = (3.0, 0.1);
        let dae = scalar(1.0, 1.0, 2.0, 5.0, w);
        let s02 = ObreshkovScheme::new(0, 2).unwrap();
        let rhs = build_rhs(&dae, &s02, &state(-h, h, &[0.0]), 0.0, h).unwrap();
        assert_eq!(rhs[0], 2.0);
        assert!((rhs[1] - h * w * 5.0).abs() < 1e-15);
    }

    #[test]
    fn insufficient_history() {
        let scheme = ObreshkovScheme::new(2, 1).unwrap();
        let dae = scalar(1.0, 1.0, 0.0, 0.0, 1.0);
        let err = build_rhs(&dae, &scheme, &state(0.0, 0.1, &[1.0, 0.0]), 0.1, 0.1);
        assert_eq!(err, Err(IntegratorError::InsufficientHistory { have: 2, need: 3 }));
    }

    #[test]
    fn zero_stays_zero() {
        let dae = scalar(1.0, 1.0, 0.0, 0.0, 1.0);
        let scheme = ObreshkovScheme::new(1, 2).unwrap();
        let traj = march(&dae, &scheme, &state(0.0, 0.1, &[0.0, 0.0, 0.0]), 0.1, 5).unwrap();
        assert!(traj.iter().all(|s| s.scaled.iter().all(|v| v[0] == 0.0)));
    }

    #[test]
    fn pure_algebraic_reproduces_source() {
        // 0 z' + z = u(t)
        let dae = scalar(0.0, 1.0, 0.7, -1.3, 2.0);
        for (l, m) in [(0, 1), (1, 1), (1, 2), (2, 3)] {
            let scheme = ObreshkovScheme::new(l, m).unwrap();
            let h = 0.05;
            let ph = ac_solve(&dae).unwrap();
            let start = initial_state_from_steady_state(&ph, &scheme, h);
            let next = step(&dae, &scheme, &start, h).unwrap();
            assert!((next.value() - dae.source_value(h)).amax() < 1e-13);
        }
    }

    #[test]
    fn march_one_step_equals_step() {
        let dae = scalar(2.0, 1.0, 1.0, 0.5, 3.0);
        let scheme = ObreshkovScheme::new(1, 2).unwrap();
        let start = state(0.0, 0.01, &[1.0, 0.2, -0.1]);
        let a = march(&dae, &scheme, &start, 0.01, 1).unwrap();
        let b = step(&dae, &scheme, &start, 0.01).unwrap();
        assert_eq!(a, vec![b]);
        assert_eq!(march(&dae, &scheme, &start, 0.01, 0), Err(IntegratorError::NoSteps));
    }

    #[test]
    fn singular_augmented_matrix_is_reported() {
        let dae = scalar(0.0, 0.0, 1.0, 0.0, 1.0);
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        let err = step(&dae, &scheme, &state(0.0, 0.1, &[0.0, 0.0]), 0.1);
        assert!(matches!(err, Err(IntegratorError::Singular { l: 1, m: 1, .. })));
    }

    #[test]
    fn steady_state_start_blocks() {
        let dae = scalar(1.0, 1.0, 1.0, 0.0, 2.0);
        let ph = ac_solve(&dae).unwrap();
        let scheme = ObreshkovScheme::new(1, 2).unwrap();
        let h = 0.1;
        let s = initial_state_from_steady_state(&ph, &scheme, h);
        let (xc, xs, w) = (ph.cos_amp()[0], ph.sin_amp()[0], ph.omega());
        assert_eq!(s.scaled[0][0], xc);
        assert!((s.scaled[1][0] - h * w * xs).abs() < 1e-16);
        assert!((s.scaled[2][0] + h * h * w * w * xc).abs() < 1e-16);
    }

    #[test]
    fn value_start_needs_nonsingular_c() {
        let dae = LinearDae::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::identity(2, 2),
            Sinusoid::zeros(2, 1.0),
        )
        .unwrap();
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        let err = initial_state_from_value(&dae, &DVector::zeros(2), &scheme, 0.1, 0.0);
        assert_eq!(err, Err(IntegratorError::SingularC));
    }
}
