//! Structural analysis of the pencil `G + lambda C`: regularity, the
//! Weierstrass transform and the differentiation index.
//!
//! The transform is computed by shift-and-invert. With `M = G + l0 C`
//! nonsingular, `A = M^-1 C` splits `R^N` into the range of `A^nu` (where
//! `A` is invertible) and the null space of `A^nu` (where it is nilpotent),
//! `nu` being the nilpotency index. The null space is grown one power at a
//! time with SVD rank decisions against the fixed scale `||A||`; the range is
//! the orthogonal complement of the same chain run on `A^T`. Powers of `A`
//! are never formed. Normalizing each
//! block gives
//!
//! ```text
//! P C Q = diag(I_r, N),   P G Q = diag(J, I_s)
//! ```
//!
//! `J` is returned in whatever real basis falls out of the split; only the
//! block structure and the nilpotency of `N` are meaningful.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dae::{matrix_to_rows, Sinusoid};
use crate::error::PencilError;
use crate::linalg::{block_diag, condition_number, hadamard_ratio, sorted_svd, spectral_norm};

/// Singular values below `DEFAULT_RANK_TOL * sigma_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// A probe `lambda` whose `det(G + lambda C)` has Hadamard ratio above this
/// counts as nonzero for the regularity decision.
const REGULARITY_TOL: f64 = 1e-11;

/// Minimum Hadamard ratio for an acceptable shift `l0`.
const SHIFT_TOL: f64 = 1e-8;

/// Largest acceptable condition number of the basis `[range | null]`.
const SPLIT_COND_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilOptions {
    pub rank_tol: f64,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Deterministic probe sequence `s * {1, -1, 2, -2, ...}` where `s`
/// balances the magnitudes of `G` and `C`.
fn probes(c: &DMatrix<f64>, g: &DMatrix<f64>) -> impl Iterator<Item = f64> {
    let (nc, ng) = (c.norm(), g.norm());
    let scale = if nc > 0.0 && ng > 0.0 { ng / nc } else { 1.0 };
    (0..).map(move |j: usize| {
        let magnitude = (j / 2 + 1) as f64;
        if j.is_multiple_of(2) {
            scale * magnitude
        } else {
            -scale * magnitude
        }
    })
}

fn check_shapes(c: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(), PencilError> {
    let n = c.nrows();
    if c.shape() != (n, n) || g.shape() != (n, n) {
        return Err(PencilError::Dimension(format!(
            "C is {}x{}, G is {}x{}",
            c.nrows(),
            c.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    Ok(())
}

/// `det(G + lambda C)` is not identically zero. A polynomial of degree at
/// most `N` that vanishes at `N + 1` distinct points is zero everywhere, so
/// `N + 1` probes decide it.
pub fn is_regular(c: &DMatrix<f64>, g: &DMatrix<f64>) -> bool {
    if check_shapes(c, g).is_err() {
        return false;
    }
    let n = c.nrows();
    probes(c, g)
        .take(n + 1)
        .any(|lambda| hadamard_ratio(&(g + c * lambda)) > REGULARITY_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeierstrassDecomposition {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    q_inv: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub nil: DMatrix<f64>,
    pub r: usize,
    pub s: usize,
    pub index: usize,
    /// The shift `l0` used for `G + l0 C`.
    pub shift: f64,
}

/// `x = Q_D z_D + Q_A z_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledState {
    pub differential: DVector<f64>,
    pub algebraic: DVector<f64>,
}

/// Inputs of the decoupled subsystems `z_D' = -J z_D + u_D` and
/// `N z_A' = -z_A + u_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledSource {
    pub differential: Sinusoid,
    pub algebraic: Sinusoid,
}

pub fn weierstrass(
    c: &DMatrix<f64>,
    g: &DMatrix<f64>,
    opts: PencilOptions,
) -> Result<WeierstrassDecomposition, PencilError> {
    check_shapes(c, g)?;
    if !is_regular(c, g) {
        return Err(PencilError::Singular);
    }
    let n = c.nrows();
    let shift = probes(c, g)
        .take(2 * n + 2)
        .find(|&lambda| hadamard_ratio(&(g + c * lambda)) > SHIFT_TOL)
        .ok_or_else(|| {
            PencilError::IllConditionedSplit("no well-conditioned shift G + l0 C found".into())
        })?;

    let m_lu = (g + c * shift).lu();
    let m_inv = m_lu
        .solve(&DMatrix::identity(n, n))
        .ok_or(PencilError::Singular)?;
    let a = &m_inv * c;
    let threshold = opts.rank_tol * spectral_norm(&a);

    let (null_basis, nu) = nilpotent_subspace(&a, threshold)?;
    let range_basis = core_subspace(&a, nu, threshold)?;
    let (r, s) = (range_basis.ncols(), null_basis.ncols());
    if r + s != n {
        return Err(PencilError::IllConditionedSplit(format!(
            "core dimension {r} + nilpotent dimension {s} != {n}"
        )));
    }

    let mut basis = DMatrix::zeros(n, n);
    basis.columns_mut(0, r).copy_from(&range_basis);
    basis.columns_mut(r, s).copy_from(&null_basis);
    let cond = condition_number(&basis);
    if cond > SPLIT_COND_LIMIT {
        return Err(PencilError::IllConditionedSplit(format!(
            "core and nilpotent subspaces nearly coincide (condition {cond:.3e})"
        )));
    }
    let basis_inv = basis
        .clone()
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or_else(|| PencilError::IllConditionedSplit("split basis is singular".into()))?;

    let t = &basis_inv * &a * &basis;
    let a_core = t.view((0, 0), (r, r)).into_owned();
    let a_nil = t.view((r, r), (s, s)).into_owned();
    let core_inv = a_core.clone().try_inverse().ok_or_else(|| {
        PencilError::IllConditionedSplit("core block of the shifted pencil is singular".into())
    })?;
    let nil_scale = (DMatrix::identity(s, s) - &a_nil * shift)
        .try_inverse()
        .ok_or_else(|| PencilError::IllConditionedSplit("I - l0 N is singular".into()))?;

    let p = block_diag(&core_inv, &nil_scale) * &basis_inv * &m_inv;
    let j = &core_inv - DMatrix::identity(r, r) * shift;
    let nil = &nil_scale * &a_nil;

    let index = if s == 0 {
        0
    } else {
        let certified = nilpotency_index(&nil, opts.rank_tol).ok_or_else(|| {
            PencilError::IllConditionedSplit("algebraic block is not numerically nilpotent".into())
        })?;
        if certified != nu {
            return Err(PencilError::IllConditionedSplit(format!(
                "subspace chain gives index {nu} but N has nilpotency index {certified}"
            )));
        }
        certified
    };

    Ok(WeierstrassDecomposition {
        p,
        q: basis,
        q_inv: basis_inv,
        j,
        nil,
        r,
        s,
        index,
        shift,
    })
}

/// Orthonormal basis of `null(A^nu)` and `nu`, growing
/// `K_{j+1} = { x : A x in K_j }` until it stops.
fn nilpotent_subspace(a: &DMatrix<f64>, threshold: f64) -> Result<(DMatrix<f64>, usize), PencilError> {
    let n = a.nrows();
    let mut basis = DMatrix::<f64>::zeros(n, 0);
    let mut nu = 0;
    loop {
        let projector = DMatrix::identity(n, n) - &basis * basis.transpose();
        let (_, sigma, v) = sorted_svd(&(projector * a));
        let rank = sigma.iter().filter(|&&s| s > threshold).count();
        if n - rank <= basis.ncols() {
            return Ok((basis, nu));
        }
        basis = v.columns(rank, n - rank).into_owned();
        nu += 1;
        if nu > n {
            return Err(PencilError::IllConditionedSplit(
                "nilpotent subspace chain did not stabilize".into(),
            ));
        }
    }
}

/// Orthonormal basis of `range(A^nu) = null((A^T)^nu)^perp`, using the
/// same projected chain on `A^T` instead of forming powers of `A`.
fn core_subspace(a: &DMatrix<f64>, nu: usize, threshold: f64) -> Result<DMatrix<f64>, PencilError> {
    let n = a.nrows();
    let (left_null, left_nu) = nilpotent_subspace(&a.transpose(), threshold)?;
    if left_nu != nu {
        return Err(PencilError::IllConditionedSplit(format!(
            "left and right subspace chains disagree ({left_nu} vs {nu})"
        )));
    }
    let s = left_null.ncols();
    if s == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut padded = DMatrix::zeros(n, n);
    padded.columns_mut(0, s).copy_from(&left_null);
    let (u, _, _) = sorted_svd(&padded);
    Ok(u.columns(s, n - s).into_owned())
}

/// Smallest `k >= 1` with `N^k` numerically zero, judged against
/// `max(1, ||N||)^k` since `N` is paired with an identity block.
pub fn nilpotency_index(nil: &DMatrix<f64>, rank_tol: f64) -> Option<usize> {
    let s = nil.nrows();
    if s == 0 {
        return Some(0);
    }
    let scale = spectral_norm(nil).max(1.0);
    let mut power = nil.clone();
    for k in 1..=s + 1 {
        if spectral_norm(&power) <= rank_tol * scale.powi(k as i32) {
            return Some(k);
        }
        power = &power * nil;
    }
    None
}

pub fn differentiation_index(
    c: &DMatrix<f64>,
    g: &DMatrix<f64>,
    opts: PencilOptions,
) -> Result<usize, PencilError> {
    weierstrass(c, g, opts).map(|d| d.index)
}

impl WeierstrassDecomposition {
    pub fn q_inverse(&self) -> &DMatrix<f64> {
        &self.q_inv
    }

    /// `(||P C Q - diag(I, N)||, ||P G Q - diag(J, I)||)` in the Frobenius norm.
    pub fn reconstruction_residual(&self, c: &DMatrix<f64>, g: &DMatrix<f64>) -> (f64, f64) {
        let c_target = block_diag(&DMatrix::identity(self.r, self.r), &self.nil);
        let g_target = block_diag(&self.j, &DMatrix::identity(self.s, self.s));
        let rc = (&self.p * c * &self.q - c_target).norm();
        let rg = (&self.p * g * &self.q - g_target).norm();
        (rc, rg)
    }

    /// Splits `P b(t)` into the inputs of the two subsystems.
    pub fn decouple_source(&self, source: &Sinusoid) -> DecoupledSource {
        let mapped = source.mapped(&self.p);
        let split = |v: &DVector<f64>| (v.rows(0, self.r).into_owned(), v.rows(self.r, self.s).into_owned());
        let (dc, ac) = split(&mapped.cos_amp);
        let (ds, as_) = split(&mapped.sin_amp);
        DecoupledSource {
            differential: Sinusoid::new(dc, ds, source.omega),
            algebraic: Sinusoid::new(ac, as_, source.omega),
        }
    }

    /// `z_A(t) = sum_{i<k} (-1)^i N^i u_A^(i)(t)`, the unique solution of
    /// `N z_A' + z_A = u_A`.
    pub fn exact_algebraic_solution(&self, u_a: &Sinusoid, t: f64) -> DVector<f64> {
        let mut z = DVector::zeros(self.s);
        let mut n_power = DMatrix::identity(self.s, self.s);
        for i in 0..self.index {
            let term = &n_power * u_a.derivative(i, t);
            if i % 2 == 0 {
                z += term;
            } else {
                z -= term;
            }
            n_power = &n_power * &self.nil;
        }
        z
    }

    /// `z = Q^-1 x` split into differential and algebraic parts.
    pub fn decouple_state(&self, x: &DVector<f64>) -> DecoupledState {
        let z = &self.q_inv * x;
        DecoupledState {
            differential: z.rows(0, self.r).into_owned(),
            algebraic: z.rows(self.r, self.s).into_owned(),
        }
    }

    /// `Q_D z_D + Q_A z_A`.
    pub fn recompose(&self, state: &DecoupledState) -> DVector<f64> {
        self.q.columns(0, self.r) * &state.differential
            + self.q.columns(self.r, self.s) * &state.algebraic
    }

    pub fn to_export(&self) -> DecompositionExport {
        DecompositionExport {
            r: self.r,
            s: self.s,
            k: self.index,
            p: matrix_to_rows(&self.p),
            q: matrix_to_rows(&self.q),
            j: matrix_to_rows(&self.j),
            n: matrix_to_rows(&self.nil),
        }
    }
}

/// JSON view of a decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionExport {
    pub r: usize,
    pub s: usize,
    pub k: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    #[serde(rename = "N")]
    pub n: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{builtin_system, BuiltinKind};

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    #[test]
    fn regularity_examples() {
        let eye = DMatrix::identity(3, 3);
        assert!(is_regular(&eye, &eye));
        assert!(!is_regular(&m(1, &[0.0]), &m(1, &[0.0])));
        assert!(is_regular(&m(2, &[0.0, 1.0, 0.0, 0.0]), &DMatrix::identity(2, 2)));
        // shared null vector: det(G + lambda C) == 0 for all lambda
        let c = m(2, &[1.0, 1.0, 0.0, 0.0]);
        let g = m(2, &[2.0, 2.0, 0.0, 0.0]);
        assert!(!is_regular(&c, &g));
        assert_eq!(weierstrass(&c, &g, PencilOptions::default()), Err(PencilError::Singular));
    }

    #[test]
    fn identity_c_is_ode() {
        let g = m(2, &[1.0, 2.0, -3.0, 0.5]);
        let d = weierstrass(&DMatrix::identity(2, 2), &g, PencilOptions::default()).unwrap();
        assert_eq!((d.r, d.s, d.index), (2, 0, 0));
        let (rc, rg) = d.reconstruction_residual(&DMatrix::identity(2, 2), &g);
        assert!(rc < 1e-12 && rg < 1e-12);
    }

    #[test]
    fn already_canonical_index_one() {
        let c = m(2, &[1.0, 0.0, 0.0, 0.0]);
        let g = DMatrix::identity(2, 2);
        let d = weierstrass(&c, &g, PencilOptions::default()).unwrap();
        assert_eq!((d.r, d.s, d.index), (1, 1, 1));
        assert!(d.nil[(0, 0)].abs() < 1e-15);
        let (rc, rg) = d.reconstruction_residual(&c, &g);
        assert!(rc < 1e-14 && rg < 1e-14);
    }

    #[test]
    fn constant_pencil_is_purely_algebraic() {
        // C nilpotent, G = I: identically-constant determinant.
        let c = m(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let g = DMatrix::identity(3, 3);
        let d = weierstrass(&c, &g, PencilOptions::default()).unwrap();
        assert_eq!((d.r, d.s, d.index), (0, 3, 3));
    }

    #[test]
    fn builtins_report_declared_index() {
        for kind in BuiltinKind::ALL {
            for seed in 0..5 {
                let sys = builtin_system(kind, seed);
                let d = weierstrass(sys.dae.c(), sys.dae.g(), PencilOptions::default()).unwrap();
                assert_eq!(d.index, sys.declared_index, "{kind} seed {seed}");
            }
        }
    }

    #[test]
    fn nilpotency_index_of_shifts() {
        for s in 1..5 {
            let mut shift = DMatrix::zeros(s, s);
            for d in 0..s - 1 {
                shift[(d, d + 1)] = 1.0;
            }
            assert_eq!(nilpotency_index(&shift, 1e-9), Some(s));
        }
        assert_eq!(nilpotency_index(&DMatrix::zeros(2, 2), 1e-9), Some(1));
        assert_eq!(nilpotency_index(&DMatrix::identity(2, 2), 1e-9), None);
    }

    #[test]
    fn decouple_source_with_identity_transform() {
        let c = m(2, &[1.0, 0.0, 0.0, 0.0]);
        let g = DMatrix::identity(2, 2);
        let d = weierstrass(&c, &g, PencilOptions::default()).unwrap();
        let src = Sinusoid::new(DVector::from_vec(vec![3.0, 4.0]), DVector::from_vec(vec![5.0, 6.0]), 2.0);
        let split = d.decouple_source(&src);
        let pb_c = &d.p * &src.cos_amp;
        assert_eq!(split.differential.cos_amp[0], pb_c[0]);
        assert_eq!(split.algebraic.cos_amp[0], pb_c[1]);
        let zero = d.decouple_source(&Sinusoid::zeros(2, 2.0));
        assert_eq!(zero.algebraic.amplitude_scale(), 0.0);
    }
}
