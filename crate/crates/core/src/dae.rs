//! Linear DAEs `C x' + G x = b(t)` with single-tone sinusoidal excitation,
//! plus synthetic benchmark systems of known differentiation index.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DaeError;
use crate::linalg::block_diag;

/// `cos_amp * cos(omega t) + sin_amp * sin(omega t)`.
///
/// Used both for source vectors and for steady-state responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinusoid {
    pub cos_amp: DVector<f64>,
    pub sin_amp: DVector<f64>,
    pub omega: f64,
}

impl Sinusoid {
    pub fn new(cos_amp: DVector<f64>, sin_amp: DVector<f64>, omega: f64) -> Self {
        assert_eq!(
            cos_amp.len(),
            sin_amp.len(),
            "cosine and sine amplitudes differ in length"
        );
        Self {
            cos_amp,
            sin_amp,
            omega,
        }
    }

    pub fn zeros(n: usize, omega: f64) -> Self {
        Self::new(DVector::zeros(n), DVector::zeros(n), omega)
    }

    pub fn dim(&self) -> usize {
        self.cos_amp.len()
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        let (s, c) = (self.omega * t).sin_cos();
        &self.cos_amp * c + &self.sin_amp * s
    }

    /// Amplitudes of the `i`-th derivative. Each derivative maps
    /// `(c, s) -> (omega s, -omega c)`; four of them close the cycle.
    pub fn derivative_amplitudes(&self, i: usize) -> (DVector<f64>, DVector<f64>) {
        let scale = self.omega.powi(i as i32);
        match i % 4 {
            0 => (&self.cos_amp * scale, &self.sin_amp * scale),
            1 => (&self.sin_amp * scale, &self.cos_amp * -scale),
            2 => (&self.cos_amp * -scale, &self.sin_amp * -scale),
            _ => (&self.sin_amp * -scale, &self.cos_amp * scale),
        }
    }

    pub fn derivative(&self, i: usize, t: f64) -> DVector<f64> {
        let (c_amp, s_amp) = self.derivative_amplitudes(i);
        let (s, c) = (self.omega * t).sin_cos();
        c_amp * c + s_amp * s
    }

    /// The `i`-th derivative as a sinusoid in its own right.
    pub fn differentiated(&self, i: usize) -> Sinusoid {
        let (c, s) = self.derivative_amplitudes(i);
        Sinusoid::new(c, s, self.omega)
    }

    /// Applies a linear map to both amplitude vectors.
    pub fn mapped(&self, m: &DMatrix<f64>) -> Sinusoid {
        Sinusoid::new(m * &self.cos_amp, m * &self.sin_amp, self.omega)
    }

    pub fn amplitude_scale(&self) -> f64 {
        self.cos_amp.amax().max(self.sin_amp.amax())
    }
}

/// `C x' + G x = b(t)` with `b` sinusoidal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDae {
    c: DMatrix<f64>,
    g: DMatrix<f64>,
    source: Sinusoid,
}

impl LinearDae {
    pub fn new(c: DMatrix<f64>, g: DMatrix<f64>, source: Sinusoid) -> Result<Self, DaeError> {
        let n = c.nrows();
        if n == 0 {
            return Err(DaeError::Dimension("system must have at least one unknown".into()));
        }
        if c.shape() != (n, n) || g.shape() != (n, n) {
            return Err(DaeError::Dimension(format!(
                "C is {}x{}, G is {}x{}; both must be square and equal",
                c.nrows(),
                c.ncols(),
                g.nrows(),
                g.ncols()
            )));
        }
        if source.dim() != n {
            return Err(DaeError::Dimension(format!(
                "source has {} entries, system has {n} unknowns",
                source.dim()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(DaeError::NonFinite("C"));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(DaeError::NonFinite("G"));
        }
        if source.cos_amp.iter().chain(source.sin_amp.iter()).any(|v| !v.is_finite()) {
            return Err(DaeError::NonFinite("source amplitudes"));
        }
        if !(source.omega.is_finite() && source.omega >= 0.0) {
            return Err(DaeError::NonFinite("omega (must be finite and >= 0)"));
        }
        Ok(Self { c, g, source })
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn source(&self) -> &Sinusoid {
        &self.source
    }

    pub fn omega(&self) -> f64 {
        self.source.omega
    }

    pub fn source_value(&self, t: f64) -> DVector<f64> {
        self.source.value(t)
    }

    pub fn source_derivative(&self, i: usize, t: f64) -> DVector<f64> {
        self.source.derivative(i, t)
    }

    /// `C x' + G x - b(t)`.
    pub fn residual(&self, x: &DVector<f64>, dx: &DVector<f64>, t: f64) -> DVector<f64> {
        &self.c * dx + &self.g * x - self.source.value(t)
    }

    pub fn from_json(text: &str) -> Result<Self, DaeError> {
        let raw: DaeJson = serde_json::from_str(text)?;
        raw.into_dae()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DaeJson::from(self)).expect("plain numeric data serializes")
    }
}

/// On-disk system format, row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DaeJson {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub b_c: Vec<f64>,
    pub b_s: Vec<f64>,
    pub omega: f64,
}

impl DaeJson {
    pub fn into_dae(self) -> Result<LinearDae, DaeError> {
        let n = self.n;
        let c = rows_to_matrix(&self.c, n, "C")?;
        let g = rows_to_matrix(&self.g, n, "G")?;
        if self.b_c.len() != n || self.b_s.len() != n {
            return Err(DaeError::Dimension(format!(
                "b_c/b_s must have N = {n} entries (got {} and {})",
                self.b_c.len(),
                self.b_s.len()
            )));
        }
        let source = Sinusoid::new(
            DVector::from_vec(self.b_c),
            DVector::from_vec(self.b_s),
            self.omega,
        );
        LinearDae::new(c, g, source)
    }
}

impl From<&LinearDae> for DaeJson {
    fn from(dae: &LinearDae) -> Self {
        Self {
            n: dae.dim(),
            c: matrix_to_rows(&dae.c),
            g: matrix_to_rows(&dae.g),
            b_c: dae.source.cos_amp.iter().copied().collect(),
            b_s: dae.source.sin_amp.iter().copied().collect(),
            omega: dae.source.omega,
        }
    }
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize, name: &str) -> Result<DMatrix<f64>, DaeError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(DaeError::Dimension(format!("{name} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Synthetic benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinKind {
    /// Nonsingular `C`.
    Ode,
    Index1,
    Index2,
    Index3,
    /// No differential part at all (`r = 0`), nilpotency index 1 to 3.
    Algebraic(usize),
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 7] = [
        BuiltinKind::Ode,
        BuiltinKind::Index1,
        BuiltinKind::Index2,
        BuiltinKind::Index3,
        BuiltinKind::Algebraic(1),
        BuiltinKind::Algebraic(2),
        BuiltinKind::Algebraic(3),
    ];

    pub fn declared_index(self) -> usize {
        match self {
            BuiltinKind::Ode => 0,
            BuiltinKind::Index1 => 1,
            BuiltinKind::Index2 => 2,
            BuiltinKind::Index3 => 3,
            BuiltinKind::Algebraic(k) => k,
        }
    }

    /// `(r, s)`: sizes of the differential and algebraic blocks.
    fn block_sizes(self) -> (usize, usize) {
        match self {
            BuiltinKind::Ode => (3, 0),
            BuiltinKind::Index1 => (2, 2),
            BuiltinKind::Index2 => (2, 2),
            BuiltinKind::Index3 => (2, 3),
            BuiltinKind::Algebraic(k) => (0, k),
        }
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinKind::Ode => f.write_str("ode"),
            BuiltinKind::Index1 => f.write_str("index1"),
            BuiltinKind::Index2 => f.write_str("index2"),
            BuiltinKind::Index3 => f.write_str("index3"),
            BuiltinKind::Algebraic(k) => write!(f, "alg{k}"),
        }
    }
}

impl FromStr for BuiltinKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ode" => Ok(BuiltinKind::Ode),
            "index1" => Ok(BuiltinKind::Index1),
            "index2" => Ok(BuiltinKind::Index2),
            "index3" => Ok(BuiltinKind::Index3),
            "alg1" => Ok(BuiltinKind::Algebraic(1)),
            "alg2" => Ok(BuiltinKind::Algebraic(2)),
            "alg3" => Ok(BuiltinKind::Algebraic(3)),
            other => Err(format!(
                "unknown builtin '{other}' (expected ode, index1, index2, index3, alg1, alg2 or alg3)"
            )),
        }
    }
}

/// A synthesized system together with the transformation that hid its
/// canonical structure: `C = L diag(I, N) R`, `G = L diag(J, I) R`.
#[derive(Debug, Clone)]
pub struct BenchmarkSystem {
    pub dae: LinearDae,
    pub kind: BuiltinKind,
    pub declared_index: usize,
    pub construction_seed: u64,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

/// Source frequency of every builtin, rad/s.
pub const BUILTIN_OMEGA: f64 = 1.0;

/// Diagonal of the differential block (`z_D' = -J z_D + u_D`).
const BUILTIN_J: [f64; 3] = [0.5, 2.0, 1.0];

/// Singular values of the conjugating factors span `[1, 4]`.
const CONJUGATOR_SPREAD: f64 = 4.0;

pub fn builtin_system(kind: BuiltinKind, seed: u64) -> BenchmarkSystem {
    let (r, s) = kind.block_sizes();
    let n = r + s;
    let nilpotency = kind.declared_index();

    let j = DMatrix::from_diagonal(&DVector::from_column_slice(&BUILTIN_J[..r]));
    let mut nil = DMatrix::zeros(s, s);
    for d in 0..nilpotency.saturating_sub(1) {
        nil[(d, d + 1)] = 1.0;
    }
    let c0 = block_diag(&DMatrix::identity(r, r), &nil);
    let g0 = block_diag(&j, &DMatrix::identity(s, s));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = well_conditioned(n, &mut rng);
    let right = well_conditioned(n, &mut rng);
    // Magnitudes in [0.5, 1] keep every canonical component active.
    let amplitude = |rng: &mut ChaCha8Rng| {
        let mag = rng.gen_range(0.5..1.0);
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let u_c = DVector::from_fn(n, |_, _| amplitude(&mut rng));
    let u_s = DVector::from_fn(n, |_, _| amplitude(&mut rng));

    let c = &left * c0 * &right;
    let g = &left * g0 * &right;
    let source = Sinusoid::new(&left * u_c, &left * u_s, BUILTIN_OMEGA);
    let dae = LinearDae::new(c, g, source).expect("builtin dimensions are consistent");
    BenchmarkSystem {
        dae,
        kind,
        declared_index: nilpotency,
        construction_seed: seed,
        left,
        right,
    }
}

/// `U diag(sigma) V^T` with Householder-product orthogonal factors and
/// `sigma` geometrically spaced in `[1, CONJUGATOR_SPREAD]`.
fn well_conditioned(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let u = random_orthogonal(n, rng);
    let v = random_orthogonal(n, rng);
    let sigma = DVector::from_fn(n, |i, _| {
        if n == 1 {
            1.0
        } else {
            CONJUGATOR_SPREAD.powf(i as f64 / (n - 1) as f64)
        }
    });
    u * DMatrix::from_diagonal(&sigma) * v.transpose()
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut q = DMatrix::identity(n, n);
    for _ in 0..n {
        let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = v.norm();
        if norm < 1e-3 {
            continue;
        }
        v /= norm;
        let reflector = DMatrix::identity(n, n) - 2.0 * &v * v.transpose();
        q *= reflector;
    }
    q
}
