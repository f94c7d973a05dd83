//! Phase-exact n-qubit Pauli strings, state vectors, and the dense-matrix
//! oracle used to verify them.
//!
//! A Pauli string is stored as two bit masks with the convention
//! `Y = i * X * Z`: `x_mask` marks bit-flip action, `z_mask` marks phase
//! action, and a qubit carrying both is a Y factor. Qubit 0 is the
//! *leftmost* tensor factor, i.e. the most significant bit of a basis
//! index. Strings render as text over `{I, X, Y, Z}` with qubit 0 first
//! (e.g. `"ZXIIY"`), which is the form used in config and CSV files.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::RngCore;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest qubit count the dense oracle will materialize (64 x 64).
pub const DENSE_ORACLE_MAX_QUBITS: usize = 6;

/// Single-qubit Pauli factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    I,
    X,
    Y,
    Z,
}

impl Factor {
    pub fn to_char(self) -> char {
        match self {
            Factor::I => 'I',
            Factor::X => 'X',
            Factor::Y => 'Y',
            Factor::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Factor::I),
            'X' => Some(Factor::X),
            'Y' => Some(Factor::Y),
            'Z' => Some(Factor::Z),
            _ => None,
        }
    }

    fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Factor::I => [[l, o], [o, l]],
            Factor::X => [[o, l], [l, o]],
            Factor::Y => [[o, -i], [i, o]],
            Factor::Z => [[l, o], [o, -l]],
        }
    }
}

/// n-qubit tensor product of Pauli factors.
///
/// Hermitian, unitary, squares to the identity; operator norm exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x_mask: u64,
    z_mask: u64,
}

impl PauliString {
    /// Build from per-qubit factors, qubit 0 first.
    pub fn new(factors: &[Factor]) -> Result<Self> {
        let n = factors.len();
        if n == 0 || n > 63 {
            return Err(Error::InvalidArgument(format!(
                "pauli string length must be in 1..=63, got {n}"
            )));
        }
        let mut x_mask = 0u64;
        let mut z_mask = 0u64;
        for (q, f) in factors.iter().enumerate() {
            let bit = 1u64 << (n - 1 - q);
            match f {
                Factor::I => {}
                Factor::X => x_mask |= bit,
                Factor::Y => {
                    x_mask |= bit;
                    z_mask |= bit;
                }
                Factor::Z => z_mask |= bit,
            }
        }
        Ok(Self {
            n_qubits: n,
            x_mask,
            z_mask,
        })
    }

    /// All-identity string (valid as an observable, never as a generator).
    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(&vec![Factor::I; n_qubits])
    }

    /// Single non-identity factor at `qubit`, identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, f: Factor) -> Result<Self> {
        if qubit >= n_qubits {
            return Err(Error::InvalidArgument(format!(
                "qubit {qubit} out of range for {n_qubits} qubits"
            )));
        }
        let mut factors = vec![Factor::I; n_qubits];
        factors[qubit] = f;
        Self::new(&factors)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn factor(&self, qubit: usize) -> Factor {
        let bit = 1u64 << (self.n_qubits - 1 - qubit);
        match (self.x_mask & bit != 0, self.z_mask & bit != 0) {
            (false, false) => Factor::I,
            (true, false) => Factor::X,
            (true, true) => Factor::Y,
            (false, true) => Factor::Z,
        }
    }

    pub fn factors(&self) -> Vec<Factor> {
        (0..self.n_qubits).map(|q| self.factor(q)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// Number of Y factors; fixes the global phase `i^num_y` of the
    /// symplectic decomposition `P = i^num_y * X_part * Z_part`.
    pub fn num_y(&self) -> u32 {
        (self.x_mask & self.z_mask).count_ones()
    }

    pub(crate) fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub(crate) fn z_mask(&self) -> u64 {
        self.z_mask
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.factor(q).to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors: Option<Vec<Factor>> = s.chars().map(Factor::from_char).collect();
        let factors = factors.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "pauli string {s:?} contains characters outside {{I,X,Y,Z}}"
            ))
        })?;
        Self::new(&factors)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Dense 2^n complex amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state |0...0>.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 30 {
            return Err(Error::InvalidArgument(format!(
                "state vector qubit count must be in 1..=30, got {n_qubits}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1usize << n_qubits,
                got: amps.len(),
                context: "state vector amplitudes",
            });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Unit phase i^k.
#[inline]
fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Apply `P` to the state: each amplitude at index `j` moves to `j ^ x_mask`
/// with phase `i^num_y * (-1)^popcount(j & z_mask)`.
pub fn apply_pauli(p: &PauliString, s: &StateVector) -> Result<StateVector> {
    if p.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: p.n_qubits(),
            got: s.n_qubits(),
            context: "apply_pauli qubit counts",
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); s.dim()];
    apply_pauli_kernel(p.x_mask(), p.z_mask(), p.num_y(), &s.amps, &mut out);
    let result = StateVector {
        n_qubits: s.n_qubits,
        amps: out,
    };
    debug_assert!((result.norm_sqr() - s.norm_sqr()).abs() < 1e-10);
    Ok(result)
}

pub(crate) fn apply_pauli_kernel(
    x_mask: u64,
    z_mask: u64,
    num_y: u32,
    input: &[Complex64],
    out: &mut [Complex64],
) {
    let phase = i_pow(num_y);
    for (i, slot) in out.iter_mut().enumerate() {
        let src = (i as u64 ^ x_mask) as usize;
        let sgn = 1.0 - 2.0 * ((src as u64 & z_mask).count_ones() & 1) as f64;
        *slot = phase * sgn * input[src];
    }
}

/// Apply `exp(-i theta P) = cos(theta) I - i sin(theta) P` in one pass.
pub fn apply_exp_pauli(p: &PauliString, theta: f64, s: &StateVector) -> Result<StateVector> {
    if p.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: p.n_qubits(),
            got: s.n_qubits(),
            context: "apply_exp_pauli qubit counts",
        });
    }
    let mut out = s.clone();
    apply_exp_pauli_inplace(p, theta, &mut out.amps);
    debug_assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-10);
    Ok(out)
}

pub(crate) fn apply_exp_pauli_inplace(p: &PauliString, theta: f64, amps: &mut [Complex64]) {
    let (c, s) = (theta.cos(), theta.sin());
    apply_exp_kernel(p.x_mask(), p.z_mask(), p.num_y(), c, s, amps);
}

/// In-place kernel for `cos * amps - i * sin * (P amps)`.
///
/// The per-index phase of a Pauli is always one of {1, i, -1, -i}, so the
/// off-diagonal coefficient `-i * sin * i^num_y` is either purely real or
/// purely imaginary; the two loop bodies below specialize accordingly.
pub(crate) fn apply_exp_kernel(
    x_mask: u64,
    z_mask: u64,
    num_y: u32,
    cos: f64,
    sin: f64,
    amps: &mut [Complex64],
) {
    // -i * i^num_y = i^(num_y + 3)
    let w = i_pow(num_y + 3) * sin;
    // sign relating the z-parity of paired indices: (-1)^popcount(x & z)
    let pair_sign = if num_y & 1 == 0 { 1.0 } else { -1.0 };

    if x_mask == 0 {
        // Diagonal string: amps[i] *= cos + w * sgn(i), with w = -i sin.
        for (i, a) in amps.iter_mut().enumerate() {
            let sgn = 1.0 - 2.0 * ((i as u64 & z_mask).count_ones() & 1) as f64;
            let m_im = w.im * sgn;
            *a = Complex64::new(cos * a.re - m_im * a.im, cos * a.im + m_im * a.re);
        }
        return;
    }

    if w.im == 0.0 {
        // w real (odd number of Y factors).
        let wr = w.re;
        for i in 0..amps.len() {
            let j = i ^ x_mask as usize;
            if i < j {
                let sgn_i = 1.0 - 2.0 * ((i as u64 & z_mask).count_ones() & 1) as f64;
                let sgn_j = sgn_i * pair_sign;
                let a = amps[i];
                let b = amps[j];
                let wj = wr * sgn_j;
                let wi = wr * sgn_i;
                amps[i] = Complex64::new(cos * a.re + wj * b.re, cos * a.im + wj * b.im);
                amps[j] = Complex64::new(cos * b.re + wi * a.re, cos * b.im + wi * a.im);
            }
        }
    } else {
        // w imaginary (even number of Y factors).
        let wm = w.im;
        for i in 0..amps.len() {
            let j = i ^ x_mask as usize;
            if i < j {
                let sgn_i = 1.0 - 2.0 * ((i as u64 & z_mask).count_ones() & 1) as f64;
                let sgn_j = sgn_i * pair_sign;
                let a = amps[i];
                let b = amps[j];
                let mj = wm * sgn_j;
                let mi = wm * sgn_i;
                amps[i] = Complex64::new(cos * a.re - mj * b.im, cos * a.im + mj * b.re);
                amps[j] = Complex64::new(cos * b.re - mi * a.im, cos * b.im + mi * a.re);
            }
        }
    }
}

/// `<amps| P |amps>`; the imaginary part is returned so callers can assert
/// it vanishes.
pub(crate) fn expectation_kernel(p: &PauliString, amps: &[Complex64]) -> Complex64 {
    let x_mask = p.x_mask() as usize;
    let z_mask = p.z_mask();
    let mut acc_re = 0.0;
    let mut acc_im = 0.0;
    for (i, a) in amps.iter().enumerate() {
        let j = i ^ x_mask;
        let sgn = 1.0 - 2.0 * ((j as u64 & z_mask).count_ones() & 1) as f64;
        let b = amps[j];
        // sgn * conj(a) * b
        acc_re += sgn * (a.re * b.re + a.im * b.im);
        acc_im += sgn * (a.re * b.im - a.im * b.re);
    }
    i_pow(p.num_y()) * Complex64::new(acc_re, acc_im)
}

/// Expectation of `P` in the given state.
pub fn expectation(p: &PauliString, s: &StateVector) -> Result<f64> {
    if p.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: p.n_qubits(),
            got: s.n_qubits(),
            context: "expectation qubit counts",
        });
    }
    let e = expectation_kernel(p, &s.amps);
    assert!(
        e.im.abs() <= 1e-10,
        "expectation of a Hermitian Pauli came out complex: im = {}",
        e.im
    );
    Ok(e.re)
}

/// Draw a uniform non-identity Pauli string on `n` qubits.
pub fn sample_pauli_string(n: usize, rng: &mut impl RngCore) -> Result<PauliString> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "pauli sampling needs n >= 1".to_string(),
        ));
    }
    // Rejection on the all-identity draw keeps the remaining 4^n - 1
    // strings exactly uniform.
    loop {
        let factors: Vec<Factor> = (0..n)
            .map(|_| match rand::Rng::random_range(rng, 0..4u8) {
                0 => Factor::I,
                1 => Factor::X,
                2 => Factor::Y,
                _ => Factor::Z,
            })
            .collect();
        if factors.iter().any(|f| *f != Factor::I) {
            return PauliString::new(&factors);
        }
    }
}

/// Small dense complex matrix, row-major. Oracle-grade code: clarity over
/// speed, dimensions capped at 64.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.dim + col] = v;
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let d = self.dim * other.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self.get(i, j);
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        out.set(i * other.dim + k, j * other.dim + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        let mut out = CMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for k in 0..self.dim {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..self.dim {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.get(i, j) * v[j])
                    .sum::<Complex64>()
            })
            .collect()
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, self.get(j, i).conj());
            }
        }
        out
    }
}

/// Dense 2^n x 2^n matrix of the string: Kronecker product of the factor
/// matrices with qubit 0 as the leftmost (most significant) factor.
pub fn dense_matrix(p: &PauliString) -> Result<CMatrix> {
    if p.n_qubits() > DENSE_ORACLE_MAX_QUBITS {
        return Err(Error::OracleSize {
            limit: DENSE_ORACLE_MAX_QUBITS,
            got: p.n_qubits(),
            context: "dense_matrix",
        });
    }
    let mut acc = CMatrix::identity(1);
    for q in 0..p.n_qubits() {
        let f = p.factor(q).matrix();
        let mut fm = CMatrix::zeros(2);
        for (i, row) in f.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                fm.set(i, j, *v);
            }
        }
        acc = acc.kron(&fm);
    }
    Ok(acc)
}

/// Dense `exp(-i theta P) = cos(theta) I - i sin(theta) P` (P squares to
/// the identity, so the series collapses to this form).
pub fn dense_exp_pauli(p: &PauliString, theta: f64) -> Result<CMatrix> {
    let pd = dense_matrix(p)?;
    let id = CMatrix::identity(pd.dim());
    Ok(id
        .scale(Complex64::new(theta.cos(), 0.0))
        .add(&pd.scale(Complex64::new(0.0, -theta.sin()))))
}
