//! Expectation-value evaluation f(x; theta) = <psi(x)| U'(theta) O U(theta) |psi(x)>
//! and its exact per-coordinate derivatives.
//!
//! `U(theta)` is the ordered product of `exp(-i theta_j G_j)` factors,
//! applied to the input state for j = 1..L in generator order. Inputs are
//! encoded as the product state `RY(x) applied to every qubit of |0...0>`,
//! so each qubit carries amplitudes `(cos(x/2), sin(x/2))`.
//!
//! The estimator calls `f` around 10^9 times per experiment, so the hot
//! path is split into pieces that hoist everything reusable out of the
//! inner loop: [`encode_into`] once per input value, [`PreparedCircuit`]
//! once per parameter vector (trig values per gate), and a worker-local
//! [`Evaluator`] whose scratch buffer is reused across calls.

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{
    apply_exp_kernel, dense_exp_pauli, dense_matrix, sample_pauli_string, CMatrix, Factor,
    PauliString, StateVector,
};
use crate::rng;

/// Input-encoding scheme. Only the RY product state is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    #[serde(rename = "ry-product")]
    RyProduct,
}

/// A parameterized circuit: generators `G_1..G_L`, observable `O`, and the
/// input encoding. Immutable once built; shareable across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitModel {
    n_qubits: usize,
    generators: Vec<PauliString>,
    observable: PauliString,
    encoding: Encoding,
}

impl CircuitModel {
    pub fn new(
        n_qubits: usize,
        generators: Vec<PauliString>,
        observable: PauliString,
        encoding: Encoding,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("n_qubits must be >= 1".into()));
        }
        if observable.n_qubits() != n_qubits {
            return Err(Error::DimensionMismatch {
                expected: n_qubits,
                got: observable.n_qubits(),
                context: "observable qubit count",
            });
        }
        for g in &generators {
            if g.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    got: g.n_qubits(),
                    context: "generator qubit count",
                });
            }
            if g.is_identity() {
                return Err(Error::InvalidArgument(
                    "generators must not be the all-identity string".into(),
                ));
            }
        }
        Ok(Self {
            n_qubits,
            generators,
            observable,
            encoding,
        })
    }

    /// Model with generators drawn uniformly from the non-identity strings
    /// and observable Z on qubit 0, as used throughout the experiments.
    pub fn sampled(n_qubits: usize, l: usize, rng: &mut impl RngCore) -> Result<Self> {
        let generators: Result<Vec<_>> = (0..l)
            .map(|_| sample_pauli_string(n_qubits, rng))
            .collect();
        Self::new(
            n_qubits,
            generators?,
            PauliString::single(n_qubits, 0, Factor::Z)?,
            Encoding::RyProduct,
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of parameters L. Zero means U is the identity.
    pub fn num_parameters(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn observable(&self) -> &PauliString {
        &self.observable
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.generators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.generators.len(),
                got: theta.len(),
                context: "theta length",
            });
        }
        Ok(())
    }
}

/// Encode a scalar input as the RY product state.
pub fn encode_input(m: &CircuitModel, x: f64) -> StateVector {
    let mut amps = Vec::new();
    encode_into(m.n_qubits, x, &mut amps);
    StateVector::from_amplitudes(m.n_qubits, amps).expect("encode dimensions")
}

/// Fill `out` with the RY product-state amplitudes for input `x`:
/// the amplitude of basis index `j` is `cos(x/2)^(n-w) * sin(x/2)^w`
/// with `w = popcount(j)`.
pub fn encode_into(n_qubits: usize, x: f64, out: &mut Vec<Complex64>) {
    let dim = 1usize << n_qubits;
    let c = (x / 2.0).cos();
    let s = (x / 2.0).sin();
    let mut c_pow = [0.0f64; 31];
    let mut s_pow = [0.0f64; 31];
    c_pow[0] = 1.0;
    s_pow[0] = 1.0;
    for k in 1..=n_qubits {
        c_pow[k] = c_pow[k - 1] * c;
        s_pow[k] = s_pow[k - 1] * s;
    }
    out.clear();
    out.extend((0..dim).map(|j| {
        let w = (j as u64).count_ones() as usize;
        Complex64::new(c_pow[n_qubits - w] * s_pow[w], 0.0)
    }));
}

#[derive(Debug, Clone, Copy)]
struct PreparedGate {
    x_mask: u64,
    z_mask: u64,
    num_y: u32,
    cos: f64,
    sin: f64,
}

/// A circuit with its per-gate trig values hoisted out of the inner loop.
///
/// `set_theta` refreshes the trig values without reallocating, so a worker
/// can sweep thousands of parameter vectors against the same model.
#[derive(Debug, Clone)]
pub struct PreparedCircuit {
    n_qubits: usize,
    gates: Vec<PreparedGate>,
    obs_x: u64,
    obs_z: u64,
    obs_num_y: u32,
}

impl PreparedCircuit {
    pub fn new(m: &CircuitModel) -> Self {
        let gates = m
            .generators
            .iter()
            .map(|g| PreparedGate {
                x_mask: g.x_mask(),
                z_mask: g.z_mask(),
                num_y: g.num_y(),
                cos: 1.0,
                sin: 0.0,
            })
            .collect();
        Self {
            n_qubits: m.n_qubits,
            gates,
            obs_x: m.observable.x_mask(),
            obs_z: m.observable.z_mask(),
            obs_num_y: m.observable.num_y(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.gates.len()
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.gates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.gates.len(),
                got: theta.len(),
                context: "theta length",
            });
        }
        for (g, &t) in self.gates.iter_mut().zip(theta) {
            g.cos = t.cos();
            g.sin = t.sin();
        }
        Ok(())
    }
}

/// Worker-local scratch for expectation evaluation. Not shared between
/// threads; each worker owns one.
#[derive(Debug, Default, Clone)]
pub struct Evaluator {
    amps: Vec<Complex64>,
    theta_buf: Vec<f64>,
}

impl Evaluator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Hot path: run a prepared circuit on pre-encoded input amplitudes.
    ///
    /// Asserts the Hermiticity and spectrum invariants on every call:
    /// the expectation must be real to 1e-10 and lie in [-1, 1] + 1e-10.
    pub fn run(&mut self, pc: &PreparedCircuit, encoded: &[Complex64]) -> f64 {
        debug_assert_eq!(encoded.len(), 1usize << pc.n_qubits);
        self.amps.clear();
        self.amps.extend_from_slice(encoded);
        for g in &pc.gates {
            apply_exp_kernel(g.x_mask, g.z_mask, g.num_y, g.cos, g.sin, &mut self.amps);
        }
        let mut acc_re = 0.0;
        let mut acc_im = 0.0;
        let obs_x = pc.obs_x as usize;
        for (i, a) in self.amps.iter().enumerate() {
            let j = i ^ obs_x;
            let sgn = 1.0 - 2.0 * ((j as u64 & pc.obs_z).count_ones() & 1) as f64;
            let b = self.amps[j];
            acc_re += sgn * (a.re * b.re + a.im * b.im);
            acc_im += sgn * (a.re * b.im - a.im * b.re);
        }
        let e = match pc.obs_num_y % 4 {
            0 => Complex64::new(acc_re, acc_im),
            1 => Complex64::new(-acc_im, acc_re),
            2 => Complex64::new(-acc_re, -acc_im),
            _ => Complex64::new(acc_im, -acc_re),
        };
        assert!(
            e.im.abs() <= 1e-10,
            "expectation must be real, got imaginary part {}",
            e.im
        );
        assert!(
            e.re.abs() <= 1.0 + 1e-10,
            "Pauli expectation out of [-1, 1]: {}",
            e.re
        );
        e.re
    }

    /// Evaluate f(x; theta), encoding the input on the fly.
    pub fn evaluate(&mut self, m: &CircuitModel, x: f64, theta: &[f64]) -> Result<f64> {
        m.check_theta(theta)?;
        let mut pc = PreparedCircuit::new(m);
        pc.set_theta(theta)?;
        let mut encoded = Vec::new();
        encode_into(m.n_qubits, x, &mut encoded);
        Ok(self.run(&pc, &encoded))
    }

    /// Exact gradient via the parameter-shift identity
    /// `df/dtheta_j = f(theta + pi/4 e_j) - f(theta - pi/4 e_j)`,
    /// which holds because every generator squares to the identity.
    pub fn gradient(&mut self, m: &CircuitModel, x: f64, theta: &[f64]) -> Result<Vec<f64>> {
        m.check_theta(theta)?;
        let mut pc = PreparedCircuit::new(m);
        let mut encoded = Vec::new();
        encode_into(m.n_qubits, x, &mut encoded);
        self.theta_buf.clear();
        self.theta_buf.extend_from_slice(theta);
        let shift = std::f64::consts::FRAC_PI_4;
        let mut grad = Vec::with_capacity(theta.len());
        for j in 0..theta.len() {
            self.theta_buf[j] = theta[j] + shift;
            pc.set_theta(&self.theta_buf)?;
            let plus = self.run(&pc, &encoded);
            self.theta_buf[j] = theta[j] - shift;
            pc.set_theta(&self.theta_buf)?;
            let minus = self.run(&pc, &encoded);
            self.theta_buf[j] = theta[j];
            grad.push(plus - minus);
        }
        Ok(grad)
    }
}

/// Evaluate f(x; theta). Convenience wrapper; allocates per call, so hot
/// loops should hold an [`Evaluator`] instead.
pub fn evaluate(m: &CircuitModel, x: f64, theta: &[f64]) -> Result<f64> {
    Evaluator::new().evaluate(m, x, theta)
}

/// Exact parameter-shift gradient of f at (x, theta).
pub fn gradient(m: &CircuitModel, x: f64, theta: &[f64]) -> Result<Vec<f64>> {
    Evaluator::new().gradient(m, x, theta)
}

/// Empirical certificate for the gradient bounds: the largest gradient
/// norm and largest single partial derivative seen over random samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LipschitzCertificate {
    pub max_grad_norm: f64,
    pub max_abs_partial: f64,
    pub n_samples: usize,
}

/// Sample `(x, theta)` pairs with `x ~ U(0, 2 pi)`, `theta ~ U[0, 2 pi]^L`
/// and record the largest gradient norm. The certified contract is
/// `max_grad_norm <= 2 sqrt(L)` and `max_abs_partial <= 2`, up to 1e-8.
pub fn lipschitz_certificate(
    m: &CircuitModel,
    n_samples: usize,
    rng: &mut impl RngCore,
) -> Result<LipschitzCertificate> {
    if n_samples < 1 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let two_pi = std::f64::consts::TAU;
    let l = m.num_parameters();
    let mut ev = Evaluator::new();
    let mut max_norm: f64 = 0.0;
    let mut max_partial: f64 = 0.0;
    for _ in 0..n_samples {
        let x = rng::uniform(rng, 0.0, two_pi);
        let theta: Vec<f64> = (0..l).map(|_| rng::uniform(rng, 0.0, two_pi)).collect();
        let grad = ev.gradient(m, x, &theta)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        max_norm = max_norm.max(norm);
        for g in &grad {
            max_partial = max_partial.max(g.abs());
        }
    }
    Ok(LipschitzCertificate {
        max_grad_norm: max_norm,
        max_abs_partial: max_partial,
        n_samples,
    })
}

/// Reference evaluation through the dense oracle: build each gate as a
/// full matrix, multiply out, conjugate the observable, take the
/// expectation. Limited to the dense oracle's qubit cap; used by tests and
/// the CLI self-test, never by experiment paths.
pub fn dense_evaluate(m: &CircuitModel, x: f64, theta: &[f64]) -> Result<f64> {
    m.check_theta(theta)?;
    let psi = encode_input(m, x);
    let mut phi = psi.amplitudes().to_vec();
    for (g, &t) in m.generators.iter().zip(theta) {
        let gate: CMatrix = dense_exp_pauli(g, t)?;
        phi = gate.matvec(&phi);
    }
    let obs = dense_matrix(&m.observable)?;
    let obs_phi = obs.matvec(&phi);
    let e: Complex64 = phi.iter().zip(&obs_phi).map(|(a, b)| a.conj() * b).sum();
    assert!(e.im.abs() <= 1e-10);
    Ok(e.re)
}
