//! Dense Hermitian linear algebra on `2^n × 2^n` matrices.
//!
//! Everything goes through a Hermitian eigendecomposition. Inputs are
//! re-symmetrized as `(A + A†)/2` first so that rounding asymmetry built up by
//! long drift sequences never reaches the eigensolver.
//!
//! [`trace_distance`] is the full trace norm `‖a − b‖₁` with range `[0, 2]`,
//! not the half-norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::pauli::{CMatrix, CVector, PauliWord};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const DEFAULT_MODULAR_FLOOR: f64 = 1e-14;

fn qubits_for_dim(d: usize) -> Result<usize> {
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("dimension {d} is not a power of two")));
    }
    Ok(d.trailing_zeros() as usize)
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(())
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut dev = 0.0f64;
    for k in 0..d {
        for i in k..d {
            dev = dev.max((m[(i, k)] - m[(k, i)].conj()).norm());
        }
    }
    dev
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

/// Ascending eigenvalues and matching eigenvector columns of a Hermitian matrix.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `U diag(f(λ)) U†`.
fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let scaled = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::from(f(v))));
    let mut left = vectors.clone();
    for (c, s) in scaled.iter().enumerate() {
        left.column_mut(c).scale_mut(s.re);
    }
    left * vectors.adjoint()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    n: usize,
    data: CMatrix,
}

impl HermitianOperator {
    pub fn new(data: CMatrix) -> Result<Self> {
        check_square(&data)?;
        let n = qubits_for_dim(data.nrows())?;
        let deviation = hermitian_deviation(&data);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        let d = 1usize << n;
        Self {
            n,
            data: CMatrix::zeros(d, d),
        }
    }

    /// `Σ_j c_j σ_j`.
    pub fn from_terms<'a>(n: usize, terms: impl IntoIterator<Item = (&'a PauliWord, f64)>) -> Result<Self> {
        let mut op = Self::zeros(n);
        for (word, coeff) in terms {
            if word.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: word.num_qubits(),
                });
            }
            word.add_scaled_into(coeff, &mut op.data)?;
        }
        Ok(op)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        eigh(&self.data)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.data)
    }

    /// Largest absolute eigenvalue.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: CMatrix,
}

impl DensityMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(data)?;
        rho.validate(HERMITIAN_TOL)?;
        Ok(rho)
    }

    /// Checks shape only. Used on hot paths where validity follows from construction.
    pub fn from_matrix_unchecked(data: CMatrix) -> Result<Self> {
        check_square(&data)?;
        let n = qubits_for_dim(data.nrows())?;
        Ok(Self { n, data })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        Self {
            n,
            data: CMatrix::identity(d, d) * Complex64::from(1.0 / d as f64),
        }
    }

    /// `A A† / tr(A A†)` for `A` with entries uniform on the unit square.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let d = 1usize << n;
        let a = CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        Self { n, data: m / tr }
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = psi / Complex64::from(norm);
        Self::from_matrix_unchecked(&v * v.adjoint())
    }

    /// Diagonal state from basis probabilities.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(probs.len(), probs.iter().map(|&p| Complex64::from(p)));
        Self::new(DMatrix::from_diagonal(&v))
    }

    /// Checks Hermiticity, unit trace and positivity, all within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let deviation = hermitian_deviation(&self.data);
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = self.data.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.data)
    }

    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        eigh(&self.data)
    }

    /// Row-major `(re, im)` pairs.
    pub fn to_row_major(&self) -> Vec<[f64; 2]> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for k in 0..d {
                let z = self.data[(i, k)];
                out.push([z.re, z.im]);
            }
        }
        out
    }
}

pub fn expm_hermitian(a: &HermitianOperator) -> CMatrix {
    let (values, vectors) = a.eigh();
    spectral_map(&values, &vectors, f64::exp)
}

/// `e^{−βH}/Z`, with the spectrum shifted by its minimum before exponentiating.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> DensityMatrix {
    let (values, vectors) = h.eigh();
    let min = values.first().copied().unwrap_or(0.0);
    let z: f64 = values.iter().map(|&v| (-beta * (v - min)).exp()).sum();
    let data = spectral_map(&values, &vectors, |v| (-beta * (v - min)).exp() / z);
    DensityMatrix { n: h.n, data }
}

/// `log tr e^{−βH}`.
pub fn log_partition(h: &HermitianOperator, beta: f64) -> f64 {
    log_partition_from_spectrum(&h.eigenvalues(), beta)
}

pub fn log_partition_from_spectrum(values: &[f64], beta: f64) -> f64 {
    log_sum_exp(values.iter().map(|&v| -beta * v))
}

/// Full trace norm of `a − b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = &a.data - &b.data;
    Ok(eigvalsh(&diff).iter().map(|v| v.abs()).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModularHamiltonian {
    /// `−log ρ` on the retained eigenspace, zero on the excluded one.
    pub operator: HermitianOperator,
    /// Retained levels `−log p_i`, ascending.
    pub levels: Vec<f64>,
    pub excluded: usize,
}

pub fn modular_hamiltonian(rho: &DensityMatrix, floor: f64) -> Result<ModularHamiltonian> {
    let (values, vectors) = rho.eigh();
    let excluded = values.iter().filter(|&&p| p < floor).count();
    if excluded == values.len() {
        return Err(Error::AllLevelsBelowFloor { floor });
    }
    let data = spectral_map(&values, &vectors, |p| if p < floor { 0.0 } else { -p.ln() });
    let mut levels: Vec<f64> = values.iter().filter(|&&p| p >= floor).map(|p| -p.ln()).collect();
    levels.sort_by(f64::total_cmp);
    Ok(ModularHamiltonian {
        operator: HermitianOperator { n: rho.n, data },
        levels,
        excluded,
    })
}
