//! Dense complex linear algebra over finite-dimensional Hilbert spaces.
//!
//! Joint object-probe spaces use the object factor as the slow index:
//! `|i⟩⊗|a⟩` sits at position `i * d_probe + a`.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Maximum entry deviation for the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Maximum entry deviation of `A†A - I` for the unitary flag.
pub const UNITARY_TOL: f64 = 1e-12;
/// Eigenvalues closer than this are merged into one spectral projector.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Allowed deviation of a state norm from one.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::invalid("state vector must have positive dimension"));
        }
        let v = DVector::from_vec(amps);
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!(
                "state vector not normalized: norm {norm:.3e}"
            )));
        }
        Ok(StateVector { amps: v })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        Self::from_unnormalized(DVector::from_vec(amps))
    }

    pub(crate) fn from_unnormalized(v: DVector<C64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("state vector must have positive dimension"));
        }
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid(
                "cannot normalize a zero or non-finite vector",
            ));
        }
        Ok(StateVector {
            amps: v / C64::from(norm),
        })
    }

    /// Computational basis state `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::invalid(format!(
                "basis index {k} out of range for dim {dim}"
            )));
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[k] = ONE;
        Ok(StateVector { amps: v })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, a: &Operator) -> Result<C64> {
        check_dims(self.dim(), a.dim())?;
        Ok(self.amps.dotc(&(a.matrix() * &self.amps)))
    }

    pub fn kron(&self, other: &StateVector) -> StateVector {
        StateVector {
            amps: self.amps.kronecker(&other.amps),
        }
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude is real
    /// and positive. Ties go to the lowest index.
    pub fn with_fixed_phase(mut self) -> StateVector {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, z) in self.amps.iter().enumerate() {
            let a = z.norm();
            if a > best_abs * (1.0 + 1e-12) {
                best = i;
                best_abs = a;
            }
        }
        if best_abs > 0.0 {
            let phase = self.amps[best].conj() / C64::from(best_abs);
            self.amps *= phase;
            self.amps[best] = C64::new(best_abs, 0.0);
        }
        self
    }
}

/// A square complex matrix with cached Hermitian/unitary flags.
#[derive(Clone, Debug)]
pub struct Operator {
    m: DMatrix<C64>,
    hermitian: OnceLock<bool>,
    unitary: OnceLock<bool>,
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "operator must be square with positive dimension, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        Operator {
            m,
            hermitian: OnceLock::new(),
            unitary: OnceLock::new(),
        }
    }

    /// Builds an operator from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("operator rows must form a square matrix"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::from(x)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::from_element(dim, dim, ZERO))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_matrix_unchecked(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::from(values[i])
            } else {
                ZERO
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim())
            .map(|i| self.m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn adjoint(&self) -> Operator {
        Self::from_matrix_unchecked(self.m.adjoint())
    }

    pub fn scale(&self, c: C64) -> Operator {
        Self::from_matrix_unchecked(&self.m * c)
    }

    /// `max |A - A†|` over entries.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |A†A - I|` over entries.
    pub fn unitary_deviation(&self) -> f64 {
        let g = self.m.adjoint() * &self.m;
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        *self
            .hermitian
            .get_or_init(|| self.hermitian_deviation() <= HERMITIAN_TOL)
    }

    pub fn is_unitary(&self) -> bool {
        *self
            .unitary
            .get_or_init(|| self.unitary_deviation() <= UNITARY_TOL)
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Operator {
        let h = (&self.m + self.m.adjoint()) * C64::from(0.5);
        Self::from_matrix_unchecked(h)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Self::from_matrix_unchecked(self.m.kronecker(&other.m))
    }

    pub fn apply(&self, v: &StateVector) -> Result<DVector<C64>> {
        check_dims(self.dim(), v.dim())?;
        Ok(&self.m * v.as_vector())
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::from_matrix_unchecked(
            &self.m * &other.m - &other.m * &self.m,
        ))
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.m
            .clone()
            .singular_values()
            .iter()
            .fold(0.0f64, |acc, &s| acc.max(s))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::from_matrix_unchecked(&self.m + &rhs.m)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::from_matrix_unchecked(&self.m - &rhs.m)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::from_matrix_unchecked(&self.m * &rhs.m)
    }
}

pub fn pauli_x() -> Operator {
    Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2")
}

pub fn pauli_y() -> Operator {
    let i = C64::i();
    Operator::from_rows(&[vec![ZERO, -i], vec![i, ZERO]]).expect("2x2")
}

pub fn pauli_z() -> Operator {
    Operator::diagonal(&[1.0, -1.0])
}

/// Controlled-NOT with the first (object) qubit as control.
pub fn cnot() -> Operator {
    Operator::from_real_rows(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0],
    ])
    .expect("4x4")
}

/// Operand of [`tensor_product`].
#[derive(Clone, Debug, PartialEq)]
pub enum TensorOperand {
    Operator(Operator),
    State(StateVector),
}

/// Kronecker product, first operand as the slow index.
pub fn tensor_product(a: &TensorOperand, b: &TensorOperand) -> Result<TensorOperand> {
    match (a, b) {
        (TensorOperand::Operator(x), TensorOperand::Operator(y)) => {
            Ok(TensorOperand::Operator(x.kron(y)))
        }
        (TensorOperand::State(x), TensorOperand::State(y)) => Ok(TensorOperand::State(x.kron(y))),
        _ => Err(Error::invalid(
            "tensor product operands must both be operators or both be vectors",
        )),
    }
}

/// Heisenberg-picture conjugation `U† A U`.
pub fn heisenberg_evolve(a: &Operator, u: &Operator) -> Result<Operator> {
    check_dims(a.dim(), u.dim())?;
    if !u.is_unitary() {
        return Err(Error::invalid(format!(
            "evolution operator not unitary: max deviation {:.3e}",
            u.unitary_deviation()
        )));
    }
    let out = Operator::from_matrix_unchecked(u.m.adjoint() * &a.m * &u.m);
    if a.is_hermitian() {
        Ok(out.hermitian_part())
    } else {
        Ok(out)
    }
}

/// `⟨ψ|[A, B]|ψ⟩`.
pub fn commutator_expectation(a: &Operator, b: &Operator, psi: &StateVector) -> Result<C64> {
    check_dims(a.dim(), b.dim())?;
    check_dims(a.dim(), psi.dim())?;
    let v = psi.as_vector();
    let ab = &a.m * (&b.m * v);
    let ba = &b.m * (&a.m * v);
    Ok(v.dotc(&(ab - ba)))
}

/// Eigenvalues (ascending, distinct up to [`DEGENERACY_TOL`]) and an
/// orthonormal basis of each eigenspace.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    dim: usize,
    eigenvalues: Vec<f64>,
    spaces: Vec<DMatrix<C64>>,
    basis: DMatrix<C64>,
    blocks: Vec<usize>,
    /// Set when every eigenvector is a standard basis vector: column `k` of
    /// the basis is `e_{perm[k]}`.
    perm: Option<Vec<usize>>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Orthonormal columns spanning the `i`-th eigenspace.
    pub fn eigenspace(&self, i: usize) -> &DMatrix<C64> {
        &self.spaces[i]
    }

    pub fn rank(&self, i: usize) -> usize {
        self.spaces[i].ncols()
    }

    pub fn projector(&self, i: usize) -> Operator {
        let v = &self.spaces[i];
        Operator::from_matrix_unchecked(v * v.adjoint())
    }

    pub fn projectors(&self) -> Vec<Operator> {
        (0..self.len()).map(|i| self.projector(i)).collect()
    }

    /// All eigenvectors as columns of one unitary, eigenspaces in ascending
    /// order of eigenvalue.
    pub fn basis(&self) -> &DMatrix<C64> {
        &self.basis
    }

    /// For every column of [`basis`](Self::basis), the index of its eigenspace.
    pub fn column_blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// `Some(perm)` when the basis is a permutation of the standard basis.
    pub fn permutation(&self) -> Option<&[usize]> {
        self.perm.as_deref()
    }

    /// True when the basis is the standard basis in its natural order.
    pub fn is_standard(&self) -> bool {
        self.perm
            .as_ref()
            .is_some_and(|p| p.iter().enumerate().all(|(k, &i)| k == i))
    }

    /// Probability of each eigenspace in the pure state `v`.
    pub fn weights(&self, v: &DVector<C64>) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        match &self.perm {
            Some(perm) => {
                for (k, &i) in perm.iter().enumerate() {
                    out[self.blocks[k]] += v[i].norm_sqr();
                }
            }
            None => {
                let c = self.basis.adjoint() * v;
                for (k, z) in c.iter().enumerate() {
                    out[self.blocks[k]] += z.norm_sqr();
                }
            }
        }
        out
    }

    /// Probability of each eigenspace in the density matrix `rho`.
    pub fn density_weights(&self, rho: &DMatrix<C64>) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        match &self.perm {
            Some(perm) => {
                for (k, &i) in perm.iter().enumerate() {
                    out[self.blocks[k]] += rho[(i, i)].re;
                }
            }
            None => {
                let r = self.basis.adjoint() * rho * &self.basis;
                for k in 0..self.dim {
                    out[self.blocks[k]] += r[(k, k)].re;
                }
            }
        }
        out
    }

    /// `Σ f(λ_i) Π_i`. Fails if `f` is not finite at some eigenvalue.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> Result<Operator> {
        let values = self
            .eigenvalues
            .iter()
            .map(|&l| {
                let y = f(l);
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::invalid(format!(
                        "function undefined at eigenvalue {l}"
                    )))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        self.apply_values(&values)
    }

    /// `Σ values[i] Π_i` for values given per eigenspace.
    pub fn apply_values(&self, values: &[f64]) -> Result<Operator> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} spectral values, got {}",
                self.len(),
                values.len()
            )));
        }
        let mut out = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (v, &y) in self.spaces.iter().zip(values) {
            out += (v * v.adjoint()) * C64::from(y);
        }
        Ok(Operator::from_matrix_unchecked(out).hermitian_part())
    }
}

pub fn spectral_decomposition(a: &Operator) -> Result<SpectralDecomposition> {
    if !a.is_hermitian() {
        return Err(Error::invalid(format!(
            "spectral decomposition needs a Hermitian operator: max deviation {:.3e}",
            a.hermitian_deviation()
        )));
    }
    let n = a.dim();
    let m = a.matrix();
    let diagonal = (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == ZERO));
    // exactly diagonal operators (grid positions, readouts) skip the eigensolver
    let (values, vectors) = if diagonal {
        (
            DVector::from_iterator(n, (0..n).map(|i| m[(i, i)].re)),
            DMatrix::identity(n, n),
        )
    } else {
        let eig = a.hermitian_part().into_matrix().symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &k in &order {
        let l = values[k];
        match groups.last_mut() {
            Some(g) if l - last <= DEGENERACY_TOL => g.push(k),
            _ => groups.push(vec![k]),
        }
        last = l;
    }

    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut spaces = Vec::with_capacity(groups.len());
    let mut blocks = Vec::with_capacity(n);
    let mut basis = DMatrix::from_element(n, n, ZERO);
    let mut col = 0;
    for (b, g) in groups.iter().enumerate() {
        let mean = g.iter().map(|&k| values[k]).sum::<f64>() / g.len() as f64;
        eigenvalues.push(mean);
        let cols: Vec<_> = g.iter().map(|&k| vectors.column(k)).collect();
        for c in &cols {
            basis.set_column(col, c);
            blocks.push(b);
            col += 1;
        }
        spaces.push(DMatrix::from_columns(&cols));
    }
    let perm = diagonal.then(|| groups.concat());
    Ok(SpectralDecomposition {
        dim: n,
        eigenvalues,
        spaces,
        basis,
        blocks,
        perm,
    })
}

/// `f(A)` through the spectral decomposition of a Hermitian `A`.
pub fn function_of_operator(a: &Operator, f: impl Fn(f64) -> f64) -> Result<Operator> {
    spectral_decomposition(a)?.apply_function(f)
}

/// Object-space operator with entries `⟨m|⊗⟨ξ| A |n⟩⊗|ξ⟩`.
pub fn partial_inner_product_probe(a: &Operator, xi: &StateVector) -> Result<Operator> {
    let dp = xi.dim();
    if a.dim() % dp != 0 {
        return Err(Error::invalid(format!(
            "joint dimension {} is not a multiple of probe dimension {dp}",
            a.dim()
        )));
    }
    let d_obj = a.dim() / dp;
    let x = xi.as_vector();
    let out = DMatrix::from_fn(d_obj, d_obj, |m, n| {
        let block = a.m.view((m * dp, n * dp), (dp, dp));
        x.dotc(&(block * x))
    });
    let out = Operator::from_matrix_unchecked(out);
    if a.is_hermitian() {
        Ok(out.hermitian_part())
    } else {
        Ok(out)
    }
}

/// Reshapes a joint vector into a `d_obj × d_probe` amplitude matrix.
pub fn joint_to_matrix(v: &[C64], d_obj: usize, d_probe: usize) -> DMatrix<C64> {
    debug_assert_eq!(v.len(), d_obj * d_probe);
    DMatrix::from_row_slice(d_obj, d_probe, v)
}

/// Inverse of [`joint_to_matrix`].
pub fn matrix_to_joint(m: &DMatrix<C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter().copied());
    }
    out
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}
