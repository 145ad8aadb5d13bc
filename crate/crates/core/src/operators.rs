//! Truncated bosonic and spin operator algebra.
//!
//! The bosonic mode lives on the truncated Fock space |0⟩ … |n_max−1⟩; the
//! two-level system on the basis (|↑⟩, |↓⟩) with σz = diag(+1, −1).  Tensor
//! ordering is fixed globally: **spin index outermost**, so a combined
//! operator is stored as `kron(spin, boson)` and a state index decomposes as
//! `s · n_max + n` with `s = 0` for |↑⟩.  Every builder documents and the
//! tests pin this convention; silent ordering mismatches are the dominant
//! bug class in this kind of code.
//!
//! Truncation corrupts the top Fock levels, so every truncation-sensitive
//! statement is evaluated on the *interior projection*: the top
//! `interior_margin` Fock levels are excluded from residual norms.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Retained Fock dimension plus the margin excluded from residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    n_max: usize,
    interior_margin: usize,
}

impl Truncation {
    pub fn new(n_max: usize, interior_margin: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidTruncation(format!("n_max = {n_max} < 2")));
        }
        if interior_margin >= n_max {
            return Err(Error::InvalidTruncation(format!(
                "interior_margin = {interior_margin} must be < n_max = {n_max}"
            )));
        }
        Ok(Self { n_max, interior_margin })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn interior_margin(&self) -> usize {
        self.interior_margin
    }

    /// Same margin, doubled Fock dimension; used by convergence checks.
    pub fn doubled(&self) -> Self {
        Self { n_max: 2 * self.n_max, interior_margin: self.interior_margin }
    }

    /// Fock levels kept by the interior projection.
    pub fn interior_levels(&self) -> usize {
        self.n_max - self.interior_margin
    }
}

/// Which product space a matrix acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceTag {
    /// Truncated Fock space alone (dim `n_max`).
    BosonOnly,
    /// Spin alone (dim 2); used by the 2×2 Pauli builders.
    SpinOnly,
    /// Spin ⊗ boson with spin outermost (dim `2 n_max`).
    BosonSpin,
    /// Supercharge grading ⊗ spin ⊗ boson (dim `4 n_max`).
    TwoBlock4,
    /// Chain of `BosonSpin` sites (dim `(2 n_max)^n_sites`).
    Lattice,
}

/// Pauli operator selector in the basis (|↑⟩, |↓⟩).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinOperatorLabel {
    SigmaPlus,
    SigmaMinus,
    SigmaZ,
    Identity,
}

/// Dense complex operator together with its truncation metadata.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    mat: Mat<c64>,
    trunc: Truncation,
    tag: SpaceTag,
}

impl OperatorMatrix {
    pub fn new(mat: Mat<c64>, trunc: Truncation, tag: SpaceTag) -> Result<Self> {
        let dim = mat.nrows();
        if dim != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                dim,
                mat.ncols()
            )));
        }
        let ok = match tag {
            SpaceTag::BosonOnly => dim == trunc.n_max(),
            SpaceTag::SpinOnly => dim == 2,
            SpaceTag::BosonSpin => dim == 2 * trunc.n_max(),
            SpaceTag::TwoBlock4 => dim == 4 * trunc.n_max(),
            SpaceTag::Lattice => {
                let site = 2 * trunc.n_max();
                let mut d = site;
                let mut consistent = false;
                for _ in 0..3 {
                    if d == dim {
                        consistent = true;
                        break;
                    }
                    d = d.saturating_mul(site);
                }
                consistent
            }
        };
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "dim {dim} inconsistent with {tag:?} at n_max {}",
                trunc.n_max()
            )));
        }
        Ok(Self { mat, trunc, tag })
    }

    pub fn mat(&self) -> &Mat<c64> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trunc(&self) -> Truncation {
        self.trunc
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    /// Conjugate transpose, exact entrywise.
    pub fn dagger(&self) -> Self {
        Self { mat: linalg::dagger(&self.mat), trunc: self.trunc, tag: self.tag }
    }

    /// Indices kept by the interior projection (all spin/grading sectors,
    /// Fock level below `n_max - interior_margin`).
    pub fn interior_indices(&self) -> Vec<usize> {
        interior_indices(self.trunc, self.tag, self.dim())
    }

    /// Operator 2-norm of the interior-projected submatrix.
    pub fn interior_norm(&self) -> f64 {
        let idx = self.interior_indices();
        linalg::operator_norm(&linalg::select_submatrix(&self.mat, &idx))
    }

    /// Frobenius norm of the full matrix.
    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.mat)
    }

    /// Entrywise deviation from Hermiticity relative to the largest entry.
    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.mat)
    }
}

pub(crate) fn interior_indices(trunc: Truncation, tag: SpaceTag, dim: usize) -> Vec<usize> {
    let keep = trunc.interior_levels();
    let n = trunc.n_max();
    match tag {
        SpaceTag::BosonOnly => (0..keep).collect(),
        SpaceTag::SpinOnly => (0..2).collect(),
        SpaceTag::BosonSpin => (0..2)
            .flat_map(|s| (0..keep).map(move |k| s * n + k))
            .collect(),
        SpaceTag::TwoBlock4 => (0..4)
            .flat_map(|s| (0..keep).map(move |k| s * n + k))
            .collect(),
        // Lattice residuals are not interior-projected; keep everything.
        SpaceTag::Lattice => (0..dim).collect(),
    }
}

/// Annihilation operator: entry (n−1, n) = √n, everything else zero.
pub fn annihilation_matrix(trunc: Truncation) -> OperatorMatrix {
    let n = trunc.n_max();
    let mut a = Mat::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = c64::new((k as f64).sqrt(), 0.0);
    }
    OperatorMatrix::new(a, trunc, SpaceTag::BosonOnly).expect("dims by construction")
}

/// Creation operator, the exact conjugate transpose of `annihilation_matrix`.
pub fn creation_matrix(trunc: Truncation) -> OperatorMatrix {
    annihilation_matrix(trunc).dagger()
}

/// Number operator a†a (diagonal 0, 1, …, n_max−1).
pub fn number_matrix(trunc: Truncation) -> OperatorMatrix {
    let n = trunc.n_max();
    let mut m = Mat::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = c64::new(k as f64, 0.0);
    }
    OperatorMatrix::new(m, trunc, SpaceTag::BosonOnly).expect("dims by construction")
}

/// Identity on the truncated Fock space.
pub fn boson_identity(trunc: Truncation) -> OperatorMatrix {
    let n = trunc.n_max();
    OperatorMatrix::new(Mat::identity(n, n), trunc, SpaceTag::BosonOnly)
        .expect("dims by construction")
}

/// 2×2 Pauli matrices in the basis (|↑⟩, |↓⟩): σz = diag(+1, −1),
/// σ+ = |↑⟩⟨↓|, σ− = |↓⟩⟨↑|.
pub fn spin_matrix(label: SpinOperatorLabel) -> OperatorMatrix {
    let mut m = Mat::zeros(2, 2);
    match label {
        SpinOperatorLabel::SigmaZ => {
            m[(0, 0)] = linalg::ONE;
            m[(1, 1)] = -linalg::ONE;
        }
        SpinOperatorLabel::SigmaPlus => {
            m[(0, 1)] = linalg::ONE;
        }
        SpinOperatorLabel::SigmaMinus => {
            m[(1, 0)] = linalg::ONE;
        }
        SpinOperatorLabel::Identity => {
            m[(0, 0)] = linalg::ONE;
            m[(1, 1)] = linalg::ONE;
        }
    }
    let trunc = Truncation::new(2, 0).expect("static");
    OperatorMatrix::new(m, trunc, SpaceTag::SpinOnly).expect("dims by construction")
}

/// Kronecker product with spin outermost: the result is `kron(s, b)`,
/// two `n_max` blocks (|↑⟩ block first), tagged `BosonSpin`.
pub fn tensor_boson_spin(b: &OperatorMatrix, s: &OperatorMatrix) -> Result<OperatorMatrix> {
    if b.tag() != SpaceTag::BosonOnly {
        return Err(Error::DimensionMismatch(format!(
            "tensor_boson_spin: boson factor tagged {:?}",
            b.tag()
        )));
    }
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "tensor_boson_spin: spin factor must be 2x2, got {}",
            s.dim()
        )));
    }
    let k = linalg::kron(s.mat(), b.mat());
    OperatorMatrix::new(k, b.trunc(), SpaceTag::BosonSpin)
}

/// Coherent-state displacement D(α) = exp(α a† − α* a) on the truncated
/// space, computed by eigendecomposition of the skew-Hermitian exponent.
pub fn displacement_matrix(alpha: c64, trunc: Truncation) -> OperatorMatrix {
    let a = annihilation_matrix(trunc);
    let adag = a.dagger();
    let arg = linalg::scale(adag.mat(), alpha) - linalg::scale(a.mat(), alpha.conj());
    let d = linalg::expm_skew_hermitian(&arg).expect("exponent is skew-Hermitian");
    OperatorMatrix::new(d, trunc, SpaceTag::BosonOnly).expect("dims by construction")
}

/// Magnetic translation τ_q = exp[(−i q a − i q* a†)/√2], the generator of
/// the GMP algebra of projected density operators.  `q` encodes a 2-vector
/// as `qx + i qy`.
pub fn magnetic_translation(q: c64, trunc: Truncation) -> OperatorMatrix {
    let a = annihilation_matrix(trunc);
    let adag = a.dagger();
    let s = 1.0 / 2f64.sqrt();
    let arg = linalg::scale(a.mat(), -linalg::I * q * s)
        + linalg::scale(adag.mat(), -linalg::I * q.conj() * s);
    let t = linalg::expm_skew_hermitian(&arg).expect("exponent is skew-Hermitian");
    OperatorMatrix::new(t, trunc, SpaceTag::BosonOnly).expect("dims by construction")
}

/// Interior-projected operator norm of [τ_q, τ_p] − 2i sin(q∧p / 2) τ_{q+p},
/// with q∧p = l² (q × p)_z = l² Im(q̄ p).
pub fn gmp_commutator_residual(
    q: c64,
    p: c64,
    magnetic_length: f64,
    trunc: Truncation,
) -> Result<f64> {
    if magnetic_length <= 0.0 {
        return Err(Error::InvalidParameter(
            "magnetic_length must be positive".into(),
        ));
    }
    let tq = magnetic_translation(q, trunc);
    let tp = magnetic_translation(p, trunc);
    let tqp = magnetic_translation(q + p, trunc);
    let wedge = magnetic_length * magnetic_length * (q.conj() * p).im;
    let comm = linalg::commutator(tq.mat(), tp.mat());
    let rhs = linalg::scale(tqp.mat(), 2.0 * linalg::I * (0.5 * wedge).sin());
    let diff = OperatorMatrix::new(comm - rhs, trunc, SpaceTag::BosonOnly)?;
    Ok(diff.interior_norm())
}
