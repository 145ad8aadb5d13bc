//! Supercharges, the N = 2 SUSY algebra check, zero modes, and the Witten
//! index.
//!
//! A supercharge is stored through its 2n×2n block `q`; the nilpotent
//! operator is `Q = [[0, q], [0, 0]]` on the doubled space, so `Q² = 0`
//! holds exactly by block triangularity and
//!
//! ```text
//! {Q, Q†} = diag(q q†, q† q) = diag(H+, H-).
//! ```
//!
//! On the SUSY line the kernel-bearing block `H- = q†q` equals the model
//! Hamiltonian plus a constant `c`, and its two zero modes are coherent-state
//! superpositions of definite parity.  The partner `H+ = q q†` equals the
//! *coupling-swapped* model plus `c + ω`; both relations are pinned by the
//! tests.  The Witten index dim ker H- − dim ker H+ = 2.

use faer::{c64, Col, Mat};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_gr_hamiltonian, parity_operator, GrParams};
use crate::operators::{annihilation_matrix, OperatorMatrix, SpaceTag, Truncation};

/// Construction family of a supercharge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperchargeFamily {
    /// q = [[g1/√ω, √ω a], [√ω a, g2/√ω]]; requires λ = 0 on the SUSY line.
    NonRwaMainText,
    /// λ ≠ 0 extension solved so that q†q reproduces the model including the
    /// Bloch–Siegert term: q = [[g1/√(ω−λ), √(ω−λ) a], [√(ω+λ) a, g2/√(ω+λ)]].
    NonRwaLambda,
    /// Rotating-wave (Jaynes–Cummings) family with q = [[α, γa], [βa†, δ]].
    Rwa,
}

/// Block-structured nilpotent supercharge plus its additive constant.
#[derive(Debug, Clone)]
pub struct Supercharge {
    q_block: OperatorMatrix,
    family: SuperchargeFamily,
    shift_c: f64,
    trunc: Truncation,
}

impl Supercharge {
    pub fn q_block(&self) -> &OperatorMatrix {
        &self.q_block
    }

    pub fn family(&self) -> SuperchargeFamily {
        self.family
    }

    /// Constant relating the kernel-bearing block to the model:
    /// H- = H_gR + c.
    pub fn shift_c(&self) -> f64 {
        self.shift_c
    }

    pub fn trunc(&self) -> Truncation {
        self.trunc
    }

    /// The nilpotent 4n×4n matrix [[0, q], [0, 0]].
    pub fn full_matrix(&self) -> OperatorMatrix {
        let d = self.q_block.dim();
        let mut m = Mat::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                m[(i, d + j)] = self.q_block.mat()[(i, j)];
            }
        }
        OperatorMatrix::new(m, self.trunc, SpaceTag::TwoBlock4).expect("dims by construction")
    }

    /// Partner block H+ = q q† (no zero modes on the SUSY line).
    pub fn h_plus(&self) -> OperatorMatrix {
        let m = self.q_block.mat() * self.q_block.mat().adjoint();
        OperatorMatrix::new(m, self.trunc, SpaceTag::BosonSpin).expect("dims by construction")
    }

    /// Kernel-bearing block H- = q† q = H_gR + c on the SUSY line.
    pub fn h_minus(&self) -> OperatorMatrix {
        let m = self.q_block.mat().adjoint() * self.q_block.mat();
        OperatorMatrix::new(m, self.trunc, SpaceTag::BosonSpin).expect("dims by construction")
    }

    /// Apply the block q to a vector on the half-space.
    pub fn apply_q(&self, v: &Col<c64>) -> Col<c64> {
        self.q_block.mat() * v
    }
}

fn assemble_blocks(
    b11: &Mat<c64>,
    b12: &Mat<c64>,
    b21: &Mat<c64>,
    b22: &Mat<c64>,
) -> Mat<c64> {
    let n = b11.nrows();
    let mut m = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = b11[(i, j)];
            m[(i, n + j)] = b12[(i, j)];
            m[(n + i, j)] = b21[(i, j)];
            m[(n + i, n + j)] = b22[(i, j)];
        }
    }
    m
}

fn scaled_identity(n: usize, s: f64) -> Mat<c64> {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c64::new(s, 0.0);
    }
    m
}

fn susy_line_gate(p: &GrParams, tol: f64) -> Result<()> {
    let scale = (p.g1 * p.g1 + p.g2 * p.g2 + (p.delta * p.omega).abs())
        .max(p.omega * p.omega);
    let residual = p.susy_residual_degenerate() / (p.omega * scale).max(1e-300);
    if residual.abs() > tol {
        return Err(Error::OffSusyLine { residual, tol });
    }
    Ok(())
}

/// Build the supercharge for parameters on the SUSY line (tolerance 1e−10 on
/// the normalized line residual).
pub fn build_supercharge(
    p: &GrParams,
    trunc: Truncation,
    family: SuperchargeFamily,
) -> Result<Supercharge> {
    p.validate()?;
    let a = annihilation_matrix(trunc);
    let n = trunc.n_max();
    match family {
        SuperchargeFamily::NonRwaMainText => {
            if p.lambda != 0.0 {
                return Err(Error::InvalidParameter(
                    "NonRwaMainText requires lambda = 0; use NonRwaLambda".into(),
                ));
            }
            susy_line_gate(p, 1e-10)?;
            let sw = p.omega.sqrt();
            let q = assemble_blocks(
                &scaled_identity(n, p.g1 / sw),
                &linalg::scale(a.mat(), c64::new(sw, 0.0)),
                &linalg::scale(a.mat(), c64::new(sw, 0.0)),
                &scaled_identity(n, p.g2 / sw),
            );
            let shift_c = (p.g1 * p.g1 + p.g2 * p.g2) / (2.0 * p.omega);
            Ok(Supercharge {
                q_block: OperatorMatrix::new(q, trunc, SpaceTag::BosonSpin)?,
                family,
                shift_c,
                trunc,
            })
        }
        SuperchargeFamily::NonRwaLambda => {
            susy_line_gate(p, 1e-10)?;
            let (wm, wp) = (p.omega - p.lambda, p.omega + p.lambda);
            let q = assemble_blocks(
                &scaled_identity(n, p.g1 / wm.sqrt()),
                &linalg::scale(a.mat(), c64::new(wm.sqrt(), 0.0)),
                &linalg::scale(a.mat(), c64::new(wp.sqrt(), 0.0)),
                &scaled_identity(n, p.g2 / wp.sqrt()),
            );
            let shift_c = 0.5 * (p.g1 * p.g1 / wm + p.g2 * p.g2 / wp);
            Ok(Supercharge {
                q_block: OperatorMatrix::new(q, trunc, SpaceTag::BosonSpin)?,
                family,
                shift_c,
                trunc,
            })
        }
        SuperchargeFamily::Rwa => {
            if p.g2 != 0.0 || p.lambda != 0.0 {
                return Err(Error::InvalidParameter(
                    "Rwa family requires g2 = 0 and lambda = 0".into(),
                ));
            }
            build_rwa_supercharge(p.omega, 0.5 * p.delta, p.g1, trunc)
        }
    }
}

/// Rotating-wave supercharge with γ = β = √ω,
/// 2α = g/√ω + d√ω/g, 2δ = g/√ω − d√ω/g, where d = 2Δ − ω.
///
/// `delta` here is the σz *coefficient* of the Jaynes–Cummings block (half
/// the two-level splitting in the main-model convention); zero detuning
/// d = 0 means Δ = ω/2.  No SUSY-line restriction applies: the square is
/// block-diagonal with JC-type blocks for any parameters, and a zero mode
/// exists iff αδ/γ² is a non-negative integer.
pub fn build_rwa_supercharge(
    omega: f64,
    delta: f64,
    g: f64,
    trunc: Truncation,
) -> Result<Supercharge> {
    if omega.is_nan() || omega <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "omega must be positive, got {omega}"
        )));
    }
    if g == 0.0 {
        return Err(Error::InvalidParameter("Rwa family requires g != 0".into()));
    }
    let n = trunc.n_max();
    let a = annihilation_matrix(trunc);
    let sw = omega.sqrt();
    let d = 2.0 * delta - omega;
    let alpha = 0.5 * (g / sw + d * sw / g);
    let dl = 0.5 * (g / sw - d * sw / g);
    let q = assemble_blocks(
        &scaled_identity(n, alpha),
        &linalg::scale(a.mat(), c64::new(sw, 0.0)),
        &linalg::scale(a.dagger().mat(), c64::new(sw, 0.0)),
        &scaled_identity(n, dl),
    );
    // |δ|² = c − Δ fixes the common shift c1 = c2 = c.
    let shift_c = delta + dl * dl;
    Ok(Supercharge {
        q_block: OperatorMatrix::new(q, trunc, SpaceTag::BosonSpin)?,
        family: SuperchargeFamily::Rwa,
        shift_c,
        trunc,
    })
}

/// αδ/γ² for the RWA family: a zero mode exists iff this is a non-negative
/// integer.  Equals [(g/ω)² − (d/g)²]/4 with d = 2Δ − ω.
pub fn rwa_zero_mode_index(omega: f64, delta: f64, g: f64) -> f64 {
    let d = 2.0 * delta - omega;
    ((g * g) / (omega * omega) - (d * d) / (g * g)) / 4.0
}

/// Pairing report between the interior spectra of the two partner blocks.
#[derive(Debug, Clone)]
pub struct IsospectralReport {
    /// Largest |E+ − E−| over the paired levels.
    pub max_pairing_gap: f64,
    /// Low-lying H- levels with no H+ partner (the zero modes).
    pub unpaired_low_modes: usize,
    /// Number of paired levels inspected.
    pub compared_levels: usize,
}

/// Result of checking {Q,Q†} = diag(H+, H-) against the model.
#[derive(Debug, Clone)]
pub struct SusyAlgebraReport {
    /// Interior norm of H- − H_gR(p) − c·I.
    pub residual_partner: f64,
    /// Interior norm of H+ − H_gR(g1↔g2) − (c + ω)·I (main-text family
    /// λ = 0 only; NaN otherwise).
    pub residual_partner_swapped: f64,
    pub isospectral: IsospectralReport,
    pub minus_kernel_dim: usize,
    pub plus_kernel_dim: usize,
}

fn interior_kernel_dim(block: &OperatorMatrix, rel_tol: f64) -> Result<usize> {
    let idx = block.interior_indices();
    let sub = linalg::select_submatrix(block.mat(), &idx);
    let sv = linalg::singular_values(&sub)?;
    let top = sv[0].max(1e-300);
    Ok(sv.iter().filter(|&&s| s / top < rel_tol).count())
}

/// Verify the SUSY algebra at the truncation of `q`.
///
/// `{Q, Q†} = diag(q q†, q† q)` holds structurally; the content of the check
/// is that the kernel-bearing block equals `H_gR(p) + c`.  The isospectral
/// report pairs the low interior eigenvalues of the two blocks.
pub fn verify_susy_algebra(
    q: &Supercharge,
    p: &GrParams,
    trunc: Truncation,
) -> Result<SusyAlgebraReport> {
    if q.trunc() != trunc {
        return Err(Error::DimensionMismatch(format!(
            "supercharge built at n_max {} but asked to verify at {}",
            q.trunc().n_max(),
            trunc.n_max()
        )));
    }
    let h_minus = q.h_minus();
    let h_plus = q.h_plus();
    let minus_kernel_dim = interior_kernel_dim(&h_minus, 1e-8)?;
    let plus_kernel_dim = interior_kernel_dim(&h_plus, 1e-8)?;

    let h_model = build_gr_hamiltonian(p, trunc)?;
    let dim = h_model.dim();
    let shift = scaled_identity(dim, q.shift_c());
    let diff = h_minus.mat() - h_model.mat() - &shift;
    let residual_partner =
        OperatorMatrix::new(diff, trunc, SpaceTag::BosonSpin)?.interior_norm();

    let residual_partner_swapped = if q.family() == SuperchargeFamily::NonRwaMainText {
        let swapped = GrParams { g1: p.g2, g2: p.g1, ..*p };
        let h_swapped = build_gr_hamiltonian(&swapped, trunc)?;
        let shift2 = scaled_identity(dim, q.shift_c() + p.omega);
        let diff2 = h_plus.mat() - h_swapped.mat() - &shift2;
        OperatorMatrix::new(diff2, trunc, SpaceTag::BosonSpin)?.interior_norm()
    } else {
        f64::NAN
    };

    // Interior spectra of the two blocks, paired from the bottom.
    let idx = h_minus.interior_indices();
    let (e_minus, _) = linalg::hermitian_eigen(&linalg::select_submatrix(h_minus.mat(), &idx))?;
    let (e_plus, _) = linalg::hermitian_eigen(&linalg::select_submatrix(h_plus.mat(), &idx))?;
    let compare = idx.len() / 2; // lower half of the interior spectrum is converged
    let coarse = 1e-3 * (1.0 + e_minus[compare.saturating_sub(1)].abs());
    let mut i = 0;
    let mut j = 0;
    let mut unpaired_low = 0;
    let mut paired = 0usize;
    let mut max_gap: f64 = 0.0;
    while i < compare && j < compare {
        let d = e_minus[i] - e_plus[j];
        if d.abs() <= coarse {
            max_gap = max_gap.max(d.abs());
            paired += 1;
            i += 1;
            j += 1;
        } else if d < 0.0 {
            unpaired_low += 1;
            i += 1;
        } else {
            j += 1;
        }
    }

    Ok(SusyAlgebraReport {
        residual_partner,
        residual_partner_swapped,
        isospectral: IsospectralReport {
            max_pairing_gap: max_gap,
            unpaired_low_modes: unpaired_low,
            compared_levels: paired,
        },
        minus_kernel_dim,
        plus_kernel_dim,
    })
}

/// Candidate formulas for the zero-mode displacement argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplacementFormula {
    /// g1 g2 / √ω.
    MainText,
    /// z = g1 g2 / ω² used directly as the argument.
    SeriesRatio,
    /// √z = √(g1 g2) / ω, the square root of the even/odd series ratio.
    SeriesSqrt,
}

/// The empirically selected displacement argument.
#[derive(Debug, Clone, Copy)]
pub struct DisplacementResolution {
    pub value: f64,
    pub formula: DisplacementFormula,
    /// Annihilation residual achieved by the winner.
    pub residual: f64,
}

/// Two parity-definite kernel vectors of the supercharge block on the
/// half-space.
#[derive(Debug, Clone)]
pub struct ZeroModePair {
    pub psi_plus: Col<c64>,
    pub psi_minus: Col<c64>,
    /// Exact parity labels of (psi_plus, psi_minus).
    pub parity_eigenvalues: (i8, i8),
    /// ‖q ψ±‖ for (psi_plus, psi_minus).
    pub annihilation_residuals: (f64, f64),
    /// Present when built by the displacement construction.
    pub displacement: Option<DisplacementResolution>,
}

impl ZeroModePair {
    /// |⟨ψ₊|φ₊⟩|, |⟨ψ₋|φ₋⟩| against another pair.
    pub fn sector_overlaps(&self, other: &Self) -> (f64, f64) {
        let ip = |a: &Col<c64>, b: &Col<c64>| (a.adjoint() * b).norm();
        (ip(&self.psi_plus, &other.psi_plus), ip(&self.psi_minus, &other.psi_minus))
    }
}

fn normalized(v: &Col<c64>) -> Col<c64> {
    let n = v.norm_l2();
    v * faer::Scale(c64::new(1.0 / n, 0.0))
}

fn parity_expectation(v: &Col<c64>, trunc: Truncation) -> f64 {
    let p = parity_operator(trunc);
    (v.adjoint() * (p.mat() * v)).re
}

fn require_main_text_line(p: &GrParams) -> Result<()> {
    if p.lambda != 0.0 {
        return Err(Error::InvalidParameter(
            "zero-mode constructions require lambda = 0".into(),
        ));
    }
    susy_line_gate(p, 1e-10)
}

/// Kernel vectors from the even/odd recurrences
/// v_{n+1} = −g1 u_n/(ω√(n+1)), u_{n+1} = −g2 v_n/(ω√(n+1)),
/// seeded by u_0 (even-u family, parity +1) and v_0 (even-v family,
/// parity −1).
pub fn zero_modes_recurrence(p: &GrParams, trunc: Truncation) -> Result<ZeroModePair> {
    require_main_text_line(p)?;
    let q = build_supercharge(p, trunc, SuperchargeFamily::NonRwaMainText)?;
    let n = trunc.n_max();

    let build = |seed_up: bool| -> Col<c64> {
        let mut u = vec![0.0f64; n];
        let mut v = vec![0.0f64; n];
        if seed_up {
            u[0] = 1.0;
        } else {
            v[0] = 1.0;
        }
        for k in 0..n - 1 {
            let root = ((k + 1) as f64).sqrt();
            let vn = -p.g1 * u[k] / (p.omega * root);
            let un = -p.g2 * v[k] / (p.omega * root);
            v[k + 1] = vn;
            u[k + 1] = un;
        }
        let col = Col::from_fn(2 * n, |i| {
            if i < n {
                c64::new(u[i], 0.0)
            } else {
                c64::new(v[i - n], 0.0)
            }
        });
        normalized(&col)
    };

    let psi_plus = build(true);
    let psi_minus = build(false);
    let r_plus = q.apply_q(&psi_plus).norm_l2();
    let r_minus = q.apply_q(&psi_minus).norm_l2();
    debug_assert!(parity_expectation(&psi_plus, trunc) > 0.99);
    debug_assert!(parity_expectation(&psi_minus, trunc) < -0.99);

    Ok(ZeroModePair {
        psi_plus,
        psi_minus,
        parity_eigenvalues: (1, -1),
        annihilation_residuals: (r_plus, r_minus),
        displacement: None,
    })
}

fn displacement_mode_pair(
    p: &GrParams,
    trunc: Truncation,
    q: &Supercharge,
    beta: f64,
) -> (Col<c64>, Col<c64>, f64, f64) {
    let n = trunc.n_max();
    let d_plus = crate::operators::displacement_matrix(c64::new(beta, 0.0), trunc);
    let d_minus = crate::operators::displacement_matrix(c64::new(-beta, 0.0), trunc);
    let even: Vec<c64> = (0..n)
        .map(|k| d_plus.mat()[(k, 0)] + d_minus.mat()[(k, 0)])
        .collect();
    // odd part divided by β; exact β → 0 limit is 2|1⟩
    let odd_scaled: Vec<c64> = if beta.abs() > 1e-12 {
        (0..n)
            .map(|k| (d_plus.mat()[(k, 0)] - d_minus.mat()[(k, 0)]) / beta)
            .collect()
    } else {
        (0..n)
            .map(|k| if k == 1 { c64::new(2.0, 0.0) } else { c64::new(0.0, 0.0) })
            .collect()
    };

    let stack = |up: &[c64], down: &[c64]| -> Col<c64> {
        normalized(&Col::from_fn(2 * n, |i| if i < n { up[i] } else { down[i - n] }))
    };
    let scale_vec = |v: &[c64], s: f64| -> Vec<c64> { v.iter().map(|&x| x * s).collect() };

    // parity +1: even boson series in the |↑⟩ component
    let psi_plus = stack(&even, &scale_vec(&odd_scaled, -p.g1 / p.omega));
    // parity −1: even boson series in the |↓⟩ component
    let psi_minus = stack(&scale_vec(&odd_scaled, -p.g2 / p.omega), &even);
    let r_plus = q.apply_q(&psi_plus).norm_l2();
    let r_minus = q.apply_q(&psi_minus).norm_l2();
    (psi_plus, psi_minus, r_plus, r_minus)
}

/// Decide the displacement argument empirically: the candidate whose
/// assembled spinors have the smallest annihilation residual wins.
pub fn resolve_displacement_argument(
    p: &GrParams,
    trunc: Truncation,
) -> Result<DisplacementResolution> {
    require_main_text_line(p)?;
    let q = build_supercharge(p, trunc, SuperchargeFamily::NonRwaMainText)?;
    let z = p.g1 * p.g2 / (p.omega * p.omega);
    let sqrt_z = z.abs().sqrt().copysign(z);
    let candidates = [
        (DisplacementFormula::MainText, p.g1 * p.g2 / p.omega.sqrt()),
        (DisplacementFormula::SeriesRatio, z),
        (DisplacementFormula::SeriesSqrt, sqrt_z),
    ];
    let mut best: Option<DisplacementResolution> = None;
    for (formula, beta) in candidates {
        let (_, _, r_plus, r_minus) = displacement_mode_pair(p, trunc, &q, beta);
        let residual = r_plus.max(r_minus);
        if best.map_or(true, |b| residual < b.residual) {
            best = Some(DisplacementResolution { value: beta, formula, residual });
        }
    }
    Ok(best.expect("candidate list is nonempty"))
}

/// Kernel vectors assembled from the displacement operators
/// [D(β) ± D(−β)]|0⟩, with the partner spinor component fixed by the kernel
/// relations.  The argument β is resolved by
/// [`resolve_displacement_argument`].
pub fn zero_modes_displacement(p: &GrParams, trunc: Truncation) -> Result<ZeroModePair> {
    require_main_text_line(p)?;
    let q = build_supercharge(p, trunc, SuperchargeFamily::NonRwaMainText)?;
    let resolution = resolve_displacement_argument(p, trunc)?;
    let (psi_plus, psi_minus, r_plus, r_minus) =
        displacement_mode_pair(p, trunc, &q, resolution.value);
    debug_assert!(parity_expectation(&psi_plus, trunc) > 0.99);
    debug_assert!(parity_expectation(&psi_minus, trunc) < -0.99);
    Ok(ZeroModePair {
        psi_plus,
        psi_minus,
        parity_eigenvalues: (1, -1),
        annihilation_residuals: (r_plus, r_minus),
        displacement: Some(resolution),
    })
}

/// Numerical kernel dimensions of (H-, H+) on the interior projection, with
/// a guard band around the threshold: any singular value within a factor
/// √10 of `svd_tol · σ_max` makes the count ill-conditioned.
pub fn kernel_dimensions(q: &Supercharge, svd_tol: f64) -> Result<(usize, usize)> {
    let mut dims = [0usize; 2];
    for (slot, block) in [q.h_minus(), q.h_plus()].iter().enumerate() {
        let idx = block.interior_indices();
        let sub = linalg::select_submatrix(block.mat(), &idx);
        let sv = linalg::singular_values(&sub)?;
        let top = sv[0].max(1e-300);
        let band = 10f64.sqrt();
        for &s in &sv {
            let r = s / top;
            if r > svd_tol / band && r < svd_tol * band {
                return Err(Error::IllConditionedKernel(format!(
                    "singular value ratio {r:.3e} lies within the guard band around svd_tol {svd_tol:.3e}"
                )));
            }
        }
        dims[slot] = sv.iter().filter(|&&s| s / top < svd_tol).count();
    }
    Ok((dims[0], dims[1]))
}

/// Witten index dim ker H- − dim ker H+ at the SUSY point.
///
/// `svd_tol` is relative to the largest singular value; the default choice
/// 1e−8 sits on a plateau two decades wide for the reference parameters.
pub fn witten_index(p: &GrParams, trunc: Truncation, svd_tol: f64) -> Result<i64> {
    let family = if p.lambda == 0.0 {
        SuperchargeFamily::NonRwaMainText
    } else {
        SuperchargeFamily::NonRwaLambda
    };
    let q = build_supercharge(p, trunc, family)?;
    let (minus, plus) = kernel_dimensions(&q, svd_tol)?;
    Ok(minus as i64 - plus as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;

    fn fig3() -> GrParams {
        GrParams::new(1.0, 2.0, 1.5, 0.5, 0.0).unwrap()
    }

    fn tr(n: usize, m: usize) -> Truncation {
        Truncation::new(n, m).unwrap()
    }

    #[test]
    fn q_block_entries_match_construction() {
        let q = build_supercharge(&fig3(), tr(6, 0), SuperchargeFamily::NonRwaMainText).unwrap();
        let m = q.q_block().mat();
        assert!((m[(0, 0)].re - 1.5).abs() < 1e-15);
        assert!((m[(6, 6)].re - 0.5).abs() < 1e-15);
        // off-diagonal blocks are √ω a
        assert!((m[(0, 7)].re - 1.0).abs() < 1e-15); // √1·√1
        assert!((m[(7, 0)].re - 0.0).abs() < 1e-15);
    }

    #[test]
    fn q_squares_to_zero_exactly() {
        let q = build_supercharge(&fig3(), tr(8, 0), SuperchargeFamily::NonRwaMainText).unwrap();
        let full = q.full_matrix();
        let sq = full.mat() * full.mat();
        assert_eq!(sq.norm_max(), 0.0);
    }

    #[test]
    fn shift_constant_fig3() {
        let q = build_supercharge(&fig3(), tr(8, 0), SuperchargeFamily::NonRwaMainText).unwrap();
        // (g1² + g2²)/(2ω) = (2.25 + 0.25)/2
        assert!((q.shift_c() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn off_line_rejected() {
        let p = GrParams::new(1.0, 2.0, 1.4, 0.5, 0.0).unwrap();
        let err = build_supercharge(&p, tr(8, 0), SuperchargeFamily::NonRwaMainText);
        assert!(matches!(err, Err(Error::OffSusyLine { .. })));
    }

    #[test]
    fn anticommutator_matches_blocks() {
        let t = tr(10, 0);
        let q = build_supercharge(&fig3(), t, SuperchargeFamily::NonRwaMainText).unwrap();
        let full = q.full_matrix();
        let anti = full.mat() * full.mat().adjoint() + full.mat().adjoint() * full.mat();
        let hp = q.h_plus();
        let hm = q.h_minus();
        let d = t.n_max() * 2;
        for i in 0..d {
            for j in 0..d {
                assert_eq!(anti[(i, j)], hp.mat()[(i, j)]);
                assert_eq!(anti[(d + i, d + j)], hm.mat()[(i, j)]);
                assert_eq!(anti[(i, d + j)], c64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn h_minus_is_model_plus_constant() {
        let t = tr(40, 8);
        let p = fig3();
        let q = build_supercharge(&p, t, SuperchargeFamily::NonRwaMainText).unwrap();
        let report = verify_susy_algebra(&q, &p, t).unwrap();
        assert!(
            report.residual_partner < 1e-10,
            "residual {:e}",
            report.residual_partner
        );
        // the partner block is the coupling-swapped model shifted by c + ω
        assert!(
            report.residual_partner_swapped < 1e-10,
            "swapped residual {:e}",
            report.residual_partner_swapped
        );
        assert_eq!(report.minus_kernel_dim, 2);
        assert_eq!(report.plus_kernel_dim, 0);
    }

    #[test]
    fn lambda_family_reproduces_model() {
        // solved λ ≠ 0 point: Δ = [g1²(ω+λ) − g2²(ω−λ)]/(ω²−λ²)
        let (w, l, g1, g2) = (1.0, 0.2, 1.5, 0.5);
        let delta = (g1 * g1 * (w + l) - g2 * g2 * (w - l)) / (w * w - l * l);
        let p = GrParams::new(w, delta, g1, g2, l).unwrap();
        assert!(p.susy_residual_degenerate().abs() < 1e-12);
        let t = tr(40, 8);
        let q = build_supercharge(&p, t, SuperchargeFamily::NonRwaLambda).unwrap();
        let report = verify_susy_algebra(&q, &p, t).unwrap();
        assert!(
            report.residual_partner < 1e-10,
            "residual {:e}",
            report.residual_partner
        );
        assert_eq!(report.minus_kernel_dim, 2);
        assert_eq!(report.plus_kernel_dim, 0);
        // expected shift c = (g1²/(ω−λ) + g2²/(ω+λ))/2
        let c = 0.5 * (g1 * g1 / (w - l) + g2 * g2 / (w + l));
        assert!((q.shift_c() - c).abs() < 1e-14);
    }

    #[test]
    fn lambda_family_reduces_to_main_text() {
        let p = fig3();
        let t = tr(12, 0);
        let q0 = build_supercharge(&p, t, SuperchargeFamily::NonRwaMainText).unwrap();
        let q1 = build_supercharge(&p, t, SuperchargeFamily::NonRwaLambda).unwrap();
        assert!(frobenius(&(q0.q_block().mat() - q1.q_block().mat())) < 1e-14);
        assert!((q0.shift_c() - q1.shift_c()).abs() < 1e-14);
    }

    #[test]
    fn rwa_zero_detuning_parameters() {
        let t = tr(8, 0);
        // zero detuning: d = 2Δ − ω = 0 at Δ = ω/2
        let q = build_rwa_supercharge(1.0, 0.5, 0.4, t).unwrap();
        let m = q.q_block().mat();
        let expect = 0.4 / 2.0;
        assert!((m[(0, 0)].re - expect).abs() < 1e-15);
        assert!((m[(8, 8)].re - expect).abs() < 1e-15);
        assert!((q.shift_c() - (0.5 + 0.04)).abs() < 1e-15); // ω/2 + g²/4ω
    }

    #[test]
    fn rwa_square_is_jc_type() {
        let t = tr(20, 0);
        let q = build_rwa_supercharge(1.0, 0.8, 0.3, t).unwrap();
        let n = 20;
        for block in [q.h_plus(), q.h_minus()] {
            let m = block.mat();
            // off-diagonal spin block must couple through a only: entries
            // (up row, down col) vanish except the superdiagonal
            for i in 0..n {
                for j in 0..n {
                    if j != i + 1 {
                        assert!(
                            m[(i, n + j)].norm() < 1e-14,
                            "unexpected coupling at ({i},{j}): {:?}",
                            m[(i, n + j)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rwa_family_from_model_params() {
        // the model route maps the two-level splitting to the JC block
        // coefficient delta/2
        let p = GrParams::new(1.0, 1.0, 0.4, 0.0, 0.0).unwrap();
        let t = tr(10, 0);
        let via_model = build_supercharge(&p, t, SuperchargeFamily::Rwa).unwrap();
        let direct = build_rwa_supercharge(1.0, 0.5, 0.4, t).unwrap();
        assert!(
            frobenius(&(via_model.q_block().mat() - direct.q_block().mat())) < 1e-15
        );
        assert_eq!(via_model.family(), SuperchargeFamily::Rwa);
        let err = build_supercharge(
            &GrParams::new(1.0, 1.0, 0.4, 0.1, 0.0).unwrap(),
            t,
            SuperchargeFamily::Rwa,
        );
        assert!(err.is_err(), "g2 != 0 must be rejected for the RWA family");
    }

    #[test]
    fn rwa_integer_index_detects_zero_mode() {
        // pick g, ω, then solve d so αδ/γ² = 1: (g²/ω²) − (d²/g²) = 4
        let (omega, g): (f64, f64) = (1.0, 3.0);
        let d2 = g * g * ((g * g) / (omega * omega) - 4.0);
        let d = d2.sqrt();
        let delta = 0.5 * (d + omega);
        assert!((rwa_zero_mode_index(omega, delta, g) - 1.0).abs() < 1e-12);
        let t = tr(40, 8);
        let q = build_rwa_supercharge(omega, delta, g, t).unwrap();
        let (minus, _plus) = kernel_dimensions(&q, 1e-8).unwrap();
        assert!(minus >= 1, "expected a zero mode in the kernel block");
    }

    #[test]
    fn verify_rejects_truncation_mismatch() {
        let q = build_supercharge(&fig3(), tr(20, 4), SuperchargeFamily::NonRwaMainText)
            .unwrap();
        let err = verify_susy_algebra(&q, &fig3(), tr(24, 4));
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn zero_modes_recurrence_fig3() {
        let t = tr(60, 12);
        let modes = zero_modes_recurrence(&fig3(), t).unwrap();
        assert!(modes.annihilation_residuals.0 < 1e-8);
        assert!(modes.annihilation_residuals.1 < 1e-8);
        let ip = (modes.psi_plus.adjoint() * &modes.psi_minus).norm();
        assert!(ip < 1e-10, "sectors must be orthogonal, got {ip:e}");
        // residual shrinks with doubled truncation
        let modes2 = zero_modes_recurrence(&fig3(), tr(120, 12)).unwrap();
        assert!(
            modes2.annihilation_residuals.0 <= modes.annihilation_residuals.0.max(1e-12)
        );
    }

    #[test]
    fn recurrence_norm_matches_cosh_condition() {
        let p = fig3();
        let n = 80usize;
        let z = p.g1 * p.g2 / (p.omega * p.omega);
        // raw (unnormalized) norms of the seed-v family
        let mut u = vec![0.0f64; n];
        let mut v = vec![0.0f64; n];
        v[0] = 1.0;
        for k in 0..n - 1 {
            let root = ((k + 1) as f64).sqrt();
            let vn = -p.g1 * u[k] / (p.omega * root);
            let un = -p.g2 * v[k] / (p.omega * root);
            v[k + 1] = vn;
            u[k + 1] = un;
        }
        let norm2: f64 = u.iter().chain(v.iter()).map(|x| x * x).sum();
        let expect = z.cosh() + (p.g2 / p.omega).powi(2) * z.sinh() / z;
        assert!(
            (norm2 - expect).abs() < 1e-10 * expect,
            "{norm2} vs {expect}"
        );
    }

    #[test]
    fn zero_modes_g2_zero_single_fock() {
        // SUSY line with g2 = 0: g1² = Δω
        let p = GrParams::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let t = tr(30, 6);
        let modes = zero_modes_recurrence(&p, t).unwrap();
        // parity −1 mode reduces to |0⟩ in the ↓ component
        let n = 30;
        assert!((modes.psi_minus[n].norm() - 1.0).abs() < 1e-12);
        assert!(modes.annihilation_residuals.1 < 1e-12);
        // parity +1 mode lives on |0,↑⟩ and |1,↓⟩
        let up0 = modes.psi_plus[0].norm();
        let down1 = modes.psi_plus[n + 1].norm();
        assert!((up0 * up0 + down1 * down1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn displacement_argument_resolution() {
        let t = tr(60, 12);
        let res = resolve_displacement_argument(&fig3(), t).unwrap();
        // the square-root form √(g1 g2)/ω is the one annihilated by q
        assert_eq!(res.formula, DisplacementFormula::SeriesSqrt);
        assert!((res.value - 0.75f64.sqrt()).abs() < 1e-12);
        assert!(res.residual < 1e-8, "winner residual {:e}", res.residual);
    }

    #[test]
    fn displacement_and_recurrence_agree() {
        let t = tr(60, 12);
        let p = fig3();
        let rec = zero_modes_recurrence(&p, t).unwrap();
        let disp = zero_modes_displacement(&p, t).unwrap();
        let (op, om) = rec.sector_overlaps(&disp);
        assert!(op > 1.0 - 1e-8, "plus-sector overlap {op}");
        assert!(om > 1.0 - 1e-8, "minus-sector overlap {om}");
        assert!(disp.annihilation_residuals.0 < 1e-8);
        assert!(disp.annihilation_residuals.1 < 1e-8);
    }

    #[test]
    fn parity_maps_displacement_sign() {
        let t = tr(40, 8);
        let p = fig3();
        let modes = zero_modes_displacement(&p, t).unwrap();
        let par = parity_operator(t);
        let flip_plus = par.mat() * &modes.psi_plus - &modes.psi_plus;
        let flip_minus = par.mat() * &modes.psi_minus + &modes.psi_minus;
        assert!(flip_plus.norm_l2() < 1e-12);
        assert!(flip_minus.norm_l2() < 1e-12);
    }

    #[test]
    fn witten_index_fig3() {
        let t = tr(40, 10);
        let w = witten_index(&fig3(), t, 1e-8).unwrap();
        assert_eq!(w, 2);
        // plateau across two decades of svd_tol
        for tol in [1e-9, 1e-7] {
            assert_eq!(witten_index(&fig3(), t, tol).unwrap(), 2);
        }
        // stable under doubling
        assert_eq!(witten_index(&fig3(), tr(80, 10), 1e-8).unwrap(), 2);
    }

    #[test]
    fn zero_mode_spans_agree_between_constructions() {
        let t = tr(60, 12);
        let p = fig3();
        let rec = zero_modes_recurrence(&p, t).unwrap();
        let disp = zero_modes_displacement(&p, t).unwrap();
        // principal angles between the two 2-dim spans
        let g = Mat::<c64>::from_fn(2, 2, |i, j| {
            let a = if i == 0 { &rec.psi_plus } else { &rec.psi_minus };
            let b = if j == 0 { &disp.psi_plus } else { &disp.psi_minus };
            a.adjoint() * b
        });
        let sv = linalg::singular_values(&g).unwrap();
        assert!(sv[1] > 1.0 - 1e-6, "smallest principal cosine {:e}", sv[1]);
    }
}

#[cfg(test)]
mod guard_band_tests {
    use super::*;

    #[test]
    fn threshold_straddling_singular_value_is_reported() {
        let p = GrParams::new(1.0, 2.0, 1.5, 0.5, 0.0).unwrap();
        let t = Truncation::new(40, 10).unwrap();
        let q = build_supercharge(&p, t, SuperchargeFamily::NonRwaMainText).unwrap();
        // place svd_tol on top of a mid-spectrum singular value of H-
        let idx = q.h_minus().interior_indices();
        let sub = crate::linalg::select_submatrix(q.h_minus().mat(), &idx);
        let sv = crate::linalg::singular_values(&sub).unwrap();
        let tol = sv[sv.len() / 2] / sv[0];
        let err = kernel_dimensions(&q, tol);
        assert!(matches!(err, Err(Error::IllConditionedKernel(_))), "{err:?}");
    }
}
