//! The generalized Rabi Hamiltonian, its parity operator, the SUSY-line
//! conditions, and the two physical parameter mappings.
//!
//! ```text
//! H = ω a†a + (Δ/2) σz + g1 (a†σ- + a σ+) + g2 (a†σ+ + a σ-) + λ a†a σz
//! ```
//!
//! `g1` couples co-rotating terms (Jaynes–Cummings limit at `g2 = 0`),
//! `g2` the counter-rotating ones (`g1 = g2` is the Rabi model), and `λ` is
//! the Bloch–Siegert coefficient produced by adiabatic elimination in
//! multi-level realizations.  ħ = 1 throughout.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{
    annihilation_matrix, boson_identity, number_matrix, spin_matrix, tensor_boson_spin,
    OperatorMatrix, SpaceTag, SpinOperatorLabel, Truncation,
};

/// The five model parameters (ω, Δ, g1, g2, λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrParams {
    pub omega: f64,
    pub delta: f64,
    pub g1: f64,
    pub g2: f64,
    pub lambda: f64,
}

impl GrParams {
    pub fn new(omega: f64, delta: f64, g1: f64, g2: f64, lambda: f64) -> Result<Self> {
        let p = Self { omega, delta, g1, g2, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.is_nan() || self.omega <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if self.lambda.abs() >= self.omega {
            return Err(Error::InvalidParameter(format!(
                "|lambda| = {} must be < omega = {}",
                self.lambda.abs(),
                self.omega
            )));
        }
        Ok(())
    }

    /// SUSY-line residual.
    ///
    /// For λ = 0 this is `g1² − g2² − Δω`; zero signals the SUSY line.  For
    /// λ ≠ 0 it evaluates `2(Δ−λ)(ω−λ)(ω+λ) − [g1²(ω−λ) − g2²(ω+λ)]`
    /// verbatim.  The λ ≠ 0 form carries a sign/normalization caveat, so the
    /// authoritative test for ground-state degeneracy is
    /// [`susy_residual_degenerate`](Self::susy_residual_degenerate); both
    /// orientations are exposed.
    pub fn susy_residual(&self) -> f64 {
        if self.lambda == 0.0 {
            self.g1 * self.g1 - self.g2 * self.g2 - self.delta * self.omega
        } else {
            let (w, d, l) = (self.omega, self.delta, self.lambda);
            2.0 * (d - l) * (w - l) * (w + l)
                - (self.g1 * self.g1 * (w - l) - self.g2 * self.g2 * (w + l))
        }
    }

    /// Residual of the condition that actually produces the doubly
    /// degenerate ground state (equivalently, a two-dimensional supercharge
    /// kernel): `g1²(ω+λ) − g2²(ω−λ) − Δ(ω²−λ²)`.
    ///
    /// At λ = 0 this equals ω times [`susy_residual`](Self::susy_residual).
    pub fn susy_residual_degenerate(&self) -> f64 {
        let (w, d, l) = (self.omega, self.delta, self.lambda);
        self.g1 * self.g1 * (w + l) - self.g2 * self.g2 * (w - l) - d * (w * w - l * l)
    }

    /// The coupling-swapped orientation `g2² − g1² − Δω` (λ = 0): the zero
    /// set on which the *partner* block of the supercharge algebra equals
    /// the model Hamiltonian plus a constant.
    pub fn susy_residual_swapped(&self) -> f64 {
        self.g2 * self.g2 - self.g1 * self.g1 - self.delta * self.omega
    }

    /// True when [`susy_residual_degenerate`](Self::susy_residual_degenerate)
    /// vanishes within `tol` (absolute, in units of ω³-scaled residual).
    pub fn is_on_susy_line(&self, tol: f64) -> bool {
        self.susy_residual_degenerate().abs() <= tol
    }
}

/// Electric/magnetic coupling form of the λ = 0 SUSY condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmDualForm {
    /// Ω_E = g1 + g2 (electric coupling).
    pub omega_e: f64,
    /// Ω_B = g1 − g2 (magnetic coupling).
    pub omega_b: f64,
    /// Ω_E·Ω_B − ωΔ; identical to `susy_residual` at λ = 0.
    pub residual: f64,
}

/// Self-dual form Ω_E·Ω_B = ωΔ of the SUSY line, with Ω_{E,B} = g1 ± g2.
/// Rejects λ ≠ 0.
pub fn em_dual_form(p: &GrParams) -> Result<EmDualForm> {
    p.validate()?;
    if p.lambda != 0.0 {
        return Err(Error::InvalidParameter(
            "em_dual_form is defined for lambda = 0 only".into(),
        ));
    }
    let omega_e = p.g1 + p.g2;
    let omega_b = p.g1 - p.g2;
    Ok(EmDualForm { omega_e, omega_b, residual: omega_e * omega_b - p.omega * p.delta })
}

/// Rashba–Dresselhaus electron gas in a perpendicular magnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdParams {
    /// Perpendicular field B0.
    pub b0: f64,
    /// Effective mass m*.
    pub m_eff: f64,
    /// Gyromagnetic factor g*.
    pub g_factor: f64,
    /// Rashba coupling α_R.
    pub alpha_r: f64,
    /// Dresselhaus coupling α_D.
    pub alpha_d: f64,
    #[serde(default = "one")]
    pub e_charge: f64,
    #[serde(default = "one")]
    pub c_light: f64,
    /// Bare electron mass entering the Bohr magneton.
    #[serde(default = "one")]
    pub m_bare: f64,
}

fn one() -> f64 {
    1.0
}

impl RdParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b0", self.b0),
            ("m_eff", self.m_eff),
            ("e_charge", self.e_charge),
            ("c_light", self.c_light),
            ("m_bare", self.m_bare),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Map the spin-orbit problem onto generalized Rabi parameters (ħ = 1):
/// ω = ω_c = eB0/(m*c), κ_{R,D} = α_{R,D}√(eB0)/√c,
/// g_{1,2} = 2√2 κ_{R,D} ω_c, Δ = γ ω_c with γ = g*m*/(2m), λ = 0.
pub fn rd_to_gr(rd: &RdParams) -> Result<GrParams> {
    rd.validate()?;
    let omega_c = rd.e_charge * rd.b0 / (rd.m_eff * rd.c_light);
    let kappa = |alpha: f64| alpha * (rd.e_charge * rd.b0).sqrt() / rd.c_light.sqrt();
    let g1 = 2.0 * 2f64.sqrt() * kappa(rd.alpha_r) * omega_c;
    let g2 = 2.0 * 2f64.sqrt() * kappa(rd.alpha_d) * omega_c;
    let gamma = rd.g_factor * rd.m_eff / (2.0 * rd.m_bare);
    GrParams::new(omega_c, gamma * omega_c, g1, g2, 0.0)
}

/// Λ-scheme drive parameters: two bare couplings, two classical Rabi
/// frequencies, two detunings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchemeParams {
    pub gt1: f64,
    pub gt2: f64,
    pub om1: c64,
    pub om2: c64,
    pub det1: f64,
    pub det2: f64,
}

/// Which coupling normalization to use for the Λ-scheme reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LambdaConvention {
    /// g = g̃ Ω*/(2Δ): the final stated form.
    #[default]
    Half,
    /// g = g̃ Ω*/Δ: the variant without the factor 2.
    Full,
}

impl LambdaSchemeParams {
    fn validate(&self) -> Result<()> {
        if self.det1 == 0.0 || self.det2 == 0.0 {
            return Err(Error::InvalidParameter(
                "lambda-scheme detunings must be nonzero".into(),
            ));
        }
        Ok(())
    }
}

/// Reduce the Λ-scheme to generalized Rabi parameters:
/// g_{1,2} = g̃_{1,2} Ω*_{1,2}/(2Δ_{1,2}), ω = (g̃1²/Δ1 + g̃2²/Δ2)/2,
/// Δ = |Ω1|²/Δ1 − |Ω2|²/Δ2, λ = g1²/Δ1 − g2²/Δ2.
///
/// The boolean is true when the parameters cancel the Bloch–Siegert shift
/// (g1²/Δ1 = g2²/Δ2 within 1e−12 relative).  Complex drive phases are
/// gauged away: couplings are stored as |g| with the sign of the real
/// input preserved.
pub fn lambda_scheme_to_gr(ls: &LambdaSchemeParams) -> Result<(GrParams, bool)> {
    lambda_scheme_to_gr_with(ls, LambdaConvention::Half)
}

pub fn lambda_scheme_to_gr_with(
    ls: &LambdaSchemeParams,
    conv: LambdaConvention,
) -> Result<(GrParams, bool)> {
    ls.validate()?;
    let denom = match conv {
        LambdaConvention::Half => 2.0,
        LambdaConvention::Full => 1.0,
    };
    let gauge_real = |z: c64| -> f64 {
        if z.im.abs() <= 1e-12 * z.norm() {
            z.re
        } else {
            z.norm()
        }
    };
    let g1 = gauge_real(ls.om1.conj() * (ls.gt1 / (denom * ls.det1)));
    let g2 = gauge_real(ls.om2.conj() * (ls.gt2 / (denom * ls.det2)));
    let omega = 0.5 * (ls.gt1 * ls.gt1 / ls.det1 + ls.gt2 * ls.gt2 / ls.det2);
    let delta = ls.om1.norm_sqr() / ls.det1 - ls.om2.norm_sqr() / ls.det2;
    let shift1 = g1 * g1 / ls.det1;
    let shift2 = g2 * g2 / ls.det2;
    let lambda = shift1 - shift2;
    let cancelled = lambda.abs() < 1e-12 * shift1.abs().max(shift2.abs());
    let lambda = if cancelled { 0.0 } else { lambda };
    let p = GrParams::new(omega, delta, g1, g2, lambda)?;
    Ok((p, cancelled))
}

/// Assemble the generalized Rabi Hamiltonian on the spin-outermost
/// `BosonSpin` space.  Hermitian to machine precision: the couplings are
/// added as `T + T†` with `T = a† ⊗ (g1 σ- + g2 σ+)`.
pub fn build_gr_hamiltonian(p: &GrParams, trunc: Truncation) -> Result<OperatorMatrix> {
    p.validate()?;
    let a = annihilation_matrix(trunc);
    let adag = a.dagger();
    let nb = number_matrix(trunc);
    let id_s = spin_matrix(SpinOperatorLabel::Identity);
    let sz = spin_matrix(SpinOperatorLabel::SigmaZ);
    let sp = spin_matrix(SpinOperatorLabel::SigmaPlus);
    let sm = spin_matrix(SpinOperatorLabel::SigmaMinus);

    let mut h = linalg::scale(
        tensor_boson_spin(&nb, &id_s)?.mat(),
        c64::new(p.omega, 0.0),
    );
    h += linalg::scale(tensor_boson_spin(&boson_identity(trunc), &sz)?.mat(), c64::new(0.5 * p.delta, 0.0));
    h += linalg::scale(tensor_boson_spin(&nb, &sz)?.mat(), c64::new(p.lambda, 0.0));

    // coupling = T + T† with T = a† ⊗ (g1 σ- + g2 σ+)
    let mixed = linalg::scale(sm.mat(), c64::new(p.g1, 0.0))
        + linalg::scale(sp.mat(), c64::new(p.g2, 0.0));
    let t = linalg::kron(&mixed, adag.mat());
    h += &t + t.adjoint();

    OperatorMatrix::new(h, trunc, SpaceTag::BosonSpin)
}

/// Parity operator P = exp(iπ a†a) ⊗ σz as a real diagonal with P² = I
/// exactly.  The conventional global phase e^{−iπ/2} of exp(iπ(a†a + σz/2))
/// has been divided out; only P's eigenspaces matter.
pub fn parity_operator(trunc: Truncation) -> OperatorMatrix {
    let n = trunc.n_max();
    let mut p = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        let boson = if k % 2 == 0 { 1.0 } else { -1.0 };
        p[(k, k)] = c64::new(boson, 0.0); // |↑⟩ block: +σz
        p[(n + k, n + k)] = c64::new(-boson, 0.0); // |↓⟩ block
    }
    OperatorMatrix::new(p, trunc, SpaceTag::BosonSpin).expect("dims by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;

    fn tr(n: usize) -> Truncation {
        Truncation::new(n, 0).unwrap()
    }

    #[test]
    fn decoupled_spectrum() {
        let p = GrParams::new(1.0, 0.7, 0.0, 0.0, 0.0).unwrap();
        let h = build_gr_hamiltonian(&p, tr(6)).unwrap();
        let (vals, _) = linalg::hermitian_eigen(h.mat()).unwrap();
        let mut expected: Vec<f64> = (0..6)
            .flat_map(|n| [n as f64 + 0.35, n as f64 - 0.35])
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn hermitian_exactly() {
        let p = GrParams::new(1.3, -0.4, 0.8, 0.25, 0.1).unwrap();
        let h = build_gr_hamiltonian(&p, tr(12)).unwrap();
        let diff = h.mat() - h.mat().adjoint();
        assert_eq!(diff.norm_max(), 0.0);
    }

    #[test]
    fn parity_squares_to_identity_and_balances() {
        let t = tr(7);
        let p = parity_operator(t);
        let sq = p.mat() * p.mat();
        let id = Mat::<c64>::identity(14, 14);
        assert_eq!(frobenius(&(&sq - &id)), 0.0);
        let plus = (0..14).filter(|&k| p.mat()[(k, k)].re > 0.0).count();
        assert_eq!(plus, 7);
    }

    #[test]
    fn hamiltonian_commutes_with_parity() {
        let params = [
            GrParams::new(1.0, 2.0, 1.5, 0.5, 0.0).unwrap(),
            GrParams::new(0.8, -1.1, 0.3, 0.9, 0.2).unwrap(),
            GrParams::new(2.0, 0.0, 1.0, 1.0, -0.5).unwrap(),
        ];
        for p in params {
            let t = tr(10);
            let h = build_gr_hamiltonian(&p, t).unwrap();
            let par = parity_operator(t);
            let c = linalg::commutator(h.mat(), par.mat());
            assert!(frobenius(&c) < 1e-12, "commutator {:e}", frobenius(&c));
        }
    }

    #[test]
    fn susy_residual_values() {
        let fig3 = GrParams::new(1.0, 2.0, 1.5, 0.5, 0.0).unwrap();
        assert_eq!(fig3.susy_residual(), 0.0);
        let off = GrParams::new(1.0, 2.0, 1.4, 0.5, 0.0).unwrap();
        assert!((off.susy_residual() + 0.29).abs() < 1e-12);
        let rabi = GrParams::new(1.0, 0.0, 0.7, 0.7, 0.0).unwrap();
        assert_eq!(rabi.susy_residual(), 0.0);
    }

    #[test]
    fn em_dual_matches_susy_residual() {
        let p = GrParams::new(1.0, 2.0, 1.5, 0.5, 0.0).unwrap();
        let em = em_dual_form(&p).unwrap();
        assert_eq!(em.omega_e, 2.0);
        assert_eq!(em.omega_b, 1.0);
        assert_eq!(em.residual, 0.0);
        assert_eq!(em.residual, p.susy_residual());

        let q = GrParams::new(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let em2 = em_dual_form(&q).unwrap();
        assert_eq!(em2.omega_b, 0.0);
        assert_eq!(em2.residual, -1.0);
        // swap symmetry: residual depends on the product only
        let swapped = EmDualForm {
            omega_e: em2.omega_b,
            omega_b: em2.omega_e,
            residual: em2.omega_b * em2.omega_e - q.omega * q.delta,
        };
        assert_eq!(swapped.residual, em2.residual);

        let l = GrParams::new(1.0, 1.0, 1.0, 0.5, 0.3).unwrap();
        assert!(em_dual_form(&l).is_err());
    }

    #[test]
    fn rd_mapping_hand_values() {
        let rd = RdParams {
            b0: 1.0,
            m_eff: 1.0,
            g_factor: 2.0, // g* m*/(2m) = 1
            alpha_r: 1.0,
            alpha_d: 0.0,
            e_charge: 1.0,
            c_light: 1.0,
            m_bare: 1.0,
        };
        let p = rd_to_gr(&rd).unwrap();
        assert!((p.omega - 1.0).abs() < 1e-15);
        assert!((p.delta - 1.0).abs() < 1e-15);
        assert!((p.g1 - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.g2, 0.0);
        assert_eq!(p.lambda, 0.0);
    }

    #[test]
    fn rd_mapping_field_scaling() {
        let mk = |b0: f64| RdParams {
            b0,
            m_eff: 1.3,
            g_factor: 1.7,
            alpha_r: 0.4,
            alpha_d: 0.2,
            e_charge: 1.0,
            c_light: 1.0,
            m_bare: 1.0,
        };
        let p1 = rd_to_gr(&mk(1.0)).unwrap();
        let p4 = rd_to_gr(&mk(4.0)).unwrap();
        assert!((p4.omega / p1.omega - 4.0).abs() < 1e-12);
        assert!((p4.delta / p1.delta - 4.0).abs() < 1e-12);
        assert!((p4.g1 / p1.g1 - 8.0).abs() < 1e-12);
        assert!((p4.g2 / p1.g2 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rd_symmetric_couplings() {
        let rd = RdParams {
            b0: 2.0,
            m_eff: 1.0,
            g_factor: 1.0,
            alpha_r: 0.7,
            alpha_d: 0.7,
            e_charge: 1.0,
            c_light: 1.0,
            m_bare: 1.0,
        };
        let p = rd_to_gr(&rd).unwrap();
        assert_eq!(p.g1, p.g2);
    }

    #[test]
    fn lambda_scheme_hand_values() {
        let ls = LambdaSchemeParams {
            gt1: 1.0,
            gt2: 1.0,
            om1: c64::new(2.0, 0.0),
            om2: c64::new(1.0, 0.0),
            det1: 10.0,
            det2: 20.0,
        };
        let (p, cancelled) = lambda_scheme_to_gr(&ls).unwrap();
        assert!((p.g1 - 0.1).abs() < 1e-15);
        assert!((p.g2 - 0.025).abs() < 1e-15);
        assert!((p.omega - 0.075).abs() < 1e-15);
        assert!((p.delta - 0.35).abs() < 1e-15);
        assert!(!cancelled);
        assert!((p.lambda - (0.01 / 10.0 - 0.000625 / 20.0)).abs() < 1e-15);
    }

    #[test]
    fn lambda_scheme_symmetric_inputs() {
        let ls = LambdaSchemeParams {
            gt1: 0.8,
            gt2: 0.8,
            om1: c64::new(1.5, 0.0),
            om2: c64::new(1.5, 0.0),
            det1: 12.0,
            det2: 12.0,
        };
        let (p, cancelled) = lambda_scheme_to_gr(&ls).unwrap();
        assert_eq!(p.delta, 0.0);
        assert_eq!(p.lambda, 0.0);
        assert_eq!(p.g1, p.g2);
        assert!(cancelled);
    }

    #[test]
    fn lambda_scheme_cancellation_flag() {
        // choose det2 so that g1²/Δ1 = g2²/Δ2
        let ls = LambdaSchemeParams {
            gt1: 1.0,
            gt2: 1.0,
            om1: c64::new(2.0, 0.0),
            om2: c64::new(2.0, 0.0),
            det1: 8.0,
            det2: 8.0,
        };
        let (_, cancelled) = lambda_scheme_to_gr(&ls).unwrap();
        assert!(cancelled);
    }

    #[test]
    fn lambda_scheme_rejects_zero_detuning() {
        let ls = LambdaSchemeParams {
            gt1: 1.0,
            gt2: 1.0,
            om1: c64::new(1.0, 0.0),
            om2: c64::new(1.0, 0.0),
            det1: 0.0,
            det2: 5.0,
        };
        assert!(lambda_scheme_to_gr(&ls).is_err());
    }

    #[test]
    fn full_convention_drops_factor_two() {
        let ls = LambdaSchemeParams {
            gt1: 1.0,
            gt2: 1.0,
            om1: c64::new(2.0, 0.0),
            om2: c64::new(1.0, 0.0),
            det1: 10.0,
            det2: 20.0,
        };
        let (half, _) = lambda_scheme_to_gr_with(&ls, LambdaConvention::Half).unwrap();
        let (full, _) = lambda_scheme_to_gr_with(&ls, LambdaConvention::Full).unwrap();
        assert!((full.g1 - 2.0 * half.g1).abs() < 1e-15);
        assert!((full.g2 - 2.0 * half.g2).abs() < 1e-15);
    }
}
