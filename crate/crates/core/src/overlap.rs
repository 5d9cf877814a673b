//! Overlap Dirac operator built from the exact sign of `H_W(−M)`.
//!
//! ```text
//! S = sgn H_W(−M),   D_ov = (1/a)(1 + γS),   Γ = γ/2 − S/2
//! ```
//!
//! `S` comes from a full eigendecomposition, so `u = −γS = 1 − aD_ov` is
//! unitary to rounding and the Ginsparg–Wilson relation holds exactly.

use faer::Mat;
use serde::Serialize;

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::gauge::LinkField;
use crate::latops::{chirality_operator, wilson_dirac, LatticeSpace};
use crate::linalg::{
    c, compressed_eigenvalues, hermitian_eigen, identity, max_abs, max_abs_diff, scale, trace,
    unitarity_defect, CMat, C64,
};
use crate::spectral::KERNEL_TOL;

/// Largest allowed `|Tr Γ − round(Tr Γ)|`.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OverlapOperator {
    space: LatticeSpace,
    spacing: f64,
    m_max: f64,
    gamma: CMat,
    sign: CMat,
    d_ov: CMat,
    big_gamma: CMat,
    min_abs_eig: f64,
}

pub fn build_overlap(lf: &LinkField, rep: &GammaRep, m_max: f64) -> Result<OverlapOperator> {
    let h = wilson_dirac(lf, rep, -m_max)?.to_dense();
    let gamma = chirality_operator(lf, rep)?.to_dense();
    let (vals, vecs) = hermitian_eigen(&h)?;
    let min_abs_eig = vals.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    if min_abs_eig < KERNEL_TOL {
        return Err(Error::SignUndefined { min_abs: min_abs_eig });
    }
    let signed = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * vals[j].signum());
    let sign = &signed * vecs.adjoint();
    let mut ov = OverlapOperator::from_sign(LatticeSpace::of(lf, rep), gamma, sign)?;
    ov.m_max = m_max;
    ov.min_abs_eig = min_abs_eig;
    Ok(ov)
}

impl OverlapOperator {
    /// Builds `D_ov` and `Γ` from an arbitrary Hermitian `S` (used for controls).
    pub fn from_sign(space: LatticeSpace, gamma: CMat, sign: CMat) -> Result<Self> {
        let dim = space.dim();
        if gamma.nrows() != dim || sign.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: sign.nrows() });
        }
        let a = space.spacing();
        let d_ov = scale(&(identity(dim) + &gamma * &sign), c(1.0 / a, 0.0));
        let big_gamma = scale(&(&gamma - &sign), c(0.5, 0.0));
        Ok(Self {
            space,
            spacing: a,
            m_max: f64::NAN,
            gamma,
            sign,
            d_ov,
            big_gamma,
            min_abs_eig: f64::NAN,
        })
    }

    pub fn space(&self) -> LatticeSpace {
        self.space
    }

    pub fn d_ov(&self) -> &CMat {
        &self.d_ov
    }

    pub fn big_gamma(&self) -> &CMat {
        &self.big_gamma
    }

    pub fn sign(&self) -> &CMat {
        &self.sign
    }

    pub fn gamma(&self) -> &CMat {
        &self.gamma
    }

    pub fn m_max(&self) -> f64 {
        self.m_max
    }

    /// `min |λ(H_W(−M))|`.
    pub fn min_abs_eig(&self) -> f64 {
        self.min_abs_eig
    }

    /// `u = 1 − aD_ov = −γS`.
    pub fn u(&self) -> CMat {
        scale(&(&self.gamma * &self.sign), c(-1.0, 0.0))
    }

    /// Same operator with the sign of one diagonal entry of `S` flipped
    /// (the entry of largest magnitude). Breaks `S² = 1`.
    pub fn corrupted(&self) -> Result<Self> {
        let dim = self.space.dim();
        let j = (0..dim)
            .max_by(|&x, &y| self.sign[(x, x)].norm().total_cmp(&self.sign[(y, y)].norm()))
            .unwrap_or(0);
        let mut sign = self.sign.clone();
        sign[(j, j)] = -sign[(j, j)];
        let mut out = Self::from_sign(self.space, self.gamma.clone(), sign)?;
        out.m_max = self.m_max;
        out.min_abs_eig = self.min_abs_eig;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IndexReadout {
    pub index: i64,
    pub trace: f64,
    pub residual: f64,
}

pub fn overlap_trace(ov: &OverlapOperator) -> IndexReadout {
    let tr = trace(&ov.big_gamma);
    let index = tr.re.round();
    IndexReadout { index: index as i64, trace: tr.re, residual: (tr - C64::new(index, 0.0)).norm() }
}

/// `round(Tr Γ)`.
pub fn overlap_index(ov: &OverlapOperator) -> Result<i64> {
    let r = overlap_trace(ov);
    if r.residual >= TRACE_TOL {
        return Err(Error::NonIntegerTrace { trace: r.trace, residual: r.residual });
    }
    Ok(r.index)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GwReport {
    /// `max |γD + Dγ − a DγD|`.
    pub relation: f64,
    /// `max |γuγ·u − 1|`, zero iff `γuγ⁻¹ = u⁻¹`.
    pub conjugation: f64,
    /// `max |u†u − 1|`.
    pub unitarity: f64,
    /// `max |Γ − Γ†|`.
    pub gamma_hermiticity: f64,
}

impl GwReport {
    pub fn worst(&self) -> f64 {
        self.relation.max(self.conjugation)
    }
}

pub fn gw_report(ov: &OverlapOperator) -> GwReport {
    let g = &ov.gamma;
    let d = &ov.d_ov;
    let gd = g * d;
    let dg = d * g;
    let lhs = &gd + &dg - scale(&(&dg * d), c(ov.spacing, 0.0));
    let u = ov.u();
    let conj = &(g * &u) * g;
    let dim = ov.space.dim();
    GwReport {
        relation: max_abs(&lhs),
        conjugation: max_abs_diff(&(&conj * &u), &identity(dim)),
        unitarity: unitarity_defect(&u),
        gamma_hermiticity: crate::linalg::hermiticity_defect(&ov.big_gamma),
    }
}

/// Ginsparg–Wilson residual `max |γD_ov + D_ovγ − a D_ovγD_ov|`.
pub fn gw_residual(ov: &OverlapOperator) -> f64 {
    gw_report(ov).relation
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub zero_modes: usize,
    /// `γ` compressed onto the kernel of `D_ov`.
    pub chiralities: Vec<f64>,
    /// Modes with `D_ov` eigenvalue `2/a`.
    pub doubler_modes: usize,
    /// Sum of the chiralities on the `2/a` eigenspace; equals minus the index.
    pub doubler_chirality: f64,
    /// `Tr Γ` restricted to the kernel.
    pub kernel_trace: f64,
    /// `max ||z − 1/a| − 1/a|` over the eigenvalues of `D_ov`.
    pub circle_defect: f64,
}

/// Zero modes, `2/a` partners and circle structure of `D_ov`.
pub fn mode_report(ov: &OverlapOperator) -> Result<ModeReport> {
    let a = ov.spacing;
    let dd = ov.d_ov.adjoint() * &ov.d_ov;
    let (vals, vecs) = hermitian_eigen(&dd)?;
    let scale2 = (2.0 / a).powi(2);
    let kernel: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < 1e-12 * scale2).collect();
    let doublers: Vec<usize> = (0..vals.len()).filter(|&i| (vals[i] - scale2).abs() < 1e-9 * scale2).collect();
    let doubler_chirality = compressed_eigenvalues(&ov.gamma, &vecs, &doublers)?.iter().sum();
    let chiralities = compressed_eigenvalues(&ov.gamma, &vecs, &kernel)?;
    let kernel_trace = compressed_eigenvalues(&ov.big_gamma, &vecs, &kernel)?.iter().sum();
    let eig = ov
        .d_ov
        .eigenvalues()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let circle_defect = eig
        .iter()
        .map(|z: &C64| ((z - C64::new(1.0 / a, 0.0)).norm() - 1.0 / a).abs())
        .fold(0.0, f64::max);
    Ok(ModeReport {
        zero_modes: kernel.len(),
        chiralities,
        doubler_modes: doublers.len(),
        doubler_chirality,
        kernel_trace,
        circle_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapSummary {
    pub index: i64,
    pub gw_residual: f64,
    pub min_abs_eig_hw: f64,
}

pub fn overlap_summary(ov: &OverlapOperator) -> Result<OverlapSummary> {
    Ok(OverlapSummary {
        index: overlap_index(ov)?,
        gw_residual: gw_residual(ov),
        min_abs_eig_hw: ov.min_abs_eig,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::clifford::build_gamma_rep;
    use crate::gauge::{discretize, make_generalized_link, ConnectionDescriptor};
    use crate::spectral::eta;

    fn flux(q: i64, size: usize) -> LinkField {
        discretize(&make_generalized_link(ConnectionDescriptor::u1_flux(q)).unwrap(), size).unwrap()
    }

    #[test]
    fn trivial_field() {
        let rep = build_gamma_rep(2).unwrap();
        let ov = build_overlap(&LinkField::identity(2, 8, 1), &rep, 1.0).unwrap();
        assert_eq!(overlap_index(&ov).unwrap(), 0);
        let gw = gw_report(&ov);
        assert!(gw.relation < 1e-10 && gw.conjugation < 1e-10 && gw.unitarity < 1e-10);
        assert!(gw.gamma_hermiticity < 1e-12);
        assert!(mode_report(&ov).unwrap().circle_defect < 1e-9);
    }

    #[test]
    fn unit_flux_modes() {
        let rep = build_gamma_rep(2).unwrap();
        let lf = flux(1, 12);
        let ov = build_overlap(&lf, &rep, 1.0).unwrap();
        assert_eq!(overlap_index(&ov).unwrap(), 1);
        assert!(gw_residual(&ov) < 1e-9);
        let r = mode_report(&ov).unwrap();
        assert_eq!(r.zero_modes, 1);
        assert!((r.doubler_chirality + 1.0).abs() < 1e-8);
        assert!(r.chiralities[0] > 0.99);
        assert!((r.kernel_trace - 1.0).abs() < 1e-8);
        let e = eta(&wilson_dirac(&lf, &rep, -1.0).unwrap()).unwrap().eta;
        assert_eq!(overlap_index(&ov).unwrap(), -e / 2);
    }

    #[test]
    fn charge_two() {
        let rep = build_gamma_rep(2).unwrap();
        assert_eq!(overlap_index(&build_overlap(&flux(2, 12), &rep, 1.0).unwrap()).unwrap(), 2);
    }

    #[test]
    fn index_against_the_mass_parameter() {
        // the flux zero modes cross near m ≈ −π|Q|a, so M = 1/2 is too small
        // for |Q| ≥ 2 at N = 12
        let rep = build_gamma_rep(2).unwrap();
        for q in [-2, 1, 3] {
            let lf = flux(q, 12);
            for m in [0.5, 1.0, 1.5] {
                let ov = overlap_index(&build_overlap(&lf, &rep, m).unwrap()).unwrap();
                assert_eq!(ov, crate::spectral::wilson_index(&lf, &rep, m).unwrap());
                let expected = if m > PI * q.abs() as f64 / 12.0 * 1.1 { q } else { 0 };
                assert_eq!(ov, expected, "Q = {q}, M = {m}");
            }
        }
    }

    #[test]
    fn corrupted_sign_breaks_the_relation() {
        let rep = build_gamma_rep(2).unwrap();
        let ov = build_overlap(&flux(1, 8), &rep, 1.0).unwrap();
        let bad = ov.corrupted().unwrap();
        assert!(gw_report(&bad).worst() > 0.1);
        assert!(gw_residual(&bad) > 0.1);
    }

    #[test]
    fn sign_undefined_at_kernel() {
        let rep = build_gamma_rep(2).unwrap();
        // free H_W(0) has exact zero modes
        assert!(matches!(
            build_overlap(&LinkField::identity(2, 4, 1), &rep, 0.0),
            Err(Error::SignUndefined { .. })
        ));
    }
}
