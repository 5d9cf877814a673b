//! Explicit Clifford generators and chirality for dimensions 1 through 4.
//!
//! Conventions (fixed, so spectra and signs are reproducible):
//!
//! * `n = 1`: `c_1 = (1)`.
//! * `n = 2`: `c_1 = σ_1`, `c_2 = σ_2* = -σ_2`, `γ = i c_1 c_2 = σ_3`.
//!   With this orientation a U(1) background with positive plaquette
//!   charge carries zero modes of chirality `+1`.
//! * `n = 3`: `c_k = σ_k`; no chirality.
//! * `n = 4`: chiral basis `c_k = [[0, -iσ_k], [iσ_k, 0]]` for `k = 1, 2, 3`,
//!   `c_4 = [[0, 1], [1, 0]]`, `γ = c_1 c_2 c_3 c_4 = diag(1, 1, -1, -1)`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{c, max_abs_diff, identity, CMat, C64, I, ONE, ZERO};

#[derive(Debug, Clone)]
pub struct GammaRep {
    n: usize,
    spinor_dim: usize,
    gammas: Vec<CMat>,
    chirality: Option<CMat>,
}

fn mat2(a: C64, b: C64, cc: C64, d: C64) -> CMat {
    let e = [[a, b], [cc, d]];
    Mat::from_fn(2, 2, |i, j| e[i][j])
}

fn pauli(k: usize) -> CMat {
    match k {
        1 => mat2(ZERO, ONE, ONE, ZERO),
        2 => mat2(ZERO, -I, I, ZERO),
        3 => mat2(ONE, ZERO, ZERO, -ONE),
        _ => unreachable!("pauli index"),
    }
}

fn block_offdiag(upper: &CMat, lower: &CMat) -> CMat {
    let h = upper.nrows();
    Mat::from_fn(2 * h, 2 * h, |i, j| match (i < h, j < h) {
        (true, false) => upper[(i, j - h)],
        (false, true) => lower[(i - h, j)],
        _ => ZERO,
    })
}

pub fn build_gamma_rep(n: usize) -> Result<GammaRep> {
    let (gammas, chirality) = match n {
        1 => (vec![Mat::from_fn(1, 1, |_, _| ONE)], None),
        2 => {
            let c1 = pauli(1);
            let c2 = -pauli(2);
            let g = (&c1 * &c2) * faer::Scale(I);
            (vec![c1, c2], Some(g))
        }
        3 => ((1..=3).map(pauli).collect(), None),
        4 => {
            let mut gs: Vec<CMat> = (1..=3)
                .map(|k| {
                    let s = pauli(k);
                    block_offdiag(&(&s * faer::Scale(-I)), &(&s * faer::Scale(I)))
                })
                .collect();
            gs.push(block_offdiag(&identity(2), &identity(2)));
            let g = &(&gs[0] * &gs[1]) * &(&gs[2] * &gs[3]);
            (gs, Some(g))
        }
        _ => return Err(Error::UnsupportedDimension(n)),
    };
    Ok(GammaRep {
        n,
        spinor_dim: 1 << (n / 2),
        gammas,
        chirality,
    })
}

impl GammaRep {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spinor_dim(&self) -> usize {
        self.spinor_dim
    }

    /// Clifford generator `c_i`, zero-based direction.
    pub fn gamma(&self, i: usize) -> &CMat {
        &self.gammas[i]
    }

    pub fn gammas(&self) -> &[CMat] {
        &self.gammas
    }

    pub fn chirality(&self) -> Option<&CMat> {
        self.chirality.as_ref()
    }

    pub fn require_chirality(&self) -> Result<&CMat> {
        self.chirality.as_ref().ok_or(Error::OddDimension(self.n))
    }

    /// Largest deviation from `{c_i, c_j} = 2δ_ij`, `{γ, c_i} = 0`,
    /// `γ² = id`, Hermiticity and `tr γ = 0`.
    pub fn algebra_defect(&self) -> f64 {
        let d = self.spinor_dim;
        let id = identity(d);
        let mut worst = 0.0f64;
        for (i, ci) in self.gammas.iter().enumerate() {
            worst = worst.max(max_abs_diff(ci, &ci.adjoint().to_owned()));
            for (j, cj) in self.gammas.iter().enumerate() {
                let anti = &(ci * cj) + &(cj * ci);
                let target = if i == j { &id * faer::Scale(c(2.0, 0.0)) } else { Mat::zeros(d, d) };
                worst = worst.max(max_abs_diff(&anti, &target));
            }
        }
        if let Some(g) = &self.chirality {
            worst = worst.max(max_abs_diff(g, &g.adjoint().to_owned()));
            worst = worst.max(max_abs_diff(&(g * g), &id));
            for ci in &self.gammas {
                let anti = &(g * ci) + &(ci * g);
                worst = worst.max(max_abs_diff(&anti, &Mat::zeros(d, d)));
            }
            let tr: C64 = (0..d).map(|k| g[(k, k)]).sum();
            worst = worst.max(tr.norm());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_supported_dimensions_satisfy_the_algebra() {
        for n in 1..=4 {
            let rep = build_gamma_rep(n).unwrap();
            assert_eq!(rep.spinor_dim(), 1 << (n / 2));
            assert_eq!(rep.gammas().len(), n);
            assert_eq!(rep.chirality().is_some(), n % 2 == 0);
            assert!(rep.algebra_defect() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn two_dimensional_convention() {
        let rep = build_gamma_rep(2).unwrap();
        let g = rep.chirality().unwrap();
        assert_eq!(g[(0, 0)], ONE);
        assert_eq!(g[(1, 1)], -ONE);
        assert_eq!(g[(0, 1)], ZERO);
        assert_eq!(rep.gamma(0)[(0, 1)], ONE);
        assert_eq!(rep.gamma(1)[(0, 1)], I);
        let tr = g[(0, 0)] + g[(1, 1)];
        assert_eq!(tr, ZERO);
    }

    #[test]
    fn four_dimensional_chirality_is_diagonal() {
        let rep = build_gamma_rep(4).unwrap();
        let g = rep.chirality().unwrap();
        let expected = [1.0, 1.0, -1.0, -1.0];
        for (k, e) in expected.iter().enumerate() {
            assert!((g[(k, k)] - c(*e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn unsupported_dimensions_are_rejected() {
        assert!(matches!(build_gamma_rep(0), Err(Error::UnsupportedDimension(0))));
        assert!(matches!(build_gamma_rep(5), Err(Error::UnsupportedDimension(5))));
    }

    #[test]
    fn odd_dimension_has_no_chirality() {
        let rep = build_gamma_rep(3).unwrap();
        assert!(matches!(rep.require_chirality(), Err(Error::OddDimension(3))));
    }
}
