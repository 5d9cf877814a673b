//! The lattice–continuum bridge.
//!
//! The cutoff is the per-axis tent `ρ_a(t) = (1/a)·max{0, 1 − t/a, 1 − (1−t)/a}`
//! on the unit circle, `ρ_a(x) = Π_i ρ_a(x_i)`. The maps are
//!
//! ```text
//! (f_a φ)(x)  = a^n Σ_z ρ_a(x − z) U(x, z) φ(z)
//! (f_a* ψ)(z) = ∫ ρ_a(z − x) U(x, z)⁻¹ ψ(x) dⁿx
//! ```
//!
//! Integrals over the torus use a tensor Gauss–Legendre rule on every lattice
//! cell. Since `ρ_a` is linear on each cell, the rule is exact up to the
//! smoothness of `U(x, z)` and of the integrand section.
//!
//! The combined operator on `lattice ⊕ continuum` is
//!
//! ```text
//! H_com(m, t) = [ −H_W(m)   t F† ]
//!               [  t F      γ(D + m) ]
//! ```
//!
//! with `F` the matrix of `f_a` between orthonormal bases.

use std::f64::consts::PI;
use std::io::Write;
use std::num::NonZeroUsize;

use faer::Mat;
use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clifford::GammaRep;
use crate::continuum::{continuum_basis, continuum_dirac_parts, BasisKind, ContinuumBasis, DiracParts};
use crate::error::{Error, Result};
use crate::gauge::{discretize, ConnectionKind, GeneralizedLink, LinkField};
use crate::latops::{
    chirality_operator, free_wilson_block, wilson_dirac, wilson_dirac_blocks, BlockSparse, LatticeSpace,
};
use crate::lattice::{torus_displacement, wrap_unit, Lattice};
use crate::linalg::{
    adjoint, c, hermitian_eigen, hermitian_eigenvalues, identity, kron, matvec, random_vector, scale, CMat, C64,
    ZERO,
};

/// Minimum Gauss points per axis per cell.
pub const MIN_QUADRATURE: usize = 8;

/// Default gap tolerance of the staple scan.
pub const GAP_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
pub struct CutoffRho {
    n: usize,
    a: f64,
}

impl CutoffRho {
    pub fn new(n: usize, size: usize) -> Self {
        Self { n, a: 1.0 / size as f64 }
    }

    pub fn spacing(&self) -> f64 {
        self.a
    }

    /// One-dimensional profile at `t` (taken mod 1).
    pub fn axis(&self, t: f64) -> f64 {
        let t = wrap_unit(t);
        let a = self.a;
        (1.0 / a) * (1.0 - t / a).max(1.0 - (1.0 - t) / a).max(0.0)
    }

    /// `ρ_a(d)` for a displacement `d`.
    pub fn eval(&self, d: &[f64]) -> f64 {
        d.iter().map(|&t| self.axis(t)).product()
    }

    /// `a^n Σ_z ρ_a(x − z)`.
    pub fn partition_sum(&self, x: &[f64]) -> f64 {
        let lat = Lattice::new(self.n, (1.0 / self.a).round() as usize);
        let an = self.a.powi(self.n as i32);
        lat.sites()
            .map(|z| {
                let d: Vec<f64> = x.iter().zip(lat.position(z)).map(|(xi, zi)| xi - zi).collect();
                self.eval(&d)
            })
            .sum::<f64>()
            * an
    }
}

/// Tensor Gauss–Legendre rule on the unit cell, nodes in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct CellQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CellQuadrature {
    pub fn new(points: usize) -> Result<Self> {
        if points < MIN_QUADRATURE {
            return Err(Error::QuadratureTooCoarse(points));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(points).expect("points > 0"));
        let (nodes, weights) = rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).unzip();
        Ok(Self { nodes, weights })
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    /// `∫_lo^hi f` using the rule on each of `cells` equal sub-intervals.
    pub fn integrate_1d<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, cells: usize, f: F) -> f64 {
        let h = (hi - lo) / cells as f64;
        let mut acc = 0.0;
        for cell in 0..cells {
            let base = lo + cell as f64 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * h * f(base + x * h);
            }
        }
        acc
    }
}

/// Largest `|a^n Σ_z ρ_a(x − z) − 1|` over `samples` random points.
pub fn partition_of_unity_defect(n: usize, size: usize, samples: usize, seed: u64) -> f64 {
    let rho = CutoffRho::new(n, size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            (rho.partition_sum(&x) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// `|∫ ρ_a(x − z) dⁿx − 1|` with `z` at the origin, by cellwise quadrature.
pub fn unit_mass_defect(n: usize, size: usize, quad: &CellQuadrature) -> f64 {
    let rho = CutoffRho::new(n, size);
    let a = rho.spacing();
    let one_d = quad.integrate_1d(-a, a, 2, |t| rho.axis(t));
    (one_d.powi(n as i32) - 1.0).abs()
}

/// `{0} ∪ {±e_k}`.
pub fn vertices_axes(n: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0; n]];
    for k in 0..n {
        for s in [-1, 1] {
            let mut e = vec![0; n];
            e[k] = s;
            out.push(e);
        }
    }
    out
}

/// `{−1, 0, 1}^n`, every lattice vector whose shifted tent overlaps the origin's.
pub fn vertices_cube(n: usize) -> Vec<Vec<i64>> {
    (0..3usize.pow(n as u32))
        .map(|mut idx| {
            (0..n)
                .map(|_| {
                    let d = (idx % 3) as i64 - 1;
                    idx /= 3;
                    d
                })
                .collect()
        })
        .collect()
}

/// `a^n Σ_{e∈B} ∫ ρ_a(x) ρ_a(x − ae) dⁿx` by quadrature.
///
/// The integrand factorises over axes, so each term is a product of
/// one-dimensional integrals over `[−a, a]` (two cells).
pub fn tent_overlap_sum(n: usize, size: usize, vertices: &[Vec<i64>], quad: &CellQuadrature) -> f64 {
    let rho = CutoffRho::new(n, size);
    let a = rho.spacing();
    let axis_integral = |s: i64| quad.integrate_1d(-a, a, 2, |t| rho.axis(t) * rho.axis(t - a * s as f64));
    let table = [axis_integral(-1), axis_integral(0), axis_integral(1)];
    let an = a.powi(n as i32);
    vertices
        .iter()
        .map(|e| e.iter().map(|&s| table[(s + 1) as usize]).product::<f64>())
        .sum::<f64>()
        * an
}

#[derive(Debug, Clone)]
struct Corner {
    site: usize,
    rho: f64,
    /// `U(x, z)` on colour.
    link: CMat,
}

#[derive(Debug, Clone)]
struct QuadPoint {
    x: Vec<f64>,
    weight: f64,
    corners: Vec<Corner>,
}

/// Realisations of `f_a` and `f_a*` for one lattice spacing.
#[derive(Debug, Clone)]
pub struct InterpMaps {
    link: GeneralizedLink,
    lf: LinkField,
    space: LatticeSpace,
    rho: CutoffRho,
    quad_points: usize,
    points: Vec<QuadPoint>,
    basis: Option<ContinuumBasis>,
    f: Option<CMat>,
}

pub fn build_maps(link: &GeneralizedLink, rep: &GammaRep, size: usize, cutoff: Option<usize>) -> Result<InterpMaps> {
    build_maps_with(link, rep, size, cutoff, MIN_QUADRATURE)
}

pub fn build_maps_with(
    link: &GeneralizedLink,
    rep: &GammaRep,
    size: usize,
    cutoff: Option<usize>,
    quad_points: usize,
) -> Result<InterpMaps> {
    let quad = CellQuadrature::new(quad_points)?;
    if !link.is_continuum() {
        return Err(Error::UnsupportedBackground("interpolation needs a continuum link".into()));
    }
    let lf = discretize(link, size)?;
    let lat = lf.lattice();
    let n = lat.n();
    let a = lat.spacing();
    let rho = CutoffRho::new(n, size);
    let q = quad.points();
    let mut points = Vec::with_capacity(lat.volume() * q.pow(n as u32));
    for cell in lat.sites() {
        let base = lat.coords(cell);
        for idx in 0..q.pow(n as u32) {
            let mut rest = idx;
            let mut x = vec![0.0; n];
            let mut weight = a.powi(n as i32);
            for i in (0..n).rev() {
                let k = rest % q;
                rest /= q;
                x[i] = (base[i] as f64 + quad.nodes[k]) * a;
                weight *= quad.weights[k];
            }
            let mut corners = Vec::with_capacity(1 << n);
            for mask in 0..(1usize << n) {
                let mut site = cell;
                for i in 0..n {
                    if mask >> i & 1 == 1 {
                        site = lat.shift(site, i, 1);
                    }
                }
                let zpos = lat.position(site);
                let d = torus_displacement(&zpos, &x);
                corners.push(Corner { site, rho: rho.eval(&d), link: link.eval(&x, &zpos)? });
            }
            points.push(QuadPoint { x, weight, corners });
        }
    }
    let space = LatticeSpace::of(&lf, rep);
    let mut maps = InterpMaps {
        link: link.clone(),
        lf,
        space,
        rho,
        quad_points,
        points,
        basis: None,
        f: None,
    };
    if let Some(k) = cutoff {
        let basis = continuum_basis(link.descriptor(), rep, k)?;
        maps.f = Some(maps.assemble_f(&basis));
        maps.basis = Some(basis);
    }
    Ok(maps)
}

impl InterpMaps {
    pub fn space(&self) -> LatticeSpace {
        self.space
    }

    pub fn link(&self) -> &GeneralizedLink {
        &self.link
    }

    pub fn link_field(&self) -> &LinkField {
        &self.lf
    }

    pub fn quadrature_points(&self) -> usize {
        self.quad_points
    }

    pub fn rho(&self) -> CutoffRho {
        self.rho
    }

    pub fn basis(&self) -> Option<&ContinuumBasis> {
        self.basis.as_ref()
    }

    /// Matrix of `f_a` (continuum coefficients ← lattice), orthonormal bases.
    pub fn f_matrix(&self) -> Option<&CMat> {
        self.f.as_ref()
    }

    /// Matrix of `f_a*`, i.e. `F†`.
    pub fn f_star_matrix(&self) -> Option<CMat> {
        self.f.as_ref().map(adjoint)
    }

    /// Positions of the quadrature nodes.
    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.x.as_slice())
    }

    fn n_c(&self) -> usize {
        self.space.n_c()
    }

    fn assemble_f(&self, basis: &ContinuumBasis) -> CMat {
        let dim_c = basis.dim();
        let dim_l = self.space.dim();
        let n = self.space.n();
        let n_c = self.n_c();
        let norm = self.rho.spacing().powf(0.5 * n as f64);
        let layout: Vec<(usize, usize, usize)> = (0..dim_c)
            .map(|b| {
                let (scalar, comp) = basis.layout(b);
                (scalar, comp / n_c, comp % n_c)
            })
            .collect();
        let mut f = Mat::zeros(dim_c, dim_l);
        for p in &self.points {
            let vals = basis.eval_scalars(&p.x);
            for corner in &p.corners {
                let w = p.weight * corner.rho * norm;
                if w == 0.0 {
                    continue;
                }
                for (b, &(scalar, s, cb)) in layout.iter().enumerate() {
                    let base = vals[scalar].conj() * w;
                    for col in 0..n_c {
                        let u = corner.link[(cb, col)];
                        if u != ZERO {
                            f[(b, self.space.index(corner.site, s, col))] += base * u;
                        }
                    }
                }
            }
        }
        f
    }

    /// `f_a φ` at every quadrature node.
    pub fn lift(&self, phi: &[C64]) -> Result<Vec<Vec<C64>>> {
        if phi.len() != self.space.dim() {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), actual: phi.len() });
        }
        let an = self.space.volume_weight();
        let s_dim = self.space.spinor_dim();
        let n_c = self.n_c();
        Ok(self
            .points
            .iter()
            .map(|p| {
                let mut out = vec![ZERO; s_dim * n_c];
                for corner in &p.corners {
                    let w = an * corner.rho;
                    for s in 0..s_dim {
                        for row in 0..n_c {
                            let mut acc = ZERO;
                            for col in 0..n_c {
                                acc += corner.link[(row, col)] * phi[self.space.index(corner.site, s, col)];
                            }
                            out[s * n_c + row] += acc * w;
                        }
                    }
                }
                out
            })
            .collect())
    }

    /// `f_a* ψ` for a section given by its values at the quadrature nodes.
    pub fn restrict(&self, values: &[Vec<C64>]) -> Result<Vec<C64>> {
        if values.len() != self.points.len() {
            return Err(Error::DimensionMismatch { expected: self.points.len(), actual: values.len() });
        }
        let s_dim = self.space.spinor_dim();
        let n_c = self.n_c();
        let mut out = vec![ZERO; self.space.dim()];
        for (p, v) in self.points.iter().zip(values) {
            for corner in &p.corners {
                let w = p.weight * corner.rho;
                for s in 0..s_dim {
                    for col in 0..n_c {
                        let mut acc = ZERO;
                        for row in 0..n_c {
                            acc += corner.link[(row, col)].conj() * v[s * n_c + row];
                        }
                        out[self.space.index(corner.site, s, col)] += acc * w;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Values of a section at the quadrature nodes.
    pub fn sample<F: Fn(&[f64]) -> Vec<C64>>(&self, f: F) -> Vec<Vec<C64>> {
        self.points.iter().map(|p| f(&p.x)).collect()
    }

    /// `⟨u, v⟩_{L²}` by quadrature.
    pub fn l2_inner(&self, u: &[Vec<C64>], v: &[Vec<C64>]) -> C64 {
        self.points
            .iter()
            .zip(u.iter().zip(v))
            .map(|(p, (a, b))| crate::linalg::dot(a, b) * p.weight)
            .sum()
    }

    pub fn l2_norm(&self, v: &[Vec<C64>]) -> f64 {
        self.l2_inner(v, v).re.max(0.0).sqrt()
    }

    pub fn l2_distance(&self, u: &[Vec<C64>], v: &[Vec<C64>]) -> f64 {
        let diff: Vec<Vec<C64>> = u
            .iter()
            .zip(v)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        self.l2_norm(&diff)
    }

    /// Block matrix of `f_a* f_a` on the lattice.
    pub fn star_times_f(&self) -> BlockSparse {
        let an = self.space.volume_weight();
        let id_s = identity(self.space.spinor_dim());
        let mut out = BlockSparse::zeros(self.lf.lattice().volume(), self.space.block());
        for p in &self.points {
            for ci in &p.corners {
                for cj in &p.corners {
                    let w = p.weight * an * ci.rho * cj.rho;
                    if w == 0.0 {
                        continue;
                    }
                    let colour = scale(&(ci.link.adjoint() * &cj.link), c(w, 0.0));
                    out.add_block(ci.site, cj.site, &kron(&id_s, &colour));
                }
            }
        }
        out
    }

    /// Exact `‖f_a‖` from the largest eigenvalue of `f_a* f_a`.
    pub fn operator_norm(&self) -> Result<f64> {
        let m = self.star_times_f().to_dense();
        Ok(hermitian_eigenvalues(&m)?.last().copied().unwrap_or(0.0).max(0.0).sqrt())
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_order(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Deterministic smooth test sections, as coefficient vectors in a
/// small continuum basis: only Fourier modes with `|k_i| ≤ band` or Landau
/// levels `≤ band` are populated.
pub fn band_limited_sections(basis: &ContinuumBasis, band: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let allowed: Vec<bool> = (0..basis.dim())
        .map(|b| match basis.kind() {
            BasisKind::Fourier { modes } => {
                let (scalar, _) = basis.layout(b);
                modes[scalar].iter().all(|k| k.unsigned_abs() as usize <= band)
            }
            BasisKind::Landau { states, .. } => states[b].level <= band,
        })
        .collect();
    (0..count)
        .map(|_| {
            let raw = random_vector(&mut rng, basis.dim());
            let v: Vec<C64> = raw.into_iter().zip(&allowed).map(|(z, &ok)| if ok { z } else { ZERO }).collect();
            let nv = crate::linalg::norm(&v);
            v.into_iter().map(|z| z / nv).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FBoundsReport {
    pub sizes: Vec<usize>,
    /// Exact `‖f_a‖` per size.
    pub op_norms: Vec<f64>,
    /// Largest `‖f_a φ‖ / ‖φ‖` over random lattice vectors per size.
    pub sampled_ratios: Vec<f64>,
    /// `‖(f_a* f_a − id) v‖²` for the sampled smooth section, per size.
    pub residuals: Vec<f64>,
    /// Fitted order of `residuals` in `a`.
    pub residual_order: f64,
    /// `‖f_a f_a* ψ − ψ‖` per test section (rows) and size (columns).
    pub reconstruction: Vec<Vec<f64>>,
    pub reconstruction_decreasing: bool,
}

/// Norm bound, `f_a* f_a → id` on sampled smooth sections, and
/// `f_a f_a* → id` on band-limited sections.
pub fn check_f_bounds(
    link: &GeneralizedLink,
    rep: &GammaRep,
    sizes: &[usize],
    trials: usize,
    sections: usize,
    seed: u64,
) -> Result<FBoundsReport> {
    let basis = continuum_basis(link.descriptor(), rep, 3)?;
    let smooth = band_limited_sections(&basis, 1, 1, seed).remove(0);
    let tests = band_limited_sections(&basis, 2, sections, seed + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let mut report = FBoundsReport {
        sizes: sizes.to_vec(),
        op_norms: Vec::new(),
        sampled_ratios: Vec::new(),
        residuals: Vec::new(),
        residual_order: 0.0,
        reconstruction: vec![Vec::new(); sections],
        reconstruction_decreasing: true,
    };
    for &size in sizes {
        let maps = build_maps(link, rep, size, None)?;
        let space = maps.space();
        report.op_norms.push(maps.operator_norm()?);
        let mut ratio = 0.0f64;
        for _ in 0..trials {
            let phi = random_vector(&mut rng, space.dim());
            ratio = ratio.max(maps.l2_norm(&maps.lift(&phi)?) / space.norm(&phi));
        }
        report.sampled_ratios.push(ratio);

        // v_a(z) = ψ(z), sampled at the sites.
        let lat = maps.link_field().lattice();
        let mut v = vec![ZERO; space.dim()];
        for z in lat.sites() {
            let val = basis.section(&smooth, &lat.position(z));
            for (comp, x) in val.into_iter().enumerate() {
                v[z * space.block() + comp] = x;
            }
        }
        let ff = maps.star_times_f();
        let fv = ff.apply(&v);
        let diff: Vec<C64> = fv.iter().zip(&v).map(|(a, b)| a - b).collect();
        report.residuals.push(space.norm(&diff).powi(2));

        for (row, coeffs) in tests.iter().enumerate() {
            let psi = maps.sample(|x| basis.section(coeffs, x));
            let back = maps.lift(&maps.restrict(&psi)?)?;
            report.reconstruction[row].push(maps.l2_distance(&back, &psi));
        }
    }
    let spacings: Vec<f64> = sizes.iter().map(|&s| 1.0 / s as f64).collect();
    report.residual_order = fitted_order(&spacings, &report.residuals);
    report.reconstruction_decreasing = report.reconstruction.iter().all(|r| r.windows(2).all(|w| w[1] < w[0]));
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiracConvergenceReport {
    pub sizes: Vec<usize>,
    /// `max_ψ ‖f_a D_W† f_a* ψ − D*ψ‖ / ‖ψ‖` per size.
    pub errors: Vec<f64>,
    pub order: f64,
}

/// `D*ψ = −Dψ` evaluated pointwise, perturbation included exactly.
fn adjoint_dirac_values(parts: &DiracParts, link: &GeneralizedLink, rep: &GammaRep, coeffs: &[C64], maps: &InterpMaps) -> Vec<Vec<C64>> {
    let basis = &parts.basis;
    let dc = matvec(&parts.free, coeffs);
    let pert = link.descriptor().perturbation().cloned();
    maps.sample(|x| {
        let mut out = basis.section(&dc, x);
        if let Some(p) = &pert {
            let psi = basis.section(coeffs, x);
            for dir in 0..rep.n() {
                let alpha = p.potential(dir, x);
                if alpha == 0.0 {
                    continue;
                }
                let cmat = rep.gamma(dir);
                for s_out in 0..rep.spinor_dim() {
                    for s in 0..rep.spinor_dim() {
                        out[s_out] += cmat[(s_out, s)] * C64::new(0.0, alpha) * psi[s];
                    }
                }
            }
        }
        out.into_iter().map(|z| -z).collect()
    })
}

/// `‖f_a D_{W,a}† f_a* ψ − D*ψ‖` for `ψ` given by coefficients in `parts.basis`.
pub fn dirac_residual(maps: &InterpMaps, parts: &DiracParts, rep: &GammaRep, coeffs: &[C64]) -> Result<f64> {
    let dw_adj = wilson_dirac_blocks(maps.link_field(), rep, 0.0).adjoint();
    let psi = maps.sample(|x| parts.basis.section(coeffs, x));
    let target = adjoint_dirac_values(parts, &maps.link, rep, coeffs, maps);
    let lifted = maps.lift(&dw_adj.apply(&maps.restrict(&psi)?))?;
    Ok(maps.l2_distance(&lifted, &target))
}

/// `f_a D_{W,a}† f_a* ψ → D*ψ` on band-limited sections.
pub fn check_dirac_convergence(
    link: &GeneralizedLink,
    rep: &GammaRep,
    sizes: &[usize],
    cutoff: usize,
    trials: usize,
    seed: u64,
) -> Result<DiracConvergenceReport> {
    let parts = continuum_dirac_parts(link.descriptor(), rep, cutoff)?;
    let tests = band_limited_sections(&parts.basis, 1, trials, seed);
    let mut errors = Vec::new();
    for &size in sizes {
        let maps = build_maps(link, rep, size, None)?;
        let mut worst = 0.0f64;
        for coeffs in &tests {
            let psi = maps.sample(|x| parts.basis.section(coeffs, x));
            worst = worst.max(dirac_residual(&maps, &parts, rep, coeffs)? / maps.l2_norm(&psi));
        }
        errors.push(worst);
    }
    let spacings: Vec<f64> = sizes.iter().map(|&s| 1.0 / s as f64).collect();
    let order = fitted_order(&spacings, &errors);
    Ok(DiracConvergenceReport { sizes: sizes.to_vec(), errors, order })
}

/// `[[−lattice, t·coupling†], [t·coupling, continuum]]`.
pub fn combined_matrix(lattice: &CMat, continuum: &CMat, coupling: &CMat, t: f64) -> CMat {
    let nl = lattice.nrows();
    let nc = continuum.nrows();
    Mat::from_fn(nl + nc, nl + nc, |i, j| match (i < nl, j < nl) {
        (true, true) => -lattice[(i, j)],
        (false, false) => continuum[(i - nl, j - nl)],
        (false, true) => coupling[(i - nl, j)] * t,
        (true, false) => coupling[(j - nl, i)].conj() * t,
    })
}

/// `h / (h² + M₀²)^{1/2}` through the spectral decomposition.
pub fn bounded_transform(h: &CMat, m0: f64) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let scaled = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| {
        let l = vals[j];
        vecs[(i, j)] * (l / (l * l + m0 * m0).sqrt())
    });
    Ok(&scaled * vecs.adjoint())
}

#[derive(Debug, Clone, Serialize)]
pub struct StapleConfig {
    pub m_max: f64,
    pub mass_points: usize,
    pub t_points: usize,
    pub gap_tol: f64,
    /// `M₀` of the bounded transform on the continuum block, if applied.
    pub bounded: Option<f64>,
}

impl StapleConfig {
    pub fn new(m_max: f64) -> Self {
        Self { m_max, mass_points: 33, t_points: 11, gap_tol: GAP_TOL, bounded: None }
    }

    /// Sample set `{(m, 1)} ∪ {(±M, t)}`.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let nm = self.mass_points.max(2);
        for i in 0..nm {
            out.push((-self.m_max + 2.0 * self.m_max * i as f64 / (nm - 1) as f64, 1.0));
        }
        let nt = self.t_points.max(2);
        for side in [-self.m_max, self.m_max] {
            for i in 0..nt - 1 {
                out.push((side, i as f64 / (nt - 1) as f64));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StapleSample {
    pub m: f64,
    pub t: f64,
    pub min_abs_eig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StapleReport {
    pub route: &'static str,
    pub lattice_dim: usize,
    pub continuum_dim: usize,
    pub samples: Vec<StapleSample>,
    pub min_gap: f64,
    pub at: (f64, f64),
}

impl StapleReport {
    /// CSV with header `m,t,min_abs_eig`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,t,min_abs_eig")?;
        for s in &self.samples {
            writeln!(out, "{:.12e},{:.12e},{:.12e}", s.m, s.t, s.min_abs_eig)?;
        }
        Ok(())
    }
}

fn min_abs(vals: &[f64]) -> f64 {
    vals.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min)
}

/// Evaluator of `min |eig H_com(m, t)|`.
pub enum CombinedOperator {
    Dense {
        h0: CMat,
        gamma_lat: CMat,
        parts: DiracParts,
        f: CMat,
        bounded: Option<f64>,
    },
    /// Trivial background, split by lattice momentum.
    Momentum {
        rep: GammaRep,
        size: usize,
        cutoff: usize,
        bounded: Option<f64>,
    },
}

fn is_trivial(link: &GeneralizedLink) -> bool {
    match &link.descriptor().kind {
        ConnectionKind::Trivial => true,
        ConnectionKind::U1Flux { charge } => *charge == 0,
        _ => false,
    }
}

impl CombinedOperator {
    /// Momentum route for trivial backgrounds, dense otherwise.
    pub fn new(link: &GeneralizedLink, rep: &GammaRep, size: usize, cutoff: usize, bounded: Option<f64>) -> Result<Self> {
        if is_trivial(link) {
            rep.require_chirality()?;
            return Ok(Self::Momentum { rep: rep.clone(), size, cutoff, bounded });
        }
        Self::dense(link, rep, size, cutoff, bounded)
    }

    pub fn dense(link: &GeneralizedLink, rep: &GammaRep, size: usize, cutoff: usize, bounded: Option<f64>) -> Result<Self> {
        let maps = build_maps(link, rep, size, Some(cutoff))?;
        let lf = maps.link_field();
        let h0 = wilson_dirac(lf, rep, 0.0)?.to_dense();
        let gamma_lat = chirality_operator(lf, rep)?.to_dense();
        let parts = continuum_dirac_parts(link.descriptor(), rep, cutoff)?;
        let f = maps.f.clone().expect("cutoff given");
        Ok(Self::Dense { h0, gamma_lat, parts, f, bounded })
    }

    pub fn route(&self) -> &'static str {
        match self {
            Self::Dense { .. } => "dense",
            Self::Momentum { .. } => "momentum",
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Dense { h0, f, .. } => (h0.nrows(), f.nrows()),
            Self::Momentum { rep, size, cutoff, .. } => {
                let n = rep.n() as u32;
                (size.pow(n) * rep.spinor_dim(), (2 * cutoff + 1).pow(n) * rep.spinor_dim())
            }
        }
    }

    /// Full dense `H_com(m, t)` (dense route only).
    pub fn matrix(&self, m: f64, t: f64) -> Result<CMat> {
        match self {
            Self::Dense { h0, gamma_lat, parts, f, bounded } => {
                let lat = h0 + scale(gamma_lat, c(m, 0.0));
                let mut cont = parts.hermitian(m);
                if let Some(m0) = bounded {
                    cont = bounded_transform(&cont, *m0)?;
                }
                Ok(combined_matrix(&lat, &cont, f, t))
            }
            Self::Momentum { .. } => Err(Error::TooLarge("momentum route has no assembled matrix".into())),
        }
    }

    pub fn min_abs_eig(&self, m: f64, t: f64) -> Result<f64> {
        match self {
            Self::Dense { .. } => Ok(min_abs(&hermitian_eigenvalues(&self.matrix(m, t)?)?)),
            Self::Momentum { rep, size, cutoff, bounded } => momentum_min_abs(rep, *size, *cutoff, *bounded, m, t),
        }
    }
}

fn momentum_min_abs(rep: &GammaRep, size: usize, cutoff: usize, bounded: Option<f64>, m: f64, t: f64) -> Result<f64> {
    let n = rep.n();
    let s_dim = rep.spinor_dim();
    let g = rep.require_chirality()?;
    let a = 1.0 / size as f64;
    let kk = cutoff as i64;
    let sz = size as i64;
    let mut best = f64::INFINITY;
    for p_idx in 0..size.pow(n as u32) {
        let mut p = vec![0i64; n];
        let mut rest = p_idx;
        for slot in p.iter_mut().rev() {
            *slot = (rest % size) as i64;
            rest /= size;
        }
        // continuum momenta k ≡ p (mod N) inside the cutoff
        let per_axis: Vec<Vec<i64>> = p
            .iter()
            .map(|&pi| {
                let mut ks = Vec::new();
                let mut k = pi - sz * ((pi + kk) / sz);
                while k < -kk {
                    k += sz;
                }
                while k <= kk {
                    ks.push(k);
                    k += sz;
                }
                ks
            })
            .collect();
        let mut modes: Vec<Vec<i64>> = vec![Vec::new()];
        for ks in &per_axis {
            modes = modes
                .into_iter()
                .flat_map(|prefix| {
                    ks.iter().map(move |&k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        let lat_block = free_wilson_block(rep, size, &p, m)?;
        let dim = s_dim * (1 + modes.len());
        let mut h = Mat::zeros(dim, dim);
        for i in 0..s_dim {
            for j in 0..s_dim {
                h[(i, j)] = -lat_block[(i, j)];
            }
        }
        for (mi, k) in modes.iter().enumerate() {
            let off = s_dim * (1 + mi);
            let mut inner = scale(&identity(s_dim), c(m, 0.0));
            for (i, &ki) in k.iter().enumerate() {
                inner += scale(rep.gamma(i), c(0.0, 2.0 * PI * ki as f64));
            }
            let mut cb = g * &inner;
            if let Some(m0) = bounded {
                cb = bounded_transform(&cb, m0)?;
            }
            let rho_hat: f64 = k
                .iter()
                .map(|&ki| {
                    let u = PI * ki as f64 * a;
                    if u == 0.0 {
                        1.0
                    } else {
                        (u.sin() / u).powi(2)
                    }
                })
                .product();
            for i in 0..s_dim {
                for j in 0..s_dim {
                    h[(off + i, off + j)] = cb[(i, j)];
                }
                h[(off + i, i)] = c(t * rho_hat, 0.0);
                h[(i, off + i)] = c(t * rho_hat, 0.0);
            }
        }
        best = best.min(min_abs(&hermitian_eigenvalues(&h)?));
    }
    Ok(best)
}

/// `min |eig H_com|` over the staple `{(m, 1)} ∪ {(±M, t)}`.
///
/// Requires `K ≥ 2N`. Returns `GapClosed` at the worst sample if the gap does
/// not exceed `cfg.gap_tol`.
pub fn staple_gap_scan(link: &GeneralizedLink, rep: &GammaRep, size: usize, cutoff: usize, cfg: &StapleConfig) -> Result<StapleReport> {
    if cutoff < 2 * size {
        return Err(Error::InvalidGrid(format!("cutoff K = {cutoff} must be at least 2N = {}", 2 * size)));
    }
    let report = staple_samples(link, rep, size, cutoff, cfg)?;
    if report.min_gap <= cfg.gap_tol {
        return Err(Error::GapClosed { mass: report.at.0, t: report.at.1, gap: report.min_gap });
    }
    Ok(report)
}

/// The staple samples without the size precondition or the gap verdict.
pub fn staple_samples(link: &GeneralizedLink, rep: &GammaRep, size: usize, cutoff: usize, cfg: &StapleConfig) -> Result<StapleReport> {
    let op = CombinedOperator::new(link, rep, size, cutoff, cfg.bounded)?;
    let (lattice_dim, continuum_dim) = op.dims();
    let mut samples = Vec::new();
    for (m, t) in cfg.samples() {
        samples.push(StapleSample { m, t, min_abs_eig: op.min_abs_eig(m, t)? });
    }
    let worst = samples
        .iter()
        .min_by(|a, b| a.min_abs_eig.total_cmp(&b.min_abs_eig))
        .copied()
        .expect("non-empty sample set");
    Ok(StapleReport {
        route: op.route(),
        lattice_dim,
        continuum_dim,
        samples,
        min_gap: worst.min_abs_eig,
        at: (worst.m, worst.t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma_rep;
    use crate::gauge::{make_generalized_link, ConnectionDescriptor};
    use crate::linalg::{hermiticity_defect, max_abs_diff};

    fn link(q: i64) -> GeneralizedLink {
        if q == 0 {
            make_generalized_link(ConnectionDescriptor::trivial(2, 1)).unwrap()
        } else {
            make_generalized_link(ConnectionDescriptor::u1_flux(q)).unwrap()
        }
    }

    #[test]
    fn partition_of_unity() {
        for (n, size) in [(1, 5), (2, 4), (2, 8), (3, 4)] {
            assert!(partition_of_unity_defect(n, size, 200, 1) < 1e-12);
        }
    }

    #[test]
    fn unit_mass() {
        let quad = CellQuadrature::new(8).unwrap();
        for size in [4, 8, 16] {
            assert!(unit_mass_defect(2, size, &quad) < 1e-12);
        }
    }

    #[test]
    fn tent_overlap_sums() {
        let quad = CellQuadrature::new(8).unwrap();
        for n in 1..=4 {
            let full = tent_overlap_sum(n, 8, &vertices_cube(n), &quad);
            assert!((full - 1.0).abs() < 1e-12, "n = {n}: {full}");
            let axes = tent_overlap_sum(n, 8, &vertices_axes(n), &quad);
            let closed = (2.0f64 / 3.0).powi(n as i32 - 1) * (2.0 + n as f64) / 3.0;
            assert!((axes - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_quadrature_is_rejected() {
        let rep = build_gamma_rep(2).unwrap();
        assert!(matches!(build_maps_with(&link(0), &rep, 4, None, 4), Err(Error::QuadratureTooCoarse(4))));
    }

    #[test]
    fn constants_map_to_constants() {
        let rep = build_gamma_rep(2).unwrap();
        let maps = build_maps(&link(0), &rep, 4, None).unwrap();
        let phi: Vec<C64> = (0..maps.space().dim()).map(|i| if i % 2 == 0 { c(1.0, 0.5) } else { c(-0.3, 0.0) }).collect();
        for v in maps.lift(&phi).unwrap() {
            assert!((v[0] - c(1.0, 0.5)).norm() < 1e-12 && (v[1] - c(-0.3, 0.0)).norm() < 1e-12);
        }
        let back = maps.star_times_f().apply(&phi);
        assert!(back.iter().zip(&phi).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn lift_and_restrict_are_adjoint() {
        let rep = build_gamma_rep(2).unwrap();
        for q in [0, 1, -2] {
            let maps = build_maps(&link(q), &rep, 6, None).unwrap();
            let space = maps.space();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let phi = random_vector(&mut rng, space.dim());
            let psi: Vec<Vec<C64>> = maps.nodes().map(|_| random_vector(&mut rng, 2)).collect();
            let lhs = maps.l2_inner(&maps.lift(&phi).unwrap(), &psi);
            let rhs = space.inner(&phi, &maps.restrict(&psi).unwrap());
            assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn f_matrix_matches_projection_of_lift() {
        let rep = build_gamma_rep(2).unwrap();
        let maps = build_maps(&link(1), &rep, 6, Some(4)).unwrap();
        let basis = maps.basis().unwrap();
        let f = maps.f_matrix().unwrap();
        let space = maps.space();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi = random_vector(&mut rng, space.dim());
        let lifted = maps.lift(&phi).unwrap();
        // F acts on orthonormal lattice coordinates a^{n/2} φ.
        let w: Vec<C64> = phi.iter().map(|z| z * space.volume_weight().sqrt()).collect();
        let coeffs = matvec(f, &w);
        for b in [0usize, 3, 7] {
            let mut e = vec![ZERO; basis.dim()];
            e[b] = c(1.0, 0.0);
            let psi_b = maps.sample(|x| basis.section(&e, x));
            let proj = maps.l2_inner(&psi_b, &lifted);
            assert!((proj - coeffs[b]).norm() < 1e-10);
        }
    }

    #[test]
    fn f_norm_is_bounded() {
        let rep = build_gamma_rep(2).unwrap();
        for q in [0, 1] {
            for size in [4, 8] {
                let maps = build_maps(&link(q), &rep, size, None).unwrap();
                assert!(maps.operator_norm().unwrap() <= 16.0 + 1e-12);
            }
        }
    }

    #[test]
    fn momentum_route_matches_dense_route() {
        let rep = build_gamma_rep(2).unwrap();
        let l = link(0);
        let dense = CombinedOperator::dense(&l, &rep, 4, 8, None).unwrap();
        let mom = CombinedOperator::new(&l, &rep, 4, 8, None).unwrap();
        assert_eq!(mom.route(), "momentum");
        for (m, t) in [(0.0, 1.0), (-1.0, 0.3), (0.4, 0.0), (1.0, 1.0)] {
            let a = dense.min_abs_eig(m, t).unwrap();
            let b = mom.min_abs_eig(m, t).unwrap();
            assert!((a - b).abs() < 1e-7, "({m},{t}): {a} vs {b}");
        }
        let h = dense.matrix(0.2, 0.7).unwrap();
        assert!(hermiticity_defect(&h) < 1e-10);
    }

    fn plane_wave(basis: &ContinuumBasis, k: [i64; 2], spin: usize) -> Vec<C64> {
        let BasisKind::Fourier { modes } = basis.kind() else { panic!("fourier basis") };
        (0..basis.dim())
            .map(|b| {
                let (scalar, comp) = basis.layout(b);
                if modes[scalar] == k && comp == spin {
                    c(1.0, 0.0)
                } else {
                    ZERO
                }
            })
            .collect()
    }

    #[test]
    fn dirac_residual_of_constants_and_plane_waves() {
        let rep = build_gamma_rep(2).unwrap();
        let l = link(0);
        let parts = continuum_dirac_parts(l.descriptor(), &rep, 2).unwrap();
        for size in [4, 8, 16] {
            let maps = build_maps(&l, &rep, size, None).unwrap();
            let constant = plane_wave(&parts.basis, [0, 0], 0);
            assert!(dirac_residual(&maps, &parts, &rep, &constant).unwrap() < 1e-9);
            let wave = plane_wave(&parts.basis, [1, 0], 0);
            let a = 1.0 / size as f64;
            let z = C64::from_polar(1.0, 2.0 * PI * a);
            let leading = ((z - 1.0) / a - c(0.0, 2.0 * PI)).norm();
            let r = dirac_residual(&maps, &parts, &rep, &wave).unwrap();
            assert!(r > 0.5 * leading && r < 2.0 * leading, "N = {size}: {r} vs {leading}");
        }
    }

    #[test]
    fn degenerate_blocks_gap_by_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let r = random_vector(&mut rng, n * n);
        let a = Mat::from_fn(n, n, |i, j| r[i * n + j]);
        let h = &a + a.adjoint();
        for t in [0.1, 0.5, 1.0] {
            let ev = hermitian_eigenvalues(&combined_matrix(&h, &h, &identity(n), t)).unwrap();
            assert!(ev.iter().all(|l| l * l >= t * t - 1e-10));
        }
    }

    #[test]
    fn bounded_transform_maps_eigenvalues() {
        let h = Mat::from_fn(2, 2, |i, j| if i == j { c(if i == 0 { 3.0 } else { -1.0 }, 0.0) } else { ZERO });
        let b = bounded_transform(&h, 1.0).unwrap();
        assert!((b[(0, 0)].re - 3.0 / 10f64.sqrt()).abs() < 1e-12);
        assert!(max_abs_diff(&b, &adjoint(&b)) < 1e-14);
    }

    #[test]
    fn trivial_staple_gap() {
        let rep = build_gamma_rep(2).unwrap();
        let r = staple_gap_scan(&link(0), &rep, 8, 16, &StapleConfig::new(1.0)).unwrap();
        assert!(r.min_gap >= 0.3, "{}", r.min_gap);
    }

    #[test]
    fn flux_control_closes_the_gap() {
        let rep = build_gamma_rep(2).unwrap();
        let op = CombinedOperator::new(&link(1), &rep, 6, 6, None).unwrap();
        assert!(op.min_abs_eig(0.0, 0.0).unwrap() < 1e-6);
    }

    #[test]
    fn staple_requires_wide_cutoff() {
        let rep = build_gamma_rep(2).unwrap();
        assert!(matches!(
            staple_gap_scan(&link(0), &rep, 8, 10, &StapleConfig::new(1.0)),
            Err(Error::InvalidGrid(_))
        ));
    }
}
