//! Truncated continuum Dirac operator `γ(D + m)` on `T^n`.
//!
//! Two bases are used, both orthonormal in `L²(T^n)`:
//!
//! * **Fourier** (trivial background, or flux zero with a smooth
//!   perturbation): `e^{2πik·x} ê_s ⊗ ê_c` with `|k_i| ≤ K`.
//! * **Landau** (U(1) flux `Q ≠ 0` on `T²`, same gauge as
//!   [`crate::gauge`]): in each magnetic translation sector `r = 0..|Q|`
//!
//!   ```text
//!   ψ_{r,p}(x) = Σ_j e^{2πi(r + jQ)x_2} h_p(x_1 + r/Q + j)
//!   ```
//!
//!   where `h_p` is the `p`-th Hermite function of magnetic length
//!   `1/√|B|`, `B = 2πQ`. On each term `∇_1 = ∂_v` and `∇_2 = iBv`, so the
//!   Dirac operator acts by ladder operators on `p`. The cutoff `K` keeps
//!   Landau levels `0..=K`: level 0 is the single chiral zero mode per sector,
//!   each higher level a pair with `γD` eigenvalues `±√(2|B|L)`. The
//!   truncation is exactly invariant under `D`, so zero modes are exact.
//!
//! Smooth perturbations `δα = Σ_q A_q e^{2πiq·x}` enter through the
//! projected multiplication operator `Σ_i c_i · iδα_i`.

use std::collections::HashMap;
use std::f64::consts::PI;

use faer::Mat;

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::gauge::{ConnectionDescriptor, ConnectionKind, Perturbation};
use crate::linalg::{
    c, compressed_eigenvalues, hermitian_eigen, hermitian_eigenvalues, scale, CMat, C64, I, ZERO,
};

/// Numerical zero-mode threshold.
pub const ZERO_TOL: f64 = 1e-6;

/// One Landau basis state: spinor component, sector and Hermite index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LandauState {
    pub spinor: usize,
    pub sector: usize,
    pub hermite: usize,
    pub level: usize,
}

#[derive(Debug, Clone)]
pub enum BasisKind {
    Fourier { modes: Vec<Vec<i64>> },
    Landau { charge: i64, states: Vec<LandauState> },
}

#[derive(Debug, Clone)]
pub struct ContinuumBasis {
    n: usize,
    cutoff: usize,
    spinor_dim: usize,
    n_c: usize,
    kind: BasisKind,
}

/// Hermite functions `φ_0..=φ_pmax` at `ξ`, normalised on `R`.
pub fn hermite_functions(pmax: usize, xi: f64) -> Vec<f64> {
    let mut out = vec![0.0; pmax + 1];
    out[0] = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    if pmax >= 1 {
        out[1] = 2f64.sqrt() * xi * out[0];
    }
    for p in 1..pmax {
        let pf = p as f64;
        out[p + 1] = (2.0 / (pf + 1.0)).sqrt() * xi * out[p] - (pf / (pf + 1.0)).sqrt() * out[p - 1];
    }
    out
}

fn landau_extent(pmax: usize) -> f64 {
    (2.0 * pmax as f64 + 1.0).sqrt() + 9.0
}

impl ContinuumBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn spinor_dim(&self) -> usize {
        self.spinor_dim
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    /// Fibre components `spinor_dim · N_c`.
    pub fn components(&self) -> usize {
        self.spinor_dim * self.n_c
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            BasisKind::Fourier { modes } => modes.len() * self.components(),
            BasisKind::Landau { states, .. } => states.len(),
        }
    }

    /// Number of distinct scalar functions returned by [`eval_scalars`](Self::eval_scalars).
    pub fn scalar_count(&self) -> usize {
        match &self.kind {
            BasisKind::Fourier { modes } => modes.len(),
            BasisKind::Landau { charge, .. } => charge.unsigned_abs() as usize * (self.cutoff + 1),
        }
    }

    /// `(scalar index, fibre component)` of a basis vector.
    pub fn layout(&self, idx: usize) -> (usize, usize) {
        match &self.kind {
            BasisKind::Fourier { .. } => (idx / self.components(), idx % self.components()),
            BasisKind::Landau { states, .. } => {
                let st = states[idx];
                (st.sector * (self.cutoff + 1) + st.hermite, st.spinor)
            }
        }
    }

    /// Values of every scalar function at `x` (fundamental-domain trivialisation).
    pub fn eval_scalars(&self, x: &[f64]) -> Vec<C64> {
        match &self.kind {
            BasisKind::Fourier { modes } => modes
                .iter()
                .map(|k| {
                    let ph: f64 = k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum();
                    C64::from_polar(1.0, 2.0 * PI * ph)
                })
                .collect(),
            BasisKind::Landau { charge, .. } => {
                let q = *charge as f64;
                let b = (2.0 * PI * q).abs();
                let pmax = self.cutoff;
                let vmax = landau_extent(pmax) / b.sqrt();
                let sectors = charge.unsigned_abs() as usize;
                let norm = b.powf(0.25);
                let mut out = vec![ZERO; sectors * (pmax + 1)];
                for r in 0..sectors {
                    let shift = x[0] + r as f64 / q;
                    let j_lo = (-vmax - shift).ceil() as i64;
                    let j_hi = (vmax - shift).floor() as i64;
                    for j in j_lo..=j_hi {
                        let v = shift + j as f64;
                        let k2 = r as f64 + j as f64 * q;
                        let phase = C64::from_polar(norm, 2.0 * PI * k2 * x[1]);
                        let h = hermite_functions(pmax, v * b.sqrt());
                        for (p, hp) in h.into_iter().enumerate() {
                            out[r * (pmax + 1) + p] += phase * hp;
                        }
                    }
                }
                out
            }
        }
    }

    /// Section `Σ_b coeffs_b ψ_b(x)` as a fibre vector.
    pub fn section(&self, coeffs: &[C64], x: &[f64]) -> Vec<C64> {
        let vals = self.eval_scalars(x);
        let mut out = vec![ZERO; self.components()];
        for (idx, &cb) in coeffs.iter().enumerate() {
            if cb == ZERO {
                continue;
            }
            let (s, comp) = self.layout(idx);
            out[comp] += cb * vals[s];
        }
        out
    }
}

fn fourier_modes(n: usize, cutoff: usize) -> Vec<Vec<i64>> {
    let k = cutoff as i64;
    let side = 2 * cutoff + 1;
    (0..side.pow(n as u32))
        .map(|mut idx| {
            let mut m = vec![0i64; n];
            for slot in m.iter_mut().rev() {
                *slot = (idx % side) as i64 - k;
                idx /= side;
            }
            m
        })
        .collect()
}

fn landau_states(charge: i64, cutoff: usize) -> Vec<LandauState> {
    // The spinor component carrying the zero mode.
    let (zero_side, other) = if charge > 0 { (0, 1) } else { (1, 0) };
    let mut out = Vec::new();
    for sector in 0..charge.unsigned_abs() as usize {
        out.push(LandauState { spinor: zero_side, sector, hermite: 0, level: 0 });
        for level in 1..=cutoff {
            out.push(LandauState { spinor: zero_side, sector, hermite: level, level });
            out.push(LandauState { spinor: other, sector, hermite: level - 1, level });
        }
    }
    out
}

fn background(desc: &ConnectionDescriptor) -> Result<(i64, Option<&Perturbation>)> {
    match &desc.kind {
        ConnectionKind::Trivial => Ok((0, None)),
        ConnectionKind::U1Flux { charge } => Ok((*charge, None)),
        ConnectionKind::U1FluxPlusSmooth { charge, perturbation } => Ok((*charge, Some(perturbation))),
        ConnectionKind::External(_) => Err(Error::UnsupportedBackground(
            "continuum operator needs a built-in background, not a link table".into(),
        )),
    }
}

pub fn continuum_basis(desc: &ConnectionDescriptor, rep: &GammaRep, cutoff: usize) -> Result<ContinuumBasis> {
    desc.validate()?;
    if rep.n() != desc.n {
        return Err(Error::DimensionMismatch { expected: desc.n, actual: rep.n() });
    }
    let (charge, _) = background(desc)?;
    let kind = if charge == 0 {
        let count = (2 * cutoff + 1).pow(desc.n as u32) * rep.spinor_dim() * desc.n_c;
        if count > 40_000 {
            return Err(Error::TooLarge(format!("continuum basis of dimension {count}")));
        }
        BasisKind::Fourier { modes: fourier_modes(desc.n, cutoff) }
    } else {
        BasisKind::Landau { charge, states: landau_states(charge, cutoff) }
    };
    Ok(ContinuumBasis {
        n: desc.n,
        cutoff,
        spinor_dim: rep.spinor_dim(),
        n_c: desc.n_c,
        kind,
    })
}

/// Matrices of the truncated continuum operators in an orthonormal basis.
#[derive(Debug, Clone)]
pub struct DiracParts {
    pub basis: ContinuumBasis,
    /// `D` without the perturbation (anti-Hermitian).
    pub free: CMat,
    /// Projected `Σ_i c_i · iδα_i` (anti-Hermitian, zero without perturbation).
    pub perturbation: CMat,
    pub gamma: CMat,
}

impl DiracParts {
    /// `D = free + perturbation`.
    pub fn dirac(&self) -> CMat {
        &self.free + &self.perturbation
    }

    /// `γ(D + m)`.
    pub fn hermitian(&self, m: f64) -> CMat {
        &self.gamma * &self.dirac() + scale(&self.gamma, c(m, 0.0))
    }
}

pub fn continuum_dirac_parts(desc: &ConnectionDescriptor, rep: &GammaRep, cutoff: usize) -> Result<DiracParts> {
    let gamma_s = rep.require_chirality()?.clone();
    let basis = continuum_basis(desc, rep, cutoff)?;
    let (charge, pert) = background(desc)?;
    if let Some(p) = pert {
        if 2 * p.max_wavenumber() > cutoff as i64 {
            return Err(Error::RoughBackground { mode: p.max_wavenumber(), cutoff });
        }
    }
    let dim = basis.dim();
    let mut free = Mat::zeros(dim, dim);
    let mut perturbation = Mat::zeros(dim, dim);
    let mut gamma = Mat::zeros(dim, dim);
    let s_dim = rep.spinor_dim();
    let n_c = basis.n_c;

    match &basis.kind {
        BasisKind::Fourier { modes } => {
            let index: HashMap<&[i64], usize> = modes.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
            let comp = |mode: usize, s: usize, col: usize| (mode * s_dim + s) * n_c + col;
            for (mi, k) in modes.iter().enumerate() {
                for s_out in 0..s_dim {
                    for s_in in 0..s_dim {
                        let mut d = ZERO;
                        for (i, &ki) in k.iter().enumerate() {
                            d += rep.gamma(i)[(s_out, s_in)] * c(0.0, 2.0 * PI * ki as f64);
                        }
                        for col in 0..n_c {
                            free[(comp(mi, s_out, col), comp(mi, s_in, col))] = d;
                            gamma[(comp(mi, s_out, col), comp(mi, s_in, col))] = gamma_s[(s_out, s_in)];
                        }
                    }
                }
            }
            if let Some(p) = pert {
                for (dir, q, amp) in p.exponential_terms() {
                    for (mi, k) in modes.iter().enumerate() {
                        let target: Vec<i64> = k.iter().zip(&q).map(|(a, b)| a + b).collect();
                        let Some(&mo) = index.get(target.as_slice()) else { continue };
                        for s_out in 0..s_dim {
                            for s_in in 0..s_dim {
                                let v = I * amp * rep.gamma(dir)[(s_out, s_in)];
                                perturbation[(comp(mo, s_out, 0), comp(mi, s_in, 0))] += v;
                            }
                        }
                    }
                }
            }
        }
        BasisKind::Landau { states, .. } => {
            let lookup: HashMap<(usize, usize, usize), usize> = states
                .iter()
                .enumerate()
                .map(|(i, st)| ((st.spinor, st.sector, st.hermite), i))
                .collect();
            let b = (2.0 * PI * charge as f64).abs();
            let sgn = charge.signum() as f64;
            let half = (0.5 * b).sqrt();
            for (col, st) in states.iter().enumerate() {
                let p = st.hermite;
                let pf = p as f64;
                // ∇_1 h_p = √(b/2)(√p h_{p−1} − √(p+1) h_{p+1}),
                // ∇_2 h_p = i·sgn(Q)·√(b/2)(√p h_{p−1} + √(p+1) h_{p+1}).
                let mut terms: Vec<(usize, C64, C64)> = vec![(
                    p + 1,
                    c(-half * (pf + 1.0).sqrt(), 0.0),
                    c(0.0, sgn * half * (pf + 1.0).sqrt()),
                )];
                if p > 0 {
                    terms.push((p - 1, c(half * pf.sqrt(), 0.0), c(0.0, sgn * half * pf.sqrt())));
                }
                for (p_out, d1, d2) in terms {
                    for s_out in 0..s_dim {
                        let coef = rep.gamma(0)[(s_out, st.spinor)] * d1 + rep.gamma(1)[(s_out, st.spinor)] * d2;
                        if coef == ZERO {
                            continue;
                        }
                        if let Some(&row) = lookup.get(&(s_out, st.sector, p_out)) {
                            free[(row, col)] += coef;
                        }
                    }
                }
                for s_out in 0..s_dim {
                    if let Some(&row) = lookup.get(&(s_out, st.sector, p)) {
                        gamma[(row, col)] = gamma_s[(s_out, st.spinor)];
                    }
                }
            }
            if let Some(pt) = pert {
                add_landau_perturbation(&mut perturbation, rep, states, &lookup, charge, cutoff, pt);
            }
        }
    }
    Ok(DiracParts { basis, free, perturbation, gamma })
}

fn add_landau_perturbation(
    out: &mut CMat,
    rep: &GammaRep,
    states: &[LandauState],
    lookup: &HashMap<(usize, usize, usize), usize>,
    charge: i64,
    cutoff: usize,
    pert: &Perturbation,
) {
    let q = charge as f64;
    let b = (2.0 * PI * q).abs();
    let sectors = charge.unsigned_abs() as usize;
    let pmax = cutoff;
    for (dir, qv, amp) in pert.exponential_terms() {
        let shift = qv[1] as f64 / q;
        let vmax = landau_extent(pmax) / b.sqrt() + shift.abs();
        let steps = 8192usize;
        let dv = 2.0 * vmax / steps as f64;
        // overlap[p'][p] for each outgoing sector r'
        let h_out: Vec<Vec<f64>> = (0..=steps)
            .map(|t| {
                let v = -vmax + t as f64 * dv;
                hermite_functions(pmax, v * b.sqrt()).into_iter().map(|h| h * b.powf(0.25)).collect()
            })
            .collect();
        let h_in: Vec<Vec<f64>> = (0..=steps)
            .map(|t| {
                let v = -vmax + t as f64 * dv - shift;
                hermite_functions(pmax, v * b.sqrt()).into_iter().map(|h| h * b.powf(0.25)).collect()
            })
            .collect();
        for r_in in 0..sectors {
            let r_out = (r_in as i64 + qv[1]).rem_euclid(sectors as i64) as usize;
            let mut overlap = vec![vec![ZERO; pmax + 1]; pmax + 1];
            for t in 0..=steps {
                let v = -vmax + t as f64 * dv;
                let w = if t == 0 || t == steps { 0.5 * dv } else { dv };
                let ph = C64::from_polar(w, 2.0 * PI * qv[0] as f64 * (v - r_out as f64 / q));
                for (po, ho) in h_out[t].iter().enumerate() {
                    let base = ph * *ho;
                    for (pi, hi) in h_in[t].iter().enumerate() {
                        overlap[po][pi] += base * *hi;
                    }
                }
            }
            for (col, st) in states.iter().enumerate() {
                if st.sector != r_in {
                    continue;
                }
                for s_out in 0..rep.spinor_dim() {
                    let cs = rep.gamma(dir)[(s_out, st.spinor)];
                    if cs == ZERO {
                        continue;
                    }
                    for po in 0..=pmax {
                        if let Some(&row) = lookup.get(&(s_out, r_out, po)) {
                            out[(row, col)] += I * amp * cs * overlap[po][st.hermite];
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuumOperator {
    pub basis: ContinuumBasis,
    pub matrix: CMat,
}

impl ContinuumOperator {
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix)
    }
}

/// `γ(D + m)` in the truncated basis.
pub fn continuum_dirac(desc: &ConnectionDescriptor, rep: &GammaRep, cutoff: usize, m: f64) -> Result<ContinuumOperator> {
    let parts = continuum_dirac_parts(desc, rep, cutoff)?;
    let matrix = parts.hermitian(m);
    Ok(ContinuumOperator { basis: parts.basis, matrix })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct KernelReport {
    pub index: i64,
    pub zero_modes: usize,
    /// Eigenvalues of `γ` compressed onto the numerical kernel.
    pub chiralities: Vec<f64>,
    /// Smallest `|λ|` outside the kernel.
    pub gap: f64,
}

/// Index as the trace of `γ` on the numerical kernel of `γD`.
pub fn continuum_kernel(desc: &ConnectionDescriptor, rep: &GammaRep, cutoff: usize) -> Result<KernelReport> {
    let parts = continuum_dirac_parts(desc, rep, cutoff)?;
    let h = parts.hermitian(0.0);
    let (vals, vecs) = hermitian_eigen(&h)?;
    let mut kernel = Vec::new();
    let mut gap = f64::INFINITY;
    for (i, &l) in vals.iter().enumerate() {
        let a = l.abs();
        if a < ZERO_TOL {
            kernel.push(i);
        } else if a < 10.0 * ZERO_TOL {
            return Err(Error::AmbiguousKernel(format!("eigenvalue {l:e} between zero_tol and 10·zero_tol")));
        } else {
            gap = gap.min(a);
        }
    }
    let chiralities = compressed_eigenvalues(&parts.gamma, &vecs, &kernel)?;
    let mut index = 0i64;
    for &g in &chiralities {
        if g.abs() <= 0.99 {
            return Err(Error::AmbiguousKernel(format!("kernel chirality {g} is not ±1")));
        }
        index += g.signum() as i64;
    }
    Ok(KernelReport { index, zero_modes: kernel.len(), chiralities, gap })
}

pub fn continuum_index(desc: &ConnectionDescriptor, rep: &GammaRep, cutoff: usize) -> Result<i64> {
    continuum_kernel(desc, rep, cutoff).map(|r| r.index)
}
