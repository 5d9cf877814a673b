//! Lattice difference operators and the Wilson Dirac operator.
//!
//! Vectors live in `L²(E_a)` with the flat index
//! `(site · spinor_dim + s) · N_c + c`. Links act on colour, the identity on
//! spinor. Norms used in inequality checks carry the volume factor `a^n`;
//! spectra are computed from the unweighted matrices (the factor cancels).
//!
//! ```text
//! (∇_i φ)(z)  = [U(z, z+e_i a) φ(z+e_i a) − φ(z)] / a
//! (∇_i* φ)(z) = [U(z−e_i a, z)⁻¹ φ(z−e_i a) − φ(z)] / a
//! D_a = Σ_i c_i (∇_i − ∇_i*) / 2,   W = −Σ_i (∇_i + ∇_i*) / 2
//! H_W(m) = γ (D_a + W + m)
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use faer::Mat;
use rand::Rng;

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::gauge::LinkField;
use crate::lattice::Lattice;
use crate::linalg::{
    adjoint, c, hermitian_eigenvalues, hermiticity_defect, identity, kron, max_abs, matvec,
    operator_norm, random_vector, scale, CMat, C64, ONE, ZERO,
};

/// Operators with at most this many rows are stored densely.
pub const DENSE_LIMIT: usize = 8192;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpace {
    lattice: Lattice,
    spinor_dim: usize,
    n_c: usize,
}

impl LatticeSpace {
    pub fn new(lattice: Lattice, spinor_dim: usize, n_c: usize) -> Self {
        Self {
            lattice,
            spinor_dim,
            n_c,
        }
    }

    pub fn of(lf: &LinkField, rep: &GammaRep) -> Self {
        Self::new(lf.lattice(), rep.spinor_dim(), lf.n_c())
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    pub fn size(&self) -> usize {
        self.lattice.size()
    }

    pub fn spacing(&self) -> f64 {
        self.lattice.spacing()
    }

    pub fn spinor_dim(&self) -> usize {
        self.spinor_dim
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    /// Components per site, `spinor_dim · N_c`.
    pub fn block(&self) -> usize {
        self.spinor_dim * self.n_c
    }

    pub fn dim(&self) -> usize {
        self.lattice.volume() * self.block()
    }

    pub fn index(&self, site: usize, spinor: usize, colour: usize) -> usize {
        (site * self.spinor_dim + spinor) * self.n_c + colour
    }

    /// Inverse of [`index`](Self::index).
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let colour = idx % self.n_c;
        let rest = idx / self.n_c;
        (rest / self.spinor_dim, rest % self.spinor_dim, colour)
    }

    /// `a^n`.
    pub fn volume_weight(&self) -> f64 {
        self.spacing().powi(self.n() as i32)
    }

    /// `⟨u, v⟩ = a^n Σ_z (u(z), v(z))`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        crate::linalg::dot(u, v) * self.volume_weight()
    }

    pub fn norm(&self, v: &[C64]) -> f64 {
        self.inner(v, v).re.max(0.0).sqrt()
    }
}

/// Site-blocked sparse matrix: row `r` holds `(column site, block)` pairs.
#[derive(Debug, Clone)]
pub struct BlockSparse {
    block: usize,
    rows: Vec<BTreeMap<usize, CMat>>,
}

impl BlockSparse {
    pub fn zeros(sites: usize, block: usize) -> Self {
        Self {
            block,
            rows: vec![BTreeMap::new(); sites],
        }
    }

    pub fn sites(&self) -> usize {
        self.rows.len()
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn dim(&self) -> usize {
        self.rows.len() * self.block
    }

    pub fn add_block(&mut self, row: usize, col: usize, m: &CMat) {
        match self.rows[row].get_mut(&col) {
            Some(b) => *b += m,
            None => {
                self.rows[row].insert(col, m.clone());
            }
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&CMat> {
        self.rows[row].get(&col)
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (&usize, &CMat)> {
        self.rows[row].iter()
    }

    /// Number of stored blocks.
    pub fn nnz_blocks(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            block: self.block,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|(&k, m)| (k, scale(m, s))).collect())
                .collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (r, row) in other.rows.iter().enumerate() {
            for (&k, m) in row {
                out.add_block(r, k, m);
            }
        }
        out
    }

    pub fn times(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.sites(), self.block);
        for (r, row) in self.rows.iter().enumerate() {
            for (&k, a) in row {
                for (&cidx, b) in &other.rows[k] {
                    out.add_block(r, cidx, &(a * b));
                }
            }
        }
        out
    }

    /// Multiply every block on the left by the same site-local matrix.
    pub fn left_local(&self, m: &CMat) -> Self {
        Self {
            block: self.block,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|(&k, b)| (k, m * b)).collect())
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.sites(), self.block);
        for (r, row) in self.rows.iter().enumerate() {
            for (&k, m) in row {
                out.add_block(k, r, &adjoint(m));
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let b = self.block;
        let mut out = vec![ZERO; self.dim()];
        for (r, row) in self.rows.iter().enumerate() {
            let dst = &mut out[r * b..(r + 1) * b];
            for (&k, m) in row {
                let src = &v[k * b..(k + 1) * b];
                for i in 0..b {
                    let mut acc = ZERO;
                    for j in 0..b {
                        acc += m[(i, j)] * src[j];
                    }
                    dst[i] += acc;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        let b = self.block;
        let mut out = Mat::zeros(self.dim(), self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            for (&k, m) in row {
                for i in 0..b {
                    for j in 0..b {
                        out[(r * b + i, k * b + j)] += m[(i, j)];
                    }
                }
            }
        }
        out
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let zero = Mat::zeros(self.block, self.block);
        let mut worst = 0.0f64;
        for (r, row) in self.rows.iter().enumerate() {
            for (&k, m) in row {
                let mirror = self.rows[k].get(&r).unwrap_or(&zero);
                for i in 0..self.block {
                    for j in 0..self.block {
                        worst = worst.max((m[(i, j)] - mirror[(j, i)].conj()).norm());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub enum Storage {
    Dense(CMat),
    Sparse(BlockSparse),
}

#[derive(Debug, Clone)]
pub struct LatticeOperator {
    space: LatticeSpace,
    storage: Storage,
    hermitian: bool,
}

impl LatticeOperator {
    /// Stores densely when `dim ≤ DENSE_LIMIT`.
    pub fn from_blocks(space: LatticeSpace, blocks: BlockSparse, hermitian: bool) -> Self {
        if space.dim() <= DENSE_LIMIT {
            Self::dense(space, blocks.to_dense(), hermitian)
        } else {
            Self::sparse(space, blocks, hermitian)
        }
    }

    pub fn dense(space: LatticeSpace, m: CMat, hermitian: bool) -> Self {
        Self {
            space,
            storage: Storage::Dense(m),
            hermitian,
        }
    }

    pub fn sparse(space: LatticeSpace, blocks: BlockSparse, hermitian: bool) -> Self {
        Self {
            space,
            storage: Storage::Sparse(blocks),
            hermitian,
        }
    }

    pub fn identity(space: LatticeSpace) -> Self {
        Self::from_blocks(space, local_blocks(space, &identity(space.block())), true)
    }

    pub fn space(&self) -> LatticeSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Dense matrix view (converted if stored sparsely).
    pub fn to_dense(&self) -> CMat {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(b) => b.to_dense(),
        }
    }

    pub fn dense_ref(&self) -> Option<&CMat> {
        match &self.storage {
            Storage::Dense(m) => Some(m),
            Storage::Sparse(_) => None,
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => hermiticity_defect(m),
            Storage::Sparse(b) => b.hermiticity_defect(),
        }
    }

    /// Ascending eigenvalues of a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        match &self.storage {
            Storage::Dense(m) => hermitian_eigenvalues(m),
            Storage::Sparse(b) => {
                if b.dim() > 4 * DENSE_LIMIT {
                    return Err(Error::TooLarge(format!(
                        "full diagonalisation of dimension {}",
                        b.dim()
                    )));
                }
                hermitian_eigenvalues(&b.to_dense())
            }
        }
    }

    /// Writes a coordinate-format complex Matrix Market dump (1-based indices).
    pub fn export_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.dim();
        let dense = self.to_dense();
        let mut entries = Vec::new();
        for j in 0..dim {
            for i in 0..dim {
                let z = dense[(i, j)];
                if z != ZERO {
                    entries.push((i, j, z));
                }
            }
        }
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{dim} {dim} {}", entries.len())?;
        for (i, j, z) in entries {
            writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, z.re, z.im)?;
        }
        Ok(())
    }
}

pub fn apply(op: &LatticeOperator, v: &[C64]) -> Result<Vec<C64>> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            actual: v.len(),
        });
    }
    Ok(match &op.storage {
        Storage::Dense(m) => matvec(m, v),
        Storage::Sparse(b) => b.apply(v),
    })
}

fn local_blocks(space: LatticeSpace, m: &CMat) -> BlockSparse {
    let mut out = BlockSparse::zeros(space.lattice().volume(), space.block());
    for site in space.lattice().sites() {
        out.add_block(site, site, m);
    }
    out
}

fn check_rep(lf: &LinkField, rep: &GammaRep) -> Result<()> {
    if lf.n() != rep.n() {
        return Err(Error::DimensionMismatch {
            expected: lf.n(),
            actual: rep.n(),
        });
    }
    Ok(())
}

fn direction_ok(lf: &LinkField, i: usize) -> Result<()> {
    if i >= lf.n() {
        return Err(Error::InvalidDescriptor(format!(
            "direction {i} out of range for n = {}",
            lf.n()
        )));
    }
    Ok(())
}

/// Block form of `∇_i`.
pub fn forward_blocks(lf: &LinkField, rep: &GammaRep, i: usize) -> BlockSparse {
    let space = LatticeSpace::of(lf, rep);
    let lat = lf.lattice();
    let inv_a = 1.0 / lat.spacing();
    let id_s = identity(rep.spinor_dim());
    let diag = scale(&identity(space.block()), c(-inv_a, 0.0));
    let mut out = BlockSparse::zeros(lat.volume(), space.block());
    for z in lat.sites() {
        let next = lat.shift(z, i, 1);
        out.add_block(z, next, &scale(&kron(&id_s, lf.link(z, i)), c(inv_a, 0.0)));
        out.add_block(z, z, &diag);
    }
    out
}

/// Block form of `∇_i*`.
pub fn backward_blocks(lf: &LinkField, rep: &GammaRep, i: usize) -> BlockSparse {
    let space = LatticeSpace::of(lf, rep);
    let lat = lf.lattice();
    let inv_a = 1.0 / lat.spacing();
    let id_s = identity(rep.spinor_dim());
    let diag = scale(&identity(space.block()), c(-inv_a, 0.0));
    let mut out = BlockSparse::zeros(lat.volume(), space.block());
    for z in lat.sites() {
        let prev = lat.shift(z, i, -1);
        let back = adjoint(lf.link(prev, i));
        out.add_block(z, prev, &scale(&kron(&id_s, &back), c(inv_a, 0.0)));
        out.add_block(z, z, &diag);
    }
    out
}

fn spinor_local(n_c: usize, s: &CMat) -> CMat {
    kron(s, &identity(n_c))
}

/// Block form of `D_a = Σ c_i (∇_i − ∇_i*)/2`.
pub fn naive_blocks(lf: &LinkField, rep: &GammaRep) -> BlockSparse {
    let space = LatticeSpace::of(lf, rep);
    let mut out = BlockSparse::zeros(lf.lattice().volume(), space.block());
    for i in 0..lf.n() {
        let diff = forward_blocks(lf, rep, i).plus(&backward_blocks(lf, rep, i).scaled(-ONE));
        let ci = spinor_local(lf.n_c(), rep.gamma(i));
        out = out.plus(&diff.left_local(&ci).scaled(c(0.5, 0.0)));
    }
    out
}

/// Block form of `W = −Σ (∇_i + ∇_i*)/2`.
pub fn wilson_term_blocks(lf: &LinkField, rep: &GammaRep) -> BlockSparse {
    let space = LatticeSpace::of(lf, rep);
    let mut out = BlockSparse::zeros(lf.lattice().volume(), space.block());
    for i in 0..lf.n() {
        let sum = forward_blocks(lf, rep, i).plus(&backward_blocks(lf, rep, i));
        out = out.plus(&sum.scaled(c(-0.5, 0.0)));
    }
    out
}

/// Block form of `(a/2) Σ ∇_i* ∇_i`.
pub fn wilson_term_product_blocks(lf: &LinkField, rep: &GammaRep) -> BlockSparse {
    let space = LatticeSpace::of(lf, rep);
    let half_a = 0.5 * lf.spacing();
    let mut out = BlockSparse::zeros(lf.lattice().volume(), space.block());
    for i in 0..lf.n() {
        let prod = backward_blocks(lf, rep, i).times(&forward_blocks(lf, rep, i));
        out = out.plus(&prod.scaled(c(half_a, 0.0)));
    }
    out
}

/// Block form of `D_{W,a} + m`.
pub fn wilson_dirac_blocks(lf: &LinkField, rep: &GammaRep, m: f64) -> BlockSparse {
    let space = LatticeSpace::of(lf, rep);
    let mass = scale(&identity(space.block()), c(m, 0.0));
    naive_blocks(lf, rep)
        .plus(&wilson_term_blocks(lf, rep))
        .plus(&local_blocks(space, &mass))
}

pub fn forward_diff(lf: &LinkField, rep: &GammaRep, i: usize) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    direction_ok(lf, i)?;
    Ok(LatticeOperator::from_blocks(
        LatticeSpace::of(lf, rep),
        forward_blocks(lf, rep, i),
        false,
    ))
}

pub fn backward_diff(lf: &LinkField, rep: &GammaRep, i: usize) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    direction_ok(lf, i)?;
    Ok(LatticeOperator::from_blocks(
        LatticeSpace::of(lf, rep),
        backward_blocks(lf, rep, i),
        false,
    ))
}

/// Shift operator `(U_i φ)(z) = U(z, z+e_i a) φ(z+e_i a)`.
pub fn shift_operator(lf: &LinkField, rep: &GammaRep, i: usize) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    direction_ok(lf, i)?;
    let space = LatticeSpace::of(lf, rep);
    let a = c(lf.spacing(), 0.0);
    let blocks = forward_blocks(lf, rep, i)
        .scaled(a)
        .plus(&local_blocks(space, &identity(space.block())));
    Ok(LatticeOperator::from_blocks(space, blocks, false))
}

pub fn naive_dirac(lf: &LinkField, rep: &GammaRep) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    Ok(LatticeOperator::from_blocks(
        LatticeSpace::of(lf, rep),
        naive_blocks(lf, rep),
        false,
    ))
}

pub fn wilson_term(lf: &LinkField, rep: &GammaRep) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    let op = LatticeOperator::from_blocks(
        LatticeSpace::of(lf, rep),
        wilson_term_blocks(lf, rep),
        true,
    );
    verify_hermitian(&op)?;
    Ok(op)
}

/// The Wilson term assembled as `(a/2) Σ ∇_i* ∇_i`.
pub fn wilson_term_from_product(lf: &LinkField, rep: &GammaRep) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    Ok(LatticeOperator::from_blocks(
        LatticeSpace::of(lf, rep),
        wilson_term_product_blocks(lf, rep),
        true,
    ))
}

/// `D_{W,a} + m` (not Hermitian).
pub fn wilson_dirac_operator(lf: &LinkField, rep: &GammaRep, m: f64) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    Ok(LatticeOperator::from_blocks(
        LatticeSpace::of(lf, rep),
        wilson_dirac_blocks(lf, rep, m),
        false,
    ))
}

/// `γ ⊗ id` on the lattice space.
pub fn chirality_operator(lf: &LinkField, rep: &GammaRep) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    let g = rep.require_chirality()?;
    let space = LatticeSpace::of(lf, rep);
    Ok(LatticeOperator::from_blocks(
        space,
        local_blocks(space, &spinor_local(lf.n_c(), g)),
        true,
    ))
}

/// `H_W(m) = γ (D_a + W + m)`.
pub fn wilson_dirac(lf: &LinkField, rep: &GammaRep, m: f64) -> Result<LatticeOperator> {
    check_rep(lf, rep)?;
    let g = spinor_local(lf.n_c(), rep.require_chirality()?);
    let blocks = wilson_dirac_blocks(lf, rep, m).left_local(&g);
    let op = LatticeOperator::from_blocks(LatticeSpace::of(lf, rep), blocks, true);
    verify_hermitian(&op)?;
    Ok(op)
}

fn verify_hermitian(op: &LatticeOperator) -> Result<()> {
    let scale_ref = match &op.storage {
        Storage::Dense(m) => max_abs(m).max(1.0),
        Storage::Sparse(_) => 1.0,
    };
    let defect = op.hermiticity_defect();
    if defect > HERMITIAN_TOL * scale_ref {
        return Err(Error::Eigen(format!(
            "operator flagged Hermitian has defect {defect:e}"
        )));
    }
    Ok(())
}

/// Free Wilson operator `γ(D_W + m)` at lattice momentum `p = 2πk`,
/// a `spinor_dim × spinor_dim` block (trivial links, single colour).
pub fn free_wilson_block(rep: &GammaRep, size: usize, k: &[i64], m: f64) -> Result<CMat> {
    let g = rep.require_chirality()?;
    let a = 1.0 / size as f64;
    let d = rep.spinor_dim();
    let mut inner = scale(&identity(d), c(m, 0.0));
    for (i, &ki) in k.iter().enumerate() {
        let th = 2.0 * std::f64::consts::PI * ki as f64 * a;
        inner += scale(rep.gamma(i), c(0.0, th.sin() / a));
        inner += scale(&identity(d), c((1.0 - th.cos()) / a, 0.0));
    }
    Ok(g * &inner)
}

/// Free dispersion `λ² = a⁻² Σ sin²(a p_k) + (m + a⁻¹ Σ (1 − cos a p_k))²`.
pub fn free_dispersion(size: usize, k: &[i64], m: f64) -> f64 {
    let a = 1.0 / size as f64;
    let (mut kin, mut wil) = (0.0, m);
    for &ki in k {
        let th = 2.0 * std::f64::consts::PI * ki as f64 * a;
        kin += (th.sin() / a).powi(2);
        wil += (1.0 - th.cos()) / a;
    }
    kin + wil * wil
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct APrioriReport {
    /// Largest exact norm of `[∇_i,∇_j]`, `[∇_i,∇_j*]`, `[∇_i*,∇_j*]`.
    pub c0: f64,
    /// `(7n²/2 − 3n/2) C₀ + 1`.
    pub constant: f64,
    /// `n C₀ a²`; the estimate is claimed for values `≤ 2`.
    pub n_c0_a2: f64,
    pub trials: usize,
    pub violations: usize,
    /// Largest `(Σ‖∇_iφ‖² − 2‖γD_Wφ‖²)/‖φ‖²` seen on the random vectors.
    pub worst_sample: f64,
    /// Sharp value `λ_max(Σ ∇_i*∇_i − 2 D_W† D_W)`.
    pub sharp: f64,
}

/// Commutator constant `C₀` from exact operator norms (dense).
pub fn commutator_constant(lf: &LinkField, rep: &GammaRep) -> Result<f64> {
    check_rep(lf, rep)?;
    let n = lf.n();
    let fwd: Vec<CMat> = (0..n).map(|i| forward_blocks(lf, rep, i).to_dense()).collect();
    let bwd: Vec<CMat> = (0..n).map(|i| backward_blocks(lf, rep, i).to_dense()).collect();
    let comm = |x: &CMat, y: &CMat| -> CMat { &(x * y) - &(y * x) };
    let mut c0 = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            c0 = c0.max(operator_norm(&comm(&fwd[i], &fwd[j]))?);
            c0 = c0.max(operator_norm(&comm(&fwd[i], &bwd[j]))?);
            c0 = c0.max(operator_norm(&comm(&bwd[i], &bwd[j]))?);
        }
    }
    Ok(c0)
}

/// Checks `Σ‖∇_iφ‖² ≤ 2‖γD_{W,a}φ‖² + C‖φ‖²` on `trials` Gaussian vectors.
pub fn a_priori_check<R: Rng + ?Sized>(
    lf: &LinkField,
    rep: &GammaRep,
    trials: usize,
    rng: &mut R,
) -> Result<APrioriReport> {
    check_rep(lf, rep)?;
    let n = lf.n() as f64;
    let space = LatticeSpace::of(lf, rep);
    let c0 = commutator_constant(lf, rep)?;
    let constant = (3.5 * n * n - 1.5 * n) * c0 + 1.0;
    let fwd: Vec<BlockSparse> = (0..lf.n()).map(|i| forward_blocks(lf, rep, i)).collect();
    let dw = wilson_dirac_blocks(lf, rep, 0.0);

    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let phi = random_vector(rng, space.dim());
        let lhs: f64 = fwd.iter().map(|f| space.norm(&f.apply(&phi)).powi(2)).sum();
        let d = space.norm(&dw.apply(&phi)).powi(2);
        let p = space.norm(&phi).powi(2);
        if lhs > 2.0 * d + constant * p {
            violations += 1;
        }
        worst = worst.max((lhs - 2.0 * d) / p);
    }

    let mut lap = BlockSparse::zeros(lf.lattice().volume(), space.block());
    for f in &fwd {
        lap = lap.plus(&f.adjoint().times(f));
    }
    let gap = lap.plus(&dw.adjoint().times(&dw).scaled(c(-2.0, 0.0)));
    let sharp = *hermitian_eigenvalues(&gap.to_dense())?
        .last()
        .unwrap_or(&0.0);

    Ok(APrioriReport {
        c0,
        constant,
        n_c0_a2: n * c0 * lf.spacing().powi(2),
        trials,
        violations,
        worst_sample: worst,
        sharp,
    })
}
