//! Continuum gauge data, generalized link variables and lattice link fields.
//!
//! # Flux background
//!
//! The U(1) flux connection on `T²` is written in the Landau gauge
//! `α_1 = 0`, `α_2 = 2πQ x_1` on the fundamental domain `[0,1)²`, with the
//! covariant derivative `∇ = ∂ + iα`. Sections obey
//! `ψ(x + e_1) = e^{-2πiQ x_2} ψ(x)` and `ψ(x + e_2) = ψ(x)`; the twist sits on
//! the `x_1 = 0` seam. The generalized link is the straight-line parallel
//! transport
//!
//! ```text
//! U(x, y) = exp(i ∫_x^y α·dl),   y reached along the shortest displacement d,
//! ```
//!
//! i.e. `2πQ d_2 (x_1 + d_1/2)` plus the transition phase `-2πQ k_1 y_2` when
//! the segment crosses the seam `k_1` times. Every plaquette then carries the
//! uniform phase `2πQ/N²`.
//!
//! Smooth perturbations are finite Fourier sums added to `α` and need no twist.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{euclidean_norm, torus_displacement, wrap_unit, Lattice};
use crate::linalg::{
    adjoint, identity, max_abs_diff, operator_norm, random_unitary, unitarity_defect, CMat, C64,
    ONE,
};

/// Default stripe width `a₀` of the generalized link variables.
pub const DEFAULT_STRIPE: f64 = 0.5;

const UNITARITY_TOL: f64 = 1e-12;

/// One term `cos·cos(2πk·x) + sin·sin(2πk·x)` of the perturbation of `α_direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub direction: usize,
    pub k: [i64; 2],
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub modes: Vec<FourierMode>,
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

impl Perturbation {
    pub fn new(modes: Vec<FourierMode>) -> Self {
        Self { modes }
    }

    fn phase(mode: &FourierMode, x: &[f64]) -> f64 {
        2.0 * PI * (mode.k[0] as f64 * x[0] + mode.k[1] as f64 * x[1])
    }

    /// `δα_dir(x)`.
    pub fn potential(&self, dir: usize, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.direction == dir)
            .map(|m| {
                let th = Self::phase(m, x);
                m.cos * th.cos() + m.sin * th.sin()
            })
            .sum()
    }

    /// `∫_0^1 δα(x + s d)·d ds`, in closed form.
    pub fn line_integral(&self, x: &[f64], d: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let th0 = Self::phase(m, x);
                let dth = 2.0 * PI * (m.k[0] as f64 * d[0] + m.k[1] as f64 * d[1]);
                let mid = th0 + 0.5 * dth;
                let s = sinc(0.5 * dth);
                (m.cos * mid.cos() + m.sin * mid.sin()) * s * d[m.direction]
            })
            .sum()
    }

    /// Field strength `∂_1 δα_2 − ∂_2 δα_1` at `x`.
    pub fn curvature(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let th = Self::phase(m, x);
                let dtheta = -m.cos * th.sin() + m.sin * th.cos();
                let (deriv_axis, sign) = if m.direction == 1 { (0, 1.0) } else { (1, -1.0) };
                sign * 2.0 * PI * m.k[deriv_axis] as f64 * dtheta
            })
            .sum()
    }

    /// Largest `|k_i|` appearing in any mode.
    pub fn max_wavenumber(&self) -> i64 {
        self.modes
            .iter()
            .flat_map(|m| m.k.iter().map(|k| k.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Fourier coefficients `α_dir(x) = Σ_q A_q e^{2πi q·x}` as `(dir, q, A_q)`.
    pub fn exponential_terms(&self) -> Vec<(usize, [i64; 2], C64)> {
        let mut out = Vec::new();
        for m in &self.modes {
            if m.k == [0, 0] {
                out.push((m.direction, m.k, C64::new(m.cos, 0.0)));
                continue;
            }
            // cos θ = (e^{iθ} + e^{-iθ})/2, sin θ = (e^{iθ} − e^{-iθ})/(2i)
            let plus = C64::new(0.5 * m.cos, -0.5 * m.sin);
            let minus = C64::new(0.5 * m.cos, 0.5 * m.sin);
            out.push((m.direction, m.k, plus));
            out.push((m.direction, [-m.k[0], -m.k[1]], minus));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        for m in &self.modes {
            if m.direction > 1 {
                return Err(Error::InvalidDescriptor(format!(
                    "perturbation direction {} out of range for n = 2",
                    m.direction
                )));
            }
            if !(m.cos.is_finite() && m.sin.is_finite()) {
                return Err(Error::InvalidDescriptor("non-finite perturbation amplitude".into()));
            }
        }
        Ok(())
    }
}

/// Link variables read from (or written to) a link table file.
#[derive(Debug, Clone)]
pub struct LinkTable {
    pub n: usize,
    pub size: usize,
    pub n_c: usize,
    pub group: String,
    /// Indexed by `site * n + direction`.
    pub links: Vec<CMat>,
}

#[derive(Debug, Clone)]
pub enum ConnectionKind {
    Trivial,
    U1Flux { charge: i64 },
    U1FluxPlusSmooth { charge: i64, perturbation: Perturbation },
    External(LinkTable),
}

#[derive(Debug, Clone)]
pub struct ConnectionDescriptor {
    pub n: usize,
    pub n_c: usize,
    pub kind: ConnectionKind,
}

impl ConnectionDescriptor {
    pub fn trivial(n: usize, n_c: usize) -> Self {
        Self {
            n,
            n_c,
            kind: ConnectionKind::Trivial,
        }
    }

    pub fn u1_flux(charge: i64) -> Self {
        Self {
            n: 2,
            n_c: 1,
            kind: ConnectionKind::U1Flux { charge },
        }
    }

    pub fn u1_flux_plus_smooth(charge: i64, perturbation: Perturbation) -> Self {
        Self {
            n: 2,
            n_c: 1,
            kind: ConnectionKind::U1FluxPlusSmooth {
                charge,
                perturbation,
            },
        }
    }

    pub fn external(table: LinkTable) -> Self {
        Self {
            n: table.n,
            n_c: table.n_c,
            kind: ConnectionKind::External(table),
        }
    }

    /// Topological charge of the built-in backgrounds, `None` for external tables.
    pub fn charge(&self) -> Option<i64> {
        match &self.kind {
            ConnectionKind::Trivial => Some(0),
            ConnectionKind::U1Flux { charge } | ConnectionKind::U1FluxPlusSmooth { charge, .. } => {
                Some(*charge)
            }
            ConnectionKind::External(_) => None,
        }
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        match &self.kind {
            ConnectionKind::U1FluxPlusSmooth { perturbation, .. } => Some(perturbation),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.n) {
            return Err(Error::UnsupportedDimension(self.n));
        }
        if self.n_c == 0 {
            return Err(Error::InvalidDescriptor("colour dimension must be positive".into()));
        }
        match &self.kind {
            ConnectionKind::Trivial => Ok(()),
            ConnectionKind::U1Flux { .. } | ConnectionKind::U1FluxPlusSmooth { .. } => {
                if self.n != 2 || self.n_c != 1 {
                    return Err(Error::InvalidDescriptor(
                        "u1_flux requires n = 2 and N_c = 1".into(),
                    ));
                }
                self.perturbation().map_or(Ok(()), Perturbation::validate)
            }
            ConnectionKind::External(t) => {
                if t.n != self.n || t.n_c != self.n_c {
                    return Err(Error::InvalidDescriptor("link table shape mismatch".into()));
                }
                let lat = Lattice::new(t.n, t.size);
                if t.links.len() != lat.volume() * t.n {
                    return Err(Error::InvalidDescriptor(format!(
                        "link table has {} links, expected {}",
                        t.links.len(),
                        lat.volume() * t.n
                    )));
                }
                for (idx, u) in t.links.iter().enumerate() {
                    if u.nrows() != t.n_c || u.ncols() != t.n_c {
                        return Err(Error::InvalidDescriptor("link matrix has wrong shape".into()));
                    }
                    let dev = unitarity_defect(u);
                    if dev > UNITARITY_TOL {
                        return Err(Error::NonUnitaryLink {
                            site: idx / t.n,
                            direction: idx % t.n,
                            deviation: dev,
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// Generalized link variable `U(x, y)` on the stripe `|x − y| < a₀`.
#[derive(Debug, Clone)]
pub struct GeneralizedLink {
    desc: ConnectionDescriptor,
    stripe: f64,
}

pub fn make_generalized_link(desc: ConnectionDescriptor) -> Result<GeneralizedLink> {
    GeneralizedLink::with_stripe(desc, DEFAULT_STRIPE)
}

impl GeneralizedLink {
    pub fn with_stripe(desc: ConnectionDescriptor, stripe: f64) -> Result<Self> {
        desc.validate()?;
        if !(stripe > 0.0 && stripe <= 0.5) {
            return Err(Error::InvalidDescriptor(format!("stripe width {stripe} not in (0, 1/2]")));
        }
        Ok(Self { desc, stripe })
    }

    pub fn descriptor(&self) -> &ConnectionDescriptor {
        &self.desc
    }

    pub fn stripe(&self) -> f64 {
        self.stripe
    }

    pub fn n(&self) -> usize {
        self.desc.n
    }

    pub fn n_c(&self) -> usize {
        self.desc.n_c
    }

    /// Whether `eval` is defined away from lattice points.
    pub fn is_continuum(&self) -> bool {
        !matches!(self.desc.kind, ConnectionKind::External(_))
    }

    /// Phase of the abelian link, `U(x,y) = e^{i·phase}`.
    pub fn u1_phase(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let (charge, pert) = match &self.desc.kind {
            ConnectionKind::U1Flux { charge } => (*charge, None),
            ConnectionKind::U1FluxPlusSmooth {
                charge,
                perturbation,
            } => (*charge, Some(perturbation)),
            ConnectionKind::Trivial if self.desc.n_c == 1 => return Ok(0.0),
            _ => {
                return Err(Error::UnsupportedBackground(
                    "phase is only defined for abelian continuum backgrounds".into(),
                ))
            }
        };
        let x: Vec<f64> = x.iter().map(|&t| snap_unit(t)).collect();
        let y: Vec<f64> = y.iter().map(|&t| snap_unit(t)).collect();
        let d = torus_displacement(&x, &y);
        self.check_stripe(&d)?;
        let flux = 2.0 * PI * charge as f64;
        let seam = (x[0] + d[0] - y[0]).round();
        let mut phase = flux * d[1] * (x[0] + 0.5 * d[0]) - flux * seam * y[1];
        if let Some(p) = pert {
            phase += p.line_integral(&x, &d);
        }
        Ok(phase)
    }

    fn check_stripe(&self, d: &[f64]) -> Result<()> {
        let dist = euclidean_norm(d);
        if dist >= self.stripe {
            return Err(Error::InvalidDescriptor(format!(
                "points are {dist} apart, outside the stripe a0 = {}",
                self.stripe
            )));
        }
        Ok(())
    }

    /// `U(x, y) ∈ Hom(E_y, E_x)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<CMat> {
        match &self.desc.kind {
            ConnectionKind::Trivial => {
                self.check_stripe(&torus_displacement(x, y))?;
                Ok(identity(self.desc.n_c))
            }
            ConnectionKind::U1Flux { .. } | ConnectionKind::U1FluxPlusSmooth { .. } => {
                let ph = self.u1_phase(x, y)?;
                Ok(Mat::from_fn(1, 1, |_, _| C64::from_polar(1.0, ph)))
            }
            ConnectionKind::External(table) => table_lookup(table, x, y),
        }
    }

    /// Largest `|U(y,x) U(x,y) − id|` over `samples` random pairs.
    pub fn inverse_defect(&self, samples: usize, seed: u64) -> Result<f64> {
        if !self.is_continuum() {
            return Ok(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.desc.n;
        let id = identity(self.desc.n_c);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let r = 0.9 * self.stripe / (n as f64).sqrt();
            let y: Vec<f64> = x
                .iter()
                .map(|&t| t + r * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let uxy = self.eval(&x, &y)?;
            let uyx = self.eval(&y, &x)?;
            worst = worst.max(max_abs_diff(&(&uyx * &uxy), &id));
        }
        Ok(worst)
    }
}

/// `wrap_unit`, with values within rounding of 1 sent to 0 so that lattice
/// points on the seam land in one fixed chart.
fn snap_unit(t: f64) -> f64 {
    let w = wrap_unit(t);
    if w > 1.0 - 1e-12 {
        0.0
    } else {
        w
    }
}

fn table_lookup(table: &LinkTable, x: &[f64], y: &[f64]) -> Result<CMat> {
    let lat = Lattice::new(table.n, table.size);
    let to_site = |p: &[f64]| -> Option<usize> {
        let mut z = Vec::with_capacity(p.len());
        for &t in p {
            let s = wrap_unit(t) * table.size as f64;
            let r = s.round();
            if (s - r).abs() > 1e-9 {
                return None;
            }
            z.push(r as usize % table.size);
        }
        Some(lat.site(&z))
    };
    let off_lattice =
        || Error::InvalidDescriptor("external link tables only define nearest-neighbour lattice pairs".into());
    let sx = to_site(x).ok_or_else(off_lattice)?;
    let sy = to_site(y).ok_or_else(off_lattice)?;
    if sx == sy {
        return Ok(identity(table.n_c));
    }
    for dir in 0..table.n {
        if lat.shift(sx, dir, 1) == sy {
            return Ok(table.links[sx * table.n + dir].clone());
        }
        if lat.shift(sx, dir, -1) == sy {
            return Ok(adjoint(&table.links[sy * table.n + dir]));
        }
    }
    Err(off_lattice())
}

/// Lattice link variables `U(z, z + e_i a)`.
#[derive(Debug, Clone)]
pub struct LinkField {
    lattice: Lattice,
    n_c: usize,
    links: Vec<CMat>,
}

pub fn discretize(link: &GeneralizedLink, size: usize) -> Result<LinkField> {
    let a = 1.0 / size as f64;
    if a >= link.stripe {
        return Err(Error::SpacingTooCoarse {
            size,
            stripe: link.stripe,
        });
    }
    if let ConnectionKind::External(t) = &link.desc.kind {
        if t.size != size {
            return Err(Error::InvalidDescriptor(format!(
                "link table is defined for N = {}, requested N = {size}",
                t.size
            )));
        }
        return LinkField::from_links(Lattice::new(t.n, size), t.n_c, t.links.clone());
    }
    let lat = Lattice::new(link.n(), size);
    let mut links = Vec::with_capacity(lat.volume() * lat.n());
    for site in lat.sites() {
        let x = lat.position(site);
        for dir in 0..lat.n() {
            let y = lat.position(lat.shift(site, dir, 1));
            links.push(link.eval(&x, &y)?);
        }
    }
    Ok(LinkField {
        lattice: lat,
        n_c: link.n_c(),
        links,
    })
}

impl LinkField {
    pub fn from_links(lattice: Lattice, n_c: usize, links: Vec<CMat>) -> Result<Self> {
        if links.len() != lattice.volume() * lattice.n() {
            return Err(Error::DimensionMismatch {
                expected: lattice.volume() * lattice.n(),
                actual: links.len(),
            });
        }
        for (idx, u) in links.iter().enumerate() {
            let dev = unitarity_defect(u);
            if u.nrows() != n_c || dev > UNITARITY_TOL {
                return Err(Error::NonUnitaryLink {
                    site: idx / lattice.n(),
                    direction: idx % lattice.n(),
                    deviation: dev,
                });
            }
        }
        Ok(Self {
            lattice,
            n_c,
            links,
        })
    }

    /// All links equal to the identity.
    pub fn identity(n: usize, size: usize, n_c: usize) -> Self {
        let lattice = Lattice::new(n, size);
        Self {
            lattice,
            n_c,
            links: vec![identity(n_c); lattice.volume() * n],
        }
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

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    /// `U(z, z + e_dir a)`.
    pub fn link(&self, site: usize, dir: usize) -> &CMat {
        &self.links[site * self.lattice.n() + dir]
    }

    pub fn links(&self) -> &[CMat] {
        &self.links
    }

    /// True when every link is exactly the identity matrix.
    pub fn is_identity(&self) -> bool {
        let id = identity(self.n_c);
        self.links.iter().all(|u| max_abs_diff(u, &id) == 0.0)
    }

    /// Ordered plaquette `U_i(z) U_j(z+i) U_i(z+j)† U_j(z)†`.
    pub fn plaquette(&self, site: usize, i: usize, j: usize) -> CMat {
        let lat = &self.lattice;
        let zi = lat.shift(site, i, 1);
        let zj = lat.shift(site, j, 1);
        let a = self.link(site, i) * self.link(zi, j);
        let b = self.link(zj, i) * self.link(site, j);
        &a * b.adjoint()
    }

    pub fn to_table(&self, group: &str) -> LinkTable {
        LinkTable {
            n: self.n(),
            size: self.size(),
            n_c: self.n_c,
            group: group.to_string(),
            links: self.links.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeReadout {
    pub charge: i64,
    /// `|raw − charge|` before rounding.
    pub residual: f64,
    /// Largest plaquette phase magnitude.
    pub max_phase: f64,
}

pub fn plaquette_charge(lf: &LinkField) -> Result<ChargeReadout> {
    if lf.n() != 2 || lf.n_c() != 1 {
        return Err(Error::UnsupportedBackground(
            "plaquette charge needs n = 2 and N_c = 1".into(),
        ));
    }
    let limit = PI * (1.0 - 1e-6);
    let mut total = 0.0;
    let mut max_phase = 0.0f64;
    for site in lf.lattice().sites() {
        let p = lf.plaquette(site, 0, 1)[(0, 0)];
        let phase = p.arg();
        if phase.abs() >= limit {
            return Err(Error::RoughField { site, phase });
        }
        max_phase = max_phase.max(phase.abs());
        total += phase;
    }
    let raw = total / (2.0 * PI);
    let charge = raw.round();
    Ok(ChargeReadout {
        charge: charge as i64,
        residual: (raw - charge).abs(),
        max_phase,
    })
}

/// Lower estimate of the constant `F` in `|id − U_W(x,y,z)| ≤ F |x−y| |x−z|`.
///
/// Continuum links are probed on random small triangles (legs in
/// `[10⁻³, 0.05]`, fixed seed). External tables are probed on their
/// elementary plaquettes, `|id − P| / a²`.
pub fn curvature_bound(link: &GeneralizedLink, samples: usize) -> Result<f64> {
    if let ConnectionKind::External(t) = &link.desc.kind {
        let lf = LinkField::from_links(Lattice::new(t.n, t.size), t.n_c, t.links.clone())?;
        let id = identity(t.n_c);
        let a2 = lf.spacing().powi(2);
        let mut worst = 0.0f64;
        for site in lf.lattice().sites() {
            for i in 0..t.n {
                for j in 0..i {
                    let p = lf.plaquette(site, i, j);
                    worst = worst.max(operator_norm(&(&id - &p))? / a2);
                }
            }
        }
        return Ok(worst);
    }
    let n = link.n();
    if n < 2 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let id = identity(link.n_c());
    let mut worst = 0.0f64;
    for _ in 0..samples.max(1) {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let u = random_direction(&mut rng, n);
        let v = random_direction(&mut rng, n);
        let r1 = 1e-3 + (0.05 - 1e-3) * rng.random::<f64>();
        let r2 = 1e-3 + (0.05 - 1e-3) * rng.random::<f64>();
        let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + r1 * b).collect();
        let z: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + r2 * b).collect();
        let uw = &(&link.eval(&x, &y)? * &link.eval(&y, &z)?) * &link.eval(&z, &x)?;
        let dev = if link.n_c() == 1 {
            (ONE - uw[(0, 0)]).norm()
        } else {
            operator_norm(&(&id - &uw))?
        };
        worst = worst.max(dev / (r1 * r2));
    }
    Ok(worst)
}

fn random_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let len = euclidean_norm(&v);
        if len > 1e-3 && len <= 1.0 {
            return v.into_iter().map(|t| t / len).collect();
        }
    }
}

/// `U'(z, z+e_i a) = g(z) U(z, z+e_i a) g(z+e_i a)⁻¹`.
pub fn gauge_transform(lf: &LinkField, g: &[CMat]) -> Result<LinkField> {
    let lat = lf.lattice();
    if g.len() != lat.volume() {
        return Err(Error::DimensionMismatch {
            expected: lat.volume(),
            actual: g.len(),
        });
    }
    for (site, gz) in g.iter().enumerate() {
        let dev = if gz.nrows() == lf.n_c() && gz.ncols() == lf.n_c() {
            unitarity_defect(gz)
        } else {
            f64::INFINITY
        };
        if dev > UNITARITY_TOL {
            return Err(Error::NonUnitaryGauge {
                site,
                deviation: dev,
            });
        }
    }
    let mut links = Vec::with_capacity(lf.links.len());
    for site in lat.sites() {
        for dir in 0..lat.n() {
            let next = lat.shift(site, dir, 1);
            links.push(&(&g[site] * lf.link(site, dir)) * g[next].adjoint());
        }
    }
    Ok(LinkField {
        lattice: lat,
        n_c: lf.n_c,
        links,
    })
}

/// Independent random unitary per site.
pub fn random_gauge<R: Rng + ?Sized>(rng: &mut R, lattice: Lattice, n_c: usize) -> Vec<CMat> {
    lattice
        .sites()
        .map(|_| random_unitary(rng, n_c))
        .collect()
}

/// Block-diagonal per-site unitary `G = ⊕_z id_S ⊗ g(z)` in the site-major
/// `(site, spinor, colour)` ordering.
pub fn gauge_matrix(g: &[CMat], spinor_dim: usize) -> CMat {
    let n_c = g[0].nrows();
    let block = spinor_dim * n_c;
    let dim = g.len() * block;
    let mut out = Mat::zeros(dim, dim);
    for (site, gz) in g.iter().enumerate() {
        for s in 0..spinor_dim {
            let off = site * block + s * n_c;
            for a in 0..n_c {
                for b in 0..n_c {
                    out[(off + a, off + b)] = gz[(a, b)];
                }
            }
        }
    }
    out
}

/// Writes the text link-table format: a header line
/// `n=<n> N=<N> Nc=<Nc> group=<label>` followed by one record per
/// `(site, direction)`, sites in lexicographic order, each record
/// `site dir re(U_00) im(U_00) re(U_01) ...` (row-major, 17 significant digits).
pub fn write_link_table<W: Write>(table: &LinkTable, mut out: W) -> Result<()> {
    writeln!(
        out,
        "n={} N={} Nc={} group={}",
        table.n, table.size, table.n_c, table.group
    )?;
    for (idx, u) in table.links.iter().enumerate() {
        write!(out, "{} {}", idx / table.n, idx % table.n)?;
        for a in 0..table.n_c {
            for b in 0..table.n_c {
                write!(out, " {:.16e} {:.16e}", u[(a, b)].re, u[(a, b)].im)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_link_table<R: BufRead>(input: R) -> Result<LinkTable> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header = header?;
    let (mut n, mut size, mut n_c, mut group) = (None, None, None, None);
    for tok in header.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parse {
            line: hline + 1,
            message: format!("bad header token {tok:?}"),
        })?;
        let num = || {
            v.parse::<usize>().map_err(|_| Error::Parse {
                line: hline + 1,
                message: format!("bad value for {k}"),
            })
        };
        match k {
            "n" => n = Some(num()?),
            "N" => size = Some(num()?),
            "Nc" => n_c = Some(num()?),
            "group" => group = Some(v.to_string()),
            _ => {
                return Err(Error::Parse {
                    line: hline + 1,
                    message: format!("unknown header key {k}"),
                })
            }
        }
    }
    let missing = |what: &str| Error::Parse {
        line: hline + 1,
        message: format!("header lacks {what}"),
    };
    let n = n.ok_or_else(|| missing("n"))?;
    let size = size.ok_or_else(|| missing("N"))?;
    let n_c = n_c.ok_or_else(|| missing("Nc"))?;
    let group = group.unwrap_or_default();
    if !(1..=4).contains(&n) || size == 0 || n_c == 0 {
        return Err(Error::Parse {
            line: hline + 1,
            message: "header values out of range".into(),
        });
    }
    let count = size.pow(n as u32) * n;
    let mut links: Vec<Option<CMat>> = vec![None; count];
    for (lno, line) in lines {
        let line = line?;
        let err = |message: String| Error::Parse {
            line: lno + 1,
            message,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 + 2 * n_c * n_c {
            return Err(err(format!("expected {} fields, got {}", 2 + 2 * n_c * n_c, toks.len())));
        }
        let site: usize = toks[0].parse().map_err(|_| err("bad site index".into()))?;
        let dir: usize = toks[1].parse().map_err(|_| err("bad direction".into()))?;
        if dir >= n || site * n + dir >= count {
            return Err(err("site or direction out of range".into()));
        }
        let vals: Vec<f64> = toks[2..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err("bad number".into()))?;
        let u = Mat::from_fn(n_c, n_c, |a, b| {
            let k = 2 * (a * n_c + b);
            C64::new(vals[k], vals[k + 1])
        });
        let slot = &mut links[site * n + dir];
        if slot.is_some() {
            return Err(err("duplicate record".into()));
        }
        *slot = Some(u);
    }
    let links = links
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or(Error::Parse {
                line: 0,
                message: format!("missing record for site {}, direction {}", i / n, i % n),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = LinkTable {
        n,
        size,
        n_c,
        group,
        links,
    };
    ConnectionDescriptor::external(table.clone()).validate()?;
    Ok(table)
}
