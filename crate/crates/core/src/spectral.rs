//! Eta invariants and spectral flow of one-parameter Hermitian families.
//!
//! Spectral flow is computed twice:
//!
//! * **Crossing bookkeeping.** The mass interval is cut into segments and
//!   each segment gets a level `λ` that provably avoids the spectrum on the
//!   whole segment: with `‖dH/dm‖ ≤ L` every eigenvalue branch is
//!   `L`-Lipschitz, so `dist(λ, spec H(m_l)) + dist(λ, spec H(m_r)) > L·Δm`
//!   rules out `λ ∈ spec H(m)` for all `m` in between. Segments without such a
//!   level are bisected. At each breakpoint the level changes from `λ_k` to
//!   `λ_{k+1}` and contributes `sgn(λ_k − λ_{k+1})` times the number of
//!   eigenvalues between them. Both ends use the level `0`.
//! * **Eta difference.** `sf = ½(η(+M) − η(−M))`.
//!
//! The two must agree exactly; disagreement is an error.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::gauge::LinkField;
use crate::latops::{chirality_operator, wilson_dirac, LatticeOperator};
use crate::linalg::{hermitian_eigenvalues, operator_norm, scale, c, CMat};

/// `|λ|` below which the sign of an eigenvalue is treated as undefined.
pub const KERNEL_TOL: f64 = 1e-10;

/// Slack added to the level-avoidance test to absorb eigensolver rounding.
pub const CERTIFY_MARGIN: f64 = 1e-8;

/// Deepest allowed bisection of a single grid interval.
pub const MAX_BISECTION: usize = 12;

/// `η = #(λ > 0) − #(λ < 0)` together with `min |λ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaResult {
    pub eta: i64,
    pub min_abs_eig: f64,
}

pub fn eta_of_eigenvalues(vals: &[f64]) -> Result<EtaResult> {
    let min_abs = vals.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    if min_abs < KERNEL_TOL {
        return Err(Error::NearZeroMode { min_abs });
    }
    let pos = vals.iter().filter(|&&l| l > 0.0).count() as i64;
    let neg = vals.len() as i64 - pos;
    Ok(EtaResult { eta: pos - neg, min_abs_eig: min_abs })
}

pub fn eta(op: &LatticeOperator) -> Result<EtaResult> {
    if !op.is_hermitian() {
        return Err(Error::Eigen("eta needs a Hermitian operator".into()));
    }
    eta_of_eigenvalues(&op.eigenvalues()?)
}

pub fn eta_dense(m: &CMat) -> Result<EtaResult> {
    eta_of_eigenvalues(&hermitian_eigenvalues(m)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct MassGrid {
    pub m_max: f64,
    pub points: Vec<f64>,
}

impl MassGrid {
    /// `count` equally spaced points on `[−M, M]`.
    pub fn uniform(m_max: f64, count: usize) -> Result<Self> {
        if count < 9 {
            return Err(Error::InvalidGrid(format!("{count} points, need at least 9")));
        }
        let step = 2.0 * m_max / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| -m_max + step * i as f64).collect();
        points[count - 1] = m_max;
        Self::from_points(points)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 9 {
            return Err(Error::InvalidGrid(format!("{} points, need at least 9", points.len())));
        }
        let m_max = *points.last().unwrap();
        if !(m_max > 0.0) || points[0] != -m_max {
            return Err(Error::InvalidGrid("grid must run from −M to +M with M > 0".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("grid points must be strictly increasing".into()));
        }
        Ok(Self { m_max, points })
    }
}

/// A continuous Hermitian family `m ↦ H(m)` with `‖H(m) − H(m')‖ ≤ L|m − m'|`.
pub trait Family: Sync {
    fn at(&self, m: f64) -> Result<CMat>;
    fn lipschitz(&self) -> f64;

    fn eigenvalues(&self, m: f64) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.at(m)?)
    }
}

/// `H(m) = H_0 + m·G` with a fixed Hermitian `G`.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    base: CMat,
    slope: CMat,
    lipschitz: f64,
}

impl AffineFamily {
    pub fn new(base: CMat, slope: CMat) -> Result<Self> {
        let lipschitz = operator_norm(&slope)?;
        Ok(Self { base, slope, lipschitz })
    }

    /// `H_W(m) = H_W(0) + mγ`.
    pub fn wilson(lf: &LinkField, rep: &GammaRep) -> Result<Self> {
        let base = wilson_dirac(lf, rep, 0.0)?.to_dense();
        let slope = chirality_operator(lf, rep)?.to_dense();
        Ok(Self { base, slope, lipschitz: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }
}

impl Family for AffineFamily {
    fn at(&self, m: f64) -> Result<CMat> {
        Ok(&self.base + scale(&self.slope, c(m, 0.0)))
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub m_lo: f64,
    pub m_hi: f64,
    pub sign: i64,
    pub count: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSpectrum {
    pub m: f64,
    /// Sorted eigenvalues inside `[−Λ₀, Λ₀]`.
    pub window: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowResult {
    pub grid: MassGrid,
    pub window: f64,
    /// One entry per evaluated mass, including bisection points, ascending.
    pub spectra: Vec<GridSpectrum>,
    pub crossings: Vec<Crossing>,
    pub sf: i64,
    pub eta_minus: i64,
    pub eta_plus: i64,
    pub bisections: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub sf: i64,
    pub eta_minus: i64,
    pub eta_plus: i64,
    pub crossings: Vec<Crossing>,
}

impl FlowResult {
    pub fn summary(&self) -> FlowSummary {
        FlowSummary {
            sf: self.sf,
            eta_minus: self.eta_minus,
            eta_plus: self.eta_plus,
            crossings: self.crossings.clone(),
        }
    }

    /// `sf` from the eta difference.
    pub fn sf_from_eta(&self) -> i64 {
        (self.eta_plus - self.eta_minus) / 2
    }

    /// CSV with header `m,index,lambda`, one row per windowed eigenvalue.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,index,lambda")?;
        for s in &self.spectra {
            for (i, l) in s.window.iter().enumerate() {
                writeln!(out, "{:.12e},{},{:.12e}", s.m, i, l)?;
            }
        }
        Ok(())
    }
}

fn dist(level: f64, spec: &[f64]) -> f64 {
    // spec is sorted
    let pos = spec.partition_point(|&x| x < level);
    let mut best = f64::INFINITY;
    if pos < spec.len() {
        best = best.min(spec[pos] - level);
    }
    if pos > 0 {
        best = best.min(level - spec[pos - 1]);
    }
    best
}

fn count_below(spec: &[f64], level: f64) -> i64 {
    spec.partition_point(|&x| x < level) as i64
}

/// Smallest-magnitude level inside the window that avoids the spectrum on the
/// whole segment, if any.
fn certified_level(left: &[f64], right: &[f64], lipschitz: f64, dm: f64, window: f64) -> Option<f64> {
    // Eigenvalues carry rounding error; demand a margin well above it.
    let ok = |lam: f64| {
        let (dl, dr) = (dist(lam, left), dist(lam, right));
        lam.abs() < window
            && dl > CERTIFY_MARGIN
            && dr > CERTIFY_MARGIN
            && dl + dr > lipschitz * dm + CERTIFY_MARGIN
    };
    if ok(0.0) {
        return Some(0.0);
    }
    let mut marks: Vec<f64> = left
        .iter()
        .chain(right)
        .copied()
        .filter(|l| l.abs() < window)
        .collect();
    marks.push(-window);
    marks.push(window);
    marks.sort_by(f64::total_cmp);
    marks
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .filter(|&lam| ok(lam))
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
}

struct Segment {
    lo: f64,
    hi: f64,
    level: f64,
}

pub fn spectral_flow<F: Family + ?Sized>(family: &F, grid: &MassGrid, window: Option<f64>) -> Result<FlowResult> {
    let spectra: Vec<Vec<f64>> = grid
        .points
        .par_iter()
        .map(|&m| family.eigenvalues(m))
        .collect::<Result<_>>()?;
    let first = &spectra[0];
    let last = spectra.last().unwrap();
    let eta_minus = eta_of_eigenvalues(first).map_err(|_| Error::EndpointKernel {
        mass: -grid.m_max,
        min_abs: first.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min),
    })?;
    let eta_plus = eta_of_eigenvalues(last).map_err(|_| Error::EndpointKernel {
        mass: grid.m_max,
        min_abs: last.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min),
    })?;
    let window = window.unwrap_or(0.5 * eta_minus.min_abs_eig.min(eta_plus.min_abs_eig));
    if !(window > 0.0) {
        return Err(Error::InvalidGrid(format!("spectral window {window} must be positive")));
    }
    let lipschitz = family.lipschitz();

    let mut evaluated: Vec<(f64, Vec<f64>)> = grid.points.iter().copied().zip(spectra).collect();
    let mut segments: Vec<Segment> = Vec::new();
    let mut bisections = 0usize;
    for k in 0..evaluated.len() - 1 {
        let (lo, left) = evaluated[k].clone();
        let (hi, right) = evaluated[k + 1].clone();
        let mut stack = vec![(lo, left, hi, right, 0usize)];
        // depth-first, left to right
        while let Some((a, sa, b, sb, depth)) = stack.pop() {
            if let Some(level) = certified_level(&sa, &sb, lipschitz, b - a, window) {
                segments.push(Segment { lo: a, hi: b, level });
                continue;
            }
            if depth >= MAX_BISECTION {
                return Err(Error::UnresolvedInterval { lo: a, hi: b });
            }
            let mid = 0.5 * (a + b);
            let sm = family.eigenvalues(mid)?;
            bisections += 1;
            evaluated.push((mid, sm.clone()));
            stack.push((mid, sm.clone(), b, sb, depth + 1));
            stack.push((a, sa, mid, sm, depth + 1));
        }
    }
    evaluated.sort_by(|x, y| x.0.total_cmp(&y.0));
    let spec_at = |m: f64| -> &Vec<f64> {
        let i = evaluated.partition_point(|e| e.0 < m);
        &evaluated[i].1
    };

    // Breakpoints: virtual level 0 before the first and after the last segment.
    let mut crossings = Vec::new();
    let mut sf = 0i64;
    let mut prev_level = 0.0;
    let mut prev_lo = grid.points[0];
    for seg in &segments {
        let spec = spec_at(seg.lo);
        let d = count_below(spec, seg.level) - count_below(spec, prev_level);
        // d > 0 when the level moves up past eigenvalues: sgn(λ_k − λ_{k+1}) = −1.
        if d != 0 {
            let sign = if prev_level > seg.level { 1 } else { -1 };
            let count = d.abs();
            sf += sign * count;
            crossings.push(Crossing { m_lo: prev_lo, m_hi: seg.hi, sign, count });
        }
        prev_level = seg.level;
        prev_lo = seg.lo;
    }
    {
        let spec = spec_at(grid.m_max);
        let d = count_below(spec, 0.0) - count_below(spec, prev_level);
        if d != 0 {
            let sign = if prev_level > 0.0 { 1 } else { -1 };
            sf += sign * d.abs();
            crossings.push(Crossing { m_lo: prev_lo, m_hi: grid.m_max, sign, count: d.abs() });
        }
    }

    let eta_sf = (eta_plus.eta - eta_minus.eta) / 2;
    if sf != eta_sf {
        return Err(Error::MethodMismatch { crossing: sf, eta: eta_sf });
    }
    let spectra = evaluated
        .into_iter()
        .map(|(m, s)| GridSpectrum { m, window: s.into_iter().filter(|l| l.abs() <= window).collect() })
        .collect();
    Ok(FlowResult {
        grid: grid.clone(),
        window,
        spectra,
        crossings,
        sf,
        eta_minus: eta_minus.eta,
        eta_plus: eta_plus.eta,
        bisections,
    })
}

/// `−½ η(H_W(−M))`.
pub fn wilson_index(lf: &LinkField, rep: &GammaRep, m_max: f64) -> Result<i64> {
    let e = eta(&wilson_dirac(lf, rep, -m_max)?)?;
    Ok(-e.eta / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma_rep;
    use crate::gauge::{discretize, make_generalized_link, ConnectionDescriptor};
    use crate::linalg::identity;
    use faer::Mat;

    struct Scalar;
    impl Family for Scalar {
        fn at(&self, m: f64) -> Result<CMat> {
            Ok(Mat::from_fn(1, 1, |_, _| c(m, 0.0)))
        }
        fn lipschitz(&self) -> f64 {
            1.0
        }
    }

    fn flux(q: i64, size: usize) -> LinkField {
        discretize(&make_generalized_link(ConnectionDescriptor::u1_flux(q)).unwrap(), size).unwrap()
    }

    #[test]
    fn bott_family_has_unit_flow() {
        let grid = MassGrid::uniform(1.0, 9).unwrap();
        let r = spectral_flow(&Scalar, &grid, Some(0.5)).unwrap();
        assert_eq!((r.sf, r.eta_minus, r.eta_plus), (1, -1, 1));
        assert_eq!(r.crossings.iter().map(|c| c.sign * c.count).sum::<i64>(), 1);
    }

    #[test]
    fn eta_examples() {
        let rep = build_gamma_rep(2).unwrap();
        let lf = flux(1, 8);
        assert_eq!(eta(&wilson_dirac(&lf, &rep, 1.0).unwrap()).unwrap().eta, 0);
        let g = chirality_operator(&lf, &rep).unwrap().to_dense();
        assert_eq!(eta_dense(&scale(&g, c(0.3, 0.0))).unwrap().eta, 0);
        assert!(matches!(eta_dense(&Mat::zeros(2, 2)), Err(Error::NearZeroMode { .. })));
    }

    #[test]
    fn free_eta_vanishes_at_negative_mass() {
        // Every free momentum block γ(i Σ c s + μ) is traceless.
        let rep = build_gamma_rep(2).unwrap();
        let lf = LinkField::identity(2, 8, 1);
        assert_eq!(eta(&wilson_dirac(&lf, &rep, -1.0).unwrap()).unwrap().eta, 0);
    }

    #[test]
    fn grid_validation() {
        assert!(MassGrid::uniform(1.0, 8).is_err());
        let g = MassGrid::uniform(1.0, 9).unwrap();
        assert_eq!(g.points[0], -1.0);
        assert_eq!(g.points[8], 1.0);
        assert!(MassGrid::from_points(vec![-1.0, -0.5, -0.5, 0.0, 0.1, 0.2, 0.3, 0.4, 1.0]).is_err());
    }

    #[test]
    fn trivial_flow_vanishes() {
        let rep = build_gamma_rep(2).unwrap();
        let fam = AffineFamily::wilson(&LinkField::identity(2, 8, 1), &rep).unwrap();
        let r = spectral_flow(&fam, &MassGrid::uniform(1.0, 17).unwrap(), None).unwrap();
        assert_eq!(r.sf, 0);
        assert!(r.crossings.len() >= 2, "paired crossings expected: {:?}", r.crossings);
    }

    #[test]
    fn flux_flow_equals_charge() {
        let rep = build_gamma_rep(2).unwrap();
        let fam = AffineFamily::wilson(&flux(1, 12), &rep).unwrap();
        let r = spectral_flow(&fam, &MassGrid::uniform(1.0, 33).unwrap(), None).unwrap();
        assert_eq!(r.sf, 1);
        assert_eq!(r.sf_from_eta(), 1);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("m,index,lambda\n"));
    }

    #[test]
    fn endpoint_kernel_is_rejected() {
        let grid = MassGrid::from_points(vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        struct Shifted;
        impl Family for Shifted {
            fn at(&self, m: f64) -> Result<CMat> {
                Ok(Mat::from_fn(1, 1, |_, _| c(m - 1.0, 0.0)))
            }
            fn lipschitz(&self) -> f64 {
                1.0
            }
        }
        assert!(matches!(spectral_flow(&Shifted, &grid, None), Err(Error::EndpointKernel { .. })));
    }

    #[test]
    fn wilson_index_examples() {
        let rep = build_gamma_rep(2).unwrap();
        assert_eq!(wilson_index(&LinkField::identity(2, 8, 1), &rep, 1.0).unwrap(), 0);
        assert_eq!(wilson_index(&flux(1, 8), &rep, 1.0).unwrap(), 1);
        assert_eq!(wilson_index(&flux(-2, 8), &rep, 1.0).unwrap(), -2);
    }

    #[test]
    fn affine_family_lipschitz_is_operator_norm() {
        let fam = AffineFamily::new(identity(3), scale(&identity(3), c(-2.0, 0.0))).unwrap();
        assert!((fam.lipschitz() - 2.0).abs() < 1e-12);
    }
}
