//! Periodic hypercubic lattice `T^n_a = aZ^n / Z^n` with `a = 1/N`.
//!
//! Sites are numbered lexicographically with the first coordinate slowest:
//! `site = Σ_i z_i N^(n-1-i)`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    n: usize,
    size: usize,
}

impl Lattice {
    pub fn new(n: usize, size: usize) -> Self {
        assert!(n >= 1 && size >= 1, "lattice needs n >= 1 and N >= 1");
        Self { n, size }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    pub fn volume(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        let mut rest = site;
        for i in (0..self.n).rev() {
            out[i] = rest % self.size;
            rest /= self.size;
        }
        out
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &z| acc * self.size + (z % self.size))
    }

    /// Continuum position of a site in `[0,1)^n`.
    pub fn position(&self, site: usize) -> Vec<f64> {
        self.coords(site)
            .into_iter()
            .map(|z| z as f64 * self.spacing())
            .collect()
    }

    /// Neighbour `z + step·e_dir` with periodic wrap.
    pub fn shift(&self, site: usize, dir: usize, step: isize) -> usize {
        let mut z = self.coords(site);
        let len = self.size as isize;
        z[dir] = ((z[dir] as isize + step).rem_euclid(len)) as usize;
        self.site(&z)
    }

    pub fn sites(&self) -> std::ops::Range<usize> {
        0..self.volume()
    }
}

/// Reduce a coordinate into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Shortest periodic displacement component, in `[-1/2, 1/2)`.
pub fn wrap_displacement(d: f64) -> f64 {
    let r = (d + 0.5).rem_euclid(1.0) - 0.5;
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Shortest displacement `y - x` on the unit torus.
pub fn torus_displacement(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(a, b)| wrap_displacement(b - a))
        .collect()
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}
