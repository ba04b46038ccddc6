//! Array geometry, centered antenna indexing and near-field region boundaries.
//!
//! The array lies in the `z = 0` plane with broadside along `+z`. Antenna
//! `(p, q)` with `p in 0..n_h`, `q in 0..n_v` sits at `(m d, n d, 0)` where
//! `m = p - (n_h - 1)/2` and `n = q - (n_v - 1)/2`. Even counts therefore use
//! half-integer indices, which keeps the index set symmetric about the origin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform planar array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    n_h: usize,
    n_v: usize,
    spacing: f64,
    wavelength: f64,
}

/// Radiating near-field boundaries of an array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBoundaries {
    pub rayleigh_distance: f64,
    pub fresnel_distance: f64,
    pub aperture: f64,
}

/// Centered antenna index `(m, n)`.
pub type Index2 = (f64, f64);

impl ArrayGeometry {
    /// Half-wavelength spaced array.
    pub fn new(n_h: usize, n_v: usize, wavelength: f64) -> Result<Self> {
        Self::with_spacing(n_h, n_v, wavelength / 2.0, wavelength)
    }

    pub fn with_spacing(n_h: usize, n_v: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::InvalidGeometry(format!(
                "antenna counts must be positive, got {n_h}x{n_v}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGeometry(format!("spacing must be > 0, got {spacing}")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        Ok(Self { n_h, n_v, spacing, wavelength })
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `k = 2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Total antenna count `n_h * n_v`.
    pub fn len(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_ula(&self) -> bool {
        self.n_v == 1
    }

    /// Centered horizontal index of column `p`.
    pub fn m_of(&self, p: usize) -> f64 {
        centered(p, self.n_h)
    }

    /// Centered vertical index of row `q`.
    pub fn n_of(&self, q: usize) -> f64 {
        centered(q, self.n_v)
    }

    /// Flat position of antenna `(p, q)`; `p` varies fastest.
    pub fn flat(&self, p: usize, q: usize) -> usize {
        q * self.n_h + p
    }

    /// Inverse of [`ArrayGeometry::flat`].
    pub fn unflat(&self, i: usize) -> (usize, usize) {
        (i % self.n_h, i / self.n_h)
    }

    /// Centered index of flat position `i`.
    pub fn index_of(&self, i: usize) -> Index2 {
        let (p, q) = self.unflat(i);
        (self.m_of(p), self.n_of(q))
    }

    /// Flat position of the origin-symmetric partner `(-m, -n)`.
    pub fn partner_flat(&self, i: usize) -> usize {
        let (p, q) = self.unflat(i);
        self.flat(self.n_h - 1 - p, self.n_v - 1 - q)
    }

    /// All centered indices in flat order.
    pub fn centered_indices(&self) -> Vec<Index2> {
        (0..self.len()).map(|i| self.index_of(i)).collect()
    }

    /// Flat position of a centered index, if it belongs to the array.
    pub fn locate(&self, idx: Index2) -> Option<usize> {
        let p = idx.0 + (self.n_h as f64 - 1.0) / 2.0;
        let q = idx.1 + (self.n_v as f64 - 1.0) / 2.0;
        let valid = |x: f64, n: usize| x >= 0.0 && x.fract() == 0.0 && (x as usize) < n;
        (valid(p, self.n_h) && valid(q, self.n_v)).then(|| self.flat(p as usize, q as usize))
    }

    /// Origin-symmetric partner of an index: `(m, n) -> (-m, -n)`.
    pub fn symmetric_partner(&self, idx: Index2) -> Result<Index2> {
        self.locate(idx).ok_or(Error::IndexNotInSet(idx.0, idx.1))?;
        Ok((-idx.0, -idx.1))
    }

    /// Antenna position in meters.
    pub fn position(&self, idx: Index2) -> [f64; 3] {
        [idx.0 * self.spacing, idx.1 * self.spacing, 0.0]
    }

    /// Diagonal between the outermost element centers.
    pub fn aperture(&self) -> f64 {
        let w = (self.n_h as f64 - 1.0) * self.spacing;
        let h = (self.n_v as f64 - 1.0) * self.spacing;
        w.hypot(h)
    }

    /// Rayleigh `2D²/λ` and Fresnel `0.62 sqrt(D³/λ)` distances.
    pub fn region_boundaries(&self) -> Result<RegionBoundaries> {
        let d = self.aperture();
        if d <= 0.0 {
            return Err(Error::InvalidGeometry(
                "single-antenna array has no aperture".into(),
            ));
        }
        Ok(RegionBoundaries {
            rayleigh_distance: 2.0 * d * d / self.wavelength,
            fresnel_distance: 0.62 * (d.powi(3) / self.wavelength).sqrt(),
            aperture: d,
        })
    }

    /// Period of directional cosines in products of two symmetric antennas.
    ///
    /// The phase of `h(m) h*(-m)` advances by `2kd·u` per unit index, so `u`
    /// is only identifiable modulo `λ / (2d)` (1 for half-wavelength spacing).
    pub fn product_period(&self) -> f64 {
        self.wavelength / (2.0 * self.spacing)
    }
}

fn centered(p: usize, n: usize) -> f64 {
    (2.0 * p as f64 - (n as f64 - 1.0)) / 2.0
}
