//! Bravais-lattice arithmetic for 2D bilayers.
//!
//! A lattice is the set `{A n : n in Z^2}` for an invertible 2x2 basis `A`
//! whose columns are the lattice vectors (units: Angstrom). The module
//! provides site enumeration in open balls, the modulation operator folding
//! points into the unit cell, uniform shift grids over the cell, and the
//! equidistribution diagnostics (Fourier-mode averages and a binned
//! discrepancy) used to check that relative shifts of an incommensurate pair
//! fill the cell uniformly.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Number of bins per cell axis in [`equidistribution_discrepancy`].
pub const DISCREPANCY_BINS: usize = 16;

/// Minimum site count accepted by [`equidistribution_discrepancy`].
pub const DISCREPANCY_MIN_SITES: usize = 100;

/// 2D Bravais lattice basis. Columns of `a` are the lattice vectors.
#[derive(Debug, Clone)]
pub struct LatticeBasis {
    a: Matrix2<f64>,
    inv: Matrix2<f64>,
    cell_area: f64,
}

impl LatticeBasis {
    /// Builds a basis from column lattice vectors, rejecting singular matrices.
    pub fn new(a1: [f64; 2], a2: [f64; 2]) -> Result<Self> {
        let a = Matrix2::new(a1[0], a2[0], a1[1], a2[1]);
        let det = a.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::SingularBasis { det });
        }
        let inv = Matrix2::new(a2[1], -a2[0], -a1[1], a1[0]) / det;
        Ok(Self {
            a,
            inv,
            cell_area: det.abs(),
        })
    }

    /// Hexagonal (triangular) Bravais basis with lattice constant `a`:
    /// `a1 = a (1, 0)`, `a2 = a (1/2, sqrt(3)/2)`.
    pub fn hexagonal(a: f64) -> Self {
        Self::new([a, 0.0], [0.5 * a, 0.5 * 3.0f64.sqrt() * a])
            .expect("hexagonal basis is nonsingular for a != 0")
    }

    /// Basis rotated counterclockwise by `degrees`.
    pub fn rotated(&self, degrees: f64) -> Self {
        let t = degrees.to_radians();
        let r = Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos());
        let a = r * self.a;
        Self::new([a[(0, 0)], a[(1, 0)]], [a[(0, 1)], a[(1, 1)]])
            .expect("rotation preserves invertibility")
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.a
    }

    pub fn inverse(&self) -> &Matrix2<f64> {
        &self.inv
    }

    /// `|det A|`, the unit-cell area in square Angstrom.
    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    /// Cartesian position of the lattice point with integer coordinates `n`.
    pub fn site(&self, n: [i64; 2]) -> Vector2<f64> {
        self.a * Vector2::new(n[0] as f64, n[1] as f64)
    }

    /// Cartesian point of fractional cell coordinates.
    pub fn from_frac(&self, frac: [f64; 2]) -> Vector2<f64> {
        self.a * Vector2::new(frac[0], frac[1])
    }
}

/// A lattice point: integer coordinates and their Cartesian embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SitePoint {
    pub n: [i64; 2],
    pub x: Vector2<f64>,
}

/// A point of the unit cell: Cartesian shift `b = A frac` with `frac in [0,1)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftVector {
    pub b: Vector2<f64>,
    pub frac: [f64; 2],
}

impl ShiftVector {
    /// The zero shift.
    pub fn zero() -> Self {
        Self {
            b: Vector2::zeros(),
            frac: [0.0, 0.0],
        }
    }
}

/// Uniform `n_disc x n_disc` grid of shifts over a unit cell.
#[derive(Debug, Clone)]
pub struct ShiftGrid {
    pub basis: LatticeBasis,
    pub n_disc: usize,
    pub points: Vec<ShiftVector>,
}

/// Result of a Fourier-mode average over lattice sites in a ball.
#[derive(Debug, Clone, Copy)]
pub struct FourierAverage {
    pub value: Complex64,
    /// Set when the phase per lattice step looks rational, i.e. the pair is
    /// (close to) commensurate and the average cannot decay.
    pub commensurate_warning: bool,
}

/// Enumerates all lattice points with `|A n| < r` (strict), in lexicographic
/// order of the integer coordinates.
pub fn sites_in_ball(basis: &LatticeBasis, r: f64) -> Result<Vec<SitePoint>> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be positive and finite, got {r}"
        )));
    }
    // |n_i| = |(A^-1 x)_i| <= r * ||row_i(A^-1)||, so a box of that half-width
    // contains every candidate.
    let inv = basis.inverse();
    let row0 = (inv[(0, 0)].powi(2) + inv[(0, 1)].powi(2)).sqrt();
    let row1 = (inv[(1, 0)].powi(2) + inv[(1, 1)].powi(2)).sqrt();
    let m0 = (r * row0).floor() as i64 + 1;
    let m1 = (r * row1).floor() as i64 + 1;

    let r2 = r * r;
    let mut sites = Vec::new();
    for n0 in -m0..=m0 {
        for n1 in -m1..=m1 {
            let x = basis.site([n0, n1]);
            // Compare on |x|^2 to avoid square-root rounding at the boundary.
            if x.norm_squared() < r2 {
                sites.push(SitePoint { n: [n0, n1], x });
            }
        }
    }
    Ok(sites)
}

/// Folds `u` into the unit cell: returns the shift with `b - u` a lattice
/// vector and fractional coordinates in `[0, 1)^2`.
pub fn modulate(basis: &LatticeBasis, u: Vector2<f64>) -> ShiftVector {
    let f = basis.inverse() * u;
    let frac = [wrap_unit(f[0]), wrap_unit(f[1])];
    ShiftVector {
        b: basis.from_frac(frac),
        frac,
    }
}

/// Fractional part in `[0, 1)`. Values within `1e-12` of the upper edge snap
/// to zero so lattice points fold exactly to the origin despite the rounding
/// in `A^-1 A n`.
fn wrap_unit(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 - 1e-12 {
        0.0
    } else {
        f
    }
}

/// Uniform shift grid with points `A (i1/n_disc, i2/n_disc)`, `0 <= i < n_disc`.
pub fn shift_grid(basis: &LatticeBasis, n_disc: usize) -> Result<ShiftGrid> {
    if n_disc == 0 {
        return Err(Error::InvalidParameter(
            "shift grid requires n_disc >= 1".into(),
        ));
    }
    let nd = n_disc as f64;
    let mut points = Vec::with_capacity(n_disc * n_disc);
    for i1 in 0..n_disc {
        for i2 in 0..n_disc {
            let frac = [i1 as f64 / nd, i2 as f64 / nd];
            points.push(ShiftVector {
                b: basis.from_frac(frac),
                frac,
            });
        }
    }
    Ok(ShiftGrid {
        basis: basis.clone(),
        n_disc,
        points,
    })
}

/// Average of the Fourier mode `exp(2 pi i m . A_other^-1 x)` over the sites
/// of `basis_self` inside the open ball of radius `r`.
///
/// For incommensurate pairs and `m != 0` the average decays like `O(1/r)`;
/// for `m = 0` it is exactly one. A commensurability warning is attached when
/// the phase advance per lattice step is rational within `1e-9` (denominators
/// up to `10^6`); the value is still computed.
pub fn fourier_mode_average(
    basis_self: &LatticeBasis,
    basis_other: &LatticeBasis,
    m: [i64; 2],
    r: f64,
) -> Result<FourierAverage> {
    if m == [0, 0] {
        return Ok(FourierAverage {
            value: Complex64::new(1.0, 0.0),
            commensurate_warning: false,
        });
    }
    // Phase advance per unit step of each integer coordinate: m^T A_other^-1 A_self.
    let mv = Vector2::new(m[0] as f64, m[1] as f64);
    let w = (basis_other.inverse() * basis_self.matrix()).transpose() * mv;
    let commensurate_warning =
        is_near_rational(w[0], 1_000_000, 1e-9) && is_near_rational(w[1], 1_000_000, 1e-9);

    let sites = sites_in_ball(basis_self, r)?;
    if sites.is_empty() {
        return Err(Error::InsufficientSample { found: 0, need: 1 });
    }
    let inv_other = basis_other.inverse();
    let mut sum = Complex64::new(0.0, 0.0);
    for s in &sites {
        let f = inv_other * s.x;
        let phase = 2.0 * std::f64::consts::PI * (mv[0] * f[0] + mv[1] * f[1]);
        sum += Complex64::from_polar(1.0, phase);
    }
    Ok(FourierAverage {
        value: sum / sites.len() as f64,
        commensurate_warning,
    })
}

/// Best-rational-approximation test via continued-fraction convergents.
///
/// `x` counts as rational when some convergent `p/q` with `q <= max_den`
/// satisfies `|x - p/q| <= tol / q^2`. The `1/q^2` normalization is needed to
/// discriminate at all: by Dirichlet's theorem every real sits within
/// `1/q^2 <= tol` of some fraction once `q` may reach `sqrt(1/tol)`, so a
/// flat tolerance would flag everything.
fn is_near_rational(x: f64, max_den: u64, tol: f64) -> bool {
    if !x.is_finite() {
        return false;
    }
    let target = x.abs();
    let (mut h0, mut k0) = (1_i128, 0_i128);
    let (mut h1, mut k1) = (target.floor() as i128, 1_i128);
    let mut a = target - target.floor();
    for _ in 0..64 {
        let q = k1 as f64;
        if (target - h1 as f64 / q).abs() <= tol / (q * q) {
            return true;
        }
        if a < 1e-18 {
            break;
        }
        let inv = 1.0 / a;
        let ai = inv.floor();
        if !ai.is_finite() || ai >= 1e18 {
            break;
        }
        let (h2, k2) = (ai as i128 * h1 + h0, ai as i128 * k1 + k0);
        if k2 < 0 || k2 as u128 > max_den as u128 {
            break;
        }
        (h0, k0, h1, k1) = (h1, k1, h2, k2);
        a = inv - ai;
    }
    false
}

/// Sup over a fixed 16x16 bin grid on the unit cell of `basis_other` of the
/// deviation between the empirical fraction of folded sites of `basis_self`
/// and the uniform bin fraction `1/256`.
pub fn equidistribution_discrepancy(
    basis_self: &LatticeBasis,
    basis_other: &LatticeBasis,
    r: f64,
) -> Result<f64> {
    let sites = sites_in_ball(basis_self, r)?;
    if sites.len() < DISCREPANCY_MIN_SITES {
        return Err(Error::InsufficientSample {
            found: sites.len(),
            need: DISCREPANCY_MIN_SITES,
        });
    }
    let fracs = sites.iter().map(|s| modulate(basis_other, s.x).frac);
    Ok(discrepancy_of_fracs(fracs, sites.len()))
}

/// Binned discrepancy of a stream of fractional coordinates.
fn discrepancy_of_fracs(fracs: impl Iterator<Item = [f64; 2]>, count: usize) -> f64 {
    let nb = DISCREPANCY_BINS;
    let mut hist = vec![0usize; nb * nb];
    for f in fracs {
        let i = ((f[0] * nb as f64) as usize).min(nb - 1);
        let j = ((f[1] * nb as f64) as usize).min(nb - 1);
        hist[i * nb + j] += 1;
    }
    let uniform = 1.0 / (nb * nb) as f64;
    hist.iter()
        .map(|&c| (c as f64 / count as f64 - uniform).abs())
        .fold(0.0, f64::max)
}
