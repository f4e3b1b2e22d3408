//! Finite-cluster Hamiltonians.
//!
//! `assemble` builds the sparse symmetric matrix of a cluster of radius `r`
//! around the origin, with sheet `P_j` displaced by the relative shift `b`:
//!
//! `[H]_{R alpha, R' alpha'} = h(b (d_a - d_a') + (R + tau) - (R' + tau'))`
//!
//! where `d` marks orbitals on the shifted sheet. Degrees of freedom are
//! ordered sheet 1 sites (lexicographic) x orbitals, then sheet 2, so runs
//! are reproducible. Entries below `1e-14 eV` are dropped; the matrix is
//! stored with machine-exact symmetry.

use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{modulate, sites_in_ball, ShiftVector, SitePoint};
use crate::model::{spectral_bound, OrbitalId, Sheet, SpectralWindow, TBModel};

/// Entries with magnitude below this are not stored.
pub const ENTRY_DROP_TOLERANCE: f64 = 1e-14;

/// Largest residual `|h(k,l) - h(l,k)|` tolerated before symmetrization.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

/// Largest dimension accepted by dense conversions.
pub const DENSE_LIMIT: usize = 4000;

/// One degree of freedom: a lattice site plus an orbital index on its sheet.
#[derive(Debug, Clone, Copy)]
pub struct DofIndex {
    pub site: SitePoint,
    pub sheet: Sheet,
    /// Index into the sheet's orbital list.
    pub orbital: u32,
    /// Position in the matrix ordering.
    pub flat: usize,
}

/// Sparse symmetric cluster Hamiltonian over the ball of radius `r`.
#[derive(Debug, Clone)]
pub struct ClusterHamiltonian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    dofs: Vec<DofIndex>,
    /// Flat index of the center DOF `(0, alpha)` per sheet and orbital.
    center: [Vec<usize>; 2],
    orbital_ids: [Vec<OrbitalId>; 2],
    pub r: f64,
    pub j: Sheet,
    /// Relative shift of sheet `P_j`, as passed in (not folded): the matrix
    /// is defined for any Cartesian `b` and is lattice-periodic in it.
    pub b: Vector2<f64>,
    pub window: SpectralWindow,
}

struct SheetIndex {
    sites: Vec<SitePoint>,
    min: [i64; 2],
    dims: [usize; 2],
    /// Site ordinal per integer coordinate, `usize::MAX` for vacancies.
    grid: Vec<usize>,
}

impl SheetIndex {
    fn build(sites: Vec<SitePoint>) -> Self {
        if sites.is_empty() {
            return Self {
                sites,
                min: [0, 0],
                dims: [0, 0],
                grid: Vec::new(),
            };
        }
        let mut min = [i64::MAX, i64::MAX];
        let mut max = [i64::MIN, i64::MIN];
        for s in &sites {
            for k in 0..2 {
                min[k] = min[k].min(s.n[k]);
                max[k] = max[k].max(s.n[k]);
            }
        }
        let dims = [
            (max[0] - min[0] + 1) as usize,
            (max[1] - min[1] + 1) as usize,
        ];
        let mut grid = vec![usize::MAX; dims[0] * dims[1]];
        for (i, s) in sites.iter().enumerate() {
            let gx = (s.n[0] - min[0]) as usize;
            let gy = (s.n[1] - min[1]) as usize;
            grid[gx * dims[1] + gy] = i;
        }
        Self {
            sites,
            min,
            dims,
            grid,
        }
    }

    fn lookup(&self, n: [i64; 2]) -> Option<usize> {
        let gx = n[0].checked_sub(self.min[0])?;
        let gy = n[1].checked_sub(self.min[1])?;
        if gx < 0 || gy < 0 || gx as usize >= self.dims[0] || gy as usize >= self.dims[1] {
            return None;
        }
        let i = self.grid[gx as usize * self.dims[1] + gy as usize];
        (i != usize::MAX).then_some(i)
    }
}

/// Assembles the cluster Hamiltonian `H_{r,j}(b)` for `model`.
///
/// `b` is the Cartesian shift applied to sheet `P_j`; quadrature callers pass
/// points of the unit cell, but any shift is accepted since the matrix is
/// periodic in `b` up to a column relabeling.
pub fn assemble(model: &TBModel, r: f64, j: Sheet, b: Vector2<f64>) -> Result<ClusterHamiltonian> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cluster radius must be positive, got {r}"
        )));
    }
    let window = spectral_bound(model)?;
    let pj = j.other();

    let sheets = [
        SheetIndex::build(if model.orbitals(Sheet::One).is_empty() {
            Vec::new()
        } else {
            sites_in_ball(&model.lattice1, r)?
        }),
        SheetIndex::build(if model.orbitals(Sheet::Two).is_empty() {
            Vec::new()
        } else {
            sites_in_ball(&model.lattice2, r)?
        }),
    ];
    let n_orb = [
        model.orbitals(Sheet::One).len(),
        model.orbitals(Sheet::Two).len(),
    ];
    let n = sheets[0].sites.len() * n_orb[0] + sheets[1].sites.len() * n_orb[1];
    if n == 0 {
        return Err(Error::InvalidParameter(
            "empty cluster: no sites with orbitals inside the ball".into(),
        ));
    }

    // Flat ordering: sheet 1 sites x orbitals, then sheet 2.
    let sheet_base = [0usize, sheets[0].sites.len() * n_orb[0]];
    let mut dofs = Vec::with_capacity(n);
    let mut center: [Vec<usize>; 2] = [vec![usize::MAX; n_orb[0]], vec![usize::MAX; n_orb[1]]];
    for sheet in Sheet::BOTH {
        let si = sheet.index();
        for (s_ord, site) in sheets[si].sites.iter().enumerate() {
            for o in 0..n_orb[si] {
                let flat = sheet_base[si] + s_ord * n_orb[si] + o;
                dofs.push(DofIndex {
                    site: *site,
                    sheet,
                    orbital: o as u32,
                    flat,
                });
            }
            if site.n == [0, 0] {
                for (o, slot) in center[si].iter_mut().enumerate() {
                    *slot = sheet_base[si] + s_ord * n_orb[si] + o;
                }
            }
        }
    }

    // The shift enters a DOF's physical position exactly when its sheet is P_j.
    let b_for = |sheet: Sheet| -> Vector2<f64> {
        if sheet == pj {
            b
        } else {
            Vector2::zeros()
        }
    };

    // Candidate cell offsets per (row sheet, column sheet): every integer
    // offset whose lattice displacement can reach within the hopping cutoff,
    // padded by the orbital offsets, the shift and one cell diagonal.
    let cutoff = model.hopping.cutoff_radius;
    let pad = 2.0 * model.max_tau() + b.norm() + 1.0;
    let mut stencils: Vec<Vec<[i64; 2]>> = Vec::with_capacity(4);
    for row_sheet in Sheet::BOTH {
        for col_sheet in Sheet::BOTH {
            if model.orbitals(row_sheet).is_empty() || model.orbitals(col_sheet).is_empty() {
                stencils.push(Vec::new());
                continue;
            }
            let cell_diag = {
                let m = model.lattice(col_sheet).matrix();
                (m.column(0) + m.column(1))
                    .norm()
                    .max((m.column(0) - m.column(1)).norm())
            };
            let reach = cutoff + pad + cell_diag;
            let offsets: Vec<[i64; 2]> = sites_in_ball(model.lattice(col_sheet), reach)?
                .into_iter()
                .map(|s| s.n)
                .collect();
            stencils.push(offsets);
        }
    }

    let hopping = &model.hopping;
    let orbitals = [model.orbitals(Sheet::One), model.orbitals(Sheet::Two)];

    // Rows are independent; each is generated, checked for Hermitian
    // consistency against its mirror entry and sorted by column.
    let rows: Vec<Result<Vec<(u32, f64)>>> = dofs
        .par_iter()
        .map(|dof| {
            let row_sheet = dof.sheet;
            let ri = row_sheet.index();
            let orb_row = &orbitals[ri][dof.orbital as usize];
            let pos_row = dof.site.x + orb_row.tau + b_for(row_sheet);
            let mut entries: Vec<(u32, f64)> = Vec::with_capacity(64);

            for col_sheet in Sheet::BOTH {
                let ci = col_sheet.index();
                if sheets[ci].sites.is_empty() {
                    continue;
                }
                let stencil = &stencils[ri * 2 + ci];
                // Center the stencil on the cell nearest the row position.
                let fc = model.lattice(col_sheet).inverse() * (pos_row - b_for(col_sheet));
                let nc = [fc[0].round() as i64, fc[1].round() as i64];
                for off in stencil {
                    let ncol = [nc[0] + off[0], nc[1] + off[1]];
                    let Some(s_ord) = sheets[ci].lookup(ncol) else {
                        continue;
                    };
                    let site_col = &sheets[ci].sites[s_ord];
                    for (o, orb_col) in orbitals[ci].iter().enumerate() {
                        let flat_col = sheet_base[ci] + s_ord * n_orb[ci] + o;
                        let pos_col = site_col.x + orb_col.tau + b_for(col_sheet);
                        let x = pos_row - pos_col;
                        let v1 = if flat_col == dof.flat {
                            orb_row.onsite
                        } else {
                            hopping.eval(orb_row, orb_col, x)
                        };
                        let v2 = if flat_col == dof.flat {
                            orb_row.onsite
                        } else {
                            hopping.eval(orb_col, orb_row, -x)
                        };
                        if (v1 - v2).abs() > HERMITICITY_TOLERANCE {
                            return Err(Error::ModelInconsistency(format!(
                                "h({},{}) = {v1:.12e} but h({},{}) = {v2:.12e} at |x| = {:.6}",
                                orb_row.id,
                                orb_col.id,
                                orb_col.id,
                                orb_row.id,
                                x.norm()
                            )));
                        }
                        let v = 0.5 * (v1 + v2);
                        if v.abs() >= ENTRY_DROP_TOLERANCE {
                            entries.push((flat_col as u32, v));
                        }
                    }
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            Ok(entries)
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    let nnz = rows.iter().map(|r| r.as_ref().map_or(0, Vec::len)).sum();
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    for row in rows {
        let es = row?;
        for (c, v) in es {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }

    Ok(ClusterHamiltonian {
        n,
        row_ptr,
        cols,
        vals,
        dofs,
        center,
        orbital_ids: [
            orbitals[0].iter().map(|o| o.id.clone()).collect(),
            orbitals[1].iter().map(|o| o.id.clone()).collect(),
        ],
        r,
        j,
        b,
        window,
    })
}

impl ClusterHamiltonian {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn dofs(&self) -> &[DofIndex] {
        &self.dofs
    }

    /// The shift folded into the unit cell of sheet `P_j` of `model`.
    pub fn shift_vector(&self, model: &TBModel) -> ShiftVector {
        modulate(model.lattice(self.j.other()), self.b)
    }

    /// Flat index of the center DOF `(0, alpha)` for an orbital of sheet `j`.
    pub fn center_dof(&self, sheet: Sheet, orbital: usize) -> Result<usize> {
        let c = self
            .center
            .get(sheet.index())
            .and_then(|v| v.get(orbital))
            .copied()
            .unwrap_or(usize::MAX);
        if c == usize::MAX {
            return Err(Error::MissingCenterDof(format!(
                "sheet {} orbital index {orbital}",
                sheet
            )));
        }
        Ok(c)
    }

    /// Flat index of the center DOF for an orbital id.
    pub fn center_dof_by_id(&self, id: &str) -> Result<usize> {
        for sheet in Sheet::BOTH {
            if let Some(o) = self.orbital_ids[sheet.index()]
                .iter()
                .position(|oid| oid.as_str() == id)
            {
                return self.center_dof(sheet, o);
            }
        }
        Err(Error::MissingCenterDof(format!("orbital id '{id}'")))
    }

    pub fn orbital_id(&self, dof: &DofIndex) -> &OrbitalId {
        &self.orbital_ids[dof.sheet.index()][dof.orbital as usize]
    }

    /// Row dot product against `v`.
    #[inline]
    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let mut acc = 0.0;
        for (c, x) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
            acc += x * v[*c as usize];
        }
        acc
    }

    /// `out = s * H * v`.
    pub fn scaled_matvec(&self, s: f64, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = s * self.row_dot(i, v);
        }
    }

    /// Fused Chebyshev step: `prev[i] <- two_eta * (H v)[i] - prev[i]`.
    pub fn chebyshev_step(&self, two_eta: f64, v: &[f64], prev: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(prev.len(), self.n);
        for (i, slot) in prev.iter_mut().enumerate() {
            *slot = two_eta * self.row_dot(i, v) - *slot;
        }
    }

    /// `H v` for a real vector.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        self.scaled_matvec(1.0, v, &mut out);
        Ok(out)
    }

    /// `H v` for a complex vector (real matrix applied to both parts).
    pub fn matvec_complex(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, slot) in out.iter_mut().enumerate() {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, x) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                acc += x * v[*c as usize];
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Dense copy of the sparse matrix; refuses above [`DENSE_LIMIT`].
    pub fn dense_form(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::SizeExceeded {
                n: self.n,
                limit: DENSE_LIMIT,
            });
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k] as usize)] = self.vals[k];
            }
        }
        Ok(m)
    }

    /// Iterates stored entries as `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.cols[k] as usize, self.vals[k]))
        })
    }

    /// One row's entries as `(col, value)` pairs.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LatticeBasis;
    use crate::model::{builtin_model, HoppingFunction, Orbital, OrbitalSet, SPECTRAL_SAFETY};
    use std::collections::BTreeMap;

    const A: f64 = 2.46;

    fn tbg(twist: f64) -> TBModel {
        let mut p = BTreeMap::new();
        p.insert("twist_degrees".to_string(), twist);
        builtin_model("tbg", &p).unwrap()
    }

    fn diagonal_model(onsite: f64) -> TBModel {
        let basis = LatticeBasis::hexagonal(A);
        TBModel::new(
            basis.clone(),
            basis.clone(),
            OrbitalSet::new(
                Sheet::One,
                vec![Orbital {
                    id: OrbitalId::new("d"),
                    sheet: Sheet::One,
                    tau: Vector2::zeros(),
                    onsite,
                }],
            ),
            OrbitalSet::new(Sheet::Two, Vec::new()),
            HoppingFunction::zero(8.0),
            "diagonal",
        )
        .unwrap()
    }

    #[test]
    fn diagonal_model_assembles_identity_scale() {
        let model = diagonal_model(2.0);
        let h = assemble(&model, 3.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        let sites = sites_in_ball(&model.lattice1, 3.0 * A).unwrap().len();
        assert_eq!(h.dim(), sites);
        assert_eq!(h.nnz(), sites);
        for (i, j, v) in h.entries() {
            assert_eq!(i, j);
            assert_eq!(v, 2.0);
        }
    }

    #[test]
    fn dimension_matches_geometry_oracle() {
        let model = tbg(6.0);
        let r = 3.0 * A;
        let h = assemble(&model, r, Sheet::One, Vector2::zeros()).unwrap();
        let c1 = sites_in_ball(&model.lattice1, r).unwrap().len();
        let c2 = sites_in_ball(&model.lattice2, r).unwrap().len();
        assert_eq!(h.dim(), 2 * c1 + 2 * c2);
    }

    #[test]
    fn matrix_is_exactly_symmetric() {
        let model = tbg(6.0);
        let b = model.lattice2.from_frac([0.3, 0.7]);
        let h = assemble(&model, 4.0 * A, Sheet::One, b).unwrap();
        let d = h.dense_form().unwrap();
        let residual = (&d - d.transpose()).abs().max();
        assert_eq!(residual, 0.0, "stored matrix must be exactly symmetric");
    }

    #[test]
    fn entries_respect_cutoff() {
        let model = tbg(6.0);
        let b = model.lattice2.from_frac([0.15, 0.85]);
        let h = assemble(&model, 4.0 * A, Sheet::Two, b).unwrap();
        let pj = Sheet::Two.other();
        for (i, jcol, _v) in h.entries() {
            let di = &h.dofs()[i];
            let dj = &h.dofs()[jcol];
            let oi = &model.orbitals(di.sheet)[di.orbital as usize];
            let oj = &model.orbitals(dj.sheet)[dj.orbital as usize];
            let shift = |s: Sheet| if s == pj { b } else { Vector2::zeros() };
            let x = (di.site.x + oi.tau + shift(di.sheet)) - (dj.site.x + oj.tau + shift(dj.sheet));
            assert!(
                x.norm() <= model.hopping.cutoff_radius + 1e-12,
                "stored entry beyond cutoff: |x| = {}",
                x.norm()
            );
        }
    }

    #[test]
    fn sparsity_bounded_by_neighbor_cap() {
        let model = tbg(6.0);
        let h = assemble(&model, 5.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        // Per-row cap: cells of either sheet within cutoff plus padding,
        // times orbitals per cell.
        let reach = model.hopping.cutoff_radius + 2.0 * model.max_tau() + 1.0;
        let mut cap = 0;
        for s in Sheet::BOTH {
            let cells = sites_in_ball(model.lattice(s), reach).unwrap().len();
            cap += cells * model.orbitals(s).len();
        }
        assert!(
            h.nnz() <= h.dim() * cap,
            "nnz = {} exceeds n * cap = {}",
            h.nnz(),
            h.dim() * cap
        );
    }

    #[test]
    fn assembly_matches_brute_force_small_cluster() {
        // Independent O(n^2) assembly oracle.
        let model = tbg(6.0);
        let r = 2.5 * A;
        let b = model.lattice2.from_frac([0.4, 0.1]);
        let h = assemble(&model, r, Sheet::One, b).unwrap();
        let d = h.dense_form().unwrap();
        let pj = Sheet::One.other();
        let n = h.dim();
        for i in 0..n {
            for jc in 0..n {
                let di = &h.dofs()[i];
                let dj = &h.dofs()[jc];
                let oi = &model.orbitals(di.sheet)[di.orbital as usize];
                let oj = &model.orbitals(dj.sheet)[dj.orbital as usize];
                let shift = |s: Sheet| if s == pj { b } else { Vector2::zeros() };
                let x =
                    (di.site.x + oi.tau + shift(di.sheet)) - (dj.site.x + oj.tau + shift(dj.sheet));
                let expect = if i == jc {
                    oi.onsite
                } else {
                    model.hopping.eval(oi, oj, x)
                };
                let got = d[(i, jc)];
                assert!(
                    (got - expect).abs() < 1e-12,
                    "entry ({i},{jc}): got {got}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn matvec_identities() {
        let model = tbg(6.0);
        let h = assemble(&model, 3.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        let zero = vec![0.0; h.dim()];
        assert_eq!(h.matvec(&zero).unwrap(), zero);

        let model = diagonal_model(1.5);
        let h = assemble(&model, 3.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        let v: Vec<f64> = (0..h.dim()).map(|i| (i as f64).sin()).collect();
        let hv = h.matvec(&v).unwrap();
        for (x, y) in v.iter().zip(hv.iter()) {
            assert_eq!(1.5 * x, *y);
        }

        let err = h.matvec(&vec![0.0; h.dim() + 1]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn matvec_agrees_with_dense() {
        let model = tbg(6.0);
        let b = model.lattice2.from_frac([0.6, 0.2]);
        let h = assemble(&model, 3.0 * A, Sheet::One, b).unwrap();
        let d = h.dense_form().unwrap();
        let v: Vec<f64> = (0..h.dim())
            .map(|i| ((i * 37 % 17) as f64 - 8.0) / 8.0)
            .collect();
        let hv = h.matvec(&v).unwrap();
        let dv = &d * DMatrix::from_column_slice(h.dim(), 1, &v);
        for i in 0..h.dim() {
            assert!((hv[i] - dv[(i, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_complex_matches_real_parts() {
        let model = tbg(6.0);
        let h = assemble(&model, 2.5 * A, Sheet::One, Vector2::zeros()).unwrap();
        let vr: Vec<f64> = (0..h.dim()).map(|i| (i as f64 * 0.1).cos()).collect();
        let vi: Vec<f64> = (0..h.dim()).map(|i| (i as f64 * 0.2).sin()).collect();
        let vc: Vec<Complex64> = vr
            .iter()
            .zip(vi.iter())
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        let hr = h.matvec(&vr).unwrap();
        let hi = h.matvec(&vi).unwrap();
        let hc = h.matvec_complex(&vc).unwrap();
        for i in 0..h.dim() {
            assert_eq!(hc[i].re, hr[i]);
            assert_eq!(hc[i].im, hi[i]);
        }
    }

    #[test]
    fn dense_form_round_trip_and_size_guard() {
        let model = diagonal_model(3.0);
        let h = assemble(&model, 2.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        let d = h.dense_form().unwrap();
        for (i, jc, v) in h.entries() {
            assert_eq!(d[(i, jc)], v);
        }
        // 1x1 case.
        let h1 = assemble(&model, 0.5 * A, Sheet::One, Vector2::zeros()).unwrap();
        assert_eq!(h1.dim(), 1);
        assert_eq!(h1.dense_form().unwrap()[(0, 0)], 3.0);

        let big = assemble(&tbg(6.0), 18.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        assert!(big.dim() > DENSE_LIMIT);
        assert!(matches!(big.dense_form(), Err(Error::SizeExceeded { .. })));
    }

    #[test]
    fn center_dofs_locatable() {
        let model = tbg(6.0);
        let h = assemble(&model, 3.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        for sheet in Sheet::BOTH {
            for o in 0..2 {
                let flat = h.center_dof(sheet, o).unwrap();
                let dof = &h.dofs()[flat];
                assert_eq!(dof.site.n, [0, 0]);
                assert_eq!(dof.orbital as usize, o);
                assert_eq!(dof.sheet, sheet);
            }
        }
        let id_flat = h.center_dof_by_id("2B").unwrap();
        assert_eq!(id_flat, h.center_dof(Sheet::Two, 1).unwrap());
        assert!(h.center_dof_by_id("9X").is_err());
    }

    #[test]
    fn shift_equivariance_of_center_rows() {
        // Columns relabel by the lattice translation when b moves by a
        // lattice vector of the shifted sheet.
        let model = tbg(6.0);
        let r = 6.0 * A;
        let j = Sheet::One;
        let pj = j.other();
        let t = model.lattice(pj).site([1, 0]);
        let h0 = assemble(&model, r, j, Vector2::zeros()).unwrap();
        let h1 = assemble(&model, r, j, t).unwrap();

        for o in 0..model.orbitals(j).len() {
            let c = h0.center_dof(j, o).unwrap();
            assert_eq!(c, h1.center_dof(j, o).unwrap());
            // Index rows of both matrices by column DOF identity.
            let row0: std::collections::BTreeMap<(u8, [i64; 2], u32), f64> = h0
                .row_entries(c)
                .map(|(col, v)| {
                    let d = &h0.dofs()[col as usize];
                    ((d.sheet.number(), d.site.n, d.orbital), v)
                })
                .collect();
            let mut compared = 0;
            for (col, v1) in h1.row_entries(c) {
                let d = &h1.dofs()[col as usize];
                // Sheet P_j columns relabel R -> R + A t; sheet j columns map
                // identically.
                let key = if d.sheet == pj {
                    (d.sheet.number(), [d.site.n[0] + 1, d.site.n[1]], d.orbital)
                } else {
                    (d.sheet.number(), d.site.n, d.orbital)
                };
                if let Some(v0) = row0.get(&key) {
                    assert!(
                        (v0 - v1).abs() < 1e-12,
                        "center-row entry differs after relabeling: {v0} vs {v1}"
                    );
                    compared += 1;
                }
            }
            assert!(compared > 3, "relabeling test compared too few entries");
        }
    }

    #[test]
    fn decoupled_sheets_block_diagonal() {
        let mut p = BTreeMap::new();
        p.insert("twist_degrees".to_string(), 6.0);
        p.insert("t_perp".to_string(), 0.0);
        let model = builtin_model("tbg", &p).unwrap();
        let h = assemble(&model, 3.0 * A, Sheet::One, Vector2::zeros()).unwrap();
        for (i, jc, _v) in h.entries() {
            assert_eq!(
                h.dofs()[i].sheet,
                h.dofs()[jc].sheet,
                "cross-sheet entry in a decoupled model"
            );
        }
    }

    #[test]
    fn eigenvalues_within_spectral_bound() {
        let model = tbg(6.0);
        let mut worst: f64 = 0.0;
        for (k, fr) in [[0.0, 0.0], [0.3, 0.6], [0.8, 0.2], [0.5, 0.5], [0.9, 0.9]]
            .iter()
            .enumerate()
        {
            let b = model.lattice2.from_frac(*fr);
            let r = (2.0 + 0.4 * k as f64) * A;
            let h = assemble(&model, r, Sheet::One, b).unwrap();
            let d = h.dense_form().unwrap();
            let eig = d.symmetric_eigen();
            for ev in eig.eigenvalues.iter() {
                worst = worst.max(ev.abs());
                assert!(
                    ev.abs() <= h.window.e_bound,
                    "eigenvalue {ev} outside [-{0}, {0}]",
                    h.window.e_bound
                );
            }
        }
        // Sanity: bound not wildly loose either (within safety * Gershgorin).
        assert!(worst > 5.0);
    }

    #[test]
    fn hermiticity_violation_detected() {
        let basis = LatticeBasis::hexagonal(A);
        let model = TBModel::new(
            basis.clone(),
            basis.clone(),
            OrbitalSet::new(
                Sheet::One,
                vec![
                    Orbital {
                        id: OrbitalId::new("a"),
                        sheet: Sheet::One,
                        tau: Vector2::zeros(),
                        onsite: 0.0,
                    },
                    Orbital {
                        id: OrbitalId::new("b"),
                        sheet: Sheet::One,
                        tau: basis.from_frac([1.0 / 3.0, 1.0 / 3.0]),
                        onsite: 0.0,
                    },
                ],
            ),
            OrbitalSet::new(Sheet::Two, Vec::new()),
            // Asymmetric in x: h(a,b,x) != h(b,a,-x).
            HoppingFunction::custom(|_, _, x| if x[0] > 0.0 { 1.0 } else { 0.5 }, 2.0, 0.5, 8.0),
            "broken",
        )
        .unwrap();
        let err = assemble(&model, 2.0 * A, Sheet::One, Vector2::zeros()).unwrap_err();
        assert!(matches!(err, Error::ModelInconsistency(_)));
    }

    #[test]
    fn empty_cluster_rejected() {
        let model = diagonal_model(1.0);
        let err = assemble(&model, -1.0, Sheet::One, Vector2::zeros()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn spectral_bound_dominates_dense_norm_many_random() {
        let model = tbg(6.0);
        let w = spectral_bound(&model).unwrap();
        let mut seed = 12345u64;
        let mut rand_unit = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for k in 0..20 {
            let fr = [rand_unit(), rand_unit()];
            let r = (1.5 + (k as f64 % 5.0)) * A;
            let b = model.lattice2.from_frac(fr);
            let h = assemble(&model, r, Sheet::One, b).unwrap();
            if h.dim() > DENSE_LIMIT {
                continue;
            }
            let d = h.dense_form().unwrap();
            let eig = d.symmetric_eigen();
            let norm = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            assert!(
                norm <= w.e_bound,
                "||H|| = {norm} exceeds e_bound = {}",
                w.e_bound
            );
            // Safety margin leaves the scaled spectrum strictly inside (-1, 1).
            assert!(norm * w.eta <= 1.0 / SPECTRAL_SAFETY + 1e-12);
        }
    }
}
