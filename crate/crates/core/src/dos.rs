//! Total density of states via shift-grid quadrature, plus observables and
//! the convergence harnesses.
//!
//! The total DoS combines the per-configuration LDoS curves through the
//! representation formula: with `nu = 1/(|A_2||Gamma_1| + |A_1||Gamma_2|)`,
//!
//! `D(eps) = nu * sum_j |Gamma_{P_j}| * sum_{alpha in A_j} mean_{b in S_{P_j}} ldos_{j,alpha,b}(eps)`
//!
//! where the mean runs over the uniform `n_disc^2` shift grid of the opposite
//! sheet's cell. Summation order is fixed (sheet, orbital, shift, moment) with
//! pairwise reductions per axis, so identical inputs give bit-identical
//! curves regardless of the worker-pool size: items are computed in parallel
//! but gathered and reduced in grid order.

use std::sync::Arc;

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{shift_grid, ShiftGrid, ShiftVector};
use crate::hamiltonian::assemble;
use crate::kpm::{chebyshev_moments, jackson_coefficients, reconstruct, LdosSample};
use crate::model::{spectral_bound, OrbitalId, Sheet, SpectralWindow, TBModel};
use crate::numerics::{linear_fit, pairwise_sum_curves, trapezoid};

/// Fraction of the scaled spectral window covered by the default energy grid.
pub const DEFAULT_GRID_SPAN: f64 = 0.98;

/// Number of points of the default energy grid.
pub const DEFAULT_GRID_POINTS: usize = 401;

/// Provenance of a DoS curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DosParams {
    pub r: f64,
    pub p: usize,
    pub n_disc: usize,
    pub eta: f64,
    pub model_label: String,
}

/// Sampled total density of states.
#[derive(Debug, Clone)]
pub struct DosCurve {
    /// Energies in eV.
    pub epsilons: Vec<f64>,
    /// Densities in 1/eV.
    pub values: Vec<f64>,
    /// Normalization constant in 1/Angstrom^2.
    pub nu: f64,
    pub params: DosParams,
}

/// Test functions integrated against the DoS.
#[derive(Clone)]
pub enum Observable {
    /// `eps * fermi(eps)`: the band-energy integrand.
    FermiEnergyWeighted {
        mu: f64,
        kt: f64,
    },
    /// Step `eps <= mu`: electron count below the chemical potential.
    Indicator {
        mu: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Observable {
    pub fn evaluate(&self, eps: f64) -> f64 {
        match self {
            Observable::FermiEnergyWeighted { mu, kt } => eps / (1.0 + ((eps - mu) / kt).exp()),
            Observable::Indicator { mu } => {
                if eps <= *mu {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Custom(f) => f(eps),
        }
    }
}

/// How a convergence study varies its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceAxis {
    /// Cluster radius at fixed kernel order.
    Radius,
    /// Kernel order with radius and shift grid coupled to it.
    CoupledOrder,
    /// Shift-grid resolution at fixed radius and order.
    ShiftGrid,
}

/// Where the fitted slope of a coupled study lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateClass {
    /// Slope steeper than -1.5: consistent with the C^2 pointwise rate p^-2.
    QuadraticPointwise,
    /// Slope in [-1.5, -0.5]: consistent with the Lipschitz rate p^-1.
    LipschitzPointwise,
    Unclassified,
}

/// One error sample of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceSample {
    pub parameter: f64,
    pub error: f64,
}

/// Convergence study output: per-parameter errors against a self-computed
/// reference, with a least-squares slope of the appropriate log transform.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub axis: ConvergenceAxis,
    pub samples: Vec<ConvergenceSample>,
    /// Slope of log(error) against the axis coordinate (radius, log p, or
    /// n_disc). NaN when fewer than four nonzero errors exist.
    pub fitted_slope: f64,
    pub r_squared: f64,
    /// Description of the reference value.
    pub reference: String,
    /// Set when the reference magnitude was below 1e-12 and absolute errors
    /// were reported instead of relative ones.
    pub absolute_fallback: bool,
    /// Only set for the coupled study.
    pub rate_class: Option<RateClass>,
}

/// Uniform energy grid spanning `DEFAULT_GRID_SPAN` of the scaled window.
pub fn default_energy_grid(window: &SpectralWindow, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidParameter(
            "energy grid needs at least 2 points".into(),
        ));
    }
    let half = DEFAULT_GRID_SPAN / window.eta;
    Ok((0..count)
        .map(|i| -half + 2.0 * half * i as f64 / (count - 1) as f64)
        .collect())
}

/// Work shared by the DoS quadrature paths: the per-(sheet, alpha) shift-mean
/// LDoS curves, gathered in grid order and reduced pairwise.
fn sheet_mean_curves(
    model: &TBModel,
    r: f64,
    p: usize,
    n_disc: usize,
    epsilons: &[f64],
) -> Result<[Vec<Vec<f64>>; 2]> {
    let kernel = jackson_coefficients(p)?;

    // One work item per (sheet, shift); orbital recursions share the cluster.
    let mut items: Vec<(Sheet, ShiftVector)> = Vec::new();
    for j in Sheet::BOTH {
        if model.orbitals(j).is_empty() {
            continue;
        }
        let grid = shift_grid(model.lattice(j.other()), n_disc)?;
        for b in grid.points {
            items.push((j, b));
        }
    }

    let per_item: Vec<(Sheet, Vec<Vec<f64>>)> = items
        .par_iter()
        .map(|(j, b)| {
            let h = assemble(model, r, *j, b.b)?;
            let mut curves = Vec::with_capacity(model.orbitals(*j).len());
            for orb in model.orbitals(*j) {
                let moments = chebyshev_moments(&h, &orb.id, p)?;
                let samples = reconstruct(&moments, &kernel, epsilons)?;
                curves.push(samples.into_iter().map(|s| s.value).collect());
            }
            Ok((*j, curves))
        })
        .collect::<Result<Vec<_>>>()?;

    let nsq = (n_disc * n_disc) as f64;
    let mut result: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for j in Sheet::BOTH {
        let n_orb = model.orbitals(j).len();
        for o in 0..n_orb {
            // Gather this orbital's curves over the shift grid, in grid order.
            let curves: Vec<Vec<f64>> = per_item
                .iter()
                .filter(|(sheet, _)| *sheet == j)
                .map(|(_, per_orb)| per_orb[o].clone())
                .collect();
            let mut mean = pairwise_sum_curves(&curves);
            for v in &mut mean {
                *v /= nsq;
            }
            result[j.index()].push(mean);
        }
    }
    Ok(result)
}

/// Total density of states via the shift-grid quadrature.
pub fn total_dos(
    model: &TBModel,
    r: f64,
    p: usize,
    n_disc: usize,
    epsilons: &[f64],
) -> Result<DosCurve> {
    if n_disc == 0 {
        return Err(Error::InvalidParameter("n_disc must be >= 1".into()));
    }
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("empty energy grid".into()));
    }
    let window = spectral_bound(model)?;
    let per_sheet = sheet_mean_curves(model, r, p, n_disc, epsilons)?;

    let nu = model.nu();
    let mut values = vec![0.0; epsilons.len()];
    for j in Sheet::BOTH {
        let sheet_curves = &per_sheet[j.index()];
        if sheet_curves.is_empty() {
            continue;
        }
        let orbital_sum = pairwise_sum_curves(sheet_curves);
        let weight = model.lattice(j.other()).cell_area();
        for (acc, v) in values.iter_mut().zip(orbital_sum.iter()) {
            *acc += weight * v;
        }
    }
    for v in &mut values {
        *v *= nu;
    }

    Ok(DosCurve {
        epsilons: epsilons.to_vec(),
        values,
        nu,
        params: DosParams {
            r,
            p,
            n_disc,
            eta: window.eta,
            model_label: model.label.clone(),
        },
    })
}

/// Integrates `D(eps) g(eps)` over the curve's grid by trapezoid quadrature.
pub fn observable(curve: &DosCurve, obs: &Observable) -> Result<f64> {
    let gs: Vec<f64> = curve.epsilons.iter().map(|&e| obs.evaluate(e)).collect();
    if let Some((i, _)) = gs.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "observable not finite at eps = {}",
            curve.epsilons[i]
        )));
    }
    let integrand: Vec<f64> = curve
        .values
        .iter()
        .zip(gs.iter())
        .map(|(d, g)| d * g)
        .collect();
    Ok(trapezoid(&curve.epsilons, &integrand))
}

/// Per-shift LDoS curves: one entry per grid point.
pub type LdosField = Vec<(ShiftVector, Vec<LdosSample>)>;

/// Per-shift LDoS curves for one `(sheet, orbital)` over a shift grid.
#[allow(clippy::too_many_arguments)]
pub fn ldos_field(
    model: &TBModel,
    r: f64,
    p: usize,
    j: Sheet,
    alpha: &OrbitalId,
    grid: &ShiftGrid,
    epsilons: &[f64],
) -> Result<LdosField> {
    let kernel = jackson_coefficients(p)?;
    let out: Vec<Result<(ShiftVector, Vec<LdosSample>)>> = grid
        .points
        .par_iter()
        .map(|b| {
            let h = assemble(model, r, j, b.b)?;
            let moments = chebyshev_moments(&h, alpha, p)?;
            let samples = reconstruct(&moments, &kernel, epsilons)?;
            Ok((*b, samples))
        })
        .collect();
    out.into_iter().collect()
}

/// Relative-error fit of log(error) against the axis values.
fn fit_report(
    axis: ConvergenceAxis,
    xs_for_fit: &[f64],
    samples: Vec<ConvergenceSample>,
    reference: String,
    absolute_fallback: bool,
) -> ConvergenceReport {
    let mut fx = Vec::new();
    let mut fy = Vec::new();
    for (x, s) in xs_for_fit.iter().zip(samples.iter()) {
        if s.error > 0.0 && s.error.is_finite() {
            fx.push(*x);
            fy.push(s.error.ln());
        }
    }
    let (slope, _b, r2) = if fx.len() >= 4 {
        linear_fit(&fx, &fy)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let rate_class = match axis {
        ConvergenceAxis::CoupledOrder => Some(classify_rate(slope)),
        _ => None,
    };
    ConvergenceReport {
        axis,
        samples,
        fitted_slope: slope,
        r_squared: r2,
        reference,
        absolute_fallback,
        rate_class,
    }
}

/// Buckets a fitted log-log slope against the pointwise-rate predictions:
/// steeper than -1.5 is consistent with the C^2 rate p^-2, [-1.5, -0.5] with
/// the Lipschitz rate p^-1.
pub fn classify_rate(slope: f64) -> RateClass {
    if slope < -1.5 {
        RateClass::QuadraticPointwise
    } else if slope <= -0.5 {
        RateClass::LipschitzPointwise
    } else {
        RateClass::Unclassified
    }
}

/// Relative errors against `reference`, falling back to absolute errors (and
/// flagging it) when the reference magnitude sits below `1e-12`.
fn errors_against_reference(values: &[f64], reference: f64) -> (Vec<f64>, bool) {
    if reference.abs() < 1e-12 {
        (values.iter().map(|v| (v - reference).abs()).collect(), true)
    } else {
        (
            values
                .iter()
                .map(|v| (v - reference).abs() / reference.abs())
                .collect(),
            false,
        )
    }
}

/// Single-configuration LDoS value at one energy.
fn ldos_value_at(
    model: &TBModel,
    r: f64,
    p: usize,
    j: Sheet,
    alpha: &OrbitalId,
    b: Vector2<f64>,
    epsilon: f64,
) -> Result<f64> {
    let kernel = jackson_coefficients(p)?;
    let h = assemble(model, r, j, b)?;
    let moments = chebyshev_moments(&h, alpha, p)?;
    Ok(reconstruct(&moments, &kernel, &[epsilon])?[0].value)
}

/// Cluster-radius convergence of one LDoS configuration at fixed order.
///
/// The reference is a self-run at `1.5 x max(r_list)`; errors are relative
/// unless the reference value sits below `1e-12` in magnitude.
pub fn converge_r(
    model: &TBModel,
    p: usize,
    j: Sheet,
    alpha: &OrbitalId,
    b: Vector2<f64>,
    r_list: &[f64],
    epsilon: f64,
) -> Result<ConvergenceReport> {
    validate_increasing(r_list, 4, "r_list")?;
    let r_ref = 1.5 * r_list[r_list.len() - 1];

    let mut all_r: Vec<f64> = r_list.to_vec();
    all_r.push(r_ref);
    let values: Vec<f64> = all_r
        .par_iter()
        .map(|&r| ldos_value_at(model, r, p, j, alpha, b, epsilon))
        .collect::<Result<Vec<_>>>()?;

    let reference = values[values.len() - 1];
    let (errors, absolute_fallback) = errors_against_reference(&values[..r_list.len()], reference);
    let samples: Vec<ConvergenceSample> = r_list
        .iter()
        .zip(errors.iter())
        .map(|(&r, &e)| ConvergenceSample {
            parameter: r,
            error: e,
        })
        .collect();
    Ok(fit_report(
        ConvergenceAxis::Radius,
        r_list,
        samples,
        format!("LDoS self-run at r = {r_ref} (1.5 x max r), eps = {epsilon}"),
        absolute_fallback,
    ))
}

/// Coupled kernel-order convergence: `r = c_r p ln p` and
/// `n_disc = max(1, round(c_n p ln p))` per sample, reference at `1.5 p_max`.
pub fn converge_coupled(
    model: &TBModel,
    p_list: &[usize],
    c_r: f64,
    c_n: f64,
    epsilon: f64,
) -> Result<ConvergenceReport> {
    if p_list.len() < 4 || p_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "p_list must be increasing with at least 4 values".into(),
        ));
    }
    if !c_r.is_finite() || c_r <= 0.0 || !c_n.is_finite() || c_n < 0.0 {
        return Err(Error::InvalidParameter(
            "coupling constants must be positive".into(),
        ));
    }
    let coupled = |p: usize| -> (f64, usize) {
        let growth = p as f64 * (p as f64).ln();
        let r = c_r * growth;
        let n = ((c_n * growth).round() as usize).max(1);
        (r, n)
    };
    let p_ref = ((1.5 * p_list[p_list.len() - 1] as f64).round()) as usize;

    let mut all_p = p_list.to_vec();
    all_p.push(p_ref);
    // Heavier samples first would not help determinism; keep list order and
    // let the per-sample quadrature parallelize internally.
    let mut values = Vec::with_capacity(all_p.len());
    for &p in &all_p {
        let (r, n_disc) = coupled(p);
        let curve = total_dos(model, r, p, n_disc, &[epsilon])?;
        values.push(curve.values[0]);
    }

    let reference = values[values.len() - 1];
    let (errors, absolute_fallback) = errors_against_reference(&values[..p_list.len()], reference);
    let samples: Vec<ConvergenceSample> = p_list
        .iter()
        .zip(errors.iter())
        .map(|(&p, &e)| ConvergenceSample {
            parameter: p as f64,
            error: e,
        })
        .collect();
    let log_p: Vec<f64> = p_list.iter().map(|&p| (p as f64).ln()).collect();
    let (r_ref, n_ref) = coupled(p_ref);
    Ok(fit_report(
        ConvergenceAxis::CoupledOrder,
        &log_p,
        samples,
        format!(
            "DoS self-run at p = {p_ref}, r = {r_ref:.3}, n_disc = {n_ref} (1.5 x max p), eps = {epsilon}"
        ),
        absolute_fallback,
    ))
}

/// Shift-grid refinement probe at fixed radius and order, reference at
/// `2 x max(n_disc_list)`.
pub fn quadrature_error_probe(
    model: &TBModel,
    r: f64,
    p: usize,
    n_disc_list: &[usize],
    epsilon: f64,
) -> Result<ConvergenceReport> {
    if n_disc_list.is_empty() || n_disc_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n_disc_list must be nonempty and increasing".into(),
        ));
    }
    let n_ref = 2 * n_disc_list[n_disc_list.len() - 1];
    let mut all_n = n_disc_list.to_vec();
    all_n.push(n_ref);
    let mut values = Vec::with_capacity(all_n.len());
    for &n in &all_n {
        let curve = total_dos(model, r, p, n, &[epsilon])?;
        values.push(curve.values[0]);
    }
    let reference = values[values.len() - 1];
    let (errors, absolute_fallback) =
        errors_against_reference(&values[..n_disc_list.len()], reference);
    let samples: Vec<ConvergenceSample> = n_disc_list
        .iter()
        .zip(errors.iter())
        .map(|(&n, &e)| ConvergenceSample {
            parameter: n as f64,
            error: e,
        })
        .collect();
    let xs: Vec<f64> = n_disc_list.iter().map(|&n| n as f64).collect();
    Ok(fit_report(
        ConvergenceAxis::ShiftGrid,
        &xs,
        samples,
        format!("DoS self-run at n_disc = {n_ref} (2 x max), r = {r}, p = {p}, eps = {epsilon}"),
        absolute_fallback,
    ))
}

fn validate_increasing(xs: &[f64], min_len: usize, name: &str) -> Result<()> {
    if xs.len() < min_len {
        return Err(Error::InvalidParameter(format!(
            "{name} needs at least {min_len} values"
        )));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be increasing"
        )));
    }
    Ok(())
}
