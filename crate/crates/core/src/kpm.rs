//! Chebyshev kernel polynomial method.
//!
//! The local density of states at the cluster center is approximated by a
//! Jackson-damped Chebyshev series of order `p`:
//!
//! `ldos(eps) = eta / (pi sqrt(1 - (eta eps)^2)) * sum_{m<=p} g_m T_m(eta eps) mu_m`
//!
//! with moments `mu_m = [T_m(eta H)]_{00}` from the three-term recursion
//! `T_{n+1}(e) = 2 e T_n(e) - T_{n-1}(e)`, one matrix-vector product per
//! moment. The Jackson coefficients `g_m` damp the Gibbs oscillations and
//! keep the smeared delta kernel nonnegative. A full eigendecomposition
//! (`dense_spectral`) provides the independent oracle for both moments and
//! reconstructed values.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::hamiltonian::{ClusterHamiltonian, DENSE_LIMIT};
use crate::model::{OrbitalId, Sheet};
use crate::numerics::pairwise_sum;

/// Guard band keeping the reconstruction grid away from the square-root
/// singularity at the window edge: `|eta * eps| <= 1 - GUARD`.
pub const WINDOW_GUARD: f64 = 1e-6;

/// Jackson damping coefficients for moments `m = 0..=p`.
///
/// `g[0] = 1` exactly and `0 < g[m] <= 2`; the factor `(2 - delta_{m0})` of
/// the series is folded in. The associated smearing kernel is nonnegative,
/// which makes reconstructed densities nonnegative up to rounding.
#[derive(Debug, Clone)]
pub struct KernelCoefficients {
    p: usize,
    g: Vec<f64>,
}

impl KernelCoefficients {
    pub fn order(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }
}

/// Computes the Jackson coefficients of order `p >= 1`.
pub fn jackson_coefficients(p: usize) -> Result<KernelCoefficients> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "kernel order p must be >= 1".into(),
        ));
    }
    // With moments m = 0..=p the kernel uses N = p + 1 Chebyshev terms; the
    // Jackson window for N terms reads
    //   j_m = ((N - m + 1) cos(pi m / (N+1)) + sin(pi m / (N+1)) cot(pi / (N+1))) / (N + 1).
    let q = (p + 2) as f64;
    let cot = 1.0 / (std::f64::consts::PI / q).tan();
    let g = (0..=p)
        .map(|m| {
            let pref = if m == 0 { 1.0 } else { 2.0 };
            let t = std::f64::consts::PI * m as f64 / q;
            pref * ((p + 2 - m) as f64 * t.cos() + t.sin() * cot) / q
        })
        .collect();
    Ok(KernelCoefficients { p, g })
}

/// Chebyshev moments of one center orbital: `mu[m] = [T_m(eta H)]_{0a,0a}`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub mu: Vec<f64>,
    pub sheet: Sheet,
    pub alpha: OrbitalId,
    /// Cartesian shift the cluster was assembled with.
    pub b: Vector2<f64>,
    pub r: f64,
    pub eta: f64,
}

impl MomentTable {
    pub fn order(&self) -> usize {
        self.mu.len() - 1
    }
}

/// Runs the moment recursion at the center DOF of `alpha` (an orbital of
/// sheet `h.j`) up to order `p`.
pub fn chebyshev_moments(
    h: &ClusterHamiltonian,
    alpha: &OrbitalId,
    p: usize,
) -> Result<MomentTable> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "moment order p must be >= 1".into(),
        ));
    }
    let flat = h.center_dof_by_id(alpha.as_str())?;
    let n = h.dim();
    let eta = h.window.eta;

    let mut mu = Vec::with_capacity(p + 1);
    // v0 = e, so mu[0] = e . e = 1 exactly.
    let mut v_prev = vec![0.0; n];
    v_prev[flat] = 1.0;
    mu.push(1.0);

    // v1 = eta H e.
    let mut v_cur = vec![0.0; n];
    h.scaled_matvec(eta, &v_prev, &mut v_cur);
    mu.push(v_cur[flat]);

    // TODO: the product identities T_{2m} = 2 T_m^2 - T_0 and
    // T_{2m+1} = 2 T_m T_{m+1} - T_1 would give 2p moments from p matvecs;
    // skipped for now to keep one evaluation semantics per moment.
    let two_eta = 2.0 * eta;
    for _m in 1..p {
        // v_{m+1} = 2 eta H v_m - v_{m-1}, fused in place into v_prev.
        h.chebyshev_step(two_eta, &v_cur, &mut v_prev);
        std::mem::swap(&mut v_prev, &mut v_cur);
        mu.push(v_cur[flat]);
    }

    for (m, &x) in mu.iter().enumerate() {
        if !x.is_finite() || x.abs() > 1.0 + 1e-9 {
            return Err(Error::SpectralWindowViolation(format!(
                "mu[{m}] = {x}: spectrum not contained in [-1, 1] after rescaling"
            )));
        }
    }

    Ok(MomentTable {
        mu,
        sheet: h.j,
        alpha: alpha.clone(),
        b: h.b,
        r: h.r,
        eta,
    })
}

/// One reconstructed LDoS value.
#[derive(Debug, Clone, Copy)]
pub struct LdosSample {
    /// Energy in eV.
    pub epsilon: f64,
    /// Density in 1/eV.
    pub value: f64,
}

/// Evaluates the damped Chebyshev series on an energy grid.
///
/// `T_m(eta eps)` is evaluated with the same three-term recursion as the
/// matrix moments (not via `cos(m acos)`), so scalar and operator paths share
/// one evaluation semantics. Energies with `|eta eps| > 1 - 1e-6` are
/// rejected.
pub fn reconstruct(
    moments: &MomentTable,
    kernel: &KernelCoefficients,
    epsilons: &[f64],
) -> Result<Vec<LdosSample>> {
    if kernel.order() != moments.order() {
        return Err(Error::InvalidParameter(format!(
            "kernel order {} != moment order {}",
            kernel.order(),
            moments.order()
        )));
    }
    let eta = moments.eta;
    let offenders: Vec<f64> = epsilons
        .iter()
        .copied()
        .filter(|&e| (eta * e).abs() > 1.0 - WINDOW_GUARD)
        .collect();
    if !offenders.is_empty() {
        return Err(Error::OutOfWindow(offenders));
    }

    let p = moments.order();
    let g = kernel.values();
    let mu = &moments.mu;
    let mut terms = vec![0.0; p + 1];
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let x = eta * eps;
        // Scalar Chebyshev recursion, fused with the damped-series terms.
        let mut t_prev = 1.0;
        let mut t_cur = x;
        terms[0] = g[0] * mu[0];
        if p >= 1 {
            terms[1] = g[1] * t_cur * mu[1];
        }
        for m in 2..=p {
            let t_next = 2.0 * x * t_cur - t_prev;
            t_prev = t_cur;
            t_cur = t_next;
            terms[m] = g[m] * t_cur * mu[m];
        }
        let s = pairwise_sum(&terms);
        let value = eta / (std::f64::consts::PI * (1.0 - x * x).sqrt()) * s;
        out.push(LdosSample {
            epsilon: eps,
            value,
        });
    }
    Ok(out)
}

/// Eigendecomposition view of a cluster: eigenvalues and the spectral weights
/// `|<e_center, psi_i>|^2` of one center orbital.
#[derive(Debug, Clone)]
pub struct DenseSpectral {
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Full eigendecomposition oracle for clusters up to the dense limit.
pub fn dense_spectral(h: &ClusterHamiltonian, alpha: &OrbitalId) -> Result<DenseSpectral> {
    if h.dim() > DENSE_LIMIT {
        return Err(Error::SizeExceeded {
            n: h.dim(),
            limit: DENSE_LIMIT,
        });
    }
    let flat = h.center_dof_by_id(alpha.as_str())?;
    let dense = h.dense_form()?;
    let eig = dense.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let c = eig.eigenvectors[(flat, i)];
            (lambda, c * c)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DenseSpectral {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

impl DenseSpectral {
    /// `sum_i w_i g(lambda_i)`; errors on non-finite `g` values.
    pub fn evaluate(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let terms: Vec<f64> = self
            .eigenvalues
            .iter()
            .zip(self.weights.iter())
            .map(|(&l, &w)| w * g(l))
            .collect();
        if let Some(bad) = terms.iter().find(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!(
                "observable produced {bad} at an eigenvalue"
            )));
        }
        Ok(pairwise_sum(&terms))
    }

    /// Moments `sum_i w_i T_m(eta lambda_i)` up to order `p` — the
    /// eigendecomposition route to the same numbers as [`chebyshev_moments`].
    pub fn moments(&self, eta: f64, p: usize) -> Vec<f64> {
        let mut mu = vec![0.0; p + 1];
        for (&l, &w) in self.eigenvalues.iter().zip(self.weights.iter()) {
            let x = eta * l;
            let mut t_prev = 1.0;
            let mut t_cur = x;
            mu[0] += w;
            if p >= 1 {
                mu[1] += w * t_cur;
            }
            for slot in mu.iter_mut().take(p + 1).skip(2) {
                let t_next = 2.0 * x * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = t_next;
                *slot += w * t_cur;
            }
        }
        mu
    }
}

/// LDoS through the eigendecomposition: `sum_i |<e_0a, psi_i>|^2 g(lambda_i)`.
pub fn dense_oracle(
    h: &ClusterHamiltonian,
    alpha: &OrbitalId,
    g: impl Fn(f64) -> f64,
) -> Result<f64> {
    dense_spectral(h, alpha)?.evaluate(g)
}

/// The rescaled smeared-delta kernel `chi_p(eps, e)` evaluated directly; the
/// polynomial that [`reconstruct`] applies to the spectrum.
pub fn chi_p(kernel: &KernelCoefficients, eta: f64, eps: f64, e: f64) -> f64 {
    let x = eta * eps;
    let y = eta * e;
    let g = kernel.values();
    let mut sum = g[0];
    let (mut tx_prev, mut tx_cur) = (1.0, x);
    let (mut ty_prev, mut ty_cur) = (1.0, y);
    if kernel.order() >= 1 {
        sum += g[1] * tx_cur * ty_cur;
    }
    for gm in &g[2..] {
        let tx_next = 2.0 * x * tx_cur - tx_prev;
        tx_prev = tx_cur;
        tx_cur = tx_next;
        let ty_next = 2.0 * y * ty_cur - ty_prev;
        ty_prev = ty_cur;
        ty_cur = ty_next;
        sum += gm * tx_cur * ty_cur;
    }
    eta / (std::f64::consts::PI * (1.0 - x * x).sqrt()) * sum
}
