//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them).
//!
//! Heavy spectral runs are kept at desk scale; every tolerance is pinned in
//! the assertions below.

use std::collections::BTreeMap;

use nalgebra::Vector2;

use moire_kpm::dos::{converge_coupled, converge_r, default_energy_grid, total_dos, RateClass};
use moire_kpm::geometry::{equidistribution_discrepancy, fourier_mode_average, LatticeBasis};
use moire_kpm::hamiltonian::assemble;
use moire_kpm::kpm::{chebyshev_moments, chi_p, dense_spectral, jackson_coefficients};
use moire_kpm::model::{
    builtin_model, spectral_bound, HoppingFunction, Orbital, OrbitalId, OrbitalSet, Sheet, TBModel,
};
use moire_kpm::numerics::trapezoid;
use moire_kpm::output::write_dos_csv;

const A: f64 = 2.46;

/// Criteria run one at a time so the per-criterion runtime caps measure the
/// work itself, not contention with sibling tests on the same cores.
static SERIAL: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn tbg6() -> TBModel {
    let mut p = BTreeMap::new();
    p.insert("twist_degrees".to_string(), 6.0);
    builtin_model("tbg", &p).unwrap()
}

fn pass(criterion: &str, detail: String) {
    println!("criterion {criterion}: PASS - {detail}");
}

/// Deterministic uniform stream for reproducible random draws.
struct SplitMix(u64);

impl SplitMix {
    fn unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn criterion_1_oracle_equivalence() {
    let _serial = serial();
    // 20 random clusters, recursion vs eigendecomposition, p = 128.
    let t0 = std::time::Instant::now();
    let model = tbg6();
    let p = 128;
    let mut rng = SplitMix(20260808);
    let mut worst = 0.0f64;
    let mut largest_n = 0;
    for k in 0..20 {
        let r = (2.5 + 3.0 * rng.unit()) * A; // keeps n <= 500 (and r <= 8a)
        let b = model.lattice2.from_frac([rng.unit(), rng.unit()]);
        let j = if rng.unit() < 0.5 {
            Sheet::One
        } else {
            Sheet::Two
        };
        let orbitals = model.orbitals(j);
        let alpha = orbitals[(rng.unit() * orbitals.len() as f64) as usize]
            .id
            .clone();
        let h = assemble(&model, r, j, b).unwrap();
        assert!(h.dim() <= 500, "cluster {k} too large: n = {}", h.dim());
        largest_n = largest_n.max(h.dim());

        let rec = chebyshev_moments(&h, &alpha, p).unwrap();
        let eig = dense_spectral(&h, &alpha).unwrap().moments(h.window.eta, p);
        let diff = rec
            .mu
            .iter()
            .zip(eig.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        worst = worst.max(diff);
    }
    assert!(
        worst <= 1e-10,
        "moment routes disagree by {worst:.3e} (tolerance 1e-10)"
    );
    let dt = t0.elapsed();
    assert!(dt.as_secs() < 60, "runtime {dt:.1?} exceeds the 1 min cap");
    pass(
        "1 (oracle equivalence)",
        format!(
            "20 clusters (n <= {largest_n}), max moment deviation {worst:.3e} <= 1e-10, {dt:.1?}"
        ),
    );
}

#[test]
fn criterion_2_kernel_identities() {
    let _serial = serial();
    // g_0 = 1 to 1e-14 across four orders of magnitude in p.
    for p in [1usize, 10, 100, 1000] {
        let k = jackson_coefficients(p).unwrap();
        assert!(
            (k.values()[0] - 1.0).abs() <= 1e-14,
            "g0 = {} at p = {p}",
            k.values()[0]
        );
    }

    // Delta normalization: integral of the smeared kernel over the window is
    // 1 within 1e-3 (trapezoid, 2001 points) for 10 random spectral points.
    // e is drawn from [-0.95, 0.95], the range the 1.05 safety factor allows
    // rescaled eigenvalues to occupy.
    let p = 256;
    let k = jackson_coefficients(p).unwrap();
    let grid: Vec<f64> = (0..=2000)
        .map(|i| -1.0 + 1e-6 + (2.0 - 2e-6) * i as f64 / 2000.0)
        .collect();
    let mut rng = SplitMix(2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let e = -0.95 + 1.9 * rng.unit();
        let ys: Vec<f64> = grid.iter().map(|&x| chi_p(&k, 1.0, x, e)).collect();
        let integral = trapezoid(&grid, &ys);
        worst = worst.max((integral - 1.0).abs());
    }
    assert!(worst <= 1e-3, "kernel normalization off by {worst:.3e}");
    pass(
        "2 (kernel identities)",
        format!("g0 exact for p in 1..=1000; max |integral - 1| = {worst:.3e} <= 1e-3"),
    );
}

#[test]
fn criterion_3_dos_normalization() {
    let _serial = serial();
    let t0 = std::time::Instant::now();
    let model = tbg6();
    let window = spectral_bound(&model).unwrap();
    let grid = default_energy_grid(&window, 401).unwrap();
    let curve = total_dos(&model, 30.0 * A, 256, 2, &grid).unwrap();
    let integral = trapezoid(&curve.epsilons, &curve.values);
    assert!(
        (integral - 1.0).abs() <= 2e-2,
        "DoS integral {integral} not within 1 +/- 2e-2"
    );
    let dt = t0.elapsed();
    assert!(dt.as_secs() < 300, "runtime {dt:.1?} exceeds the 5 min cap");
    pass(
        "3 (normalization)",
        format!(
            "integral D = {integral:.6} within 1 +/- 2e-2 at r = 30a, p = 256, n_disc = 2, {dt:.1?}"
        ),
    );
}

#[test]
fn criterion_8_exact_degenerate_cases() {
    let _serial = serial();
    // (a) Zero interlayer coupling: the bilayer quadrature collapses to the
    // monolayer DoS exactly.
    let mut params = BTreeMap::new();
    params.insert("twist_degrees".to_string(), 0.0);
    params.insert("t_perp".to_string(), 0.0);
    let tbg0 = builtin_model("tbg", &params).unwrap();
    let mono = builtin_model("monolayer_graphene", &BTreeMap::new()).unwrap();
    let window = spectral_bound(&mono).unwrap();
    let grid = default_energy_grid(&window, 401).unwrap();
    let da = total_dos(&tbg0, 8.0 * A, 128, 2, &grid).unwrap();
    let db = total_dos(&mono, 8.0 * A, 128, 2, &grid).unwrap();
    let worst = da
        .values
        .iter()
        .zip(db.values.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    assert!(worst <= 1e-12, "decoupled bilayer deviates by {worst:.3e}");

    // (b) Diagonal model: a Jackson-broadened delta centered on the on-site
    // energy, peak within one grid step.
    let onsite = 2.0;
    let basis = LatticeBasis::hexagonal(A);
    let diag = TBModel::new(
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
    .unwrap();
    let window = spectral_bound(&diag).unwrap();
    let grid = default_energy_grid(&window, 401).unwrap();
    let step = grid[1] - grid[0];
    let curve = total_dos(&diag, 2.0 * A, 512, 1, &grid).unwrap();
    let (imax, _) =
        curve.values.iter().enumerate().fold(
            (0, f64::MIN),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let peak = curve.epsilons[imax];
    assert!(
        (peak - onsite).abs() <= step,
        "delta peak at {peak} not within one grid step ({step}) of {onsite}"
    );
    pass(
        "8 (exact degenerate cases)",
        format!(
            "decoupled max deviation {worst:.2e} <= 1e-12; delta peak at {peak:.4} eV \
             (onsite {onsite}, grid step {step:.4})"
        ),
    );
}

#[test]
fn criterion_9_byte_determinism() {
    let _serial = serial();
    // Two single-threaded runs of the criterion-3 configuration must print
    // byte-identical CSV.
    let model = tbg6();
    let window = spectral_bound(&model).unwrap();
    let grid = default_energy_grid(&window, 401).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for _ in 0..2 {
        let curve = pool.install(|| total_dos(&model, 30.0 * A, 256, 2, &grid).unwrap());
        let mut buf = Vec::new();
        write_dos_csv(
            &mut buf,
            "model=tbg set.twist_degrees=6 r=73.8 p=256 ndisc=2",
            &curve,
        )
        .unwrap();
        outputs.push(buf);
    }
    assert_eq!(outputs[0], outputs[1], "single-threaded runs differ");
    pass(
        "9 (determinism)",
        format!(
            "two single-threaded runs produced identical {} byte CSVs",
            outputs[0].len()
        ),
    );
}

#[test]
fn criterion_7_equidistribution() {
    let _serial = serial();
    let hex = LatticeBasis::hexagonal(A);
    let rot = hex.rotated(6.0);

    // Sharp-radius readings of the m = (1,0) mode ride a near-commensurate
    // oscillation (6 degrees is 0.009 degrees from the 6.009 moire angle), so
    // the decay is measured on a +/-2% radius window around each target; the
    // op itself stays a sharp open-ball sum.
    let windowed = |r: f64| -> f64 {
        let k = 9;
        (0..k)
            .map(|i| {
                let rr = r * (0.98 + 0.04 * i as f64 / (k - 1) as f64);
                fourier_mode_average(&rot, &hex, [1, 0], rr)
                    .unwrap()
                    .value
                    .norm()
            })
            .sum::<f64>()
            / k as f64
    };
    let v200 = windowed(200.0 * A);
    let v400 = windowed(400.0 * A);
    assert!(
        v400 <= 0.6 * v200,
        "|v(400a)| = {v400:.3e} not <= 0.6 |v(200a)| = {:.3e}",
        0.6 * v200
    );

    let d: Vec<f64> = [100.0, 200.0, 400.0]
        .iter()
        .map(|&ra| equidistribution_discrepancy(&rot, &hex, ra * A).unwrap())
        .collect();
    assert!(
        d[1] < d[0] && d[2] < d[1],
        "discrepancy not decreasing: {d:?}"
    );
    pass(
        "7 (equidistribution)",
        format!(
            "windowed |v|: {v200:.3e} -> {v400:.3e} (ratio {:.3} <= 0.6); \
             discrepancy {:.4} -> {:.4} -> {:.4}",
            v400 / v200,
            d[0],
            d[1],
            d[2]
        ),
    );
}

#[test]
fn criterion_4_exponential_r_convergence() {
    let _serial = serial();
    // Radius convergence of one LDoS configuration at fixed kernel order.
    //
    // The substitute model couples intralayer sites at first-neighbor range
    // only, so order-p moments carry a strict information cone of about
    // p * d_nn / 2 (~18a at p = 64): beyond it the truncation error is
    // exactly zero in f64 and no decay is measurable. The radii therefore
    // span 4a..16a, inside the cone at the pinned p = 64; the exponential
    // shape (negative slope, R^2 > 0.9) is the criterion.
    let model = tbg6();
    let r_list: Vec<f64> = [4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0]
        .iter()
        .map(|x| x * A)
        .collect();
    let report = converge_r(
        &model,
        64,
        Sheet::One,
        &OrbitalId::new("1A"),
        Vector2::zeros(),
        &r_list,
        0.0,
    )
    .unwrap();
    assert!(
        report.fitted_slope < 0.0,
        "slope {} not negative",
        report.fitted_slope
    );
    assert!(
        report.r_squared > 0.9,
        "R^2 = {} not above 0.9 (errors: {:?})",
        report.r_squared,
        report.samples
    );
    assert!(!report.absolute_fallback);
    pass(
        "4 (exponential r-convergence)",
        format!(
            "slope {:.3}/A ({:.3}/a), R^2 = {:.4} over r in 4a..16a at p = 64",
            report.fitted_slope,
            report.fitted_slope * A,
            report.r_squared
        ),
    );
}

#[test]
fn criterion_5_coupled_quadratic_rate() {
    let _serial = serial();
    // Pointwise DoS error under the coupled scaling r ~ n_disc ~ p ln p;
    // the fitted log-log slope must land in [-2.5, -1.5].
    let t0 = std::time::Instant::now();
    let model = tbg6();
    let p_list = [32usize, 48, 64, 96, 128];
    let report = converge_coupled(&model, &p_list, C_R, C_N, EPS_COUPLED).unwrap();
    assert!(
        report.fitted_slope >= -2.5 && report.fitted_slope <= -1.5,
        "slope {} outside [-2.5, -1.5] (errors: {:?})",
        report.fitted_slope,
        report.samples
    );
    assert_eq!(report.rate_class, Some(RateClass::QuadraticPointwise));
    let dt = t0.elapsed();
    assert!(
        dt.as_secs() < 1800,
        "runtime {dt:.1?} exceeds the 30 min cap"
    );
    pass(
        "5 (coupled p^-2 rate)",
        format!(
            "slope {:.3} in [-2.5, -1.5] over p = 32..128 \
             (c_r = {C_R}, c_n = {C_N}, eps = {EPS_COUPLED}), {dt:.1?}",
            report.fitted_slope
        ),
    );
}

// Coupled-study constants (Angstrom per (p ln p) and grid points per
// (p ln p)); chosen so every sample's truncation error sits at the f64 floor
// (r(p) at or beyond the moment information cone) and the shift-grid error
// stays below the kernel error. The energy 4.0 eV lies in the smooth deep-pi
// region where the LDoS depends only weakly on the shift.
const C_R: f64 = 0.25;
const C_N: f64 = 0.004;
const EPS_COUPLED: f64 = 4.0;

#[test]
fn criterion_6_vhs_qualitative() {
    let _serial = serial();
    // Van Hove shoulders flanking the Dirac point in the twisted bilayer,
    // absent in the monolayer at identical parameters. The comparison window
    // covers the Dirac region only (monolayer VHS sit at |t| = 2.7 eV).
    let t0 = std::time::Instant::now();
    let (r, p, n_disc) = (60.0 * A, 300, 3);
    let model = tbg6();
    let window = spectral_bound(&model).unwrap();
    let grid = default_energy_grid(&window, 401).unwrap();
    let twisted = total_dos(&model, r, p, n_disc, &grid).unwrap();

    let mono = builtin_model("monolayer_graphene", &BTreeMap::new()).unwrap();
    let mwindow = spectral_bound(&mono).unwrap();
    let mgrid = default_energy_grid(&mwindow, 401).unwrap();
    let monolayer = total_dos(&mono, r, p, n_disc, &mgrid).unwrap();

    let t_split = vhs_split(&twisted.epsilons, &twisted.values);
    let m_split = vhs_split(&monolayer.epsilons, &monolayer.values);
    assert!(
        t_split.is_some(),
        "no VHS pair flanking the Dirac minimum in the twisted curve"
    );
    assert!(
        m_split.is_none(),
        "monolayer shows a spurious split {m_split:?}"
    );
    let (lo, hi) = t_split.unwrap();
    let dt = t0.elapsed();
    assert!(
        dt.as_secs() < 1800,
        "runtime {dt:.1?} exceeds the 30 min cap"
    );
    pass(
        "6 (VHS qualitative)",
        format!("twisted VHS pair at {lo:.3} eV / {hi:.3} eV, monolayer clean, {dt:.1?}"),
    );
}

/// Looks for a local minimum near zero flanked by prominent local maxima
/// within the Dirac window |eps| <= 1.6 eV. Returns the maxima positions.
fn vhs_split(eps: &[f64], dos: &[f64]) -> Option<(f64, f64)> {
    let in_window =
        |lo: f64, hi: f64| (0..eps.len()).filter(move |&i| eps[i] >= lo && eps[i] <= hi);
    // Dirac minimum: lowest point within +/-0.35 eV.
    let imin = in_window(-0.35, 0.35).min_by(|&i, &j| dos[i].total_cmp(&dos[j]))?;
    let dmin = dos[imin];
    // Flanking maxima: strict interior local maxima with 5% prominence over
    // the Dirac minimum, within 1.6 eV on each side.
    let mut best: [Option<usize>; 2] = [None, None];
    for (side, (lo, hi)) in [
        (0, (eps[imin] - 1.6, eps[imin] - 0.05)),
        (1, (eps[imin] + 0.05, eps[imin] + 1.6)),
    ] {
        for i in in_window(lo, hi) {
            if i == 0 || i + 1 == eps.len() {
                continue;
            }
            let is_peak = dos[i] > dos[i - 1] && dos[i] >= dos[i + 1] && dos[i] >= dmin * 1.05;
            if is_peak && best[side].is_none_or(|b| dos[i] > dos[b]) {
                best[side] = Some(i);
            }
        }
    }
    match (best[0], best[1]) {
        (Some(l), Some(r)) => Some((eps[l], eps[r])),
        _ => None,
    }
}
