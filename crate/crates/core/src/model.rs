//! Tight-binding model definitions.
//!
//! A model couples two Bravais lattices, an orbital set per sheet and a
//! hopping function `h(alpha, alpha', x)` with exponential-decay metadata
//! `|h| <= C exp(-gamma |x|)` and a hard in-plane cutoff. Built-in models
//! cover monolayer graphene and twisted bilayer graphene (TBG).
//!
//! The TBG hopping parameters are a documented substitute: first-neighbor
//! intralayer `t_intra = -2.7 eV` and isotropic interlayer
//! `t(d) = t_perp exp(-(d - d0)/delta0)` with `t_perp = 0.48 eV`,
//! `d0 = 3.35 A` (the fixed vertical separation, folded into the hopping),
//! `delta0 = 0.32 A` and an in-plane cutoff of `8 A`. These are standard
//! literature values, all overridable; DoS features computed from them are
//! qualitatively, not quantitatively, comparable to published TBG curves.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::{modulate, sites_in_ball, LatticeBasis};

/// Safety factor applied on top of the Gershgorin bound so the rescaled
/// spectrum sits strictly inside [-1, 1].
pub const SPECTRAL_SAFETY: f64 = 1.05;

/// Sheet index of the bilayer. `other()` is the transposition `P_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sheet {
    One,
    Two,
}

impl Sheet {
    pub fn other(self) -> Sheet {
        match self {
            Sheet::One => Sheet::Two,
            Sheet::Two => Sheet::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sheet::One => 0,
            Sheet::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Sheet::One => 1,
            Sheet::Two => 2,
        }
    }

    pub fn from_number(j: u8) -> Result<Sheet> {
        match j {
            1 => Ok(Sheet::One),
            2 => Ok(Sheet::Two),
            _ => Err(Error::InvalidParameter(format!(
                "sheet must be 1 or 2, got {j}"
            ))),
        }
    }

    pub const BOTH: [Sheet; 2] = [Sheet::One, Sheet::Two];
}

impl fmt::Display for Sheet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Opaque orbital identifier, unique across both sheets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrbitalId(pub String);

impl OrbitalId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OrbitalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One orbital: identifier, in-cell position offset (Angstrom) and on-site
/// energy (eV). The on-site energy is the diagonal hopping `h(alpha,alpha,0)`.
#[derive(Debug, Clone)]
pub struct Orbital {
    pub id: OrbitalId,
    pub sheet: Sheet,
    pub tau: Vector2<f64>,
    pub onsite: f64,
}

/// The orbitals attached to one sheet's unit cell.
#[derive(Debug, Clone)]
pub struct OrbitalSet {
    pub sheet: Sheet,
    pub orbitals: Vec<Orbital>,
}

impl OrbitalSet {
    pub fn new(sheet: Sheet, orbitals: Vec<Orbital>) -> Self {
        Self { sheet, orbitals }
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }
}

/// Signature of a user-supplied hopping: `(alpha, alpha', displacement) -> eV`.
pub type HoppingEvaluator = Arc<dyn Fn(&Orbital, &Orbital, Vector2<f64>) -> f64 + Send + Sync>;

/// Functional form of the orbital interaction.
#[derive(Clone)]
enum HoppingKind {
    /// No hopping at all (on-site energies still apply).
    Zero,
    /// Graphene family: constant first-neighbor intralayer hopping plus an
    /// isotropic exponential interlayer hopping with the vertical separation
    /// folded in.
    GrapheneExponential {
        t_intra: f64,
        t_perp: f64,
        d0: f64,
        delta0: f64,
        nn_distance: f64,
    },
    /// Arbitrary user hopping; must satisfy `h(a, b, x) = h(b, a, -x)`.
    Custom(HoppingEvaluator),
}

impl fmt::Debug for HoppingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HoppingKind::Zero => write!(f, "Zero"),
            HoppingKind::GrapheneExponential {
                t_intra,
                t_perp,
                d0,
                delta0,
                nn_distance,
            } => write!(
                f,
                "GrapheneExponential {{ t_intra: {t_intra}, t_perp: {t_perp}, d0: {d0}, delta0: {delta0}, nn_distance: {nn_distance} }}"
            ),
            HoppingKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Hopping function with exponential-decay metadata.
///
/// `eval` returns exactly zero beyond `cutoff_radius` and the on-site energy
/// for a zero displacement between identical orbitals.
#[derive(Debug, Clone)]
pub struct HoppingFunction {
    kind: HoppingKind,
    /// Decay amplitude `C` in eV.
    pub decay_amplitude: f64,
    /// Decay rate `gamma` in 1/Angstrom.
    pub decay_rate: f64,
    /// Hard in-plane cutoff in Angstrom.
    pub cutoff_radius: f64,
}

impl HoppingFunction {
    pub fn zero(cutoff_radius: f64) -> Self {
        Self {
            kind: HoppingKind::Zero,
            decay_amplitude: 1.0,
            decay_rate: 1.0,
            cutoff_radius,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn graphene_exponential(
        t_intra: f64,
        t_perp: f64,
        d0: f64,
        delta0: f64,
        nn_distance: f64,
        cutoff_radius: f64,
        decay_amplitude: f64,
        decay_rate: f64,
    ) -> Self {
        Self {
            kind: HoppingKind::GrapheneExponential {
                t_intra,
                t_perp,
                d0,
                delta0,
                nn_distance,
            },
            decay_amplitude,
            decay_rate,
            cutoff_radius,
        }
    }

    pub fn custom(
        f: impl Fn(&Orbital, &Orbital, Vector2<f64>) -> f64 + Send + Sync + 'static,
        decay_amplitude: f64,
        decay_rate: f64,
        cutoff_radius: f64,
    ) -> Self {
        Self {
            kind: HoppingKind::Custom(Arc::new(f)),
            decay_amplitude,
            decay_rate,
            cutoff_radius,
        }
    }

    /// Interaction between orbital `a` at displacement `x` from orbital `b`
    /// (i.e. `x = position(a) - position(b)` including in-cell offsets).
    pub fn eval(&self, a: &Orbital, b: &Orbital, x: Vector2<f64>) -> f64 {
        let x2 = x.norm_squared();
        if x2 > self.cutoff_radius * self.cutoff_radius {
            return 0.0;
        }
        if a.id == b.id && x2 < 1e-24 {
            return a.onsite;
        }
        match &self.kind {
            HoppingKind::Zero => 0.0,
            HoppingKind::GrapheneExponential {
                t_intra,
                t_perp,
                d0,
                delta0,
                nn_distance,
            } => {
                if a.sheet == b.sheet {
                    let d = x2.sqrt();
                    if (d - nn_distance).abs() <= 0.3 * nn_distance {
                        *t_intra
                    } else {
                        0.0
                    }
                } else {
                    let d = (x2 + d0 * d0).sqrt();
                    t_perp * (-(d - d0) / delta0).exp()
                }
            }
            HoppingKind::Custom(f) => f(a, b, x),
        }
    }
}

/// Two lattices, their orbital sets and the shared hopping function.
#[derive(Debug, Clone)]
pub struct TBModel {
    pub lattice1: LatticeBasis,
    pub lattice2: LatticeBasis,
    pub orbitals1: OrbitalSet,
    pub orbitals2: OrbitalSet,
    pub hopping: HoppingFunction,
    pub label: String,
}

impl TBModel {
    pub fn new(
        lattice1: LatticeBasis,
        lattice2: LatticeBasis,
        orbitals1: OrbitalSet,
        orbitals2: OrbitalSet,
        hopping: HoppingFunction,
        label: impl Into<String>,
    ) -> Result<Self> {
        let model = Self {
            lattice1,
            lattice2,
            orbitals1,
            orbitals2,
            hopping,
            label: label.into(),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.orbitals1.is_empty() && self.orbitals2.is_empty() {
            return Err(Error::ModelValidation("no orbitals on either sheet".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for orb in self.all_orbitals() {
            if !seen.insert(orb.id.clone()) {
                return Err(Error::ModelValidation(format!(
                    "orbital id '{}' is not unique across sheets",
                    orb.id
                )));
            }
            // The in-cell offset must lie inside the sheet's unit cell.
            let basis = self.lattice(orb.sheet);
            let folded = modulate(basis, orb.tau);
            if (folded.b - orb.tau).norm() > 1e-9 {
                return Err(Error::ModelValidation(format!(
                    "orbital '{}' offset tau lies outside the unit cell",
                    orb.id
                )));
            }
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.hopping.cutoff_radius)
            || !positive(self.hopping.decay_amplitude)
            || !positive(self.hopping.decay_rate)
        {
            return Err(Error::ModelValidation(
                "hopping cutoff, decay amplitude and decay rate must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn lattice(&self, sheet: Sheet) -> &LatticeBasis {
        match sheet {
            Sheet::One => &self.lattice1,
            Sheet::Two => &self.lattice2,
        }
    }

    pub fn orbital_set(&self, sheet: Sheet) -> &OrbitalSet {
        match sheet {
            Sheet::One => &self.orbitals1,
            Sheet::Two => &self.orbitals2,
        }
    }

    pub fn orbitals(&self, sheet: Sheet) -> &[Orbital] {
        &self.orbital_set(sheet).orbitals
    }

    pub fn all_orbitals(&self) -> impl Iterator<Item = &Orbital> {
        self.orbitals1
            .orbitals
            .iter()
            .chain(self.orbitals2.orbitals.iter())
    }

    /// Finds an orbital by id together with its sheet-local index.
    pub fn find_orbital(&self, id: &str) -> Option<(Sheet, usize, &Orbital)> {
        for sheet in Sheet::BOTH {
            if let Some((i, orb)) = self
                .orbitals(sheet)
                .iter()
                .enumerate()
                .find(|(_, o)| o.id.as_str() == id)
            {
                return Some((sheet, i, orb));
            }
        }
        None
    }

    /// Normalization constant of the representation formula,
    /// `nu = 1 / (|A_2| |Gamma_1| + |A_1| |Gamma_2|)` in 1/Angstrom^2.
    pub fn nu(&self) -> f64 {
        1.0 / (self.orbitals2.len() as f64 * self.lattice1.cell_area()
            + self.orbitals1.len() as f64 * self.lattice2.cell_area())
    }

    /// Largest in-cell orbital offset, used to pad neighbor-search stencils.
    pub fn max_tau(&self) -> f64 {
        self.all_orbitals()
            .map(|o| o.tau.norm())
            .fold(0.0, f64::max)
    }
}

/// Rescaling window: `e_bound >= ||H_{r,j}(b)||_2` for every cluster of the
/// model, and `eta = 1/e_bound` maps the spectrum into [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct SpectralWindow {
    pub e_bound: f64,
    pub eta: f64,
}

/// Keys understood by the built-in models, with defaults. All values are
/// eV/Angstrom/degrees as appropriate.
pub const TBG_PARAM_KEYS: &[(&str, f64)] = &[
    ("twist_degrees", f64::NAN), // required for tbg
    ("lattice_constant", 2.46),
    ("t_intra", -2.7),
    ("t_perp", 0.48),
    ("interlayer_distance", 3.35),
    ("interlayer_decay_length", 0.32),
    ("cutoff", 8.0),
    ("onsite", 0.0),
];

fn lookup(params: &BTreeMap<String, f64>, key: &str) -> Option<f64> {
    params.get(key).copied()
}

fn graphene_orbitals(sheet: Sheet, basis: &LatticeBasis, onsite: f64, prefix: &str) -> OrbitalSet {
    // Sublattice A at the origin, B at (a1 + a2)/3.
    let tau_b = basis.from_frac([1.0 / 3.0, 1.0 / 3.0]);
    OrbitalSet::new(
        sheet,
        vec![
            Orbital {
                id: OrbitalId::new(format!("{prefix}A")),
                sheet,
                tau: Vector2::zeros(),
                onsite,
            },
            Orbital {
                id: OrbitalId::new(format!("{prefix}B")),
                sheet,
                tau: tau_b,
                onsite,
            },
        ],
    )
}

/// Decay envelope metadata `(C, gamma)` for the graphene hopping family.
///
/// `gamma = 2/A` understates the true interlayer rate `1/delta0` so a modest
/// amplitude suffices; `C` is sized to dominate the first-neighbor hopping
/// `|t| e^{gamma d_nn}` and the interlayer maximum, with ~8% headroom.
fn graphene_decay_metadata(t_intra: f64, t_perp: f64, d0: f64, delta0: f64, nn: f64) -> (f64, f64) {
    let gamma = 2.0f64.min(0.9 / delta0);
    // The first-neighbor window extends to 1.3 nn, so the envelope must hold there.
    let c_intra = t_intra.abs() * (gamma * 1.3 * nn).exp();
    // Max over x of t_perp e^{-(sqrt(x^2+d0^2)-d0)/delta0 + gamma x}, found by
    // coarse scan; the integrand is smooth and single-peaked.
    let mut c_inter: f64 = t_perp.abs();
    let mut x = 0.0;
    while x < 40.0 {
        let d = (x * x + d0 * d0).sqrt();
        c_inter = c_inter.max(t_perp.abs() * ((-(d - d0) / delta0) + gamma * x).exp());
        x += 0.05;
    }
    (1.08 * c_intra.max(c_inter).max(1e-12), gamma)
}

/// Builds one of the built-in models.
///
/// Known names: `"monolayer_graphene"` and `"tbg"` (requires
/// `twist_degrees`). See [`TBG_PARAM_KEYS`] for the overridable parameters.
pub fn builtin_model(name: &str, params: &BTreeMap<String, f64>) -> Result<TBModel> {
    let known: Vec<&str> = TBG_PARAM_KEYS.iter().map(|(k, _)| *k).collect();
    for key in params.keys() {
        if !known.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "unknown model parameter '{key}' (known: {})",
                known.join(", ")
            )));
        }
    }
    let get = |key: &str| -> f64 {
        lookup(params, key).unwrap_or_else(|| {
            TBG_PARAM_KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap()
        })
    };
    let a = get("lattice_constant");
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::InvalidParameter(
            "lattice_constant must be positive".into(),
        ));
    }
    let t_intra = get("t_intra");
    let t_perp = get("t_perp");
    let d0 = get("interlayer_distance");
    let delta0 = get("interlayer_decay_length");
    let cutoff = get("cutoff");
    let onsite = get("onsite");
    let nn = a / 3.0f64.sqrt();

    match name {
        "monolayer_graphene" => {
            let basis = LatticeBasis::hexagonal(a);
            let (c, gamma) = graphene_decay_metadata(t_intra, 0.0, d0, delta0, nn);
            let hopping = HoppingFunction::graphene_exponential(
                t_intra, 0.0, d0, delta0, nn, cutoff, c, gamma,
            );
            TBModel::new(
                basis.clone(),
                basis.clone(),
                graphene_orbitals(Sheet::One, &basis, onsite, "1"),
                OrbitalSet::new(Sheet::Two, Vec::new()),
                hopping,
                "monolayer_graphene",
            )
        }
        "tbg" => {
            let twist = lookup(params, "twist_degrees").ok_or_else(|| {
                Error::InvalidParameter("tbg requires the twist_degrees parameter".into())
            })?;
            if !twist.is_finite() {
                return Err(Error::InvalidParameter(
                    "twist_degrees must be finite".into(),
                ));
            }
            let lattice2 = LatticeBasis::hexagonal(a);
            let lattice1 = lattice2.rotated(twist);
            let (c, gamma) = graphene_decay_metadata(t_intra, t_perp, d0, delta0, nn);
            let hopping = HoppingFunction::graphene_exponential(
                t_intra, t_perp, d0, delta0, nn, cutoff, c, gamma,
            );
            TBModel::new(
                lattice1.clone(),
                lattice2.clone(),
                graphene_orbitals(Sheet::One, &lattice1, onsite, "1"),
                graphene_orbitals(Sheet::Two, &lattice2, onsite, "2"),
                hopping,
                format!("tbg_{twist}deg"),
            )
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown builtin model '{other}' (known: monolayer_graphene, tbg)"
        ))),
    }
}

/// Gershgorin bound on the operator norm of every cluster Hamiltonian.
///
/// Samples the shift over an 8x8 fractional grid per sheet, sums `|h|` along
/// the center row truncated at the cutoff, and multiplies the largest row sum
/// by [`SPECTRAL_SAFETY`].
pub fn spectral_bound(model: &TBModel) -> Result<SpectralWindow> {
    const SHIFT_SAMPLES: usize = 8;
    let mut max_row_sum = 0.0f64;

    for j in Sheet::BOTH {
        if model.orbitals(j).is_empty() {
            continue;
        }
        let pj = j.other();
        let grid = crate::geometry::shift_grid(model.lattice(pj), SHIFT_SAMPLES)?;
        for alpha in model.orbitals(j) {
            for shift in &grid.points {
                let row_sum = center_row_abs_sum(model, j, alpha, shift.b)?;
                if !row_sum.is_finite() {
                    return Err(Error::ModelValidation(format!(
                        "divergent row sum for orbital '{}'",
                        alpha.id
                    )));
                }
                max_row_sum = max_row_sum.max(row_sum);
            }
        }
    }
    // A model with no couplings at all still needs a finite window.
    let e_bound = if max_row_sum > 0.0 {
        SPECTRAL_SAFETY * max_row_sum
    } else {
        1.0
    };
    Ok(SpectralWindow {
        e_bound,
        eta: e_bound.recip(),
    })
}

/// Sum of `|h|` over the infinite-lattice row of the center orbital `alpha`
/// on sheet `j`, with sheet `P_j` displaced by `b`.
fn center_row_abs_sum(model: &TBModel, j: Sheet, alpha: &Orbital, b: Vector2<f64>) -> Result<f64> {
    let pj = j.other();
    let cutoff = model.hopping.cutoff_radius;
    let pad = 2.0 * model.max_tau() + 1.0;
    let mut sum = 0.0f64;
    for s in Sheet::BOTH {
        if model.orbitals(s).is_empty() {
            continue;
        }
        // Displacement argument: b (delta_{alpha in P_j} - delta_{beta in P_j})
        // + R - R' + tau_alpha - tau_beta, with the center at R = 0, alpha on
        // sheet j (so its delta vanishes).
        let b_col = if s == pj { b } else { Vector2::zeros() };
        let reach = cutoff + pad + b_col.norm();
        for site in sites_in_ball(model.lattice(s), reach)? {
            for beta in model.orbitals(s) {
                if s == j && site.n == [0, 0] && beta.id == alpha.id {
                    sum += alpha.onsite.abs();
                    continue;
                }
                let x = alpha.tau - (b_col + site.x + beta.tau);
                sum += model.hopping.eval(alpha, beta, x).abs();
            }
        }
    }
    Ok(sum)
}

/// Result of [`validate_decay`].
#[derive(Debug, Clone)]
pub struct DecayReport {
    /// Largest observed `|h(x)| / (C exp(-gamma |x|))`.
    pub max_ratio: f64,
    /// True iff the envelope dominates every sample.
    pub pass: bool,
    pub samples: usize,
}

/// Samples the hopping on random in-cutoff displacements for every orbital
/// pair and reports the worst ratio against the declared decay envelope.
pub fn validate_decay(model: &TBModel, samples: usize, seed: u64) -> Result<DecayReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let h = &model.hopping;
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut next_unit = move || {
        // SplitMix64: deterministic and dependency-free.
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    let orbitals: Vec<&Orbital> = model.all_orbitals().collect();
    let mut max_ratio = 0.0f64;
    let mut count = 0usize;
    for a in &orbitals {
        for b in &orbitals {
            for _ in 0..samples {
                let rho = h.cutoff_radius * next_unit().sqrt();
                let phi = 2.0 * std::f64::consts::PI * next_unit();
                let x = Vector2::new(rho * phi.cos(), rho * phi.sin());
                let env = h.decay_amplitude * (-h.decay_rate * x.norm()).exp();
                let ratio = h.eval(a, b, x).abs() / env;
                max_ratio = max_ratio.max(ratio);
                count += 1;
            }
        }
    }
    Ok(DecayReport {
        max_ratio,
        pass: max_ratio <= 1.0,
        samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tbg(twist: f64) -> TBModel {
        let mut p = BTreeMap::new();
        p.insert("twist_degrees".to_string(), twist);
        builtin_model("tbg", &p).unwrap()
    }

    #[test]
    fn tbg_lattice_is_rotated() {
        let m = tbg(6.0);
        let r = m.lattice2.rotated(6.0);
        assert!((m.lattice1.matrix() - r.matrix()).norm() < 1e-12);
        assert_eq!(m.orbitals1.len(), 2);
        assert_eq!(m.orbitals2.len(), 2);
    }

    #[test]
    fn monolayer_has_empty_second_sheet() {
        let m = builtin_model("monolayer_graphene", &BTreeMap::new()).unwrap();
        assert!(m.orbitals2.is_empty());
        // Interlayer hopping identically zero: probe across-sheet pairs.
        let a = &m.orbitals1.orbitals[0];
        let ghost = Orbital {
            id: OrbitalId::new("ghost"),
            sheet: Sheet::Two,
            tau: Vector2::zeros(),
            onsite: 0.0,
        };
        for d in [0.0, 1.0, 3.0, 6.0] {
            assert_eq!(m.hopping.eval(a, &ghost, Vector2::new(d, 0.3)), 0.0);
        }
    }

    #[test]
    fn unknown_model_and_missing_twist() {
        assert!(matches!(
            builtin_model("nonsense", &BTreeMap::new()),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            builtin_model("tbg", &BTreeMap::new()),
            Err(Error::InvalidParameter(_))
        ));
        let mut p = BTreeMap::new();
        p.insert("not_a_key".to_string(), 1.0);
        p.insert("twist_degrees".to_string(), 6.0);
        assert!(matches!(
            builtin_model("tbg", &p),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn orbital_ids_disjoint_enforced() {
        let basis = LatticeBasis::hexagonal(2.46);
        let mk = |sheet| {
            OrbitalSet::new(
                sheet,
                vec![Orbital {
                    id: OrbitalId::new("dup"),
                    sheet,
                    tau: Vector2::zeros(),
                    onsite: 0.0,
                }],
            )
        };
        let err = TBModel::new(
            basis.clone(),
            basis.clone(),
            mk(Sheet::One),
            mk(Sheet::Two),
            HoppingFunction::zero(8.0),
            "dup",
        )
        .unwrap_err();
        assert!(matches!(err, Error::ModelValidation(_)));
    }

    #[test]
    fn hopping_zero_beyond_cutoff() {
        let m = tbg(6.0);
        let a = &m.orbitals1.orbitals[0];
        let b = &m.orbitals2.orbitals[0];
        let just_out = m.hopping.cutoff_radius + 1e-9;
        assert_eq!(m.hopping.eval(a, b, Vector2::new(just_out, 0.0)), 0.0);
        assert!(m.hopping.eval(a, b, Vector2::new(0.0, 0.0)).abs() > 0.0);
    }

    #[test]
    fn hopping_hermiticity_seed() {
        let m = tbg(3.7);
        let orbitals: Vec<&Orbital> = m.all_orbitals().collect();
        let mut k = 0u64;
        for a in &orbitals {
            for b in &orbitals {
                for _ in 0..50 {
                    k += 1;
                    let x = Vector2::new(
                        ((k * 2654435761) % 1000) as f64 / 70.0 - 7.0,
                        ((k * 40503) % 1000) as f64 / 70.0 - 7.0,
                    );
                    let lhs = m.hopping.eval(a, b, x);
                    let rhs = m.hopping.eval(b, a, -x);
                    assert_eq!(
                        lhs, rhs,
                        "h({},{},{x:?}) != h({},{},-x)",
                        a.id, b.id, b.id, a.id
                    );
                }
            }
        }
    }

    #[test]
    fn spectral_bound_diagonal_model() {
        let basis = LatticeBasis::hexagonal(2.46);
        let orb = Orbital {
            id: OrbitalId::new("d"),
            sheet: Sheet::One,
            tau: Vector2::zeros(),
            onsite: 2.0,
        };
        let model = TBModel::new(
            basis.clone(),
            basis.clone(),
            OrbitalSet::new(Sheet::One, vec![orb]),
            OrbitalSet::new(Sheet::Two, Vec::new()),
            HoppingFunction::zero(8.0),
            "diagonal",
        )
        .unwrap();
        let w = spectral_bound(&model).unwrap();
        assert!((w.e_bound - SPECTRAL_SAFETY * 2.0).abs() < 1e-12);
        assert!((w.eta * w.e_bound - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_bound_monolayer_nn() {
        // Three neighbors at t = -2.7 and zero onsite: Gershgorin row sum 8.1.
        let m = builtin_model("monolayer_graphene", &BTreeMap::new()).unwrap();
        let w = spectral_bound(&m).unwrap();
        assert!(
            (w.e_bound - SPECTRAL_SAFETY * 8.1).abs() < 1e-9,
            "e_bound = {}",
            w.e_bound
        );
    }

    #[test]
    fn validate_decay_builtin_passes() {
        let m = tbg(6.0);
        let rep = validate_decay(&m, 400, 42).unwrap();
        assert!(rep.pass, "max ratio {}", rep.max_ratio);
        assert!(rep.max_ratio > 0.0);
    }

    #[test]
    fn validate_decay_zero_hopping() {
        let basis = LatticeBasis::hexagonal(2.46);
        let model = TBModel::new(
            basis.clone(),
            basis.clone(),
            graphene_orbitals(Sheet::One, &basis, 0.0, "1"),
            OrbitalSet::new(Sheet::Two, Vec::new()),
            HoppingFunction::zero(8.0),
            "zero",
        )
        .unwrap();
        let rep = validate_decay(&model, 100, 1).unwrap();
        assert_eq!(rep.max_ratio, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn validate_decay_polynomial_fails() {
        // 1/(1+|x|) cannot sit below an exponential envelope over a long range.
        let basis = LatticeBasis::hexagonal(2.46);
        let model = TBModel::new(
            basis.clone(),
            basis.clone(),
            graphene_orbitals(Sheet::One, &basis, 0.0, "1"),
            OrbitalSet::new(Sheet::Two, Vec::new()),
            HoppingFunction::custom(|_, _, x| 1.0 / (1.0 + x.norm()), 1.0, 1.0, 60.0),
            "poly",
        )
        .unwrap();
        let rep = validate_decay(&model, 500, 9).unwrap();
        assert!(!rep.pass, "polynomial decay must violate the envelope");
    }

    #[test]
    fn nu_matches_formula() {
        let m = tbg(6.0);
        let area = m.lattice2.cell_area();
        let area1 = m.lattice1.cell_area();
        let expect = 1.0 / (2.0 * area1 + 2.0 * area);
        assert!((m.nu() - expect).abs() < 1e-15);
    }
}
