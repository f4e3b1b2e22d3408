//! Model configuration files.
//!
//! Models come either from a builtin (name plus numeric overrides) or from a
//! TOML file with `[lattice1]`, `[lattice2]`, `[orbitals]` and `[hopping]`
//! sections. Lengths are Angstrom, energies eV. The full key set:
//!
//! ```toml
//! [model]                       # optional shortcut section
//! builtin = "tbg"               # monolayer_graphene | tbg
//! [model.params]
//! twist_degrees = 6.0           # any key of TBG_PARAM_KEYS
//!
//! [lattice1]                    # explicit form (ignored when builtin set)
//! a1 = [2.46, 0.0]              # column lattice vectors
//! a2 = [1.23, 2.1304224850606],
//!
//! [lattice2]
//! a1 = [...]
//! a2 = [...]
//!
//! [orbitals]
//! sheet1 = [{ id = "1A", tau = [0.0, 0.0], onsite = 0.0 }, ...]
//! sheet2 = [...]
//!
//! [hopping]
//! kind = "graphene_exponential" # or "zero"
//! t_intra = -2.7
//! t_perp = 0.48
//! interlayer_distance = 3.35
//! interlayer_decay_length = 0.32
//! nn_distance = 1.4203          # default: derived from lattice2
//! cutoff = 8.0
//! decay_amplitude = 120.0       # optional explicit envelope
//! decay_rate = 2.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector2;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::LatticeBasis;
use crate::model::{
    builtin_model, HoppingFunction, Orbital, OrbitalId, OrbitalSet, Sheet, TBModel,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRoot {
    model: Option<BuiltinSection>,
    lattice1: Option<LatticeSection>,
    lattice2: Option<LatticeSection>,
    orbitals: Option<OrbitalsSection>,
    hopping: Option<HoppingSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuiltinSection {
    builtin: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeSection {
    a1: [f64; 2],
    a2: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitalsSection {
    #[serde(default)]
    sheet1: Vec<OrbitalEntry>,
    #[serde(default)]
    sheet2: Vec<OrbitalEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitalEntry {
    id: String,
    tau: [f64; 2],
    #[serde(default)]
    onsite: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoppingSection {
    kind: String,
    #[serde(default)]
    t_intra: Option<f64>,
    #[serde(default)]
    t_perp: Option<f64>,
    #[serde(default)]
    interlayer_distance: Option<f64>,
    #[serde(default)]
    interlayer_decay_length: Option<f64>,
    #[serde(default)]
    nn_distance: Option<f64>,
    #[serde(default)]
    cutoff: Option<f64>,
    #[serde(default)]
    decay_amplitude: Option<f64>,
    #[serde(default)]
    decay_rate: Option<f64>,
}

/// Parses a model from TOML text.
pub fn model_from_toml(text: &str) -> Result<TBModel> {
    let root: FileRoot =
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;

    if let Some(section) = root.model {
        let mut model = builtin_model(&section.builtin, &section.params)?;
        if let Some(label) = section.label {
            model.label = label;
        }
        return Ok(model);
    }

    let lat1 = root
        .lattice1
        .ok_or_else(|| Error::Config("missing [lattice1] section".into()))?;
    let lat2 = root
        .lattice2
        .ok_or_else(|| Error::Config("missing [lattice2] section".into()))?;
    let orbitals = root
        .orbitals
        .ok_or_else(|| Error::Config("missing [orbitals] section".into()))?;
    let hopping = root
        .hopping
        .ok_or_else(|| Error::Config("missing [hopping] section".into()))?;

    let lattice1 = LatticeBasis::new(lat1.a1, lat1.a2)?;
    let lattice2 = LatticeBasis::new(lat2.a1, lat2.a2)?;

    let to_orbitals = |entries: &[OrbitalEntry], sheet: Sheet| -> OrbitalSet {
        OrbitalSet::new(
            sheet,
            entries
                .iter()
                .map(|e| Orbital {
                    id: OrbitalId::new(e.id.clone()),
                    sheet,
                    tau: Vector2::new(e.tau[0], e.tau[1]),
                    onsite: e.onsite,
                })
                .collect(),
        )
    };
    let orbitals1 = to_orbitals(&orbitals.sheet1, Sheet::One);
    let orbitals2 = to_orbitals(&orbitals.sheet2, Sheet::Two);

    let cutoff = hopping.cutoff.unwrap_or(8.0);
    let h = match hopping.kind.as_str() {
        "zero" => HoppingFunction::zero(cutoff),
        "graphene_exponential" => {
            let nn = hopping.nn_distance.unwrap_or_else(|| {
                // Default first-neighbor distance of the second sheet's
                // hexagonal cell: a / sqrt(3) with a = |a1|.
                lattice2.matrix().column(0).norm() / 3.0f64.sqrt()
            });
            let t_intra = hopping.t_intra.unwrap_or(-2.7);
            let t_perp = hopping.t_perp.unwrap_or(0.48);
            let d0 = hopping.interlayer_distance.unwrap_or(3.35);
            let delta0 = hopping.interlayer_decay_length.unwrap_or(0.32);
            // Fall back to an envelope wide enough for the analytic family.
            let rate = hopping.decay_rate.unwrap_or(2.0f64.min(0.9 / delta0));
            let amp = hopping.decay_amplitude.unwrap_or_else(|| {
                let c_intra = t_intra.abs() * (rate * 1.3 * nn).exp();
                let mut c_inter: f64 = t_perp.abs();
                let mut x = 0.0;
                while x < 40.0 {
                    let d = (x * x + d0 * d0).sqrt();
                    c_inter = c_inter.max(t_perp.abs() * ((-(d - d0) / delta0) + rate * x).exp());
                    x += 0.05;
                }
                1.08 * c_intra.max(c_inter).max(1e-12)
            });
            HoppingFunction::graphene_exponential(
                t_intra, t_perp, d0, delta0, nn, cutoff, amp, rate,
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown hopping kind '{other}' (known: zero, graphene_exponential)"
            )))
        }
    };

    TBModel::new(lattice1, lattice2, orbitals1, orbitals2, h, "config")
}

/// Reads and parses a model configuration file.
pub fn model_from_file(path: &Path) -> Result<TBModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    model_from_toml(&text)
}
