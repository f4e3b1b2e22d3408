//! Run configuration and its provenance header.
//!
//! Every CSV the CLI writes starts with `# key=value ...`; parsing that line
//! back yields the identical `RunConfig`, so a result file pins down exactly
//! how to regenerate it. Floats are printed with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use moire_kpm::output::fmt_f64;

/// Where the model comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Builtin {
        name: String,
        overrides: BTreeMap<String, f64>,
    },
    File(String),
}

/// Full parameter provenance of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSource,
    pub r: f64,
    pub p: usize,
    pub n_disc: usize,
    /// `(min_eV, max_eV, count)`; `None` means the default 401-point grid
    /// spanning 98% of the scaled window.
    pub energy_grid: Option<(f64, f64, usize)>,
    pub output_path: Option<String>,
    /// `None` means hardware parallelism.
    pub threads: Option<usize>,
    pub seed: u64,
    /// Subcommand-specific fields (axis, lists, orbital, ...), kept sorted.
    pub extras: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(model: ModelSource) -> Self {
        Self {
            model,
            r: 1.0,
            p: 1,
            n_disc: 1,
            energy_grid: None,
            output_path: None,
            threads: None,
            seed: 0,
            extras: BTreeMap::new(),
        }
    }

    /// Serializes to the `key=value ...` provenance line (no leading `#`).
    pub fn print(&self) -> String {
        let mut s = String::new();
        match &self.model {
            ModelSource::Builtin { name, overrides } => {
                write!(s, "model={name}").unwrap();
                for (k, v) in overrides {
                    write!(s, " set.{k}={}", fmt_f64(*v)).unwrap();
                }
            }
            ModelSource::File(path) => write!(s, "config={path}").unwrap(),
        }
        write!(s, " r={}", fmt_f64(self.r)).unwrap();
        write!(s, " p={}", self.p).unwrap();
        write!(s, " ndisc={}", self.n_disc).unwrap();
        if let Some((lo, hi, n)) = self.energy_grid {
            write!(s, " egrid={},{},{n}", fmt_f64(lo), fmt_f64(hi)).unwrap();
        }
        match self.threads {
            Some(t) => write!(s, " threads={t}").unwrap(),
            None => write!(s, " threads=auto").unwrap(),
        }
        write!(s, " seed={}", self.seed).unwrap();
        if let Some(out) = &self.output_path {
            write!(s, " out={out}").unwrap();
        }
        for (k, v) in &self.extras {
            write!(s, " {k}={v}").unwrap();
        }
        s
    }

    /// Parses a provenance line produced by [`RunConfig::print`]. Accepts an
    /// optional leading `#`.
    pub fn parse(line: &str) -> Result<Self, String> {
        let line = line.trim_start_matches('#').trim();
        let mut model_name: Option<String> = None;
        let mut config_path: Option<String> = None;
        let mut overrides = BTreeMap::new();
        let mut cfg = RunConfig::new(ModelSource::File(String::new()));
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| format!("malformed token '{tok}'"))?;
            match k {
                "model" => model_name = Some(v.to_string()),
                "config" => config_path = Some(v.to_string()),
                "r" => cfg.r = parse_f64(v)?,
                "p" => cfg.p = parse_usize(v)?,
                "ndisc" => cfg.n_disc = parse_usize(v)?,
                "egrid" => {
                    let parts: Vec<&str> = v.split(',').collect();
                    if parts.len() != 3 {
                        return Err(format!("egrid needs min,max,count: '{v}'"));
                    }
                    cfg.energy_grid = Some((
                        parse_f64(parts[0])?,
                        parse_f64(parts[1])?,
                        parse_usize(parts[2])?,
                    ));
                }
                "threads" => {
                    cfg.threads = if v == "auto" {
                        None
                    } else {
                        Some(parse_usize(v)?)
                    }
                }
                "seed" => cfg.seed = v.parse().map_err(|e| format!("bad seed '{v}': {e}"))?,
                "out" => cfg.output_path = Some(v.to_string()),
                _ => {
                    if let Some(param) = k.strip_prefix("set.") {
                        overrides.insert(param.to_string(), parse_f64(v)?);
                    } else {
                        cfg.extras.insert(k.to_string(), v.to_string());
                    }
                }
            }
        }
        cfg.model = match (model_name, config_path) {
            (Some(name), None) => ModelSource::Builtin { name, overrides },
            (None, Some(path)) => ModelSource::File(path),
            _ => return Err("header must contain exactly one of model=/config=".into()),
        };
        Ok(cfg)
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse().map_err(|e| format!("bad float '{v}': {e}"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse().map_err(|e| format!("bad integer '{v}': {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_round_trips() {
        let mut overrides = BTreeMap::new();
        overrides.insert("twist_degrees".to_string(), 6.0);
        overrides.insert("t_perp".to_string(), 0.48);
        let mut cfg = RunConfig::new(ModelSource::Builtin {
            name: "tbg".into(),
            overrides,
        });
        cfg.r = 147.6;
        cfg.p = 300;
        cfg.n_disc = 3;
        cfg.energy_grid = Some((-9.5, 9.5, 401));
        cfg.threads = Some(2);
        cfg.seed = 7;
        cfg.output_path = Some("out/dos.csv".into());
        cfg.extras.insert("axis".into(), "r".into());

        let line = cfg.print();
        let back = RunConfig::parse(&line).unwrap();
        assert_eq!(back, cfg);

        // Also with the leading comment marker, as written to files.
        let back = RunConfig::parse(&format!("# {line}")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn provenance_round_trips_file_model_and_auto_threads() {
        let mut cfg = RunConfig::new(ModelSource::File("models/custom.toml".into()));
        cfg.r = 24.6;
        cfg.p = 64;
        let line = cfg.print();
        assert!(line.contains("threads=auto"));
        assert_eq!(RunConfig::parse(&line).unwrap(), cfg);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(RunConfig::parse("model=tbg r=notafloat").is_err());
        assert!(RunConfig::parse("r=1.0 p=2").is_err());
        assert!(RunConfig::parse("model=tbg config=x r=1").is_err());
    }
}
