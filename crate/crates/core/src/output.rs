//! CSV emission with reproducible formatting.
//!
//! Every file starts with a `#`-prefixed provenance header supplied by the
//! caller, then a column-name line, then rows. Numbers are printed with 17
//! significant digits so a round trip through text is lossless and repeat
//! runs are byte-identical.

use std::io::Write;

use crate::dos::{ConvergenceReport, DosCurve};
use crate::error::Result;
use crate::geometry::SitePoint;
use crate::hamiltonian::ClusterHamiltonian;
use crate::kpm::{LdosSample, MomentTable};

/// Formats a float with 17 significant digits (lossless for f64).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_header(w: &mut impl Write, provenance: &str) -> Result<()> {
    writeln!(w, "# {provenance}")?;
    Ok(())
}

/// DoS curve: `energy_eV,dos_per_eV`.
pub fn write_dos_csv(w: &mut impl Write, provenance: &str, curve: &DosCurve) -> Result<()> {
    write_header(w, provenance)?;
    writeln!(w, "energy_eV,dos_per_eV")?;
    for (e, v) in curve.epsilons.iter().zip(curve.values.iter()) {
        writeln!(w, "{},{}", fmt_f64(*e), fmt_f64(*v))?;
    }
    Ok(())
}

/// LDoS samples for one configuration: `energy_eV,ldos_per_eV`.
pub fn write_ldos_csv(w: &mut impl Write, provenance: &str, samples: &[LdosSample]) -> Result<()> {
    write_header(w, provenance)?;
    writeln!(w, "energy_eV,ldos_per_eV")?;
    for s in samples {
        writeln!(w, "{},{}", fmt_f64(s.epsilon), fmt_f64(s.value))?;
    }
    Ok(())
}

/// Chebyshev moment table: `m,mu`.
pub fn write_moments_csv(w: &mut impl Write, provenance: &str, table: &MomentTable) -> Result<()> {
    write_header(w, provenance)?;
    writeln!(w, "m,mu")?;
    for (m, mu) in table.mu.iter().enumerate() {
        writeln!(w, "{m},{}", fmt_f64(*mu))?;
    }
    Ok(())
}

/// Convergence report: `param,error,log_error`.
pub fn write_convergence_csv(
    w: &mut impl Write,
    provenance: &str,
    report: &ConvergenceReport,
) -> Result<()> {
    write_header(w, provenance)?;
    writeln!(w, "param,error,log_error")?;
    for s in &report.samples {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(s.parameter),
            fmt_f64(s.error),
            fmt_f64(s.error.ln())
        )?;
    }
    Ok(())
}

/// Site list: `n1,n2,x_angstrom,y_angstrom`.
pub fn write_sites_csv(w: &mut impl Write, provenance: &str, sites: &[SitePoint]) -> Result<()> {
    write_header(w, provenance)?;
    writeln!(w, "n1,n2,x_angstrom,y_angstrom")?;
    for s in sites {
        writeln!(
            w,
            "{},{},{},{}",
            s.n[0],
            s.n[1],
            fmt_f64(s.x[0]),
            fmt_f64(s.x[1])
        )?;
    }
    Ok(())
}

/// Sparse matrix dump in coordinate-list form: `row,col,value_eV`.
pub fn write_matrix_csv(
    w: &mut impl Write,
    provenance: &str,
    h: &ClusterHamiltonian,
) -> Result<()> {
    write_header(w, provenance)?;
    writeln!(w, "row,col,value_eV")?;
    for (i, j, v) in h.entries() {
        writeln!(w, "{i},{j},{}", fmt_f64(v))?;
    }
    Ok(())
}
