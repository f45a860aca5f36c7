//! Plain-text dump of an LP, one nonzero per line, for debugging transcriptions.

use std::io::{self, Write};

use super::LinearProgram;

/// Writes sections `OBJ`, `EQ`, `LE`, `BOUNDS` with fixed-width columns.
pub fn write_fixed_column<W: Write>(lp: &LinearProgram, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "* vars={} eq={} le={}",
        lp.num_vars(),
        lp.num_eq(),
        lp.num_ineq()
    )?;
    writeln!(out, "OBJ")?;
    for (j, c) in lp.objective.iter().enumerate() {
        if *c != 0.0 {
            writeln!(out, "  x{:<10} {:>24.16e}", j, c)?;
        }
    }
    for (name, m, rhs) in [
        ("EQ", &lp.eq_matrix, &lp.eq_rhs),
        ("LE", &lp.ineq_matrix, &lp.ineq_rhs),
    ] {
        writeln!(out, "{name}")?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    writeln!(out, "  r{:<10} x{:<10} {:>24.16e}", i, j, v)?;
                }
            }
            writeln!(out, "  r{:<10} {:<11} {:>24.16e}", i, "RHS", rhs[i])?;
        }
    }
    writeln!(out, "BOUNDS")?;
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l != 0.0 || u != f64::INFINITY {
            writeln!(out, "  x{:<10} {:>24.16e} {:>24.16e}", j, l, u)?;
        }
    }
    Ok(())
}
