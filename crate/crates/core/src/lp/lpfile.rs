//! CPLEX-style `.lp` text dump, for cross-checking with external solvers.

use std::io::Write;

use super::LinearProgram;

const TERMS_PER_LINE: usize = 6;

fn write_terms<W: Write>(w: &mut W, coefs: &[f64]) -> std::io::Result<()> {
    let mut written = 0;
    for (j, &c) in coefs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if written > 0 && written % TERMS_PER_LINE == 0 {
            write!(w, "\n   ")?;
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        write!(w, " {sign} {:.17e} x{}", c.abs(), j + 1)?;
        written += 1;
    }
    if written == 0 {
        write!(w, " 0 x1")?;
    }
    Ok(())
}

pub fn write_lp_format<W: Write>(mut w: W, lp: &LinearProgram) -> std::io::Result<()> {
    writeln!(w, "\\ {} variables, {} equality rows", lp.num_vars(), lp.num_constraints())?;
    writeln!(w, "Minimize")?;
    write!(w, " obj:")?;
    write_terms(&mut w, lp.objective())?;
    writeln!(w)?;
    writeln!(w, "Subject To")?;
    for i in 0..lp.num_constraints() {
        write!(w, " c{}:", i + 1)?;
        write_terms(&mut w, lp.eq_lhs().row(i))?;
        writeln!(w, " = {:.17e}", lp.eq_rhs()[i])?;
    }
    writeln!(w, "Bounds")?;
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.var_lower()[j], lp.var_upper()[j]);
        let name = format!("x{}", j + 1);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => writeln!(w, " {name} = {l:.17e}")?,
            (true, true) => writeln!(w, " {l:.17e} <= {name} <= {u:.17e}")?,
            (true, false) => writeln!(w, " {name} >= {l:.17e}")?,
            (false, true) => writeln!(w, " -inf <= {name} <= {u:.17e}")?,
            (false, false) => writeln!(w, " {name} free")?,
        }
    }
    writeln!(w, "End")
}
