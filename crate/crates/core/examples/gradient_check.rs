//! Runs the full finite-difference gradient-check registry and prints a
//! pass/fail table.

use tokengan::checks::{render_table, run_checks, CheckSizes};

fn main() -> tokengan::Result<()> {
    let filter = std::env::args().nth(1);
    let outcomes = run_checks(CheckSizes::default(), filter.as_deref())?;
    print!("{}", render_table(&outcomes));
    let failed = outcomes.iter().filter(|o| !o.report.passed()).count();
    println!("{} checks, {failed} failed", outcomes.len());
    Ok(())
}
