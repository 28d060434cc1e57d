//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! `MODGFF_BUDGET=quick` or `smoke` selects a smaller Monte Carlo budget and
//! `MODGFF_ONLY=6,7` restricts the run to the listed criteria.

use std::path::Path;
use std::process::ExitCode;

use modgff_cli::acceptance::{run, write_tables, Budget, CRITERIA, DEFAULT_SEED};

fn main() -> ExitCode {
    let budget = match std::env::var("MODGFF_BUDGET").as_deref() {
        Ok("quick") => Budget::quick(),
        Ok("smoke") => Budget::smoke(),
        _ => Budget::full(),
    };
    let ids: Vec<u8> = match std::env::var("MODGFF_ONLY") {
        Ok(s) => s.split(',').filter_map(|x| x.trim().parse().ok()).collect(),
        Err(_) => CRITERIA.iter().map(|(id, _)| *id).collect(),
    };
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    println!("acceptance suite: budget {}, seed {DEFAULT_SEED}", budget.name);
    let outcomes = run(&budget, DEFAULT_SEED, &ids, &out, |o| println!("{}", o.line()));
    if let Err(e) = write_tables(&outcomes, &out) {
        eprintln!("cannot write tables: {e}");
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "{} passed, {failed} failed; tables in {}",
        outcomes.len() - failed,
        out.display()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
