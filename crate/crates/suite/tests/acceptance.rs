//! Acceptance suite at full scale. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

use realitygame_cli::verify::{run_all, Scale};

#[test]
fn acceptance_criteria() {
    let reports = run_all(Scale::Full, |r| println!("{r}")).expect("acceptance run errored");
    assert_eq!(reports.len(), 7);
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{}. {}", r.id, r.title))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
