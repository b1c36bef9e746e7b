//! Runs every acceptance criterion and prints one line per criterion.

use serial_quota::reproduce::run_all;

#[test]
fn acceptance() {
    let outcomes = run_all(|o| println!("{o}")).expect("criteria run without errors");
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
