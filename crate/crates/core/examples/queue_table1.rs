//! E_T for each constraint-matrix recipe on the ten-state queue. Writes
//! `table1.csv` and `table1.json` to the directory given as the first
//! argument (default `out/table1`).

use grlp::experiment::{
    run_table1, write_table1, ExperimentConfig, Scenario, WRecipe, WRecipeKind,
};

fn main() -> grlp::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "out/table1".into());
    let seeds: Vec<u64> = (0..5).collect();
    let mut cfg = ExperimentConfig::preset(Scenario::Qs);
    cfg.w = vec![
        WRecipe::deterministic(WRecipeKind::Aggregation),
        WRecipe::seeded(WRecipeKind::ByC, seeds.clone()),
        WRecipe::seeded(WRecipeKind::Ideal, seeds.clone()),
        WRecipe::seeded(WRecipeKind::Random, seeds),
    ];
    let table = run_table1(&cfg)?;
    for row in &table.rows {
        println!(
            "{:<12} {:>5} {:>16.4} {}",
            row.w_kind,
            fmt(row.seed),
            row.e_t.unwrap_or(f64::NAN),
            row.box_clipped.unwrap_or(true)
        );
    }
    write_table1(&table, out.as_ref())
}

fn fmt(seed: Option<u64>) -> String {
    seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into())
}
