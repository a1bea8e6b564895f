//! GRLP error on the 10⁴-state queue for two state-weight decays, plus the
//! value of the policy that is greedy with respect to the GRLP solution.

use grlp::experiment::{run_table2, ExperimentConfig, Scenario, WRecipe, WRecipeKind};
use grlp::{
    aggregation_w, geometric_c, polynomial_features, solve_grlp, weighted_l1_error, FeatureBasis,
    QueueConfig, SearchBox,
};

fn main() -> grlp::Result<()> {
    let mut cfg = ExperimentConfig::preset(Scenario::Ql);
    cfg.w = vec![
        WRecipe::deterministic(WRecipeKind::Aggregation),
        WRecipe::seeded(WRecipeKind::ByC, vec![0]),
        WRecipe::seeded(WRecipeKind::Random, vec![0]),
    ];
    for row in run_table2(&cfg)?.rows {
        println!(
            "{:<12} ζ={:<6} {:>14.4}  box clipped: {}",
            row.w_kind,
            row.zeta.unwrap_or(f64::NAN),
            row.l1c_error.unwrap_or(f64::NAN),
            row.box_clipped.unwrap_or(true)
        );
    }

    let q = QueueConfig::large();
    let model = q.build_mdp()?;
    let phi = polynomial_features(q.n, q.k, FeatureBasis::Normalized)?;
    let w = aggregation_w(q.n, model.num_actions(), q.m)?;
    let j_star = model.value_iteration(1e-7, 10_000_000)?;
    for zeta in [0.9, 0.999] {
        let c = geometric_c(q.n, zeta)?;
        let grlp = solve_grlp(&model, &phi, &w, &c, SearchBox::default())?;
        let j_u = model.policy_evaluate(&model.greedy_policy(&grlp.values)?)?;
        println!(
            "ζ={zeta}: greedy policy ‖J* − J_û‖_1,c = {:.4}",
            weighted_l1_error(&j_star, &j_u, &c)?
        );
    }
    Ok(())
}
