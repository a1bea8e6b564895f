//! Exact LP, ALP and GRLP side by side on the ten-state queue.

use grlp::{
    aggregation_w, polynomial_features, random_w, solve_alp, solve_exact_lp, solve_grlp,
    weighted_l1_error, FeatureBasis, QueueConfig, SearchBox, StateWeights,
};

fn main() -> grlp::Result<()> {
    let cfg = QueueConfig::small();
    let model = cfg.build_mdp()?;
    let c = StateWeights::uniform(cfg.n);
    let phi = polynomial_features(cfg.n, cfg.k, FeatureBasis::Normalized)?;
    let b = SearchBox::default();
    let nd = cfg.n * model.num_actions();

    let exact = solve_exact_lp(&model, &c)?;
    let alp = solve_alp(&model, &phi, &c, b)?;
    println!(
        "ALP:        ‖J* − J̃‖_1,c = {:.4}",
        weighted_l1_error(&exact, &alp.values, &c)?
    );
    for (name, w) in [
        (
            "aggregated",
            aggregation_w(cfg.n, model.num_actions(), cfg.m)?,
        ),
        ("random", random_w(nd, cfg.m, 7)?),
    ] {
        let grlp = solve_grlp(&model, &phi, &w, &c, b)?;
        println!(
            "GRLP {name:<10} ‖J* − Ĵ‖_1,c = {:.4}  objective {:.4}  box clipped: {}",
            weighted_l1_error(&exact, &grlp.values, &c)?,
            grlp.objective,
            grlp.box_clipped
        );
    }
    Ok(())
}
