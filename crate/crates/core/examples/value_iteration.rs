//! Value iteration, greedy policy and policy evaluation on the ten-state queue.

use grlp::QueueConfig;

fn main() -> grlp::Result<()> {
    let model = QueueConfig::small().build_mdp()?;
    let j_star = model.value_iteration(1e-10, 1_000_000)?;
    let policy = model.greedy_policy(&j_star)?;
    let j_u = model.policy_evaluate(&policy)?;
    let pi = model.stationary_distribution(&policy, 1e-12)?;

    println!("state  J*          action  π_u*");
    for s in 0..model.num_states() {
        println!(
            "{s:>5}  {:>10.4}  {:>6}  {:.4}",
            j_star[s],
            policy.action(s),
            pi[s]
        );
    }
    println!("‖J* − J_u*‖∞ = {:.2e}", j_star.sup_distance(&j_u));
    Ok(())
}
