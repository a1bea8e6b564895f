//! The projections Γ and Γ̃ and their fixed points on a random instance.

use grlp::experiment::instances::{random_instance, InstanceParams};
use grlp::{alub_project, fixed_point, lub_project, ProjectionContext, SearchBox};

fn main() -> grlp::Result<()> {
    let inst = random_instance(&InstanceParams::default(), 3)?;
    let (m, phi, w) = (&inst.model, &inst.phi, &inst.w);
    let b = SearchBox::default();
    let lub = ProjectionContext::lub(m, phi, b)?;
    let alub = ProjectionContext::aggregated(m, phi, w, b)?;

    let j_star = m.value_iteration(1e-10, 1_000_000)?;
    let g = lub_project(&lub, &j_star)?;
    let h = alub_project(&alub, &j_star)?;
    println!(
        "n = {}, d = {}, k = {}, m = {}",
        m.num_states(),
        m.num_actions(),
        phi.num_features(),
        w.num_columns()
    );
    println!("J*    {:?}", round(&j_star));
    println!("ΓJ*   {:?}", round(&g.values));
    println!("Γ̃J*   {:?}", round(&h.values));

    let zeros = vec![0.0; m.num_states()];
    let v = fixed_point(&lub, &zeros, 1e-8, 100_000)?;
    let vh = fixed_point(&alub, &zeros, 1e-8, 100_000)?;
    println!("Ṽ     {:?} ({} iterations)", round(&v.values), v.iterations);
    println!(
        "V̂     {:?} ({} iterations)",
        round(&vh.values),
        vh.iterations
    );
    Ok(())
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
