//! Every term of the GRLP error bound on a few random instances.

use grlp::experiment::instances::{random_instance, InstanceParams};
use grlp::{error_report, ReportOptions, SearchBox};

fn main() -> grlp::Result<()> {
    println!("seed  eps*      E_T       bound      ‖J*−Ĵ‖_1,c");
    for seed in 0..8 {
        let inst = random_instance(&InstanceParams::default(), seed)?;
        let r = error_report(
            &inst.model,
            &inst.phi,
            &inst.w,
            &inst.c,
            SearchBox::default(),
            ReportOptions::default(),
        )?;
        println!(
            "{seed:>4}  {:<8.4}  {:<8.4}  {:<9.4}  {:.4}",
            r.eps_star,
            r.e_t.unwrap_or(f64::NAN),
            r.bound_rhs.unwrap_or(f64::NAN),
            r.lhs_weighted_l1
        );
    }
    Ok(())
}
