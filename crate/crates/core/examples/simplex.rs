//! The box-constrained LP solver on a few small problems.

use grlp::{chebyshev_fit, lp_solve, DenseLp, SearchBox};
use nalgebra::DMatrix;

fn main() -> grlp::Result<()> {
    // min x + y  s.t.  x + 2y ≥ 2,  3x + y ≥ 3,  x, y ∈ [0, 10]
    let lp = DenseLp::new(
        vec![1.0, 1.0],
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]),
        vec![2.0, 3.0],
        vec![0.0, 0.0],
        vec![10.0, 10.0],
    )?;
    let out = lp_solve(&lp)?;
    println!(
        "bounded:    {:?} x = {:?} value = {}",
        out.status, out.x, out.value
    );

    // min x  s.t.  0·x ≥ −1: only the box stops it
    let lp = DenseLp::boxed(
        vec![1.0],
        DMatrix::from_row_slice(1, 1, &[0.0]),
        vec![-1.0],
        SearchBox::new(5.0)?,
    )?;
    let out = lp_solve(&lp)?;
    println!("box-bound:  {:?} x = {:?}", out.status, out.x);

    // x ≥ 5 with x ∈ [−1, 1]
    let lp = DenseLp::new(
        vec![1.0],
        DMatrix::from_row_slice(1, 1, &[1.0]),
        vec![5.0],
        vec![-1.0],
        vec![1.0],
    )?;
    println!("infeasible: {:?}", lp_solve(&lp)?.status);

    // best sup-norm line through four points
    let phi = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
    let fit = chebyshev_fit(&phi, &[0.0, 2.0, 1.0, 3.0], SearchBox::default())?;
    println!(
        "sup-norm fit: coefficients {:?}, error {}",
        fit.coeffs, fit.eps
    );
    Ok(())
}
