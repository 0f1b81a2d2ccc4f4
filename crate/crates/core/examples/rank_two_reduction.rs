//! A rank-two switching matrix on three regimes: the factorization, the
//! reduced matrices, and the scalar fallback when two regimes coincide.

use parrondo::model::{check_hypothesis_inv, rank1_reduce_degenerate, rank_decompose, RANK_TOL};
use parrondo::presets;
use parrondo::spectral::{exact_periodic_spectrum, Family};
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let model = RegimeModel::from_spec(&presets::weird_rank2_spec())?;
    let rd = rank_decompose(model.q(), RANK_TOL)?;
    println!("r = {}, rows {:?}, Θ = {:?}", rd.r, rd.row_permutation, rd.theta);

    let env = model.realize((0, 0), 0)?;
    let hyp = check_hypothesis_inv(&model, &env, (0, 2))?;
    for (i, dm, dn) in &hyp.sites {
        println!("site {i}: det M = {dm:.6}, det N = {dn:.6}");
    }
    let s = exact_periodic_spectrum(&model, &env, Family::Reduced)?;
    println!("reduced exponents {:.6?}, d0 = {}, d0- = {}", s.exponents, s.d0, s.d0_minus);

    let degen = RegimeModel::from_spec(&presets::weird_degenerate_spec())?;
    let env = degen.realize((0, 0), 0)?;
    println!("duplicated regimes: invertible = {}", check_hypothesis_inv(&degen, &env, (0, 2))?.holds);
    let red = rank1_reduce_degenerate(&degen, &env, (0, 2))?;
    for i in 0..3 {
        println!("site {i}: effective p = {:.6}", red.effective_p(&degen, &env, i)?);
    }
    Ok(())
}
