//! Effective chain of Game D and the ratio μ as a function of the
//! probability of choosing Game A.

use parrondo::classify::{mu_game_b, mu_game_d_curve, mu_verdict};
use parrondo::hitting::effective_p;
use parrondo::presets;
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let model = RegimeModel::from_spec(&presets::game_d_spec())?;
    let env = model.realize((0, 0), 0)?;
    let p: Vec<f64> = (0..3).map(|i| effective_p(&model, &env, i)).collect::<parrondo::Result<_>>()?;
    let mu = mu_game_b(p[0], p[1])?;
    eprintln!("effective p {p:?}, μ = {mu:.4} ({:?})", mu_verdict(mu));
    eprintln!("Game B alone: μ = {:.4}", mu_game_b(0.099, 0.749)?);

    println!("pi1,mu");
    for (x, m) in mu_game_d_curve(101)? {
        println!("{x},{m}");
    }
    Ok(())
}
