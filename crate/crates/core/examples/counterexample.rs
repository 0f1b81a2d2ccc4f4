//! The alternating pair whose limit depends on where the walk starts and
//! how the environment is shifted.

use parrondo::classify::{classify_full, environment_table, ClassifyOptions};
use parrondo::hitting::counterexample_series;
use parrondo::presets;
use parrondo::smallmat::eigenvalues;
use parrondo::spectral::{monodromy, Family};
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let model = RegimeModel::from_spec(&presets::counterexample_spec())?;
    let env = model.realize((0, 0), 0)?;
    println!("σ: A {:.4}, B even {:.4}, B odd {:.4}", env.sigma(0, 0)?, env.sigma(1, 0)?, env.sigma(1, 1)?);

    let s = counterexample_series(&model, &env, 0, 0)?;
    println!("λ = {:.4}, other class {:.4}", s.lambda, s.lambda_other);
    println!("S finite: {} ({:.4}), F finite: {}", s.s.finite, s.s.partial, s.f.finite);

    let eig = eigenvalues(&monodromy(&model, &env, Family::Full)?)?;
    println!("eigenvalues of A2 A1: {:?}", eig.moduli());

    for (shift, start, lambda, limit) in environment_table(&model, &env)?.rows {
        println!("regime {} at 0, shift {shift}: λ = {lambda:.4} -> {limit:?}", start + 1);
    }
    let c = classify_full(&model, &env, &ClassifyOptions::default())?;
    println!("verdict {:?}", c.verdict);
    Ok(())
}
