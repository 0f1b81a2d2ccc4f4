//! Decay rates of hitting probabilities from far right and far left.

use parrondo::hitting::{estimate_gamma, Direction};
use parrondo::presets;
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    for name in ["game-a", "game-b", "game-c", "game-cprime", "game-d", "counterexample"] {
        let model = RegimeModel::from_spec(&presets::get(name)?.model)?;
        let env = model.realize((0, 0), 0)?;
        let n = 60 * model.period().unwrap_or(1).max(2) as i64;
        let plus = estimate_gamma(&model, &env, Direction::Plus, n, 4 * n)?;
        let minus = estimate_gamma(&model, &env, Direction::Minus, n, 4 * n)?;
        println!("{name:<15} γ+ = {:+.5}  γ- = {:+.5}", plus.gamma, minus.gamma);
    }
    Ok(())
}
