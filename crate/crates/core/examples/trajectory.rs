//! A single (G, X) trajectory of the alternating game, every 100th step.

use parrondo::presets;
use parrondo::simulate::run_strided;
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let model = RegimeModel::from_spec(&presets::game_cprime_spec())?;
    let env = model.realize((0, 0), 0)?;
    let t = run_strided(&model, &env, (0, 0), 100_000, 7, 100)?;
    print!("{}", t.to_csv());
    eprintln!("final site {}", t.final_site());
    Ok(())
}
