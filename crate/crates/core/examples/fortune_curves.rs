//! Fortune paths of Games A, B, C and D from 100, plus final-fortune
//! statistics over replicates.
//!
//! cargo run --release --example fortune_curves [steps] [seed] > fortune.csv

use parrondo::presets;
use parrondo::simulate::{final_fortune_stats, fortune_curves_csv, Game};
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);

    let cfg = presets::get("paper-games")?;
    let built: Vec<_> = cfg
        .games
        .iter()
        .map(|g| {
            let model = RegimeModel::from_spec(&g.model)?;
            let env = model.realize((0, 0), seed)?;
            Ok((g.name.clone(), g.start_regime - 1, model, env))
        })
        .collect::<parrondo::Result<_>>()?;
    let games: Vec<Game<'_>> = built
        .iter()
        .map(|(name, start, model, env)| Game { name: name.clone(), model, env, start_regime: *start })
        .collect();

    print!("{}", fortune_curves_csv(&games, steps, seed)?);
    for g in &games {
        let s = final_fortune_stats(g, steps, 200, seed)?;
        eprintln!("{}: mean final {:.1} ± {:.1} (z = {:+.2})", s.game, s.mean_final, s.stderr, s.z());
    }
    Ok(())
}
