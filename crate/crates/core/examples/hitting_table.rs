//! Hitting probabilities of 0 for Game D: solver table, window bracket,
//! visit counts and a Monte Carlo cross-check.

use parrondo::hitting::{kth_visit, solve_auto, solve_window, BoundaryMode};
use parrondo::presets;
use parrondo::simulate::{mc_hitting, HitOptions};
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let model = RegimeModel::from_spec(&presets::game_d_spec())?;
    let env = model.realize((0, 0), 0)?;

    let b = solve_auto(&model, &env, 0, &[-10, -5, 5, 10])?;
    println!("bracket gap {:.2e} after {} doublings (converged: {})", b.gap, b.doublings, b.converged);
    for i in [-10, -5, -1, 1, 5, 10] {
        println!("f({i:>3}) killed {:?} absorbed {:?}", b.killed.f(i)?, b.absorbed.f(i)?);
    }
    println!("return matrix {:?}", b.killed.return_matrix);
    for k in 1..=4 {
        println!("P(at least {k} visits from (1, 3)) = {:.6}", kth_visit(&b.killed, 0, 3, k)?);
    }

    let window = (-30, 30);
    let table = solve_window(&model, &env, 0, window, BoundaryMode::Killed)?;
    let opts = HitOptions { kill_window: Some(window), ..HitOptions::new(20_000, 1) };
    let mc = mc_hitting(&model, &env, (0, 5), 0, opts)?;
    println!("from (1, 5): solver {:.5}, Monte Carlo {:.5} ± {:.5}", table.f(5)?[0], mc.value, mc.stderr);

    std::fs::write(std::env::temp_dir().join("game_d_hitting.csv"), table.to_csv())?;
    Ok(())
}
