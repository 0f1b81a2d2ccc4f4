//! ψ recursion for the alternating game: two limits along even and odd
//! starting points, and a seed that is a fixed point.

use parrondo::classify::psi_recursion;
use parrondo::presets;
use parrondo::smallmat::Mat;
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let model = RegimeModel::from_spec(&presets::game_cprime_spec())?;
    let env = model.realize((0, 0), 0)?;
    let seed = Mat::from_rows(&[[0.0, 1.0], [0.0, 1.0]]);
    let r = psi_recursion(&model, &env, &seed, 3000)?;
    println!("settles modulo {:?}", r.modulus);
    for l in &r.limits {
        println!("k ≡ {} (mod {}): {:.4?}", l.residue, l.modulus, l.psi);
    }
    for k in [1, 2, 10, 11, 100, 101, 1000, 1001] {
        let v = r.values[k - 1];
        println!("k = {k:>4}: x = {:.6}, y = {:.6}", v.x, v.y);
    }
    let q = psi_recursion(&model, &env, model.q(), 60)?;
    println!("seed Q constant: {}", q.constant);
    Ok(())
}
