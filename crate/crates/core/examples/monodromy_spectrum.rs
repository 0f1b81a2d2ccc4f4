//! Lyapunov exponents of Game C from the monodromy eigenvalues and from
//! QR iteration, side by side.

use parrondo::presets;
use parrondo::spectral::{exact_periodic_spectrum, forward_spectrum_qr, inverse_spectrum, ruelle_dual_dims, Family, QrOptions};
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let model = RegimeModel::from_spec(&presets::game_c_spec())?;
    let env = model.realize((0, 0), 0)?;
    let exact = exact_periodic_spectrum(&model, &env, Family::Full)?;
    let qr = forward_spectrum_qr(&model, &env, Family::Full, QrOptions { n_steps: 20_000, ..QrOptions::default() })?;
    let inv = inverse_spectrum(&model, &env, Family::Full, QrOptions::default())?;

    println!("{:>3} {:>14} {:>14} {:>10}", "k", "exact", "qr", "qr band");
    for k in 0..exact.dim() {
        println!("{:>3} {:>14.8} {:>14.8} {:>10.2e}", k + 1, exact.exponents[k], qr.exponents[k], qr.tol_zero[k]);
    }
    println!("forward: d0 = {}, d0- = {}", exact.d0, exact.d0_minus);
    println!("inverse: d0 = {}, d0- = {}", inv.d0, inv.d0_minus);
    let (dt0, dt0m) = ruelle_dual_dims(&exact)?;
    println!("inverse by duality: d0 = {dt0}, d0- = {dt0m}");
    Ok(())
}
