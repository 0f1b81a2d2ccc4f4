//! Environment driven by the Gauss map x -> {1/x}: the ergodic mean of
//! log σ, the verdict, and the QR spectrum on a realized window.

use parrondo::classify::classify_single_regime;
use parrondo::envgen::{ergodic_log_sigma_mean, EnvSpec};
use parrondo::spectral::{forward_spectrum, Family, QrOptions};
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    let m = ergodic_log_sigma_mean(&EnvSpec::GaussMap, 1_000_000, 7)?;
    println!("E log σ ≈ {:.5} ± {:.5} (log 2 / 2 = {:.5})", m.mean, m.stderr, std::f64::consts::LN_2 / 2.0);
    let c = classify_single_regime(&EnvSpec::GaussMap, 1_000_000, 7)?;
    println!("verdict {:?}", c.verdict);

    let model = RegimeModel::single(EnvSpec::GaussMap)?;
    let env = model.realize((-10, 100_010), 7)?;
    let s = forward_spectrum(&model, &env, Family::Full, QrOptions { n_steps: 100_000, ..QrOptions::default() })?;
    println!("exponents {:?}, band {:?}", s.exponents, s.tol_zero);
    Ok(())
}
