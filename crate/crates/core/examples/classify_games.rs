//! Verdicts and the criteria behind them for every preset.

use parrondo::classify::{classify_full, ClassifyOptions};
use parrondo::presets;
use parrondo::RegimeModel;

fn main() -> parrondo::Result<()> {
    for name in presets::NAMES.iter().filter(|n| **n != "paper-games") {
        let cfg = presets::get(name)?;
        let model = RegimeModel::from_spec(&cfg.model)?;
        let env = model.realize(cfg.params.env_window, cfg.params.seed)?;
        let c = classify_full(&model, &env, &ClassifyOptions::default())?;
        let criteria: Vec<&str> = c.evidence.iter().map(|e| e.criterion.as_str()).collect();
        println!("{name:<18} {:?} ({:?})", c.verdict, c.confidence);
        println!("{:<18} {}", "", criteria.join("; "));
        if let Some(d) = c.dimensions {
            println!(
                "{:<18} k={} d0={} d0-={} inverse d0={} d0-={}",
                "", d.k, d.forward_d0, d.forward_d0_minus, d.inverse_d0, d.inverse_d0_minus
            );
        }
    }
    Ok(())
}
