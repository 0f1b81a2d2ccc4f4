//! Loading, editing and writing run configurations.

use parrondo::config::RunConfig;

fn main() -> parrondo::Result<()> {
    let mut cfg = RunConfig::preset("game-d")?;
    cfg.params.seed = 7;
    cfg.params.window = Some((-50, 50));
    let text = cfg.to_json();
    println!("{text}");
    let back = RunConfig::from_json(&text)?;
    assert_eq!(back, cfg);

    let bad = text.replace("\"schema_version\": 1", "\"schema_version\": 9");
    println!("{}", RunConfig::from_json(&bad).unwrap_err());
    Ok(())
}
