use std::path::PathBuf;

use qdenoise::ScenarioConfig;

fn shipped(name: &str) -> ScenarioConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    ScenarioConfig::from_toml_str(&text).unwrap()
}

#[test]
fn shipped_files_match_presets() {
    for name in ["desk", "extended", "paper"] {
        let file = shipped(name);
        assert_eq!(file, ScenarioConfig::preset(name).unwrap(), "{name}");
        file.validate().unwrap();
        assert_eq!(file.hash(), ScenarioConfig::preset(name).unwrap().hash());
    }
}

#[test]
fn serialized_form_round_trips() {
    let c = ScenarioConfig::paper();
    assert_eq!(ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
}
