//! The checked-in `.idg.json` fixtures match the programmatic ones.
//! Set `IDG_BLESS=1` to rewrite them.

use std::path::PathBuf;

use idg_core::fixtures;
use idg_core::io::{load, save};
use idg_core::Diagram;

fn cases() -> Vec<(&'static str, Diagram)> {
    vec![
        ("wildcatter.idg.json", fixtures::wildcatter()),
        ("betpass.idg.json", fixtures::bet_pass(0.0)),
        ("betpass_risk_averse.idg.json", fixtures::bet_pass(0.002)),
        ("oil_seismic.idg.json", fixtures::oil_seismic()),
        ("two_stage.idg.json", fixtures::two_stage()),
    ]
}

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

#[test]
fn fixture_files_match_builders() {
    let bless = std::env::var_os("IDG_BLESS").is_some();
    for (name, diagram) in cases() {
        let p = path(name);
        if bless {
            std::fs::write(&p, save(&diagram)).unwrap();
        }
        let bytes = std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(load(&bytes).unwrap(), diagram, "{name}");
        assert_eq!(bytes, save(&diagram), "{name} is not in canonical form");
    }
}
