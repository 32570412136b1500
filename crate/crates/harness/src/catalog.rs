//! Scenarios shipped with the crate.

use crate::config::ScenarioConfig;
use crate::HarnessError;

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        pub const CATALOG: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../scenarios/", $name, ".toml")))),*
        ];
    };
}

bundled!(
    "hover",
    "rope-pull-1",
    "rope-pull-2",
    "rope-pull-3",
    "rope-pull-4",
    "rope-pull-5",
    "push-and-slide",
    "tof-servoing",
    "ndt-contact",
    "force-eval-1",
    "force-eval-2",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str, overrides: &[String]) -> Result<ScenarioConfig, HarnessError> {
    let text = source(name).ok_or_else(|| HarnessError::Config(format!("no bundled scenario `{name}`")))?;
    ScenarioConfig::parse(text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_scenario_parses_and_is_named_after_its_file() {
        for (name, _) in CATALOG {
            let cfg = load(name, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, *name);
        }
    }

    #[test]
    fn catalog_covers_every_preset() {
        for p in omnimanip::impedance::PRESETS.iter().filter(|p| p.name != "unit") {
            assert!(CATALOG.iter().any(|(_, text)| text.contains(&format!("preset = \"{}\"", p.name))), "{}", p.name);
        }
    }
}
