//! The four reference scenarios.

use crate::config::{ScenarioId, SimConfig};

/// Canonical configuration of a scenario. All scenarios share the seed,
/// geometry, traffic and transport settings; they differ only in the AMC
/// table and whether HARQ is on.
pub fn build_scenario(id: ScenarioId) -> SimConfig {
    SimConfig::default_for(id)
}

/// Every scenario derived from `base`, in [`ScenarioId::ALL`] order.
pub fn all_scenarios(base: &SimConfig) -> Vec<SimConfig> {
    ScenarioId::ALL.iter().map(|&id| base.with_scenario(id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amc::TableLabel;

    #[test]
    fn scenario_presets() {
        let q = build_scenario(ScenarioId::Qpsk12);
        assert_eq!(q.amc.table.label(), &TableLabel::StaticQpsk12);
        assert!(!q.harq.enabled);

        let h = build_scenario(ScenarioId::AmcAHarq);
        assert_eq!(h.amc.table.label(), &TableLabel::A);
        assert!(h.harq.enabled);

        let a = build_scenario(ScenarioId::AmcA);
        let b = build_scenario(ScenarioId::AmcB);
        assert_eq!(a.amc.table.label(), &TableLabel::A);
        assert_eq!(b.amc.table.label(), &TableLabel::B);
        assert!(!a.harq.enabled && !b.harq.enabled);
        let mut b_as_a = b.clone();
        b_as_a.amc.table = a.amc.table.clone();
        b_as_a.scenario = a.scenario;
        assert_eq!(b_as_a, a);
    }

    #[test]
    fn derived_scenarios_keep_overrides() {
        let mut base = build_scenario(ScenarioId::AmcA);
        base.seed = 99;
        base.channel.fading.sigma_db = 3.0;
        for cfg in all_scenarios(&base) {
            assert_eq!(cfg.seed, 99);
            assert_eq!(cfg.channel, base.channel);
        }
    }
}
