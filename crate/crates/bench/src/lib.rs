//! Fixtures shared by the benchmarks.

use ucpd::subproblem::UnitDuals;
use ucpd::{generate_instance, GeneratorConfig, Instance};

pub fn instance(seed: u64, units: usize, horizon: usize, points: usize) -> Instance {
    generate_instance(&GeneratorConfig::new(seed, units, horizon, points)).expect("benchmark instance")
}

/// Deterministic nonnegative prices around the fleet's marginal cost.
pub fn duals(instance: &Instance) -> UnitDuals {
    let unit = &instance.units[0];
    let top = unit.points.len();
    let scale = unit.period_cost(top) / unit.power_at(top);
    let wave = |k: usize, phase: f64| {
        (0..instance.horizon)
            .map(|t| k as f64 * scale * (1.0 + (t as f64 * 0.4 + phase).sin()).max(0.0))
            .collect::<Vec<f64>>()
    };
    UnitDuals {
        pi_p: wave(1, 0.0),
        pi_r1: wave(1, 1.3),
        pi_r2: wave(1, 2.1),
        sigma: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        let inst = instance(1, 4, 24, 3);
        inst.validate().unwrap();
        let d = duals(&inst);
        assert_eq!(d.pi_p.len(), 24);
        assert!(d.pi_p.iter().chain(&d.pi_r1).all(|v| *v >= 0.0));
    }
}
