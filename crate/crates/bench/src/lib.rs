//! Fixtures shared by the benchmarks.

use tvdispatch_core::{
    build_synthetic, validate_schedule, GraphPreset, GraphSequence, NodeProblem, RunMeta, RunMode, Schedule,
    SyntheticSpec,
};

pub struct Fixture {
    pub problems: Vec<NodeProblem>,
    pub graph: GraphSequence,
    pub schedule: Schedule,
    pub meta: RunMeta,
}

/// Synthetic instance on the switching preset with `κ₁ = κ₂ = 1/4`.
pub fn synthetic(nodes: usize, dim: usize, horizon: usize) -> Fixture {
    let spec = SyntheticSpec {
        nodes,
        dims: vec![dim],
        horizon,
        ..SyntheticSpec::default()
    };
    Fixture {
        problems: build_synthetic(&spec).expect("valid spec"),
        graph: GraphPreset::Switching3.build(nodes).expect("valid preset"),
        schedule: validate_schedule(0.25, 0.25).expect("valid schedule"),
        meta: RunMeta {
            scenario: "synthetic".into(),
            graph: "switching3".into(),
            seed: spec.seed,
            kappa1: 0.25,
            kappa2: 0.25,
            mode: RunMode::Distributed,
        },
    }
}
