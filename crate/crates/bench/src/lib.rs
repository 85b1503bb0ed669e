//! Fixtures shared by the kernel benchmarks.

use semimdim_core::{FinModel, GeneratorMap, SemigroupSystem, SpaceDescriptor};

pub fn circle() -> SpaceDescriptor {
    SpaceDescriptor::torus(1).expect("valid")
}

pub fn doubling_tripling() -> SemigroupSystem {
    SemigroupSystem::new(
        circle(),
        vec![
            GeneratorMap::AffineMod1 {
                slope: 2,
                offset: 0.0,
            },
            GeneratorMap::AffineMod1 {
                slope: 3,
                offset: 0.0,
            },
        ],
    )
    .expect("valid")
}

pub fn rotations() -> SemigroupSystem {
    let a = 2f64.sqrt() - 1.0;
    SemigroupSystem::new(
        circle(),
        vec![
            GeneratorMap::Rotation { angles: vec![a] },
            GeneratorMap::Rotation {
                angles: vec![1.0 - a],
            },
        ],
    )
    .expect("valid")
}

/// `m` seeded points on the 2-torus.
pub fn scattered(m: usize, seed: u64) -> FinModel {
    FinModel::sampled(&SpaceDescriptor::torus(2).expect("valid"), m, seed).expect("valid")
}
