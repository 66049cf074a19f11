//! Shared fixtures for the benchmarks.

use floquet_lattice::{LatticeConfig, ModelSpec, StateVector};

pub const SITES: usize = 101;

/// Defect lattice at the low-frequency dark point with unit loss.
pub fn dark_point() -> LatticeConfig {
    ModelSpec::paper(SITES, 0.3, 0.21, 1.0, 2.4308, 1.0).build().expect("valid preset")
}

pub fn central_site(config: &LatticeConfig) -> StateVector {
    StateVector::localized(config.n_sites(), config.offset_of(0).expect("odd lattice"))
}
