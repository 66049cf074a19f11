//! Floquet analysis of a driven, lossy tight-binding chain: monodromy spectra,
//! classification of bound states in the continuum, time evolution, and a
//! high-frequency effective model.

// Range checks are written as `!(x <= limit)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod eigen;
pub mod experiments;
pub mod floquet;
pub mod hfe;
pub mod integrator;
pub mod lattice;
pub mod scenario;

pub use num_complex::Complex64 as C64;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use bessel::{bessel_j, bessel_j0_first_zero, BesselError};
pub use eigen::{eigen_decompose, Eigen, EigenError};
pub use experiments::{
    dark_bic_evolution, decay_sweep, evolve_dark_bic, find_dark_bic, gaussian_packet, ipr_map, nonlinear_stability, reflectivity, reflectivity_sweep,
    scatter, DarkBic, DarkBicEvolution, DecayPoint, DecayVariable, ExperimentError, IprRow, NonlinearPoint, OmegaTuning, PacketSpec,
    Probe, ReflectivityPoint, ReflectivityResult,
};
pub use floquet::{
    classify, compute_spectrum, continuum_band, dark_bic_imag_trend, floquet_spectrum, ipr, monodromy, Band, ClassifyParams,
    FloquetError, FloquetMode, Label, SpectrumResult,
};
pub use hfe::{
    beta_root, effective_hamiltonian, effective_hopping, hfe_vs_exact, named_rates, pentamer_eigenvalues, q_gamma, q_gamma_checked,
    reduced_chain, EffectiveModel, HfeError, HfeReport, NamedRates, ReducedChain, RotatingFrameModel,
};
pub use integrator::{
    convergence_check, decay_probability, evolve, evolve_nonlinear, norm, profile_overlap, EvolveOptions, Frame, IntegrationError,
    StateVector, Trajectory,
};
pub use lattice::{
    multimode_profile, paper_defect_profile, uniform_profile, Boundary, Drive, DriveParams, DriveStrength, LatticeConfig, LatticeError,
    ModelSpec, Profile,
};
pub use scenario::{Grid, Scenario, ScenarioError};
