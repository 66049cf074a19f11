//! Scripted numerical experiments: IPR maps, dark-BIC evolution, decay and
//! nonlinearity sweeps, and wave-packet scattering.
//!
//! Sweep points are independent and run on the rayon pool; results keep the
//! order of the input grid.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floquet::{compute_spectrum, ClassifyParams, FloquetError, FloquetMode, SpectrumResult};
use crate::hfe::{beta_root, HfeError, DEFAULT_BETA_BRACKET};
use crate::integrator::{decay_probability, evolve, profile_overlap, EvolveOptions, IntegrationError, StateVector, Trajectory};
use crate::lattice::{DriveStrength, LatticeConfig, LatticeError, ModelSpec, Profile};

/// Packet tail at the chain ends above which a warning is raised.
pub const EDGE_TAIL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error("invalid packet: {0}")]
    InvalidPacket(String),
    #[error("no dark BIC at {0}")]
    MissingDarkBic(String),
    #[error("profile `{0}` has no (k, g) pair to retune the drive")]
    NoRetuneParameters(&'static str),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Hfe(#[from] HfeError),
}

fn nonempty<T>(grid: &[T], name: &'static str) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        Err(ExperimentError::EmptyGrid(name))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    /// Site label of the packet center `n₀`.
    pub center: f64,
    /// Gaussian width `w₀` in sites.
    pub width: f64,
    /// Momentum `p`, entering as `exp(-i p n)`.
    pub momentum: f64,
}

impl Default for PacketSpec {
    fn default() -> Self {
        Self {
            center: -20.0,
            width: 4.0,
            momentum: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPacket {
    pub state: StateVector,
    /// Larger of the two end-site probabilities.
    pub edge_tail: f64,
}

impl GaussianPacket {
    pub fn warning(&self) -> Option<String> {
        (self.edge_tail > EDGE_TAIL_LIMIT).then(|| {
            format!(
                "packet tail at the lattice edge is {:.3e} (limit {EDGE_TAIL_LIMIT:e}); edge reflections may contaminate results",
                self.edge_tail
            )
        })
    }
}

/// Unit-norm `C_n ∝ exp[-(n - n₀)²/w₀² - i p n]` on the centered labels.
pub fn gaussian_packet(spec: &PacketSpec, n_sites: usize) -> Result<GaussianPacket, ExperimentError> {
    if !(spec.width > 0.0 && spec.width.is_finite()) {
        return Err(ExperimentError::InvalidPacket(format!("width must be positive, got {}", spec.width)));
    }
    if !(spec.momentum.abs() <= std::f64::consts::PI) {
        return Err(ExperimentError::InvalidPacket(format!("|p| must not exceed π, got {}", spec.momentum)));
    }
    if n_sites == 0 || !spec.center.is_finite() {
        return Err(ExperimentError::InvalidPacket("empty lattice or non-finite center".into()));
    }
    let half = (n_sites as i64 - 1) / 2;
    let raw: Vec<C64> = (-half..=half)
        .map(|n| {
            let x = (n as f64 - spec.center) / spec.width;
            C64::from_polar((-x * x).exp(), -spec.momentum * n as f64)
        })
        .collect();
    let state = StateVector::new(raw).normalized();
    let first = state.amplitudes[0].norm_sqr();
    let last = state.amplitudes[n_sites - 1].norm_sqr();
    Ok(GaussianPacket {
        state,
        edge_tail: first.max(last),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectivityResult {
    pub reflectivity: f64,
    pub t_final: f64,
    pub initial_norm: f64,
    pub left_population: f64,
}

/// `R = Σ_{n ≤ 0} |C_n(t_f)|² / Σ_n |C_n(0)|²`, read at the sample nearest `t_f`.
pub fn reflectivity(traj: &Trajectory, config: &LatticeConfig, t_final: f64) -> Result<ReflectivityResult, ExperimentError> {
    let idx = traj.nearest_sample(t_final)?;
    let state = &traj.states()[idx];
    let left_population = state
        .iter()
        .enumerate()
        .filter(|(i, _)| config.site_label(*i) <= 0)
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>();
    Ok(ReflectivityResult {
        reflectivity: left_population / traj.initial_norm(),
        t_final: traj.times()[idx],
        initial_norm: traj.initial_norm(),
        left_population,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRun {
    pub trajectory: Trajectory,
    pub result: ReflectivityResult,
    pub packet_warning: Option<String>,
}

/// Sends a Gaussian packet onto the lattice for `periods` drive periods.
pub fn scatter(
    config: &LatticeConfig,
    packet: &PacketSpec,
    periods: f64,
    steps_per_period: usize,
    samples_per_period: usize,
) -> Result<ScatterRun, ExperimentError> {
    let p = gaussian_packet(packet, config.n_sites())?;
    let t_final = periods * config.drive().period();
    let options = EvolveOptions::new(t_final)
        .steps_per_period(steps_per_period)
        .samples_per_period(samples_per_period);
    let trajectory = evolve(config, &p.state, &options)?;
    let result = reflectivity(&trajectory, config, t_final)?;
    Ok(ScatterRun {
        trajectory,
        result,
        packet_warning: p.warning(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectivityPoint {
    pub gamma: f64,
    pub reflectivity: f64,
    pub leak: f64,
    pub leak_identity_residual: f64,
}

/// `R(γ)` after `periods` periods for each loss strength.
pub fn reflectivity_sweep(
    base: &ModelSpec,
    gammas: &[f64],
    packet: &PacketSpec,
    periods: f64,
    steps_per_period: usize,
) -> Result<Vec<ReflectivityPoint>, ExperimentError> {
    nonempty(gammas, "gamma")?;
    gammas
        .par_iter()
        .map(|&gamma| {
            let config = base.with_gamma(gamma).build()?;
            let run = scatter(&config, packet, periods, steps_per_period, 1)?;
            Ok(ReflectivityPoint {
                gamma,
                reflectivity: run.result.reflectivity,
                leak: *run.trajectory.leak().last().unwrap_or(&0.0),
                leak_identity_residual: run.trajectory.leak_identity_residual(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IprRow {
    pub gamma_norm: f64,
    /// IPR by mode index (ascending `Re ε`).
    pub ipr: Vec<f64>,
    pub quasi_energy: Vec<C64>,
}

/// IPR of every Floquet mode at each drive strength `Γ`.
pub fn ipr_map(base: &ModelSpec, gamma_norms: &[f64], steps_per_period: usize) -> Result<Vec<IprRow>, ExperimentError> {
    nonempty(gamma_norms, "gamma_norm")?;
    gamma_norms
        .par_iter()
        .map(|&gn| {
            let config = base.with_gamma_norm(gn).build()?;
            let s = compute_spectrum(&config, steps_per_period, &ClassifyParams::default())?;
            Ok(IprRow {
                gamma_norm: gn,
                ipr: s.modes.iter().map(|m| m.ipr).collect(),
                quasi_energy: s.quasi_energies(),
            })
        })
        .collect()
}

/// Spectrum at one parameter point together with its dark BIC.
#[derive(Debug, Clone, PartialEq)]
pub struct DarkBic {
    pub config: LatticeConfig,
    pub spectrum: SpectrumResult,
    pub mode: FloquetMode,
    pub lossy_population: f64,
}

fn describe(spec: &ModelSpec) -> String {
    let drive = match spec.strength {
        DriveStrength::Normalized(gn) => format!("Γ = {gn}"),
        DriveStrength::Amplitude(f0) => format!("F0 = {f0}"),
    };
    format!("{} γ = {}, {drive}, ω = {}", spec.profile.name(), spec.gamma, spec.omega)
}

pub fn find_dark_bic(spec: &ModelSpec, steps_per_period: usize, params: &ClassifyParams) -> Result<DarkBic, ExperimentError> {
    let config = spec.with_u(0.0).build()?;
    let spectrum = compute_spectrum(&config, steps_per_period, params)?;
    let mode = spectrum
        .dark_bic()
        .cloned()
        .ok_or_else(|| ExperimentError::MissingDarkBic(describe(spec)))?;
    let lossy_population = mode.population_on(&config.lossy_offsets());
    Ok(DarkBic {
        config,
        spectrum,
        mode,
        lossy_population,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarkBicEvolution {
    pub dark: DarkBic,
    pub trajectory: Trajectory,
    /// Squared overlap of the renormalized initial and final profiles.
    pub overlap: f64,
    /// Norm at every whole period, starting with `t = 0`.
    pub period_norms: Vec<f64>,
    pub final_lossy_population: f64,
}

/// Evolves the exact dark BIC of `spec` (with the nonlinearity of `spec`
/// switched on during the evolution) for `periods` drive periods.
pub fn dark_bic_evolution(
    spec: &ModelSpec,
    periods: usize,
    steps_per_period: usize,
    samples_per_period: usize,
    params: &ClassifyParams,
) -> Result<DarkBicEvolution, ExperimentError> {
    let dark = find_dark_bic(spec, steps_per_period, params)?;
    evolve_dark_bic(dark, spec, periods, steps_per_period, samples_per_period)
}

/// Evolves an already located dark BIC under `spec` (which may add a nonlinearity).
pub fn evolve_dark_bic(
    dark: DarkBic,
    spec: &ModelSpec,
    periods: usize,
    steps_per_period: usize,
    samples_per_period: usize,
) -> Result<DarkBicEvolution, ExperimentError> {
    let config = spec.build()?;
    let period = config.drive().period();
    let initial = StateVector::new(dark.mode.profile.clone());
    let options = EvolveOptions::new(periods as f64 * period)
        .steps_per_period(steps_per_period)
        .samples_per_period(samples_per_period.max(1));
    let trajectory = evolve(&config, &initial, &options)?;
    let final_state = trajectory.final_state();
    let overlap = profile_overlap(&initial.amplitudes, &final_state.amplitudes);
    let norms = trajectory.norms();
    let period_norms = (0..=periods)
        .map(|p| trajectory.nearest_sample(p as f64 * period).map(|i| norms[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let lossy = config.lossy_offsets();
    let total = crate::integrator::norm(&final_state);
    let final_lossy_population = if total > 0.0 {
        lossy.iter().map(|&i| final_state.amplitudes[i].norm_sqr()).sum::<f64>() / total
    } else {
        0.0
    };
    Ok(DarkBicEvolution {
        dark,
        trajectory,
        overlap,
        period_norms,
        final_lossy_population,
    })
}

/// Time at which the leaked probability is read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    /// A number of drive periods, so the absolute time follows `ω`.
    Periods(f64),
    /// An absolute time.
    Time(f64),
}

impl Probe {
    pub fn time(self, period: f64) -> f64 {
        match self {
            Probe::Periods(p) => p * period,
            Probe::Time(t) => t,
        }
    }
}

/// How `Γ` is chosen when the frequency varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaTuning {
    /// Keep whatever drive strength the base model pins.
    #[default]
    Fixed,
    /// Place `Γ` at the zero of the effective bond `β(Γ)` for each `ω`.
    BetaRoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVariable {
    Gamma(Vec<f64>),
    Omega { values: Vec<f64>, tuning: OmegaTuning },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayPoint {
    pub value: f64,
    pub gamma: f64,
    pub gamma_norm: f64,
    pub omega: f64,
    pub t_probe: f64,
    /// `None` when no dark BIC exists at this point.
    pub decay: Option<f64>,
    pub dark_imag: Option<f64>,
    pub leak_identity_residual: Option<f64>,
    pub diagnostic: Option<String>,
}

/// Leaked probability of the dark BIC at `t_probe` across a grid in `γ` or `ω`.
/// Points without a dark BIC are kept with a diagnostic instead of a value.
pub fn decay_sweep(
    base: &ModelSpec,
    variable: &DecayVariable,
    probe: Probe,
    steps_per_period: usize,
    params: &ClassifyParams,
) -> Result<Vec<DecayPoint>, ExperimentError> {
    let specs: Vec<(f64, ModelSpec)> = match variable {
        DecayVariable::Gamma(values) => {
            nonempty(values, "gamma")?;
            values.iter().map(|&g| (g, base.with_gamma(g))).collect()
        }
        DecayVariable::Omega { values, tuning } => {
            nonempty(values, "omega")?;
            values
                .iter()
                .map(|&w| {
                    let spec = base.with_omega(w);
                    let spec = match tuning {
                        OmegaTuning::Fixed => spec,
                        OmegaTuning::BetaRoot => {
                            let (k, g) = match base.profile {
                                Profile::PaperDefect { k, g } | Profile::Multimode { k, g, .. } => (k, g),
                                ref other => return Err(ExperimentError::NoRetuneParameters(other.name())),
                            };
                            spec.with_gamma_norm(beta_root(k, g, w, DEFAULT_BETA_BRACKET)?)
                        }
                    };
                    Ok((w, spec))
                })
                .collect::<Result<_, ExperimentError>>()?
        }
    };
    specs
        .par_iter()
        .map(|(value, spec)| decay_point(*value, spec, probe, steps_per_period, params))
        .collect()
}

fn decay_point(value: f64, spec: &ModelSpec, probe: Probe, spp: usize, params: &ClassifyParams) -> Result<DecayPoint, ExperimentError> {
    let drive = spec.drive()?;
    let t_probe = probe.time(drive.period());
    let mut point = DecayPoint {
        value,
        gamma: spec.gamma,
        gamma_norm: drive.gamma_norm(),
        omega: spec.omega,
        t_probe,
        decay: None,
        dark_imag: None,
        leak_identity_residual: None,
        diagnostic: None,
    };
    if spec.gamma == 0.0 {
        point.decay = Some(0.0);
        point.leak_identity_residual = Some(0.0);
        point.diagnostic = Some("lossless lattice: nothing can leak".into());
        return Ok(point);
    }
    let dark = match find_dark_bic(spec, spp, params) {
        Ok(d) => d,
        Err(ExperimentError::MissingDarkBic(msg)) => {
            point.diagnostic = Some(format!("skipped: no dark BIC at {msg}"));
            return Ok(point);
        }
        Err(e) => return Err(e),
    };
    point.dark_imag = Some(dark.mode.quasi_energy.im);
    let config = spec.build()?;
    let options = EvolveOptions::new(t_probe).steps_per_period(spp).samples_per_period(4);
    let traj = evolve(&config, &StateVector::new(dark.mode.profile.clone()), &options)?;
    point.decay = Some(decay_probability(&traj, t_probe)?);
    point.leak_identity_residual = Some(traj.leak_identity_residual());
    Ok(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearPoint {
    pub u: f64,
    pub decay: f64,
    pub overlap: f64,
    pub leak_identity_residual: f64,
}

/// Leaked probability after `periods` periods when the linear dark BIC of
/// `base` is evolved with nonlinearity `u` on the lossy sites.
pub fn nonlinear_stability(
    base: &ModelSpec,
    us: &[f64],
    periods: usize,
    steps_per_period: usize,
    params: &ClassifyParams,
) -> Result<Vec<NonlinearPoint>, ExperimentError> {
    nonempty(us, "u")?;
    let dark = find_dark_bic(base, steps_per_period, params)?;
    us.par_iter()
        .map(|&u| {
            let run = evolve_dark_bic(dark.clone(), &base.with_u(u), periods, steps_per_period, 1)?;
            Ok(NonlinearPoint {
                u,
                decay: *run.trajectory.leak().last().unwrap_or(&0.0),
                overlap: run.overlap,
                leak_identity_residual: run.trajectory.leak_identity_residual(),
            })
        })
        .collect()
}
