//! Fixed-step fourth-order Runge–Kutta propagation of the amplitude equations
//!
//! `i dC_n/dt = K_n C_{n+1} + K_{n-1} C_{n-1} + a F(t) n C_n - i γ_n C_n - U_n |C_n|² C_n`
//!
//! in either the lab frame or the frame co-moving with the drive. The leaked
//! probability `P(t) = 2 Σ γ_n ∫ |C_n|² dt` is carried as an extra component of
//! the ODE and advanced by the same Runge–Kutta stages as the amplitudes, so
//! `norm(0) - norm(t) - P(t)` stays at the level of the integrator's own error.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::LatticeConfig;

/// Smallest accepted sampling density of the drive period.
pub const MIN_STEPS_PER_PERIOD: usize = 64;
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2048;
/// Relative norm growth that flags an unstable step size.
pub const NORM_GROWTH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("steps_per_period must be at least {MIN_STEPS_PER_PERIOD}, got {0}")]
    TooFewSteps(usize),
    #[error("state has {got} amplitudes but the lattice has {expected} sites")]
    LengthMismatch { expected: usize, got: usize },
    #[error("initial state contains non-finite amplitudes")]
    NonFiniteState,
    #[error("final time must be finite and non-negative, got {0}")]
    InvalidHorizon(f64),
    #[error(
        "step size too large: squared norm grew from {initial:.6e} to {norm:.6e} at t = {time:.6}; increase steps_per_period"
    )]
    StepTooLarge { time: f64, norm: f64, initial: f64 },
    #[error("time {time} outside trajectory range [{start}, {end}]")]
    OutOfRange { time: f64, start: f64, end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    #[default]
    Rotating,
}

/// Complex amplitudes `C_n` (indexed by site offset) at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
    pub time: f64,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes, time: 0.0 }
    }

    /// All weight on one site offset.
    pub fn localized(n_sites: usize, offset: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); n_sites];
        amplitudes[offset] = C64::new(1.0, 0.0);
        Self::new(amplitudes)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Rescales to unit norm; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = norm(self).sqrt();
        if n == 0.0 {
            return self.clone();
        }
        Self {
            amplitudes: self.amplitudes.iter().map(|c| c / n).collect(),
            time: self.time,
        }
    }
}

/// Squared norm `Σ |C_n|²`.
pub fn norm(state: &StateVector) -> f64 {
    squared_norm(&state.amplitudes)
}

pub(crate) fn squared_norm(c: &[C64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// `|<a|b>|²` of the two profiles after normalizing each.
pub fn profile_overlap(a: &[C64], b: &[C64]) -> f64 {
    let na = squared_norm(a);
    let nb = squared_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let inner: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    inner.norm_sqr() / (na * nb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub steps_per_period: usize,
    pub frame: Frame,
    /// Store a sample every this many steps (0 keeps only both endpoints).
    pub sample_every: usize,
}

impl EvolveOptions {
    pub fn new(t_final: f64) -> Self {
        Self {
            t_final,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            frame: Frame::Rotating,
            sample_every: 0,
        }
    }

    pub fn steps_per_period(mut self, steps: usize) -> Self {
        self.steps_per_period = steps;
        self
    }

    pub fn frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    /// Keep `per_period` samples per drive period.
    pub fn samples_per_period(mut self, per_period: usize) -> Self {
        self.sample_every = (self.steps_per_period / per_period.max(1)).max(1);
        self
    }

    pub fn sample_every(mut self, steps: usize) -> Self {
        self.sample_every = steps;
        self
    }
}

/// Sampled history of one evolution. Stored amplitudes are always lab-frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<C64>>,
    leak: Vec<f64>,
    site_leak: Vec<f64>,
    initial_norm: f64,
    dt: f64,
    steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<C64>] {
        &self.states
    }

    /// Leaked probability `P` at each sample time.
    pub fn leak(&self) -> &[f64] {
        &self.leak
    }

    /// Per-site contributions `2 γ_n ∫ |C_n|² dt` at the final time.
    pub fn site_leak(&self) -> &[f64] {
        &self.site_leak
    }

    pub fn initial_norm(&self) -> f64 {
        self.initial_norm
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| squared_norm(s)).collect()
    }

    /// Largest `|norm(0) - norm(t) - P(t)|` over the stored samples.
    pub fn leak_identity_residual(&self) -> f64 {
        self.norms()
            .iter()
            .zip(&self.leak)
            .map(|(n, p)| (self.initial_norm - n - p).abs())
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step_size(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn initial_state(&self) -> StateVector {
        self.sample(0)
    }

    pub fn final_state(&self) -> StateVector {
        self.sample(self.len() - 1)
    }

    pub fn sample(&self, index: usize) -> StateVector {
        StateVector {
            amplitudes: self.states[index].clone(),
            time: self.times[index],
        }
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.len() - 1]
    }

    /// Index of the sample closest to `t`.
    pub fn nearest_sample(&self, t: f64) -> Result<usize, IntegrationError> {
        self.check_range(t)?;
        let idx = self.times.partition_point(|&s| s < t);
        Ok(match idx {
            0 => 0,
            i if i >= self.len() => self.len() - 1,
            i if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() => i,
            i => i - 1,
        })
    }

    fn check_range(&self, t: f64) -> Result<(), IntegrationError> {
        let (start, end) = (self.start_time(), self.end_time());
        let slack = 1e-9 * self.dt.max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(IntegrationError::OutOfRange { time: t, start, end });
        }
        Ok(())
    }
}

/// Leaked probability at time `t`, linearly interpolated between samples.
pub fn decay_probability(traj: &Trajectory, t: f64) -> Result<f64, IntegrationError> {
    traj.check_range(t)?;
    let times = traj.times();
    let idx = times.partition_point(|&s| s < t);
    if idx == 0 {
        return Ok(traj.leak[0]);
    }
    if idx >= times.len() {
        return Ok(traj.leak[times.len() - 1]);
    }
    let (t0, t1) = (times[idx - 1], times[idx]);
    let w = (t - t0) / (t1 - t0);
    Ok(traj.leak[idx - 1] * (1.0 - w) + traj.leak[idx] * w)
}

/// Right-hand side of the amplitude equations in one frame.
struct Rhs<'a> {
    config: &'a LatticeConfig,
    frame: Frame,
    labels: Vec<f64>,
}

impl Rhs<'_> {
    /// `out = -i H(t) c`, including the nonlinear term.
    fn derivative(&self, t: f64, c: &[C64], out: &mut [C64]) {
        let cfg = self.config;
        let n = c.len();
        let hop = cfg.hopping();
        let loss = cfg.loss();
        let kerr = cfg.nonlinearity();
        let (up, down, force) = match self.frame {
            // C_{n+1} enters row n with exp(-iθ), C_{n-1} with exp(+iθ)
            Frame::Rotating => {
                let p = C64::from_polar(1.0, -cfg.drive().phase(t));
                (p, p.conj(), 0.0)
            }
            Frame::Lab => (C64::new(1.0, 0.0), C64::new(1.0, 0.0), cfg.drive().force(t)),
        };
        for i in 0..n {
            let mut h = C64::new(force * self.labels[i], -loss[i]) * c[i];
            if kerr[i] != 0.0 {
                h -= kerr[i] * c[i].norm_sqr() * c[i];
            }
            if i + 1 < n {
                h += hop[i] * up * c[i + 1];
            }
            if i > 0 {
                h += hop[i - 1] * down * c[i - 1];
            }
            out[i] = C64::new(h.im, -h.re);
        }
        if let Some(k) = cfg.wrap_hopping() {
            let wrap = match self.frame {
                Frame::Rotating => C64::from_polar(k, cfg.drive().phase(t) * (n - 1) as f64),
                Frame::Lab => C64::new(k, 0.0),
            };
            let last = wrap * c[0];
            let first = wrap.conj() * c[n - 1];
            out[n - 1] += C64::new(last.im, -last.re);
            out[0] += C64::new(first.im, -first.re);
        }
    }

    fn leak_rate(&self, c: &[C64], out: &mut [f64]) {
        for ((o, z), &g) in out.iter_mut().zip(c).zip(self.config.loss()) {
            *o = 2.0 * g * z.norm_sqr();
        }
    }
}

struct Workspace {
    k: [Vec<C64>; 4],
    stage: Vec<C64>,
    rate: [Vec<f64>; 4],
}

/// Runge–Kutta stepper bound to one lattice and frame.
pub(crate) struct Propagator<'a> {
    rhs: Rhs<'a>,
    ws: Workspace,
}

impl<'a> Propagator<'a> {
    pub(crate) fn new(config: &'a LatticeConfig, frame: Frame) -> Self {
        let n = config.n_sites();
        let zero = || vec![C64::new(0.0, 0.0); n];
        let rates = || vec![0.0; n];
        Self {
            rhs: Rhs {
                config,
                frame,
                labels: config.site_labels().map(|s| s as f64).collect(),
            },
            ws: Workspace {
                k: [zero(), zero(), zero(), zero()],
                stage: zero(),
                rate: [rates(), rates(), rates(), rates()],
            },
        }
    }

    /// One classical RK4 step of the amplitudes. When `site_leak` is given the
    /// per-site leak rates are integrated with the same stage weights.
    pub(crate) fn step(&mut self, t: f64, dt: f64, c: &mut [C64], site_leak: Option<&mut [f64]>) {
        let half = 0.5 * dt;
        let rhs = &self.rhs;
        let Workspace { k, stage, rate } = &mut self.ws;
        let [k1, k2, k3, k4] = k;
        let [r1, r2, r3, r4] = rate;
        let track = site_leak.is_some();

        rhs.derivative(t, c, k1);
        if track {
            rhs.leak_rate(c, r1);
        }
        for i in 0..c.len() {
            stage[i] = c[i] + half * k1[i];
        }
        rhs.derivative(t + half, stage, k2);
        if track {
            rhs.leak_rate(stage, r2);
        }
        for i in 0..c.len() {
            stage[i] = c[i] + half * k2[i];
        }
        rhs.derivative(t + half, stage, k3);
        if track {
            rhs.leak_rate(stage, r3);
        }
        for i in 0..c.len() {
            stage[i] = c[i] + dt * k3[i];
        }
        rhs.derivative(t + dt, stage, k4);
        if let Some(acc) = site_leak {
            rhs.leak_rate(stage, r4);
            for i in 0..c.len() {
                acc[i] += dt / 6.0 * (r1[i] + 2.0 * r2[i] + 2.0 * r3[i] + r4[i]);
            }
        }
        for i in 0..c.len() {
            c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Amplitudes of the propagation frame at time `t`, expressed in the lab frame.
    pub(crate) fn frame_to_lab(&self, t: f64, c: &[C64]) -> Vec<C64> {
        self.rotate(t, c, -1.0)
    }

    pub(crate) fn lab_to_frame(&self, t: f64, c: &[C64]) -> Vec<C64> {
        self.rotate(t, c, 1.0)
    }

    fn rotate(&self, t: f64, c: &[C64], sign: f64) -> Vec<C64> {
        match self.rhs.frame {
            Frame::Lab => c.to_vec(),
            Frame::Rotating => {
                let theta = sign * self.rhs.config.drive().phase(t);
                c.iter()
                    .zip(&self.rhs.labels)
                    .map(|(z, &n)| z * C64::from_polar(1.0, theta * n))
                    .collect()
            }
        }
    }
}

fn validate(config: &LatticeConfig, initial: &StateVector, steps_per_period: usize) -> Result<(), IntegrationError> {
    if steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(IntegrationError::TooFewSteps(steps_per_period));
    }
    if initial.len() != config.n_sites() {
        return Err(IntegrationError::LengthMismatch {
            expected: config.n_sites(),
            got: initial.len(),
        });
    }
    if initial.amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(IntegrationError::NonFiniteState);
    }
    Ok(())
}

/// Step count and step size covering `[0, t_final]` at roughly
/// `steps_per_period` steps per drive period.
pub(crate) fn time_grid(config: &LatticeConfig, t_final: f64, steps_per_period: usize) -> (usize, f64) {
    let nominal = config.drive().period() / steps_per_period as f64;
    let steps = (t_final / nominal).round().max(1.0) as usize;
    (steps, t_final / steps as f64)
}

/// Integrates the amplitude equations from `initial.time` for `t_final`
/// time units. Nonlinear terms are included whenever the configuration has
/// any nonzero `U_n`.
pub fn evolve(config: &LatticeConfig, initial: &StateVector, options: &EvolveOptions) -> Result<Trajectory, IntegrationError> {
    validate(config, initial, options.steps_per_period)?;
    if !options.t_final.is_finite() || options.t_final < 0.0 {
        return Err(IntegrationError::InvalidHorizon(options.t_final));
    }
    let n = config.n_sites();
    let t0 = initial.time;
    let initial_norm = norm(initial);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![initial.amplitudes.clone()],
        leak: vec![0.0],
        site_leak: vec![0.0; n],
        initial_norm,
        dt: 0.0,
        steps: 0,
    };
    if options.t_final == 0.0 {
        return Ok(traj);
    }
    let (steps, dt) = time_grid(config, options.t_final, options.steps_per_period);
    traj.dt = dt;
    traj.steps = steps;

    let mut prop = Propagator::new(config, options.frame);
    let mut c = prop.lab_to_frame(t0, &initial.amplitudes);
    let ceiling = initial_norm * (1.0 + NORM_GROWTH_TOLERANCE);
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        prop.step(t, dt, &mut c, Some(&mut traj.site_leak));
        let t_next = t0 + (s + 1) as f64 * dt;
        let current = squared_norm(&c);
        if !(current <= ceiling) {
            return Err(IntegrationError::StepTooLarge {
                time: t_next,
                norm: current,
                initial: initial_norm,
            });
        }
        let last = s + 1 == steps;
        if last || (options.sample_every > 0 && (s + 1) % options.sample_every == 0) {
            traj.times.push(t_next);
            traj.states.push(prop.frame_to_lab(t_next, &c));
            traj.leak.push(traj.site_leak.iter().sum());
        }
    }
    Ok(traj)
}

/// [`evolve`] with the nonlinearity profile `U_n` replaced by `nonlinearity`.
pub fn evolve_nonlinear(
    config: &LatticeConfig,
    nonlinearity: &[f64],
    initial: &StateVector,
    options: &EvolveOptions,
) -> Result<Trajectory, IntegrationError> {
    let cfg = config
        .clone()
        .with_nonlinearity(nonlinearity.to_vec())
        .map_err(|_| IntegrationError::LengthMismatch {
            expected: config.n_sites(),
            got: nonlinearity.len(),
        })?;
    evolve(&cfg, initial, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub steps_per_period: usize,
    /// Largest site-wise amplitude change between `steps` and `2 * steps`.
    pub max_amplitude_shift: f64,
    pub leak_shift: f64,
}

/// Re-runs the evolution with doubled step density and reports the change.
pub fn convergence_check(
    config: &LatticeConfig,
    initial: &StateVector,
    options: &EvolveOptions,
) -> Result<ConvergenceReport, IntegrationError> {
    let coarse = evolve(config, initial, &EvolveOptions { sample_every: 0, ..options.clone() })?;
    let fine = evolve(
        config,
        initial,
        &EvolveOptions {
            sample_every: 0,
            steps_per_period: options.steps_per_period * 2,
            ..options.clone()
        },
    )?;
    let a = coarse.final_state();
    let b = fine.final_state();
    let shift = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        steps_per_period: options.steps_per_period,
        max_amplitude_shift: shift,
        leak_shift: (coarse.leak().last().unwrap() - fine.leak().last().unwrap()).abs(),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::bessel::bessel_j0_first_zero;
    use crate::lattice::{paper_defect_profile, uniform_profile, Drive, LatticeConfig};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn gaussian(n_sites: usize, center: f64, width: f64) -> StateVector {
        let half = (n_sites / 2) as f64;
        StateVector::new(
            (0..n_sites)
                .map(|i| {
                    let n = i as f64 - half;
                    c((-(n - center).powi(2) / (width * width)).exp())
                })
                .collect(),
        )
        .normalized()
    }

    #[test]
    fn isolated_lossy_site_decays_exponentially() {
        let gamma = 0.3;
        let cfg = LatticeConfig::new(vec![], vec![gamma], Drive::none(1.0).unwrap()).unwrap();
        let traj = evolve(&cfg, &StateVector::localized(1, 0), &EvolveOptions::new(5.0)).unwrap();
        let p = traj.final_state().amplitudes[0].norm_sqr();
        assert!((p - (-2.0 * gamma * 5.0).exp()).abs() < 1e-8);
    }

    #[test]
    fn dimer_transfers_population_at_quarter_rabi_period() {
        // sites -1 and 0 form the dimer; site 1 is detached
        let k = 0.4;
        let cfg = LatticeConfig::new(vec![k, 0.0], vec![0.0; 3], Drive::none(1.0).unwrap()).unwrap();
        let t = PI / (2.0 * k);
        let traj = evolve(&cfg, &StateVector::localized(3, 0), &EvolveOptions::new(t).samples_per_period(32)).unwrap();
        assert!((traj.final_state().amplitudes[1].norm_sqr() - 1.0).abs() < 1e-9);
        // analytic Rabi oscillation |C_0(t)|² = sin²(k t) along the way
        for (time, state) in traj.times().iter().zip(traj.states()) {
            assert!((state[1].norm_sqr() - (k * time).sin().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn dynamical_localization_freezes_wide_packet() {
        let omega = 1.0;
        let drive = Drive::from_gamma_norm(bessel_j0_first_zero(), omega, 1.0).unwrap();
        let cfg = uniform_profile(61, 0.3, drive).unwrap();
        let start = gaussian(61, 0.0, 6.0);
        let t = 5.0 * drive.period();
        let end = evolve(&cfg, &start, &EvolveOptions::new(t)).unwrap().final_state();
        let drift = start
            .populations()
            .iter()
            .zip(end.populations())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-3, "population drift {drift}");

        // contrast: off the Bessel zero the packet spreads
        let free = uniform_profile(61, 0.3, Drive::from_gamma_norm(1.0, omega, 1.0).unwrap()).unwrap();
        let spread = evolve(&free, &start, &EvolveOptions::new(t)).unwrap().final_state();
        let moved = start
            .populations()
            .iter()
            .zip(spread.populations())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(moved > 1e-2);
    }

    #[test]
    fn norm_examples() {
        assert!((norm(&gaussian(41, 0.0, 4.0)) - 1.0).abs() < 1e-14);
        assert_eq!(norm(&StateVector::new(vec![C64::new(0.0, 0.0); 5])), 0.0);
        let cfg = paper_defect_profile(21, 0.3, 0.21, 0.5, Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap()).unwrap();
        let start = StateVector::localized(21, cfg.offset_of(1).unwrap());
        let traj = evolve(&cfg, &start, &EvolveOptions::new(3.0)).unwrap();
        assert!(norm(&traj.final_state()) < 1.0);
    }

    #[test]
    fn lossless_run_has_no_leak_and_keeps_norm() {
        let drive = Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(31, 0.3, 0.21, 0.0, drive).unwrap();
        let start = gaussian(31, -4.0, 3.0);
        let traj = evolve(&cfg, &start, &EvolveOptions::new(100.0 * drive.period()).samples_per_period(1)).unwrap();
        assert!(traj.leak().iter().all(|&p| p == 0.0));
        for t in [0.0, 10.0, 300.0] {
            assert_eq!(decay_probability(&traj, t).unwrap(), 0.0);
        }
        for n in traj.norms() {
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn leak_matches_norm_loss() {
        let drive = Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(41, 0.3, 0.21, 1.0, drive).unwrap();
        let start = gaussian(41, -6.0, 3.0);
        let traj = evolve(&cfg, &start, &EvolveOptions::new(8.0 * drive.period()).samples_per_period(4)).unwrap();
        for ((t, n), p) in traj.times().iter().zip(traj.norms()).zip(traj.leak()) {
            assert!((1.0 - n - p).abs() < 1e-8, "t = {t}: {}", 1.0 - n - p);
        }
        let total: f64 = traj.site_leak().iter().sum();
        assert!((total - traj.leak().last().unwrap()).abs() < 1e-15);
        assert!(traj.site_leak()[cfg.offset_of(-1).unwrap()] > 0.0);
        assert_eq!(traj.site_leak()[cfg.offset_of(0).unwrap()], 0.0);
    }

    #[test]
    fn decay_probability_interpolates_and_rejects_out_of_range() {
        let cfg = LatticeConfig::new(vec![], vec![0.2], Drive::none(1.0).unwrap()).unwrap();
        let traj = evolve(&cfg, &StateVector::localized(1, 0), &EvolveOptions::new(4.0).sample_every(8)).unwrap();
        let p = decay_probability(&traj, 2.5).unwrap();
        assert!((p - (1.0 - (-0.4 * 2.5f64).exp())).abs() < 1e-4);
        assert!(matches!(decay_probability(&traj, 4.5), Err(IntegrationError::OutOfRange { .. })));
        assert!(matches!(decay_probability(&traj, -0.1), Err(IntegrationError::OutOfRange { .. })));
    }

    #[test]
    fn lab_and_rotating_frames_agree() {
        let drive = Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(9, 0.3, 0.21, 0.4, drive).unwrap();
        let start = StateVector::localized(9, cfg.offset_of(0).unwrap());
        let t = 8.0 * drive.period();
        let opts = EvolveOptions::new(t).steps_per_period(8192);
        let rot = evolve(&cfg, &start, &opts).unwrap().final_state();
        let lab = evolve(&cfg, &start, &opts.clone().frame(Frame::Lab)).unwrap().final_state();
        for (a, b) in rot.amplitudes.iter().zip(&lab.amplitudes) {
            assert!((a.norm() - b.norm()).abs() < 1e-7);
        }
    }

    #[test]
    fn doubling_steps_changes_little() {
        let drive = Drive::from_gamma_norm(2.4308, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(41, 0.3, 0.21, 1.0, drive).unwrap();
        let start = gaussian(41, 0.0, 2.0);
        let report = convergence_check(&cfg, &start, &EvolveOptions::new(2.0 * drive.period())).unwrap();
        assert!(report.max_amplitude_shift < 1e-6, "{report:?}");
        assert!(report.leak_shift < 1e-6);
    }

    #[test]
    fn nonlinearity_on_empty_sites_is_inert() {
        let drive = Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap();
        // the rightmost site is detached, so it stays empty
        let mut hopping = vec![0.3; 10];
        hopping[9] = 0.0;
        let cfg = LatticeConfig::new(hopping, vec![0.0; 11], drive).unwrap();
        let mut kerr = vec![0.0; 11];
        kerr[10] = 2.0;
        let start = StateVector::localized(11, 3);
        let opts = EvolveOptions::new(3.0 * drive.period());
        let linear = evolve(&cfg, &start, &opts).unwrap().final_state();
        let kerr_run = evolve_nonlinear(&cfg, &kerr, &start, &opts).unwrap().final_state();
        for (a, b) in linear.amplitudes.iter().zip(&kerr_run.amplitudes) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn single_site_nonlinearity_is_a_phase() {
        let cfg = LatticeConfig::new(vec![], vec![0.0], Drive::none(1.0).unwrap())
            .unwrap()
            .with_nonlinearity(vec![1.5])
            .unwrap();
        let start = StateVector::new(vec![C64::new(0.6, 0.3)]);
        let traj = evolve(&cfg, &start, &EvolveOptions::new(10.0).sample_every(128)).unwrap();
        let n0 = norm(&start);
        for s in traj.states() {
            assert!((s[0].norm_sqr() - n0).abs() < 1e-12);
        }
        // self-phase rotation at rate +U|C|²
        let phase = (traj.final_state().amplitudes[0] / start.amplitudes[0]).arg();
        let expected = (1.5 * n0 * 10.0 + PI).rem_euclid(2.0 * PI) - PI;
        assert!((phase - expected).abs() < 1e-8);
    }

    #[test]
    fn coarse_lab_frame_steps_are_detected() {
        let drive = Drive::from_gamma_norm(2.4, 10.0, 1.0).unwrap();
        let cfg = uniform_profile(101, 0.3, drive).unwrap();
        let start = gaussian(101, 40.0, 3.0);
        let opts = EvolveOptions::new(drive.period()).steps_per_period(64).frame(Frame::Lab);
        assert!(matches!(evolve(&cfg, &start, &opts), Err(IntegrationError::StepTooLarge { .. })));
        // the rotating frame handles the same drive at this density
        assert!(evolve(&cfg, &start, &opts.clone().frame(Frame::Rotating)).is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = uniform_profile(5, 0.3, Drive::none(1.0).unwrap()).unwrap();
        let start = StateVector::localized(5, 2);
        assert_eq!(
            evolve(&cfg, &start, &EvolveOptions::new(1.0).steps_per_period(32)),
            Err(IntegrationError::TooFewSteps(32))
        );
        assert!(matches!(
            evolve(&cfg, &StateVector::localized(3, 1), &EvolveOptions::new(1.0)),
            Err(IntegrationError::LengthMismatch { .. })
        ));
        assert!(matches!(
            evolve(&cfg, &start, &EvolveOptions::new(f64::NAN)),
            Err(IntegrationError::InvalidHorizon(_))
        ));
    }

    #[test]
    fn profile_overlap_is_phase_insensitive() {
        let a = vec![c(1.0), c(0.0), c(-1.0)];
        let b: Vec<C64> = a.iter().map(|z| z * C64::from_polar(2.0, 0.7)).collect();
        assert!((profile_overlap(&a, &b) - 1.0).abs() < 1e-14);
        assert!(profile_overlap(&a, &[c(0.0), c(1.0), c(0.0)]).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn leak_is_monotone_and_norm_contracts(
            gamma in 0.0f64..3.0,
            gn in 0.0f64..3.0,
            u in -2.0f64..2.0,
            site in -4i64..=4,
        ) {
            let drive = Drive::from_gamma_norm(gn, 1.0, 1.0).unwrap();
            let cfg = paper_defect_profile(15, 0.3, 0.21, gamma, drive).unwrap();
            let kerr: Vec<f64> = cfg.loss().iter().map(|&g| if g > 0.0 { u } else { 0.0 }).collect();
            let cfg = cfg.with_nonlinearity(kerr).unwrap();
            let start = StateVector::localized(15, cfg.offset_of(site).unwrap());
            let traj = evolve(&cfg, &start, &EvolveOptions::new(2.0 * drive.period()).samples_per_period(16)).unwrap();
            let norms = traj.norms();
            for w in traj.leak().windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            for w in norms.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            for (n, p) in norms.iter().zip(traj.leak()) {
                prop_assert!((1.0 - n - p).abs() < 1e-8);
                prop_assert!(*p >= 0.0 && *p <= 1.0 + 1e-12);
            }
        }
    }
}
