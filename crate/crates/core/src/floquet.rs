//! One-period monodromy, complex quasi-energies and mode classification.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bessel::bessel_table;
use crate::eigen::{eigen_decompose, EigenError};
use crate::integrator::{squared_norm, time_grid, Frame, IntegrationError, Propagator, MIN_STEPS_PER_PERIOD, NORM_GROWTH_TOLERANCE};
use crate::lattice::{LatticeConfig, LatticeError, ModelSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloquetError {
    #[error("monodromy is defined for the linear model only; nonlinearity is nonzero")]
    Nonlinear,
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("profile has zero norm")]
    ZeroProfile,
    #[error("no dark BIC found at {parameter} = {value}")]
    MissingDarkBic { parameter: &'static str, value: f64 },
}

/// Classification of a Floquet mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "extended")]
    Extended,
    #[serde(rename = "BIC")]
    Bic,
    #[serde(rename = "BOC")]
    Boc,
    #[serde(rename = "dark_BIC")]
    DarkBic,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Extended => "extended",
            Label::Bic => "BIC",
            Label::Boc => "BOC",
            Label::DarkBic => "dark_BIC",
        }
    }

    /// Dark BICs are a subset of BICs.
    pub fn is_bic(self) -> bool {
        matches!(self, Label::Bic | Label::DarkBic)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetMode {
    /// Rank by ascending `Re ε`.
    pub mode_index: usize,
    pub quasi_energy: C64,
    /// Monodromy eigenvalue `λ = exp(-i ε T)`.
    pub multiplier: C64,
    /// Mode at `t = 0`, unit norm, largest entry real and positive.
    pub profile: Vec<C64>,
    pub ipr: f64,
    pub label: Label,
}

impl FloquetMode {
    /// Total population of the given storage offsets.
    pub fn population_on(&self, offsets: &[usize]) -> f64 {
        offsets.iter().map(|&i| self.profile[i].norm_sqr()).sum()
    }
}

/// Interval of `Re ε` treated as the continuum of extended states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Thresholds for [`classify`]. Tolerances marked relative are multiplied by
/// `ω` or by the bulk hopping `k` of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyParams {
    pub ipr_threshold: f64,
    /// Relative to `ω`.
    pub dark_tol: f64,
    pub pop_tol: f64,
    /// Continuum margin `δ`, relative to `k`.
    pub band_margin: f64,
    /// Minimum weight a dark BIC must carry inside the defect region.
    pub defect_weight: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            ipr_threshold: 0.1,
            dark_tol: 1e-3,
            pop_tol: 1e-2,
            band_margin: 1e-3,
            defect_weight: 0.5,
        }
    }
}

impl ClassifyParams {
    pub fn with_band_margin(self, band_margin: f64) -> Self {
        Self { band_margin, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub omega: f64,
    pub modes: Vec<FloquetMode>,
    /// Present once the spectrum has been classified.
    pub band: Option<Band>,
    pub params: Option<ClassifyParams>,
}

impl SpectrumResult {
    pub fn count(&self, label: Label) -> usize {
        self.modes.iter().filter(|m| m.label == label).count()
    }

    /// Number of BICs, dark ones included.
    pub fn bic_count(&self) -> usize {
        self.modes.iter().filter(|m| m.label.is_bic()).count()
    }

    pub fn dark_bic(&self) -> Option<&FloquetMode> {
        self.modes.iter().find(|m| m.label == Label::DarkBic)
    }

    pub fn quasi_energies(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.quasi_energy).collect()
    }

    /// Largest minus smallest `Re ε`.
    pub fn real_spread(&self) -> f64 {
        let (lo, hi) = self
            .modes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m.quasi_energy.re), hi.max(m.quasi_energy.re)));
        if self.modes.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// Propagator over one drive period, built column by column in the rotating
/// frame. Columns are independent and run on the rayon pool.
pub fn monodromy(config: &LatticeConfig, steps_per_period: usize) -> Result<DMatrix<C64>, FloquetError> {
    if !config.is_linear() {
        return Err(FloquetError::Nonlinear);
    }
    if steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(IntegrationError::TooFewSteps(steps_per_period).into());
    }
    let n = config.n_sites();
    let period = config.drive().period();
    let (steps, dt) = time_grid(config, period, steps_per_period);
    let ceiling = 1.0 + NORM_GROWTH_TOLERANCE;

    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut prop = Propagator::new(config, Frame::Rotating);
            let mut c = vec![C64::new(0.0, 0.0); n];
            c[j] = C64::new(1.0, 0.0);
            for s in 0..steps {
                let t = s as f64 * dt;
                prop.step(t, dt, &mut c, None);
                let current = squared_norm(&c);
                if !(current <= ceiling) {
                    return Err(IntegrationError::StepTooLarge {
                        time: t + dt,
                        norm: current,
                        initial: 1.0,
                    });
                }
            }
            Ok(prop.frame_to_lab(period, &c))
        })
        .collect::<Result<_, _>>()?;

    Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
}

/// Inverse participation ratio `Σ|C|⁴ / (Σ|C|²)²`.
pub fn ipr(profile: &[C64]) -> Result<f64, FloquetError> {
    let total = squared_norm(profile);
    if !(total > 0.0) {
        return Err(FloquetError::ZeroProfile);
    }
    let fourth: f64 = profile.iter().map(|z| z.norm_sqr().powi(2)).sum();
    Ok(fourth / (total * total))
}

/// `ε = (i/T) Log λ` with the principal logarithm and `Re ε` in `(-ω/2, ω/2]`.
pub fn quasi_energy(multiplier: C64, omega: f64) -> C64 {
    let period = 2.0 * PI / omega;
    let mut re = -multiplier.arg() / period;
    if re <= -0.5 * omega {
        re += omega;
    }
    C64::new(re, multiplier.norm().ln() / period)
}

fn canonical_profile(column: impl Iterator<Item = C64>) -> Vec<C64> {
    let mut v: Vec<C64> = column.collect();
    let norm = squared_norm(&v).sqrt();
    let mut lead = C64::new(1.0, 0.0);
    let mut best = -1.0;
    for z in &v {
        let m = z.norm();
        if m > best * (1.0 + 1e-12) {
            best = m;
            lead = *z;
        }
    }
    let rot = lead.conj() / lead.norm() / norm;
    for z in &mut v {
        *z *= rot;
    }
    v
}

fn mode_order(a: &FloquetMode, b: &FloquetMode) -> Ordering {
    a.quasi_energy
        .re
        .total_cmp(&b.quasi_energy.re)
        .then(b.quasi_energy.im.total_cmp(&a.quasi_energy.im))
        .then(a.ipr.total_cmp(&b.ipr))
}

/// Unclassified spectrum of a monodromy matrix; every mode is labelled
/// extended until [`classify`] runs.
pub fn floquet_spectrum(u: &DMatrix<C64>, omega: f64) -> Result<SpectrumResult, FloquetError> {
    let eig = eigen_decompose(u)?;
    let mut modes = eig
        .values
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let profile = canonical_profile(eig.vectors.column(k).iter().copied());
            let ipr = ipr(&profile)?;
            Ok(FloquetMode {
                mode_index: 0,
                quasi_energy: quasi_energy(lambda, omega),
                multiplier: lambda,
                profile,
                ipr,
                label: Label::Extended,
            })
        })
        .collect::<Result<Vec<_>, FloquetError>>()?;
    modes.sort_by(mode_order);
    for (i, m) in modes.iter_mut().enumerate() {
        m.mode_index = i;
    }
    Ok(SpectrumResult {
        omega,
        modes,
        band: None,
        params: None,
    })
}

/// Zeroth-order continuum `[-2k|J₀(Γ)| - δ, 2k|J₀(Γ)| + δ]` with `k` the bulk
/// hopping of `config` and `δ` an absolute margin.
pub fn continuum_band(config: &LatticeConfig, gamma_norm: f64, margin: f64) -> Band {
    let w = 2.0 * config.bulk_hopping().abs() * bessel_table(0, gamma_norm)[0].abs() + margin;
    Band { lower: -w, upper: w }
}

/// Labels modes as extended, BIC or BOC by IPR and band membership, then
/// promotes at most one BIC to dark BIC: the one with the largest `Im ε`
/// among those near zero energy, sitting mostly in the defect region and
/// leaving the lossy sites nearly empty.
pub fn classify(spectrum: &SpectrumResult, config: &LatticeConfig, params: &ClassifyParams) -> SpectrumResult {
    let gamma_norm = config.drive().gamma_norm();
    let band = continuum_band(config, gamma_norm, params.band_margin * config.bulk_hopping().abs());
    let lossy = config.lossy_offsets();
    let defect: Vec<usize> = match config.defect_region() {
        Some(r) => r.filter_map(|n| config.offset_of(n)).collect(),
        None => Vec::new(),
    };
    let dark_tol = params.dark_tol * spectrum.omega;

    let mut out = spectrum.clone();
    out.band = Some(band);
    out.params = Some(*params);
    let mut dark: Option<usize> = None;
    for (i, m) in out.modes.iter_mut().enumerate() {
        m.label = if m.ipr < params.ipr_threshold {
            Label::Extended
        } else if band.contains(m.quasi_energy.re) {
            Label::Bic
        } else {
            Label::Boc
        };
        let candidate = m.label == Label::Bic
            && m.quasi_energy.re.abs() < dark_tol
            && m.population_on(&lossy) < params.pop_tol
            && m.population_on(&defect) >= params.defect_weight;
        if candidate {
            let better = match dark {
                None => true,
                Some(d) => m.quasi_energy.im > spectrum.modes[d].quasi_energy.im,
            };
            if better {
                dark = Some(i);
            }
        }
    }
    if let Some(d) = dark {
        out.modes[d].label = Label::DarkBic;
    }
    out
}

/// Monodromy, spectrum and classification in one call.
pub fn compute_spectrum(config: &LatticeConfig, steps_per_period: usize, params: &ClassifyParams) -> Result<SpectrumResult, FloquetError> {
    let u = monodromy(config, steps_per_period)?;
    let raw = floquet_spectrum(&u, config.drive().frequency)?;
    Ok(classify(&raw, config, params))
}

/// `Im ε` of the dark BIC for each loss strength, computed in parallel.
pub fn dark_bic_imag_trend(
    base: &ModelSpec,
    gammas: &[f64],
    steps_per_period: usize,
    params: &ClassifyParams,
) -> Result<Vec<f64>, FloquetError> {
    gammas
        .par_iter()
        .map(|&gamma| {
            let config = base.with_gamma(gamma).build()?;
            let spectrum = compute_spectrum(&config, steps_per_period, params)?;
            spectrum
                .dark_bic()
                .map(|m| m.quasi_energy.im)
                .ok_or(FloquetError::MissingDarkBic { parameter: "gamma", value: gamma })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use nalgebra::SymmetricEigen;

    use super::*;
    use crate::bessel::bessel_j0_first_zero;
    use crate::lattice::{paper_defect_profile, uniform_profile, Drive};

    const SPP: usize = 1024;

    fn max_unitarity_defect(u: &DMatrix<C64>) -> f64 {
        let n = u.nrows();
        let p = u.adjoint() * u - DMatrix::<C64>::identity(n, n);
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn decoupled_sites_give_identity_or_decay() {
        let drive = Drive::from_gamma_norm(1.7, 2.0, 1.0).unwrap();
        let cfg = LatticeConfig::new(vec![0.0; 4], vec![0.0; 5], drive).unwrap();
        let u = monodromy(&cfg, SPP).unwrap();
        assert!((u - DMatrix::<C64>::identity(5, 5)).iter().all(|z| z.norm() < 1e-12));

        let gamma = 0.4;
        let cfg = LatticeConfig::new(vec![0.0; 2], vec![0.0, gamma, 0.0], drive).unwrap();
        let u = monodromy(&cfg, SPP).unwrap();
        let want = (-gamma * drive.period()).exp();
        assert!((u[(1, 1)] - want).norm() < 1e-12);
    }

    #[test]
    fn hermitian_monodromy_is_unitary() {
        let drive = Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(31, 0.3, 0.21, 0.0, drive).unwrap();
        let u = monodromy(&cfg, SPP).unwrap();
        assert!(max_unitarity_defect(&u) < 1e-8);
        let s = floquet_spectrum(&u, 1.0).unwrap();
        assert!(s.modes.iter().all(|m| m.quasi_energy.im.abs() < 1e-9));
    }

    #[test]
    fn dissipative_monodromy_contracts() {
        let drive = Drive::from_gamma_norm(2.4308, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(31, 0.3, 0.21, 1.0, drive).unwrap();
        let u = monodromy(&cfg, SPP).unwrap();
        let sv = u.map(|z| z).singular_values();
        assert!(sv.iter().all(|&s| s <= 1.0 + 1e-8));
        let s = floquet_spectrum(&u, 1.0).unwrap();
        for m in &s.modes {
            assert!(m.multiplier.norm() <= 1.0 + 1e-8);
            assert!(m.quasi_energy.im <= 1e-8 / drive.period());
            assert!((squared_norm(&m.profile) - 1.0).abs() < 1e-12);
            assert!(m.ipr >= 1.0 / 31.0 - 1e-12 && m.ipr <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn static_lattice_matches_direct_diagonalization() {
        // ω large enough that the static band sits inside one zone
        let omega = 10.0;
        let n = 15;
        let k = 0.3;
        let cfg = paper_defect_profile(n, k, 0.21, 0.0, Drive::none(omega).unwrap()).unwrap();
        let h = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if j == i + 1 {
                cfg.hopping()[i]
            } else if i == j + 1 {
                cfg.hopping()[j]
            } else {
                0.0
            }
        });
        let mut want: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        want.sort_by(f64::total_cmp);
        let s = floquet_spectrum(&monodromy(&cfg, 2048).unwrap(), omega).unwrap();
        for (m, w) in s.modes.iter().zip(&want) {
            assert!((m.quasi_energy.re - w).abs() < 1e-9, "{} vs {w}", m.quasi_energy.re);
        }
    }

    #[test]
    fn uniform_static_spectrum_has_cosine_form() {
        let (n, k, omega) = (11, 0.3, 10.0);
        let cfg = uniform_profile(n, k, Drive::none(omega).unwrap()).unwrap();
        let s = floquet_spectrum(&monodromy(&cfg, 2048).unwrap(), omega).unwrap();
        let mut want: Vec<f64> = (1..=n).map(|q| 2.0 * k * (q as f64 * PI / (n + 1) as f64).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (m, w) in s.modes.iter().zip(&want) {
            assert!((m.quasi_energy.re - w).abs() < 1e-9);
        }
    }

    #[test]
    fn quasi_energy_zone_and_sign() {
        let omega = 2.0;
        let period = PI;
        let e = quasi_energy(C64::from_polar(0.5, -0.3), omega);
        assert!((e.re - 0.3 / period).abs() < 1e-15);
        assert!((e.im - 0.5f64.ln() / period).abs() < 1e-15);
        // λ = -1 sits on the zone edge and maps to +ω/2
        let edge = quasi_energy(C64::new(-1.0, 0.0), omega);
        assert!((edge.re - 1.0).abs() < 1e-15);
        let edge = quasi_energy(C64::new(-1.0, -0.0), omega);
        assert!((edge.re - 1.0).abs() < 1e-15);
        // round trip λ = exp(-iεT)
        let lambda = C64::from_polar(0.9, 2.2);
        let e = quasi_energy(lambda, omega);
        assert!(((C64::new(0.0, -1.0) * e * period).exp() - lambda).norm() < 1e-14);
    }

    #[test]
    fn ipr_examples() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        assert_eq!(ipr(&[zero, one, zero]).unwrap(), 1.0);
        assert!((ipr(&[one; 8]).unwrap() - 0.125).abs() < 1e-15);
        assert!((ipr(&[one, C64::new(0.0, 1.0)]).unwrap() - 0.5).abs() < 1e-15);
        assert!((ipr(&[one * 3.0, one * 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ipr(&[zero, zero]), Err(FloquetError::ZeroProfile));
    }

    #[test]
    fn band_examples() {
        let k = 0.3;
        let delta = 0.01;
        let cfg = |gn: f64| uniform_profile(9, k, Drive::from_gamma_norm(gn, 1.0, 1.0).unwrap()).unwrap();
        let collapsed = continuum_band(&cfg(bessel_j0_first_zero()), bessel_j0_first_zero(), delta);
        assert!((collapsed.upper - delta).abs() < 1e-15 && (collapsed.lower + delta).abs() < 1e-15);
        let b = continuum_band(&cfg(0.0), 0.0, delta);
        assert!((b.upper - 0.61).abs() < 1e-15 && b.lower == -b.upper);
        let b = continuum_band(&cfg(1.8), 1.8, delta);
        // J0(1.8) from its power series
        let mut j0 = 0.0;
        let mut term = 1.0;
        for m in 0..40 {
            j0 += term;
            term *= -(0.9f64 * 0.9) / ((m + 1) as f64).powi(2);
        }
        assert!((b.half_width() - (0.6 * j0.abs() + delta)).abs() < 1e-14);
    }

    #[test]
    fn canonical_profile_has_real_positive_peak() {
        let raw = vec![C64::new(0.1, 0.2), C64::new(-1.0, 1.0), C64::new(0.0, -0.3)];
        let p = canonical_profile(raw.into_iter());
        assert!((squared_norm(&p) - 1.0).abs() < 1e-15);
        assert!(p[1].im.abs() < 1e-15 && p[1].re > 0.0);
    }

    #[test]
    fn uniform_lattice_far_from_collapse_is_all_extended() {
        let cfg = uniform_profile(41, 0.3, Drive::from_gamma_norm(1.0, 1.0, 1.0).unwrap()).unwrap();
        let s = compute_spectrum(&cfg, SPP, &ClassifyParams::default()).unwrap();
        assert_eq!(s.count(Label::Extended), 41);
        assert!(s.dark_bic().is_none());
    }

    #[test]
    fn sorted_by_real_part() {
        let drive = Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(21, 0.3, 0.21, 0.5, drive).unwrap();
        let s = compute_spectrum(&cfg, SPP, &ClassifyParams::default()).unwrap();
        for (i, w) in s.modes.windows(2).enumerate() {
            assert!(mode_order(&w[0], &w[1]) != Ordering::Greater);
            assert_eq!(w[0].mode_index, i);
        }
    }

    #[test]
    fn rejects_nonlinear_and_coarse_grids() {
        let drive = Drive::from_gamma_norm(1.8, 1.0, 1.0).unwrap();
        let cfg = uniform_profile(9, 0.3, drive).unwrap();
        assert!(matches!(
            monodromy(&cfg, 10),
            Err(FloquetError::Integration(IntegrationError::TooFewSteps(10)))
        ));
        let cfg = cfg.with_nonlinearity(vec![1.0; 9]).unwrap();
        assert_eq!(monodromy(&cfg, SPP), Err(FloquetError::Nonlinear));
    }

    #[test]
    fn dark_bic_has_small_lossy_population() {
        let drive = Drive::from_gamma_norm(2.4308, 1.0, 1.0).unwrap();
        let cfg = paper_defect_profile(41, 0.3, 0.21, 1.0, drive).unwrap();
        let s = compute_spectrum(&cfg, SPP, &ClassifyParams::default()).unwrap();
        let dark = s.dark_bic().expect("dark BIC");
        assert!(dark.population_on(&cfg.lossy_offsets()) < 1e-2);
        assert!(dark.quasi_energy.re.abs() < 1e-3);
        assert_eq!(s.count(Label::DarkBic), 1);
    }
}
