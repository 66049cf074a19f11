//! High-frequency expansion of the rotating-frame Hamiltonian.
//!
//! In the co-moving frame the bond `n → n+1` carries `K_n exp(-iΓ sin ωt)`,
//! whose Fourier components follow from the Jacobi–Anger identity. The
//! first-order correction cancels identically and the second-order one
//! renormalizes each hopping by `-(Q(Γ)/ω²)(K_n K²_{n+1} - 2K_n³ + K_n K²_{n-1})`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::bessel::{bessel_table, signed};
use crate::eigen::{eigen_decompose, EigenError};
use crate::floquet::{compute_spectrum, ClassifyParams, FloquetError};
use crate::lattice::{LatticeConfig, LatticeError, ModelSpec, Profile};

pub const DEFAULT_HARMONICS: usize = 20;
pub const MIN_HARMONICS: usize = 10;
const MAX_CHECKED_HARMONICS: usize = 40;
const Q_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_BETA_BRACKET: (f64, f64) = (2.2, 2.6);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HfeError {
    #[error("harmonic truncation L = {0} is below the minimum {MIN_HARMONICS}")]
    TooFewHarmonics(usize),
    #[error("Q(Γ = {gamma_norm}) still changes by {change:.3e} when doubling L = {harmonics}")]
    NotConverged { gamma_norm: f64, harmonics: usize, change: f64 },
    #[error("beta(Γ) has no sign change on [{lower}, {upper}] (values {f_lower:.3e}, {f_upper:.3e})")]
    NoSignChange { lower: f64, upper: f64, f_lower: f64, f_upper: f64 },
    #[error("reduced chain needs M >= 2, got {0}")]
    TooFewModes(usize),
    #[error("profile `{0}` has no reduced-chain description")]
    UnsupportedProfile(&'static str),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Fourier components `H'_l` of the rotating-frame Hamiltonian
/// `H'(t) = Σ_l H'_l exp(ilωt)`, truncated at `|l| <= L`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatingFrameModel {
    pub gamma_norm: f64,
    pub harmonics: usize,
    hopping: Vec<f64>,
    loss: Vec<f64>,
    /// `J_l(Γ)` for `l = -L ..= L`.
    weights: Vec<f64>,
}

impl RotatingFrameModel {
    pub fn new(config: &LatticeConfig, gamma_norm: f64, harmonics: usize) -> Self {
        let table = bessel_table(harmonics, gamma_norm);
        let l = harmonics as i64;
        Self {
            gamma_norm,
            harmonics,
            hopping: config.hopping().to_vec(),
            loss: config.loss().to_vec(),
            weights: (-l..=l).map(|m| signed(&table, m)).collect(),
        }
    }

    /// `J_l(Γ)`, zero beyond the truncation.
    pub fn weight(&self, l: i64) -> f64 {
        if l.unsigned_abs() as usize > self.harmonics {
            0.0
        } else {
            self.weights[(l + self.harmonics as i64) as usize]
        }
    }

    /// `H'_l`: bond `n → n+1` carries `K_n J_{-l}`, its reverse `K_n J_l`,
    /// and `l = 0` also holds the loss diagonal.
    pub fn harmonic(&self, l: i64) -> DMatrix<C64> {
        let n = self.loss.len();
        let mut h = DMatrix::<C64>::zeros(n, n);
        let (up, down) = (self.weight(-l), self.weight(l));
        for (i, &k) in self.hopping.iter().enumerate() {
            h[(i, i + 1)] = C64::from(k * up);
            h[(i + 1, i)] = C64::from(k * down);
        }
        if l == 0 {
            for (i, &g) in self.loss.iter().enumerate() {
                h[(i, i)] = C64::new(0.0, -g);
            }
        }
        h
    }
}

/// `Q(Γ) = -Σ_{l,j≠0} J_l J_j J_{j-l} / (l j)` with `|l|, |j| <= L`.
pub fn q_gamma(gamma_norm: f64, harmonics: usize) -> f64 {
    let table = bessel_table(2 * harmonics, gamma_norm);
    let l_max = harmonics as i64;
    let mut sum = 0.0;
    for l in -l_max..=l_max {
        if l == 0 {
            continue;
        }
        let jl = signed(&table, l);
        for j in -l_max..=l_max {
            if j == 0 {
                continue;
            }
            sum += jl * signed(&table, j) * signed(&table, j - l) / (l * j) as f64;
        }
    }
    -sum
}

/// [`q_gamma`] with a doubling test: `L` is doubled until the value moves by
/// less than `1e-10`, failing once `L` would exceed 40.
pub fn q_gamma_checked(gamma_norm: f64, harmonics: usize) -> Result<f64, HfeError> {
    if harmonics < MIN_HARMONICS {
        return Err(HfeError::TooFewHarmonics(harmonics));
    }
    let mut l = harmonics;
    let mut value = q_gamma(gamma_norm, l);
    loop {
        let doubled = q_gamma(gamma_norm, 2 * l);
        let change = (doubled - value).abs();
        if change < Q_TOLERANCE {
            return Ok(value);
        }
        if 2 * l > MAX_CHECKED_HARMONICS {
            return Err(HfeError::NotConverged {
                gamma_norm,
                harmonics: l,
                change,
            });
        }
        l *= 2;
        value = doubled;
    }
}

fn j0(x: f64) -> f64 {
    bessel_table(0, x)[0]
}

/// Effective hoppings `Θ_n` of the second-order expansion. Missing neighbours
/// at the chain ends replicate the edge bond.
pub fn effective_hopping(config: &LatticeConfig, gamma_norm: f64, omega: f64) -> Vec<f64> {
    theta(config.hopping(), gamma_norm, omega, q_gamma(gamma_norm, DEFAULT_HARMONICS))
}

fn theta(k: &[f64], gamma_norm: f64, omega: f64, q: f64) -> Vec<f64> {
    let bessel = j0(gamma_norm);
    let scale = q / (omega * omega);
    let last = k.len().saturating_sub(1);
    (0..k.len())
        .map(|n| {
            let left = k[n.saturating_sub(1)];
            let right = k[(n + 1).min(last)];
            let kn = k[n];
            kn * bessel - scale * (kn * right * right - 2.0 * kn.powi(3) + kn * left * left)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NamedRates {
    pub eta: f64,
    pub zeta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

pub fn named_rates(k: f64, g: f64, gamma_norm: f64, omega: f64) -> NamedRates {
    let q = q_gamma(gamma_norm, DEFAULT_HARMONICS);
    let b = j0(gamma_norm);
    let s = q / (omega * omega) * (g * g - k * k);
    NamedRates {
        eta: k * b,
        zeta: g * b,
        alpha: k * b - s * k,
        beta: g * b + s * g,
        q,
    }
}

/// Root of `β(Γ)` inside `bracket`, by bisection.
pub fn beta_root(k: f64, g: f64, omega: f64, bracket: (f64, f64)) -> Result<f64, HfeError> {
    let beta = |x: f64| named_rates(k, g, x, omega).beta;
    let (mut lo, mut hi) = bracket;
    let (mut f_lo, f_hi) = (beta(lo), beta(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(HfeError::NoSignChange {
            lower: lo,
            upper: hi,
            f_lower: f_lo,
            f_upper: f_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = beta(mid);
        if f_mid.abs() < 1e-12 || hi - lo < 4.0 * f64::EPSILON * mid.abs() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Second-order effective description of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveModel {
    pub theta: Vec<f64>,
    pub loss: Vec<f64>,
    pub q: f64,
    pub gamma_norm: f64,
    pub omega: f64,
    pub harmonics: usize,
}

impl EffectiveModel {
    pub fn new(config: &LatticeConfig, gamma_norm: f64, omega: f64) -> Self {
        let q = q_gamma(gamma_norm, DEFAULT_HARMONICS);
        Self {
            theta: theta(config.hopping(), gamma_norm, omega, q),
            loss: config.loss().to_vec(),
            q,
            gamma_norm,
            omega,
            harmonics: DEFAULT_HARMONICS,
        }
    }

    /// Tridiagonal matrix with `Θ_n` off the diagonal and `-iγ_n` on it.
    pub fn hamiltonian(&self) -> DMatrix<C64> {
        let n = self.loss.len();
        let mut h = DMatrix::<C64>::zeros(n, n);
        for (i, &g) in self.loss.iter().enumerate() {
            h[(i, i)] = C64::new(0.0, -g);
        }
        for (i, &t) in self.theta.iter().enumerate() {
            h[(i, i + 1)] = C64::from(t);
            h[(i + 1, i)] = C64::from(t);
        }
        h
    }
}

pub fn effective_hamiltonian(config: &LatticeConfig, gamma_norm: f64, omega: f64) -> DMatrix<C64> {
    EffectiveModel::new(config, gamma_norm, omega).hamiltonian()
}

/// The `(2M-1)`-site chain left between two decoupled `β` bonds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedChain {
    pub modes: usize,
    pub zeta: f64,
    pub gamma: f64,
    #[serde(skip)]
    pub matrix: DMatrix<C64>,
    pub dark_state: Vec<f64>,
    /// Eigenvalues from a direct solve, sorted by `(Re, Im)`.
    pub eigenvalues: Vec<C64>,
}

impl ReducedChain {
    pub fn dimension(&self) -> usize {
        2 * self.modes - 1
    }

    /// `‖H w‖` for the analytic dark state `w`.
    pub fn dark_residual(&self) -> f64 {
        let w = nalgebra::DVector::from_iterator(self.dimension(), self.dark_state.iter().map(|&x| C64::from(x)));
        (&self.matrix * w).norm()
    }
}

pub fn reduced_chain(modes: usize, zeta: f64, gamma: f64) -> Result<ReducedChain, HfeError> {
    if modes < 2 {
        return Err(HfeError::TooFewModes(modes));
    }
    let dim = 2 * modes - 1;
    let mut matrix = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim - 1 {
        matrix[(i, i + 1)] = C64::from(zeta);
        matrix[(i + 1, i)] = C64::from(zeta);
    }
    // 1-based even positions are 0-based odd offsets
    for i in (1..dim).step_by(2) {
        matrix[(i, i)] = C64::new(0.0, -gamma);
    }
    let norm = (modes as f64).sqrt();
    let dark_state = (0..dim)
        .map(|i| match i % 4 {
            0 => 1.0 / norm,
            2 => -1.0 / norm,
            _ => 0.0,
        })
        .collect();
    let mut eigenvalues = eigen_decompose(&matrix)?.values;
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ReducedChain {
        modes,
        zeta,
        gamma,
        matrix,
        dark_state,
        eigenvalues,
    })
}

/// Closed-form spectrum of the five-site chain:
/// `0`, `-iγ/2 ± √(12ζ² - γ²)/2`, `-iγ/2 ± √(4ζ² - γ²)/2`.
pub fn pentamer_eigenvalues(zeta: f64, gamma: f64) -> [C64; 5] {
    let half_loss = C64::new(0.0, -0.5 * gamma);
    let outer = C64::from(12.0 * zeta * zeta - gamma * gamma).sqrt() * 0.5;
    let inner = C64::from(4.0 * zeta * zeta - gamma * gamma).sqrt() * 0.5;
    [
        C64::new(0.0, 0.0),
        half_loss + outer,
        half_loss - outer,
        half_loss + inner,
        half_loss - inner,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedLevel {
    pub reduced: C64,
    pub exact: C64,
    pub exact_mode_index: usize,
    pub residual: f64,
}

/// Exact Floquet BICs of the defect against the reduced chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HfeReport {
    pub gamma_norm: f64,
    pub omega: f64,
    pub rates: NamedRates,
    pub reduced: ReducedChain,
    pub exact_dark: Option<C64>,
    pub matches: Vec<MatchedLevel>,
    pub max_residual: f64,
}

fn defect_parameters(spec: &ModelSpec) -> Result<(usize, f64, f64), HfeError> {
    match spec.profile {
        Profile::PaperDefect { k, g } => Ok((3, k, g)),
        Profile::Multimode { modes, k, g } => Ok((modes, k, g)),
        ref other => Err(HfeError::UnsupportedProfile(other.name())),
    }
}

/// Compares the BICs of the full monodromy spectrum with the reduced-chain
/// eigenvalues. Only BICs whose weight lies mostly inside the defect region
/// take part; each reduced level is paired with its nearest unused exact
/// quasi-energy, closest pairs first.
pub fn hfe_vs_exact(spec: &ModelSpec, steps_per_period: usize, params: &ClassifyParams) -> Result<HfeReport, HfeError> {
    let (modes, k, g) = defect_parameters(spec)?;
    let config = spec.build()?;
    let gamma_norm = config.drive().gamma_norm();
    let omega = config.drive().frequency;
    let rates = named_rates(k, g, gamma_norm, omega);
    let reduced = reduced_chain(modes, rates.zeta, spec.gamma)?;

    let spectrum = compute_spectrum(&config, steps_per_period, params)?;
    let defect: Vec<usize> = config
        .defect_region()
        .map(|r| r.filter_map(|n| config.offset_of(n)).collect())
        .unwrap_or_default();
    let candidates: Vec<_> = spectrum
        .modes
        .iter()
        .filter(|m| m.label.is_bic() && m.population_on(&defect) >= params.defect_weight)
        .collect();

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in reduced.eigenvalues.iter().enumerate() {
        for (j, m) in candidates.iter().enumerate() {
            pairs.push(((e - m.quasi_energy).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_r = vec![false; reduced.eigenvalues.len()];
    let mut used_e = vec![false; candidates.len()];
    let mut matches = Vec::new();
    for (d, i, j) in pairs {
        if used_r[i] || used_e[j] {
            continue;
        }
        used_r[i] = true;
        used_e[j] = true;
        matches.push(MatchedLevel {
            reduced: reduced.eigenvalues[i],
            exact: candidates[j].quasi_energy,
            exact_mode_index: candidates[j].mode_index,
            residual: d,
        });
    }
    matches.sort_by(|a, b| a.reduced.re.total_cmp(&b.reduced.re).then(a.reduced.im.total_cmp(&b.reduced.im)));
    let max_residual = if matches.len() < reduced.eigenvalues.len() {
        f64::INFINITY
    } else {
        matches.iter().map(|m| m.residual).fold(0.0, f64::max)
    };
    Ok(HfeReport {
        gamma_norm,
        omega,
        rates,
        reduced,
        exact_dark: spectrum.dark_bic().map(|m| m.quasi_energy),
        matches,
        max_residual,
    })
}
