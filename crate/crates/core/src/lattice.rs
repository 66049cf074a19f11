//! Static description of the driven, lossy tight-binding chain and its
//! time-dependent Hamiltonian.
//!
//! Sites carry signed labels `n = -(N-1)/2 ..= (N-1)/2` so that site 0 sits in
//! the middle of the chain. Storage uses the offset `n + (N-1)/2`. Bond `i`
//! (offset of its left site) couples sites `i` and `i + 1`.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("site count must be odd so that site 0 is the center, got {0}")]
    EvenSiteCount(usize),
    #[error("profile needs at least {min} sites, got {got}")]
    TooFewSites { min: usize, got: usize },
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("loss at site {site} is {value}; only dissipation (gamma >= 0) is supported")]
    NegativeLoss { site: i64, value: f64 },
    #[error("drive frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("multimode profile needs M >= 2, got {0}")]
    TooFewModes(usize),
    #[error("profile `{0}` has no loss-strength parameter")]
    NoLossParameter(&'static str),
}

/// Boundary treatment of the chain ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    /// Closes the ring with a bond of the same strength as the first bond.
    Periodic,
}

/// Harmonic force `F(t) = F0 cos(ωt)` acting on a lattice of spacing `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub amplitude: f64,
    pub frequency: f64,
    pub lattice_constant: f64,
}

/// Derived drive quantities: `Γ = F0 a / ω` and `T = 2π / ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub gamma_norm: f64,
    pub period: f64,
}

impl Drive {
    pub fn new(amplitude: f64, frequency: f64, lattice_constant: f64) -> Result<Self, LatticeError> {
        if !(amplitude.is_finite() && lattice_constant.is_finite()) {
            return Err(LatticeError::NonFinite("drive amplitude"));
        }
        if !frequency.is_finite() || frequency <= 0.0 {
            return Err(LatticeError::NonPositiveFrequency(frequency));
        }
        Ok(Self {
            amplitude,
            frequency,
            lattice_constant,
        })
    }

    /// Builds the drive whose normalized strength `F0 a / ω` equals `gamma_norm`.
    pub fn from_gamma_norm(gamma_norm: f64, frequency: f64, lattice_constant: f64) -> Result<Self, LatticeError> {
        if !frequency.is_finite() || frequency <= 0.0 {
            return Err(LatticeError::NonPositiveFrequency(frequency));
        }
        Self::new(gamma_norm * frequency / lattice_constant, frequency, lattice_constant)
    }

    /// The undriven lattice (`F0 = 0`) with a nominal frequency that still sets
    /// the stroboscopic period.
    pub fn none(frequency: f64) -> Result<Self, LatticeError> {
        Self::new(0.0, frequency, 1.0)
    }

    pub fn gamma_norm(&self) -> f64 {
        self.amplitude * self.lattice_constant / self.frequency
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.frequency
    }

    pub fn params(&self) -> DriveParams {
        DriveParams {
            gamma_norm: self.gamma_norm(),
            period: self.period(),
        }
    }

    /// Instantaneous force times lattice constant, `a F0 cos(ωt)`.
    pub fn force(&self, t: f64) -> f64 {
        self.lattice_constant * self.amplitude * (self.frequency * t).cos()
    }

    /// Rotating-frame phase `Γ sin(ωt)`, the time integral of [`Drive::force`].
    pub fn phase(&self, t: f64) -> f64 {
        self.gamma_norm() * (self.frequency * t).sin()
    }
}

/// Immutable lattice model: hoppings, losses, optional Kerr-type nonlinearity
/// and the drive.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    hopping: Vec<f64>,
    loss: Vec<f64>,
    nonlinearity: Vec<f64>,
    drive: Drive,
    boundary: Boundary,
}

impl LatticeConfig {
    /// `hopping[i]` couples offsets `i` and `i + 1`; `loss` has one entry per site.
    pub fn new(hopping: Vec<f64>, loss: Vec<f64>, drive: Drive) -> Result<Self, LatticeError> {
        let n_sites = loss.len();
        if n_sites.is_multiple_of(2) {
            return Err(LatticeError::EvenSiteCount(n_sites));
        }
        if hopping.len() + 1 != n_sites {
            return Err(LatticeError::LengthMismatch {
                what: "hopping",
                expected: n_sites - 1,
                got: hopping.len(),
            });
        }
        if hopping.iter().any(|k| !k.is_finite()) {
            return Err(LatticeError::NonFinite("hopping"));
        }
        let half = (n_sites / 2) as i64;
        for (i, &g) in loss.iter().enumerate() {
            if !g.is_finite() {
                return Err(LatticeError::NonFinite("loss"));
            }
            if g < 0.0 {
                return Err(LatticeError::NegativeLoss {
                    site: i as i64 - half,
                    value: g,
                });
            }
        }
        Ok(Self {
            hopping,
            nonlinearity: vec![0.0; n_sites],
            loss,
            drive,
            boundary: Boundary::Open,
        })
    }

    pub fn with_nonlinearity(mut self, nonlinearity: Vec<f64>) -> Result<Self, LatticeError> {
        if nonlinearity.len() != self.n_sites() {
            return Err(LatticeError::LengthMismatch {
                what: "nonlinearity",
                expected: self.n_sites(),
                got: nonlinearity.len(),
            });
        }
        if nonlinearity.iter().any(|u| !u.is_finite()) {
            return Err(LatticeError::NonFinite("nonlinearity"));
        }
        self.nonlinearity = nonlinearity;
        Ok(self)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_drive(mut self, drive: Drive) -> Self {
        self.drive = drive;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.loss.len()
    }

    /// `(N - 1) / 2`, the label of the rightmost site.
    pub fn half_width(&self) -> i64 {
        (self.n_sites() / 2) as i64
    }

    pub fn site_label(&self, offset: usize) -> i64 {
        offset as i64 - self.half_width()
    }

    pub fn offset_of(&self, site: i64) -> Option<usize> {
        let offset = site + self.half_width();
        (0..self.n_sites() as i64).contains(&offset).then_some(offset as usize)
    }

    pub fn site_labels(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.n_sites()).map(|i| self.site_label(i))
    }

    pub fn hopping(&self) -> &[f64] {
        &self.hopping
    }

    pub fn loss(&self) -> &[f64] {
        &self.loss
    }

    pub fn nonlinearity(&self) -> &[f64] {
        &self.nonlinearity
    }

    pub fn drive(&self) -> &Drive {
        &self.drive
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn drive_params(&self) -> DriveParams {
        self.drive.params()
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinearity.iter().all(|&u| u == 0.0)
    }

    pub fn is_lossless(&self) -> bool {
        self.loss.iter().all(|&g| g == 0.0)
    }

    /// Hopping of the bulk region, taken from the first bond.
    pub fn bulk_hopping(&self) -> f64 {
        self.hopping.first().copied().unwrap_or(0.0)
    }

    /// Strength of the bond closing a periodic ring, if any.
    pub fn wrap_hopping(&self) -> Option<f64> {
        match self.boundary {
            Boundary::Periodic if self.n_sites() > 2 => Some(self.bulk_hopping()),
            _ => None,
        }
    }

    pub fn lossy_offsets(&self) -> Vec<usize> {
        (0..self.n_sites()).filter(|&i| self.loss[i] > 0.0).collect()
    }

    /// Smallest interval of site labels containing every lossy site and every
    /// site touched by a bond that differs from the bulk hopping.
    pub fn defect_region(&self) -> Option<RangeInclusive<i64>> {
        let bulk = self.bulk_hopping();
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        let mut mark = |n: i64| {
            lo = lo.min(n);
            hi = hi.max(n);
        };
        for (i, &k) in self.hopping.iter().enumerate() {
            if k != bulk {
                mark(self.site_label(i));
                mark(self.site_label(i + 1));
            }
        }
        for i in self.lossy_offsets() {
            mark(self.site_label(i));
        }
        (lo <= hi).then_some(lo..=hi)
    }

    /// Lab-frame Hamiltonian `H(t)`: symmetric hoppings, diagonal
    /// `a F(t) n - i γ_n`.
    pub fn hamiltonian_at(&self, t: f64) -> DMatrix<C64> {
        let n = self.n_sites();
        let force = self.drive.force(t);
        let mut h = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(force * self.site_label(i) as f64, -self.loss[i]);
        }
        for (i, &k) in self.hopping.iter().enumerate() {
            h[(i, i + 1)] = C64::from(k);
            h[(i + 1, i)] = C64::from(k);
        }
        if let Some(k) = self.wrap_hopping() {
            h[(n - 1, 0)] += C64::from(k);
            h[(0, n - 1)] += C64::from(k);
        }
        h
    }

    /// Hamiltonian in the frame co-moving with the drive. The diagonal force
    /// is traded for Peierls phases `exp(∓iΓ sin ωt)` on the bonds, so every
    /// entry stays bounded by the hoppings and losses.
    pub fn rotating_hamiltonian_at(&self, t: f64) -> DMatrix<C64> {
        let n = self.n_sites();
        let phase = C64::from_polar(1.0, -self.drive.phase(t));
        let mut h = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(0.0, -self.loss[i]);
        }
        for (i, &k) in self.hopping.iter().enumerate() {
            h[(i, i + 1)] = phase * k;
            h[(i + 1, i)] = phase.conj() * k;
        }
        if let Some(k) = self.wrap_hopping() {
            let wrap = C64::from_polar(k, self.drive.phase(t) * (n - 1) as f64);
            h[(n - 1, 0)] += wrap;
            h[(0, n - 1)] += wrap.conj();
        }
        h
    }
}

fn check_odd(n_sites: usize) -> Result<(), LatticeError> {
    if n_sites.is_multiple_of(2) {
        Err(LatticeError::EvenSiteCount(n_sites))
    } else {
        Ok(())
    }
}

/// Homogeneous chain with hopping `k` and no loss.
pub fn uniform_profile(n_sites: usize, k: f64, drive: Drive) -> Result<LatticeConfig, LatticeError> {
    check_odd(n_sites)?;
    if n_sites < 1 {
        return Err(LatticeError::TooFewSites { min: 1, got: n_sites });
    }
    LatticeConfig::new(vec![k; n_sites - 1], vec![0.0; n_sites], drive)
}

/// The central defect: hoppings `g` on bonds `n = -3..=2`, loss `gamma` on
/// sites `n = ±1`, hopping `k` elsewhere.
pub fn paper_defect_profile(n_sites: usize, k: f64, g: f64, gamma: f64, drive: Drive) -> Result<LatticeConfig, LatticeError> {
    if n_sites < 9 {
        return Err(LatticeError::TooFewSites { min: 9, got: n_sites });
    }
    multimode_profile(n_sites, 3, k, g, gamma, drive)
}

/// Generalized defect with `2M - 1` interior sites: hoppings `g` on bonds
/// `-M ..= M-1` and loss `gamma` on sites `-M + 2m`, `m = 1..M-1`.
pub fn multimode_profile(
    n_sites: usize,
    modes: usize,
    k: f64,
    g: f64,
    gamma: f64,
    drive: Drive,
) -> Result<LatticeConfig, LatticeError> {
    check_odd(n_sites)?;
    if modes < 2 {
        return Err(LatticeError::TooFewModes(modes));
    }
    // sites -M..=M plus one bulk site on each side
    let min = 2 * modes + 3;
    if n_sites < min {
        return Err(LatticeError::TooFewSites { min, got: n_sites });
    }
    let half = (n_sites / 2) as i64;
    let m = modes as i64;
    let hopping = (0..n_sites - 1)
        .map(|i| {
            let n = i as i64 - half;
            if (-m..m).contains(&n) {
                g
            } else {
                k
            }
        })
        .collect();
    let mut loss = vec![0.0; n_sites];
    for j in 1..m {
        loss[(-m + 2 * j + half) as usize] = gamma;
    }
    LatticeConfig::new(hopping, loss, drive)
}

/// Recipe for a lattice, kept separate from the built [`LatticeConfig`] so
/// that sweeps can vary one knob (γ, Γ, ω, u) and rebuild.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Uniform {
        k: f64,
    },
    PaperDefect {
        k: f64,
        g: f64,
    },
    Multimode {
        modes: usize,
        k: f64,
        g: f64,
    },
    Explicit {
        hopping: Vec<f64>,
        loss: Vec<f64>,
        nonlinearity: Option<Vec<f64>>,
    },
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Uniform { .. } => "uniform",
            Profile::PaperDefect { .. } => "paper_defect",
            Profile::Multimode { .. } => "multimode",
            Profile::Explicit { .. } => "explicit",
        }
    }

    /// Bulk hopping `k` of the recipe.
    pub fn bulk_hopping(&self) -> f64 {
        match self {
            Profile::Uniform { k } | Profile::PaperDefect { k, .. } | Profile::Multimode { k, .. } => *k,
            Profile::Explicit { hopping, .. } => hopping.first().copied().unwrap_or(0.0),
        }
    }
}

/// How the drive strength is pinned when the frequency is varied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveStrength {
    /// Fixed force amplitude `F0`.
    Amplitude(f64),
    /// Fixed normalized strength `Γ = F0 a / ω`.
    Normalized(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_sites: usize,
    pub profile: Profile,
    /// Loss strength placed on the profile's lossy sites.
    pub gamma: f64,
    pub strength: DriveStrength,
    pub omega: f64,
    pub lattice_constant: f64,
    /// Nonlinearity placed on the profile's lossy sites.
    pub u: f64,
    pub boundary: Boundary,
}

impl ModelSpec {
    /// Paper-style defect at `Γ`, `ω` with `a = 1` and no nonlinearity.
    pub fn paper(n_sites: usize, k: f64, g: f64, gamma: f64, gamma_norm: f64, omega: f64) -> Self {
        Self {
            n_sites,
            profile: Profile::PaperDefect { k, g },
            gamma,
            strength: DriveStrength::Normalized(gamma_norm),
            omega,
            lattice_constant: 1.0,
            u: 0.0,
            boundary: Boundary::Open,
        }
    }

    pub fn drive(&self) -> Result<Drive, LatticeError> {
        match self.strength {
            DriveStrength::Amplitude(f0) => Drive::new(f0, self.omega, self.lattice_constant),
            DriveStrength::Normalized(gn) => Drive::from_gamma_norm(gn, self.omega, self.lattice_constant),
        }
    }

    pub fn gamma_norm(&self) -> Result<f64, LatticeError> {
        Ok(self.drive()?.gamma_norm())
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn with_gamma_norm(&self, gamma_norm: f64) -> Self {
        Self {
            strength: DriveStrength::Normalized(gamma_norm),
            ..self.clone()
        }
    }

    /// Changes `ω`, keeping whichever of `F0` or `Γ` the spec pins.
    pub fn with_omega(&self, omega: f64) -> Self {
        Self { omega, ..self.clone() }
    }

    pub fn with_u(&self, u: f64) -> Self {
        Self { u, ..self.clone() }
    }

    pub fn build(&self) -> Result<LatticeConfig, LatticeError> {
        let drive = self.drive()?;
        let base = match &self.profile {
            Profile::Uniform { k } => {
                let mut cfg = uniform_profile(self.n_sites, *k, drive)?;
                if self.gamma != 0.0 {
                    return Err(LatticeError::NoLossParameter("uniform"));
                }
                cfg.boundary = self.boundary;
                return cfg.with_nonlinearity(vec![0.0; self.n_sites]);
            }
            Profile::PaperDefect { k, g } => paper_defect_profile(self.n_sites, *k, *g, self.gamma, drive)?,
            Profile::Multimode { modes, k, g } => multimode_profile(self.n_sites, *modes, *k, *g, self.gamma, drive)?,
            Profile::Explicit {
                hopping,
                loss,
                nonlinearity,
            } => {
                if loss.len() != self.n_sites {
                    return Err(LatticeError::LengthMismatch {
                        what: "loss",
                        expected: self.n_sites,
                        got: loss.len(),
                    });
                }
                let cfg = LatticeConfig::new(hopping.clone(), loss.clone(), drive)?.with_boundary(self.boundary);
                return match nonlinearity {
                    Some(u) => cfg.with_nonlinearity(u.clone()),
                    None => Ok(cfg),
                };
            }
        };
        let pattern = self.loss_pattern()?;
        let u = pattern.iter().map(|&on| if on { self.u } else { 0.0 }).collect();
        base.with_boundary(self.boundary).with_nonlinearity(u)
    }

    /// Sites where the recipe places loss (and nonlinearity), independent of
    /// the current loss strength.
    pub fn loss_pattern(&self) -> Result<Vec<bool>, LatticeError> {
        let probe = match &self.profile {
            Profile::Uniform { .. } => return Ok(vec![false; self.n_sites]),
            Profile::Explicit { loss, .. } => return Ok(loss.iter().map(|&g| g > 0.0).collect()),
            Profile::PaperDefect { k, g } => paper_defect_profile(self.n_sites, *k, *g, 1.0, self.drive()?)?,
            Profile::Multimode { modes, k, g } => multimode_profile(self.n_sites, *modes, *k, *g, 1.0, self.drive()?)?,
        };
        Ok(probe.loss().iter().map(|&g| g > 0.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(gn: f64) -> Drive {
        Drive::from_gamma_norm(gn, 1.0, 1.0).unwrap()
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn quarter_period_has_no_drive_on_diagonal() {
        let cfg = uniform_profile(11, 0.3, drive(2.0)).unwrap();
        let h = cfg.hamiltonian_at(cfg.drive().period() / 4.0);
        for i in 0..11 {
            assert!(h[(i, i)].norm() < 1e-15);
        }
        assert_eq!(h[(3, 4)], C64::from(0.3));
        assert_eq!(h[(4, 3)], C64::from(0.3));
    }

    #[test]
    fn paper_profile_diagonal_at_t0() {
        let f0 = 2.4308;
        let cfg = paper_defect_profile(101, 0.3, 0.21, 1.0, Drive::new(f0, 1.0, 1.0).unwrap()).unwrap();
        let h = cfg.hamiltonian_at(0.0);
        let p = cfg.offset_of(1).unwrap();
        let m = cfg.offset_of(-1).unwrap();
        assert_eq!(h[(p, p)], C64::new(f0, -1.0));
        assert_eq!(h[(m, m)], C64::new(-f0, -1.0));
        assert_eq!(cfg.lossy_offsets(), vec![m, p]);
    }

    #[test]
    fn undriven_lossless_is_real_symmetric() {
        let cfg = paper_defect_profile(15, 0.3, 0.21, 0.0, Drive::none(1.0).unwrap()).unwrap();
        for &t in &[0.0, 0.7, 3.1] {
            let h = cfg.hamiltonian_at(t);
            assert!(h.iter().all(|z| z.im == 0.0));
            assert_eq!(h, h.transpose());
        }
    }

    #[test]
    fn paper_profile_layout() {
        let cfg = paper_defect_profile(101, 0.3, 0.21, 1.0, drive(0.0)).unwrap();
        for (i, &k) in cfg.hopping().iter().enumerate() {
            let n = cfg.site_label(i);
            let expected = if (-3..=2).contains(&n) { 0.21 } else { 0.3 };
            assert_eq!(k, expected, "bond {n}");
        }
        for (i, &g) in cfg.loss().iter().enumerate() {
            let n = cfg.site_label(i);
            assert_eq!(g, if n.abs() == 1 { 1.0 } else { 0.0 }, "site {n}");
        }
        assert_eq!(cfg.defect_region(), Some(-3..=3));
    }

    #[test]
    fn defect_free_limit_is_uniform() {
        let cfg = paper_defect_profile(101, 0.3, 0.3, 0.0, drive(1.0)).unwrap();
        assert_eq!(cfg, uniform_profile(101, 0.3, drive(1.0)).unwrap());
        assert_eq!(cfg.defect_region(), None);
    }

    #[test]
    fn smallest_paper_lattice() {
        let cfg = paper_defect_profile(9, 0.3, 0.21, 1.0, drive(1.0)).unwrap();
        assert_eq!(cfg.site_labels().collect::<Vec<_>>(), (-4..=4).collect::<Vec<_>>());
        assert_eq!(
            paper_defect_profile(7, 0.3, 0.21, 1.0, drive(1.0)),
            Err(LatticeError::TooFewSites { min: 9, got: 7 })
        );
    }

    #[test]
    fn multimode_loss_positions() {
        let lossy = |m: usize| {
            let cfg = multimode_profile(101, m, 0.3, 0.21, 1.0, drive(1.0)).unwrap();
            cfg.lossy_offsets().into_iter().map(|i| cfg.site_label(i)).collect::<Vec<_>>()
        };
        assert_eq!(lossy(3), vec![-1, 1]);
        assert_eq!(lossy(4), vec![-2, 0, 2]);
        assert_eq!(lossy(5), vec![-3, -1, 1, 3]);
        let cfg = multimode_profile(101, 4, 0.3, 0.21, 1.0, drive(1.0)).unwrap();
        for (i, &k) in cfg.hopping().iter().enumerate() {
            let n = cfg.site_label(i);
            assert_eq!(k, if (-4..=3).contains(&n) { 0.21 } else { 0.3 });
        }
    }

    #[test]
    fn multimode_three_matches_paper_profile() {
        for &n in &[9, 31, 101] {
            assert_eq!(
                multimode_profile(n, 3, 0.3, 0.21, 0.7, drive(2.4)).unwrap(),
                paper_defect_profile(n, 0.3, 0.21, 0.7, drive(2.4)).unwrap()
            );
        }
    }

    #[test]
    fn multimode_rejects_overflow() {
        assert!(matches!(
            multimode_profile(11, 5, 0.3, 0.21, 1.0, drive(1.0)),
            Err(LatticeError::TooFewSites { .. })
        ));
        assert_eq!(multimode_profile(101, 1, 0.3, 0.21, 1.0, drive(1.0)), Err(LatticeError::TooFewModes(1)));
    }

    #[test]
    fn rejects_invalid_configs() {
        assert_eq!(
            LatticeConfig::new(vec![0.3; 3], vec![0.0; 4], drive(1.0)),
            Err(LatticeError::EvenSiteCount(4))
        );
        assert!(matches!(
            LatticeConfig::new(vec![0.3; 3], vec![0.0, -0.1, 0.0, 0.0, 0.0], drive(1.0)),
            Err(LatticeError::LengthMismatch { .. })
        ));
        assert_eq!(
            LatticeConfig::new(vec![0.3; 2], vec![0.0, -0.1, 0.0], drive(1.0)),
            Err(LatticeError::NegativeLoss { site: 0, value: -0.1 })
        );
        assert!(Drive::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hermitian_part_and_periodicity() {
        let cfg = paper_defect_profile(21, 0.3, 0.21, 0.8, Drive::new(2.4, 1.3, 1.0).unwrap()).unwrap();
        let period = cfg.drive().period();
        let gamma = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            21,
            cfg.loss().iter().map(|&g| C64::new(0.0, g)),
        ));
        for &t in &[0.0, 0.31, 1.7, 4.4, -2.0] {
            let h = cfg.hamiltonian_at(t) + &gamma;
            assert!(max_abs(&(&h - h.adjoint())) < 1e-14);
            assert!(max_abs(&(cfg.hamiltonian_at(t + period) - cfg.hamiltonian_at(t))) < 1e-12);
            let r = cfg.rotating_hamiltonian_at(t) + &gamma;
            assert!(max_abs(&(&r - r.adjoint())) < 1e-14);
        }
    }

    #[test]
    fn model_spec_sweeps_keep_pattern() {
        let spec = ModelSpec::paper(101, 0.3, 0.21, 0.0, 2.4308, 1.0);
        assert_eq!(spec.build().unwrap().lossy_offsets(), Vec::<usize>::new());
        let lossy = spec.with_gamma(2.0).build().unwrap();
        assert_eq!(lossy.lossy_offsets(), vec![49, 51]);
        let fast = spec.with_omega(10.0).build().unwrap();
        assert!((fast.drive().gamma_norm() - 2.4308).abs() < 1e-14);
        assert!((fast.drive().amplitude - 24.308).abs() < 1e-12);
        let kerr = spec.with_gamma(30.0).with_u(1.0).build().unwrap();
        assert_eq!(kerr.nonlinearity()[49], 1.0);
        assert_eq!(kerr.nonlinearity()[51], 1.0);
        assert_eq!(kerr.nonlinearity().iter().filter(|&&u| u != 0.0).count(), 2);
    }

    #[test]
    fn periodic_ring_closes_with_bulk_bond() {
        let cfg = uniform_profile(7, 0.3, drive(0.0)).unwrap().with_boundary(Boundary::Periodic);
        let h = cfg.hamiltonian_at(0.0);
        assert_eq!(h[(0, 6)], C64::from(0.3));
        assert_eq!(h[(6, 0)], C64::from(0.3));
    }
}
