use floquet_lattice::DarkBicEvolution;
use floquet_lattice::scenario::InitialKind;
use floquet_lattice::{
    beta_root, compute_spectrum, convergence_check, decay_sweep, evolve, evolve_dark_bic, find_dark_bic, gaussian_packet, hfe_vs_exact, ipr_map,
    named_rates, nonlinear_stability, profile_overlap, reduced_chain, scatter, DecayVariable, EvolveOptions, LatticeConfig,
    ModelSpec, OmegaTuning, Probe, Profile, Scenario, StateVector, Trajectory,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{float, opt_float, summary_rows, trajectory_rows, OutputDir, SUMMARY_HEADER, TRAJECTORY_HEADER};

/// Tolerances of `--check`: quasi-energy shift and final-amplitude shift
/// when the step density is doubled.
pub const CHECK_QUASI_ENERGY_TOL: f64 = 1e-9;
pub const CHECK_AMPLITUDE_TOL: f64 = 1e-6;

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub out: &'a mut OutputDir,
    pub warnings: Vec<String>,
}

impl Context<'_> {
    fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }
}

fn labels(config: &LatticeConfig) -> Vec<i64> {
    config.site_labels().collect()
}

fn write_trajectory(ctx: &mut Context, suffix: &str, config: &LatticeConfig, traj: &Trajectory) -> Result<(), CliError> {
    let norms = traj.norms();
    ctx.out
        .csv(&format!("summary{suffix}.csv"), &SUMMARY_HEADER, summary_rows(traj.times(), &norms, traj.leak()))?;
    if ctx.scenario.output.trajectory.unwrap_or(true) {
        let labels = labels(config);
        ctx.out.csv(
            &format!("trajectory{suffix}.csv"),
            &TRAJECTORY_HEADER,
            trajectory_rows(traj.times(), traj.states(), &labels),
        )?;
    }
    Ok(())
}

fn defect_pair(spec: &ModelSpec) -> Result<(f64, f64), CliError> {
    match spec.profile {
        Profile::PaperDefect { k, g } | Profile::Multimode { k, g, .. } => Ok((k, g)),
        ref other => Err(CliError::Usage(format!("profile `{}` has no (k, g) defect parameters", other.name()))),
    }
}

pub fn spectrum(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let config = s.model_spec()?.build()?;
    let result = compute_spectrum(&config, s.steps_per_period()?, &s.classify_params()?)?;
    ctx.out.csv(
        "spectrum.csv",
        &["mode_index", "re_eps", "im_eps", "ipr", "label"],
        result.modes.iter().map(|m| {
            vec![
                m.mode_index.to_string(),
                float(m.quasi_energy.re),
                float(m.quasi_energy.im),
                float(m.ipr),
                m.label.to_string(),
            ]
        }),
    )?;
    if s.output.profiles.unwrap_or(true) {
        let labels = labels(&config);
        ctx.out.csv(
            "profiles.csv",
            &["mode_index", "n", "re", "im", "abs2"],
            result.modes.iter().flat_map(|m| {
                m.profile.iter().zip(&labels).map(move |(z, n)| {
                    vec![m.mode_index.to_string(), n.to_string(), float(z.re), float(z.im), float(z.norm_sqr())]
                })
            }),
        )?;
    }
    let counts: serde_json::Map<String, Value> = ["extended", "BIC", "BOC", "dark_BIC"]
        .into_iter()
        .zip(result.modes.iter().fold([0usize; 4], |mut acc, m| {
            acc[m.label as usize] += 1;
            acc
        }))
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    Ok(json!({
        "modes": result.modes.len(),
        "labels": counts,
        "bics": result.bic_count(),
        "band": result.band,
        "dark_bic": result.dark_bic().map(|m| json!({
            "mode_index": m.mode_index,
            "quasi_energy": [m.quasi_energy.re, m.quasi_energy.im],
        })),
        "real_spread": result.real_spread(),
    }))
}

pub fn ipr_map_cmd(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let grid = s.gamma_norm_grid()?;
    let rows = ipr_map(&s.model_spec()?, &grid, s.steps_per_period()?)?;
    ctx.out.csv(
        "ipr_map.csv",
        &["gamma_norm", "mode_index", "ipr", "re_eps", "im_eps"],
        rows.iter().flat_map(|r| {
            r.ipr.iter().zip(&r.quasi_energy).enumerate().map(move |(i, (ipr, e))| {
                vec![float(r.gamma_norm), i.to_string(), float(*ipr), float(e.re), float(e.im)]
            })
        }),
    )?;
    Ok(json!({ "points": grid.len() }))
}

pub fn evolve_cmd(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let spec = s.model_spec()?;
    let config = spec.build()?;
    let spp = s.steps_per_period()?;
    let periods = s.periods(8.0)?;
    let mut extra = json!({});
    let initial = match s.run.initial.unwrap_or(InitialKind::DarkBic) {
        InitialKind::DarkBic => {
            let dark = find_dark_bic(&spec, spp, &s.classify_params()?)?;
            extra = json!({
                "dark_bic": {
                    "mode_index": dark.mode.mode_index,
                    "quasi_energy": [dark.mode.quasi_energy.re, dark.mode.quasi_energy.im],
                    "lossy_population": dark.lossy_population,
                }
            });
            StateVector::new(dark.mode.profile)
        }
        InitialKind::Packet => {
            let p = gaussian_packet(&s.packet(), config.n_sites())?;
            if let Some(w) = p.warning() {
                ctx.warn(w);
            }
            p.state
        }
        InitialKind::Site => {
            let site = s.run.site.unwrap_or(0);
            let offset = config
                .offset_of(site)
                .ok_or_else(|| CliError::Usage(format!("run.site = {site} is outside the lattice")))?;
            StateVector::localized(config.n_sites(), offset)
        }
    };
    let options = EvolveOptions::new(periods * config.drive().period())
        .steps_per_period(spp)
        .samples_per_period(s.samples_per_period(16)?)
        .frame(s.frame());
    let traj = evolve(&config, &initial, &options)?;
    write_trajectory(ctx, "", &config, &traj)?;
    let last = traj.final_state();
    Ok(json!({
        "initial": extra,
        "overlap": profile_overlap(&initial.amplitudes, &last.amplitudes),
        "final_norm": floquet_lattice::norm(&last),
        "final_leak": traj.leak().last(),
        "leak_identity_residual": traj.leak_identity_residual(),
        "samples": traj.len(),
    }))
}

pub fn scatter_cmd(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let spec = s.model_spec()?;
    let gammas = match s.run.gamma {
        Some(_) => s.gamma_grid()?,
        None => vec![spec.gamma],
    };
    let spp = s.steps_per_period()?;
    let periods = s.periods(30.0)?;
    let sps = s.samples_per_period(8)?;
    let packet = s.packet();
    let runs = gammas
        .par_iter()
        .map(|&g| {
            let config = spec.with_gamma(g).build()?;
            let run = scatter(&config, &packet, periods, spp, sps)?;
            Ok((config, run))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if let Some(w) = runs.first().and_then(|(_, r)| r.packet_warning.clone()) {
        ctx.warn(w);
    }
    ctx.out.csv(
        "reflectivity.csv",
        &["gamma", "reflectivity", "leak", "leak_identity_residual"],
        gammas.iter().zip(&runs).map(|(g, (_, r))| {
            vec![
                float(*g),
                float(r.result.reflectivity),
                float(*r.trajectory.leak().last().unwrap_or(&0.0)),
                float(r.trajectory.leak_identity_residual()),
            ]
        }),
    )?;
    if s.output.trajectory.unwrap_or(false) {
        for (i, (config, run)) in runs.iter().enumerate() {
            write_trajectory(ctx, &format!("_{i:03}"), config, &run.trajectory)?;
        }
    }
    Ok(json!({
        "gamma": gammas,
        "reflectivity": runs.iter().map(|(_, r)| r.result.reflectivity).collect::<Vec<_>>(),
        "t_final": runs.first().map(|(_, r)| r.result.t_final),
    }))
}

pub fn decay(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let variable = match s.omega_grid()? {
        Some(values) => {
            if s.run.gamma.is_some() {
                return Err(CliError::Usage("give either run.gamma or run.omega for a decay sweep, not both".into()));
            }
            DecayVariable::Omega {
                values,
                tuning: s.run.omega_tuning.unwrap_or(OmegaTuning::Fixed),
            }
        }
        None => DecayVariable::Gamma(s.gamma_grid()?),
    };
    let points = decay_sweep(
        &s.model_spec()?,
        &variable,
        s.probe(Probe::Periods(8.0))?,
        s.steps_per_period()?,
        &s.classify_params()?,
    )?;
    let skipped: Vec<String> = points.iter().filter_map(|p| p.decay.is_none().then(|| p.diagnostic.clone()).flatten()).collect();
    for d in skipped {
        ctx.warn(d);
    }
    ctx.out.csv(
        "decay.csv",
        &[
            "value",
            "gamma",
            "gamma_norm",
            "omega",
            "t_probe",
            "P",
            "im_eps_dark",
            "leak_identity_residual",
            "diagnostic",
        ],
        points.iter().map(|p| {
            vec![
                float(p.value),
                float(p.gamma),
                float(p.gamma_norm),
                float(p.omega),
                float(p.t_probe),
                opt_float(p.decay),
                opt_float(p.dark_imag),
                opt_float(p.leak_identity_residual),
                p.diagnostic.clone().unwrap_or_default(),
            ]
        }),
    )?;
    Ok(json!({
        "variable": match variable { DecayVariable::Gamma(_) => "gamma", DecayVariable::Omega { .. } => "omega" },
        "points": points.len(),
        "computed": points.iter().filter(|p| p.decay.is_some()).count(),
    }))
}

pub fn nonlinear(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let points = nonlinear_stability(
        &s.model_spec()?,
        &s.u_grid()?,
        s.whole_periods(8)?,
        s.steps_per_period()?,
        &s.classify_params()?,
    )?;
    ctx.out.csv(
        "nonlinear.csv",
        &["u", "P", "overlap", "leak_identity_residual"],
        points
            .iter()
            .map(|p| vec![float(p.u), float(p.decay), float(p.overlap), float(p.leak_identity_residual)]),
    )?;
    let decays: Vec<f64> = points.iter().map(|p| p.decay).collect();
    let (lo, hi) = decays.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(json!({ "points": points.len(), "relative_variation": (hi - lo) / hi.abs().max(f64::MIN_POSITIVE) }))
}

pub fn multimode(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let base = s.model_spec()?;
    let (k, g) = defect_pair(&base)?;
    let modes = s.modes()?;
    let periods = s.whole_periods(80)?;
    let spp = s.steps_per_period()?;
    let sps = s.samples_per_period(4)?;
    let params = s.classify_params()?;
    let runs: Vec<(usize, Result<DarkBicEvolution, String>)> = modes
        .par_iter()
        .map(|&m| {
            let spec = ModelSpec {
                profile: Profile::Multimode { modes: m, k, g },
                ..base.clone()
            };
            let run = find_dark_bic(&spec, spp, &params)
                .and_then(|dark| evolve_dark_bic(dark, &spec, periods, spp, sps))
                .map_err(|e| e.to_string());
            (m, run)
        })
        .collect();
    let mut rows = Vec::new();
    for (m, run) in &runs {
        match run {
            Ok(r) => rows.push(vec![
                m.to_string(),
                float(r.dark.mode.quasi_energy.re),
                float(r.dark.mode.quasi_energy.im),
                float(r.dark.lossy_population),
                float(r.overlap),
                float(*r.period_norms.last().unwrap_or(&f64::NAN)),
                float(r.final_lossy_population),
                float(r.trajectory.leak_identity_residual()),
                String::new(),
            ]),
            Err(e) => {
                ctx.warn(format!("M = {m}: {e}"));
                let mut row = vec![m.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(e.clone());
                rows.push(row);
            }
        }
    }
    ctx.out.csv(
        "multimode.csv",
        &[
            "M",
            "re_eps",
            "im_eps",
            "lossy_population",
            "overlap",
            "final_norm",
            "final_lossy_population",
            "leak_identity_residual",
            "diagnostic",
        ],
        rows,
    )?;
    if s.output.trajectory.unwrap_or(false) {
        for (m, run) in &runs {
            if let Ok(r) = run {
                write_trajectory(ctx, &format!("_M{m}"), &r.dark.config, &r.trajectory)?;
            }
        }
    }
    Ok(json!({ "M": modes, "found": runs.iter().filter(|(_, r)| r.is_ok()).count() }))
}

pub fn hfe(ctx: &mut Context) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let spec = s.model_spec()?;
    let (k, g) = defect_pair(&spec)?;
    let drive = spec.drive()?;
    let omega = drive.frequency;
    if s.run.gamma_norm.is_some() {
        let grid = s.gamma_norm_grid()?;
        ctx.out.csv(
            "rates.csv",
            &["gamma_norm", "q", "eta", "zeta", "alpha", "beta"],
            grid.iter().map(|&gn| {
                let r = named_rates(k, g, gn, omega);
                vec![float(gn), float(r.q), float(r.eta), float(r.zeta), float(r.alpha), float(r.beta)]
            }),
        )?;
    }
    if let Some(omegas) = s.omega_grid()? {
        let roots = omegas
            .iter()
            .map(|&w| Ok(vec![float(w), float(beta_root(k, g, w, s.bracket())?)]))
            .collect::<Result<Vec<_>, CliError>>()?;
        ctx.out.csv("beta_root.csv", &["omega", "gamma_star"], roots)?;
    }
    let rates = named_rates(k, g, drive.gamma_norm(), omega);
    let modes = match s.run.modes {
        Some(_) => s.modes()?,
        None => vec![3],
    };
    let mut rows = Vec::new();
    for &m in &modes {
        let chain = reduced_chain(m, rates.zeta, spec.gamma)?;
        for (i, e) in chain.eigenvalues.iter().enumerate() {
            rows.push(vec![m.to_string(), i.to_string(), float(e.re), float(e.im), float(chain.dark_residual())]);
        }
    }
    ctx.out.csv("reduced.csv", &["M", "index", "re", "im", "dark_residual"], rows)?;
    let report = hfe_vs_exact(&spec, s.steps_per_period()?, &s.classify_params()?)?;
    let body = serde_json::to_string_pretty(&report).expect("report serializes");
    ctx.out.write("comparison.json", body + "\n")?;
    Ok(json!({ "max_residual": report.max_residual, "rates": rates }))
}

/// Doubling verification at the scenario's model point: quasi-energies of the
/// monodromy and the one-period evolution of a state on the central site.
pub fn check(scenario: &Scenario) -> Result<Value, CliError> {
    let config = scenario.model_spec()?.build()?;
    let spp = scenario.steps_per_period()?;
    let params = scenario.classify_params()?;
    let (coarse, fine) = rayon::join(
        || compute_spectrum(&config.clone().with_nonlinearity(vec![0.0; config.n_sites()])?, spp, &params),
        || compute_spectrum(&config.clone().with_nonlinearity(vec![0.0; config.n_sites()])?, 2 * spp, &params),
    );
    let (coarse, fine) = (coarse?, fine?);
    let omega = config.drive().frequency;
    let fine_eps = fine.quasi_energies();
    let quasi_shift = coarse
        .quasi_energies()
        .iter()
        .map(|a| {
            fine_eps
                .iter()
                .map(|b| {
                    let d = (a.re - b.re).rem_euclid(omega);
                    d.min(omega - d).hypot(a.im - b.im)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let center = config.offset_of(0).unwrap_or(0);
    let options = EvolveOptions::new(config.drive().period()).steps_per_period(spp).frame(scenario.frame());
    let amp = convergence_check(&config, &StateVector::localized(config.n_sites(), center), &options)?;
    eprintln!(
        "check: quasi-energy shift {quasi_shift:.3e} (tol {CHECK_QUASI_ENERGY_TOL:e}), amplitude shift {:.3e} (tol {CHECK_AMPLITUDE_TOL:e})",
        amp.max_amplitude_shift
    );
    let report = json!({
        "steps_per_period": spp,
        "quasi_energy_shift": quasi_shift,
        "amplitude_shift": amp.max_amplitude_shift,
        "leak_shift": amp.leak_shift,
    });
    if !(quasi_shift < CHECK_QUASI_ENERGY_TOL) {
        return Err(CliError::Check(format!("quasi-energy shift {quasi_shift:.3e} exceeds {CHECK_QUASI_ENERGY_TOL:e}")));
    }
    if !(amp.max_amplitude_shift < CHECK_AMPLITUDE_TOL) {
        return Err(CliError::Check(format!(
            "amplitude shift {:.3e} exceeds {CHECK_AMPLITUDE_TOL:e}",
            amp.max_amplitude_shift
        )));
    }
    Ok(report)
}
