//! Command implementations.  Each returns the rendered output string; the
//! caller handles file emission and exit codes.

use grabi_core::dynamics::{lattice_gap_sweep, sweep_parameter, LatticeSpec, SweepParameter};
use grabi_core::lindblad::{
    build_dressed_dissipator, build_liouvillian, canonical_conserved_from_decomposition,
    conserved_quantities_recurrence, decay_rate_fit, decompose_liouvillian,
    evolve_density_matrix, rotate_conserved_set, stationary_from_conserved, BasisTag,
    ConservedQuantitySet, DensityMatrix, DressedSystem, EvolveMethod, LindbladRates,
};
use grabi_core::model::em_dual_form;
use grabi_core::susy::{
    build_supercharge, kernel_dimensions, resolve_displacement_argument, verify_susy_algebra,
    zero_modes_displacement, zero_modes_recurrence, SuperchargeFamily,
};
use grabi_core::{c64, GrParams, Truncation};
use serde_json::{json, Value};

use crate::config::{InitialState, LatticeConfig, ModelConfig, RunConfig};
use crate::error::CliError;
use crate::output::{render_report, render_table, Meta, Table};

fn truncation(cfg: &RunConfig) -> Result<Truncation, CliError> {
    Truncation::new(cfg.trunc.n_max, cfg.trunc.interior_margin)
        .map_err(|e| CliError::config(e.to_string()))
}

fn require_rates(cfg: &RunConfig) -> Result<LindbladRates, CliError> {
    cfg.rates
        .ok_or_else(|| CliError::config("this command requires a rates section".to_string()))
}

fn time_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let tg = cfg.times;
    if tg.t_max.is_nan() || tg.t_max <= 0.0 || tg.steps == 0 {
        return Err(CliError::config("times.t_max and times.steps must be positive".to_string()));
    }
    let dt = tg.t_max / tg.steps as f64;
    Ok((1..=tg.steps).map(|i| i as f64 * dt).collect())
}

/// Table of [swept value, E_0…E_{k−1}, delta21, susy_residual, crossing].
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<String, CliError> {
    let (p, _) = cfg.gr_params().map_err(CliError::config)?;
    let trunc = truncation(cfg)?;
    let k = cfg.k_levels.max(2);
    let mut meta = Meta::new("spectrum", cfg);

    let (param, values) = match &cfg.sweep {
        Some(sweep) => {
            let param = SweepParameter::parse(&sweep.param).ok_or_else(|| {
                CliError::config(format!(
                    "sweep.param must name a model parameter (omega, delta, g1, g2, lambda), got {}",
                    sweep.param
                ))
            })?;
            if sweep.count < 2 {
                return Err(CliError::config("sweep.count must be at least 2".to_string()));
            }
            let step = (sweep.max - sweep.min) / (sweep.count - 1) as f64;
            let values: Vec<f64> =
                (0..sweep.count).map(|i| sweep.min + step * i as f64).collect();
            meta.push("sweep_param", sweep.param.clone());
            (param, values)
        }
        None => (SweepParameter::G1, vec![p.g1]),
    };

    let rows = sweep_parameter(&p, param, &values, trunc, k)?;
    let mut columns = vec!["param".to_string()];
    for i in 0..k {
        columns.push(format!("e{i}"));
    }
    columns.push("delta21".into());
    columns.push("susy_residual".into());
    columns.push("susy_crossing".into());
    let table = Table {
        columns,
        rows: rows
            .iter()
            .map(|r| {
                let mut row = vec![r.g1];
                row.extend(r.lowest.iter().copied());
                while row.len() < k + 1 {
                    row.push(f64::NAN);
                }
                row.push(r.delta21);
                row.push(r.susy_residual);
                row.push(if r.susy_crossing { 1.0 } else { 0.0 });
                row
            })
            .collect(),
    };
    Ok(render_table(&meta, &table, cfg.output_format))
}

/// JSON report of the SUSY structure at the configured point.
pub fn cmd_susy_verify(cfg: &RunConfig) -> Result<String, CliError> {
    let (p, _) = cfg.gr_params().map_err(CliError::config)?;
    let trunc = truncation(cfg)?;
    let mut meta = Meta::new("susy-verify", cfg);
    meta.push("svd_tol", format!("{}", cfg.svd_tol));

    let residual = p.susy_residual();
    let residual_degenerate = p.susy_residual_degenerate();
    let on_line = p.is_on_susy_line(1e-10 * p.omega.powi(3).max(1.0));

    let mut body = json!({
        "params": p,
        "susy_residual": residual,
        "susy_residual_degenerate": residual_degenerate,
        "susy_residual_swapped": p.susy_residual_swapped(),
        "status": if on_line { "on_susy_line" } else { "off_susy_line" },
    });

    if on_line {
        let family = if p.lambda == 0.0 {
            SuperchargeFamily::NonRwaMainText
        } else {
            SuperchargeFamily::NonRwaLambda
        };
        let q = build_supercharge(&p, trunc, family)?;
        let report = verify_susy_algebra(&q, &p, trunc)?;
        let (ker_minus, ker_plus) = kernel_dimensions(&q, cfg.svd_tol)?;

        // truncation-convergence deltas at doubled n_max
        let trunc2 = trunc.doubled();
        let q2 = build_supercharge(&p, trunc2, family)?;
        let report2 = verify_susy_algebra(&q2, &p, trunc2)?;

        let obj = body.as_object_mut().expect("object");
        obj.insert("family".into(), json!(format!("{family:?}")));
        obj.insert("shift_c".into(), json!(q.shift_c()));
        obj.insert("witten_index".into(), json!(ker_minus as i64 - ker_plus as i64));
        obj.insert("kernel_dims".into(), json!([ker_minus, ker_plus]));
        obj.insert("partner_residual".into(), json!(report.residual_partner));
        obj.insert(
            "partner_residual_doubled".into(),
            json!(report2.residual_partner),
        );
        obj.insert(
            "isospectral_unpaired_low_modes".into(),
            json!(report.isospectral.unpaired_low_modes),
        );
        obj.insert(
            "isospectral_max_pairing_gap".into(),
            json!(report.isospectral.max_pairing_gap),
        );

        if p.lambda == 0.0 {
            let modes = zero_modes_recurrence(&p, trunc)?;
            let disp = zero_modes_displacement(&p, trunc)?;
            let modes2 = zero_modes_recurrence(&p, trunc2)?;
            let (op, om) = modes.sector_overlaps(&disp);
            let res = resolve_displacement_argument(&p, trunc)?;
            obj.insert(
                "zero_mode_residuals".into(),
                json!([modes.annihilation_residuals.0, modes.annihilation_residuals.1]),
            );
            obj.insert(
                "zero_mode_residuals_doubled".into(),
                json!([modes2.annihilation_residuals.0, modes2.annihilation_residuals.1]),
            );
            obj.insert(
                "zero_mode_parities".into(),
                json!([modes.parity_eigenvalues.0, modes.parity_eigenvalues.1]),
            );
            obj.insert("construction_overlaps".into(), json!([op, om]));
            obj.insert(
                "displacement_argument".into(),
                json!({ "value": res.value, "formula": format!("{:?}", res.formula) }),
            );
        }
    }

    Ok(render_report(&meta, body))
}

fn build_system(cfg: &RunConfig) -> Result<(GrParams, DressedSystem, LindbladRates), CliError> {
    let (p, _) = cfg.gr_params().map_err(CliError::config)?;
    let trunc = truncation(cfg)?;
    let rates = require_rates(cfg)?;
    let sys = DressedSystem::new(&p, trunc, rates.n_levels)?;
    Ok((p, sys, rates))
}

fn initial_density(cfg: &RunConfig, sys: &DressedSystem) -> Result<DensityMatrix, CliError> {
    match cfg.initial {
        InitialState::FockUp { n } => {
            let dim = 2 * sys.trunc().n_max();
            if n >= sys.trunc().n_max() {
                return Err(CliError::config(format!(
                    "initial Fock level {n} outside the truncation"
                )));
            }
            let psi = faer::Col::from_fn(dim, |i| {
                c64::new(if i == n { 1.0 } else { 0.0 }, 0.0)
            });
            let bare = DensityMatrix::from_pure(&psi, BasisTag::Bare)?;
            Ok(sys.dressed_density_from_bare(bare.entries())?)
        }
        InitialState::CoherentUp { alpha } => {
            let n = sys.trunc().n_max();
            let r = alpha.norm();
            let psi = faer::Col::from_fn(2 * n, |i| {
                if i >= n || r == 0.0 {
                    c64::new(if i == 0 && r == 0.0 { 1.0 } else { 0.0 }, 0.0)
                } else {
                    let k = i as f64;
                    let log_fact: f64 = (1..=i).map(|m| (m as f64).ln()).sum();
                    let amp = (-0.5 * r * r + k * r.ln() - 0.5 * log_fact).exp();
                    (alpha / r).powu(i as u32) * amp
                }
            });
            let bare = DensityMatrix::from_pure(&psi, BasisTag::Bare)?;
            Ok(sys.dressed_density_from_bare(bare.entries())?)
        }
    }
}

fn conserved_or_fallback(
    diss: &grabi_core::lindblad::DressedDissipator,
    dec: &grabi_core::lindblad::LiouvillianDecomposition,
) -> Result<ConservedQuantitySet, CliError> {
    // recurrence needs the degenerate pair; fall back to the decomposition
    match conserved_quantities_recurrence(diss) {
        Ok(cq) => Ok(cq),
        Err(_) => Ok(canonical_conserved_from_decomposition(dec)?),
    }
}

/// Trajectory table [t, mean_photon, inversion, trace_err, I_…].
pub fn cmd_lindblad_evolve(cfg: &RunConfig) -> Result<String, CliError> {
    let (_, sys, rates) = build_system(cfg)?;
    let diss = build_dressed_dissipator(&sys, &rates)?;
    let l = build_liouvillian(&diss);
    let dec = decompose_liouvillian(&l)?;
    let cq = conserved_or_fallback(&diss, &dec)?;
    let rho0 = initial_density(cfg, &sys)?;
    let times = time_grid(cfg)?;
    let traj = evolve_density_matrix(&l, &rho0, &times, EvolveMethod::EigenPropagation)?;

    let mut meta = Meta::new("lindblad-evolve", cfg);
    meta.push("zero_dim", dec.zero_dim.to_string());
    let mut columns = vec![
        "t".to_string(),
        "mean_photon".to_string(),
        "inversion".to_string(),
        "trace_err".to_string(),
    ];
    for label in &cq.labels {
        columns.push(format!("i_{label}"));
    }
    let rows = times
        .iter()
        .zip(&traj)
        .map(|(&t, rho)| {
            let mut row = vec![
                t,
                sys.mean_photon(rho),
                sys.inversion(rho),
                (rho.trace().re - 1.0).abs() + rho.trace().im.abs(),
            ];
            for label in &cq.labels {
                row.push(cq.evaluate(label, rho).expect("label").re);
            }
            row
        })
        .collect();
    Ok(render_table(&meta, &Table { columns, rows }, cfg.output_format))
}

/// Stationary-manifold report: zero_dim, plateau observables, conserved
/// table.
pub fn cmd_lindblad_stationary(cfg: &RunConfig) -> Result<String, CliError> {
    let (_, sys, rates) = build_system(cfg)?;
    let diss = build_dressed_dissipator(&sys, &rates)?;
    let l = build_liouvillian(&diss);
    let dec = decompose_liouvillian(&l)?;
    let cq = conserved_or_fallback(&diss, &dec)?;
    let rho0 = initial_density(cfg, &sys)?;

    let st_projected = dec.project_stationary(&rho0)?;
    let mut body = json!({
        "zero_dim": dec.zero_dim,
        "zero_tol": dec.zero_tol,
        "stationary_mean_photon_projected": sys.mean_photon(&st_projected),
        "stationary_inversion_projected": sys.inversion(&st_projected),
        "conserved_values": cq
            .labels
            .iter()
            .map(|l| json!({ "label": l, "value": cq.evaluate(l, &rho0).expect("label").re }))
            .collect::<Vec<Value>>(),
        "rho_bar_diagonals": cq
            .labels
            .iter()
            .map(|label| {
                let bar = cq.rho_bar(label).expect("label");
                let diag: Vec<f64> = (0..bar.nrows()).map(|i| bar[(i, i)].re).collect();
                json!({ "label": label, "diagonal": diag })
            })
            .collect::<Vec<Value>>(),
    });
    // the closed-form stationary state applies on the degenerate manifold
    if let Ok(st) = stationary_from_conserved(&rho0, &cq, &diss) {
        let obj = body.as_object_mut().expect("object");
        obj.insert("stationary_mean_photon_conserved".into(), json!(sys.mean_photon(&st)));
        obj.insert("stationary_inversion_conserved".into(), json!(sys.inversion(&st)));
    }

    let mut meta = Meta::new("lindblad-stationary", cfg);
    meta.push("zero_tol_rel", format!("{}", grabi_core::lindblad::ZERO_TOL_REL));
    Ok(render_report(&meta, body))
}

/// Exponential decay fit of the conserved functional off the SUSY line.
pub fn cmd_lindblad_decay_fit(cfg: &RunConfig) -> Result<String, CliError> {
    let (p, sys_off, rates) = build_system(cfg)?;
    // reference SUSY point: same parameters with g1 solved onto the line
    let g1_ref = match cfg.reference_g1 {
        Some(v) => v,
        None => {
            let v2 = p.delta * p.omega + p.g2 * p.g2;
            if v2 < 0.0 {
                return Err(CliError::config(
                    "cannot solve a reference SUSY g1: Δω + g2² < 0; set reference_g1".to_string(),
                ));
            }
            v2.sqrt().copysign(if p.g1 == 0.0 { 1.0 } else { p.g1 })
        }
    };
    let p_ref = GrParams { g1: g1_ref, ..p };
    let trunc = truncation(cfg)?;
    let sys_ref = DressedSystem::new(&p_ref, trunc, rates.n_levels)?;
    let diss_ref = build_dressed_dissipator(&sys_ref, &rates)?;
    let cq_ref = conserved_quantities_recurrence(&diss_ref)?;
    let cq = rotate_conserved_set(&cq_ref, &sys_ref, &sys_off)?;

    let diss_off = build_dressed_dissipator(&sys_off, &rates)?;
    let l_off = build_liouvillian(&diss_off);
    let rho0 = initial_density(cfg, &sys_off)?;
    let times = time_grid(cfg)?;
    let fit = decay_rate_fit(&l_off, &rho0, &cq, &times)?;

    let mut meta = Meta::new("lindblad-decay-fit", cfg);
    meta.push("reference_g1", format!("{g1_ref}"));
    let body = json!({
        "kappa_fit": fit.kappa,
        "fit_residual": fit.fit_residual,
        "points_used": fit.points_used,
        "delta_g1": p.g1 - g1_ref,
    });
    Ok(render_report(&meta, body))
}

fn lattice_j_values(lat: &LatticeConfig) -> Result<Vec<f64>, CliError> {
    if let Some(values) = &lat.j_values {
        if values.is_empty() {
            return Err(CliError::config("lattice.j_values must not be empty".to_string()));
        }
        return Ok(values.clone());
    }
    if let Some(range) = &lat.j_sweep {
        if range.count < 2 {
            return Err(CliError::config("lattice.j_sweep.count must be at least 2".to_string()));
        }
        let step = (range.max - range.min) / (range.count - 1) as f64;
        return Ok((0..range.count).map(|i| range.min + step * i as f64).collect());
    }
    Err(CliError::config(
        "lattice section needs either j_values or j_sweep".to_string(),
    ))
}

/// [J, E_0…E_{k−1}, delta21] over the hopping sweep.
pub fn cmd_lattice(cfg: &RunConfig) -> Result<String, CliError> {
    let (p, _) = cfg.gr_params().map_err(CliError::config)?;
    let lat = cfg
        .lattice
        .as_ref()
        .ok_or_else(|| CliError::config("this command requires a lattice section".to_string()))?;
    let j_values = lattice_j_values(lat)?;
    let spec = LatticeSpec {
        site_params: vec![p; lat.n_sites],
        hopping_j: 0.0,
        n_max_site: lat.n_max_site,
        boundary: Default::default(),
    };
    let k = cfg.k_levels.max(2);
    let rows = lattice_gap_sweep(&spec, &j_values, k)?;

    let mut meta = Meta::new("lattice", cfg);
    meta.push("n_sites", lat.n_sites.to_string());
    meta.push("n_max_site", lat.n_max_site.to_string());
    let mut columns = vec!["j".to_string()];
    for i in 0..k {
        columns.push(format!("e{i}"));
    }
    columns.push("delta21".into());
    let table = Table {
        columns,
        rows: rows
            .iter()
            .map(|r| {
                let mut row = vec![r.hopping_j];
                row.extend(r.lowest.iter().copied());
                while row.len() < k + 1 {
                    row.push(f64::NAN);
                }
                row.push(r.delta21);
                row
            })
            .collect(),
    };
    Ok(render_table(&meta, &table, cfg.output_format))
}

/// Report the generalized Rabi parameters produced by a physical mapping.
pub fn cmd_map(cfg: &RunConfig, which: MapKind) -> Result<String, CliError> {
    match (&cfg.model, which) {
        (ModelConfig::Rd(_), MapKind::Rd) | (ModelConfig::LambdaScheme { .. }, MapKind::Lambda) => {}
        _ => {
            return Err(CliError::config(format!(
                "map {which:?} requires a matching model section (type = {})",
                match which {
                    MapKind::Rd => "rd",
                    MapKind::Lambda => "lambda_scheme",
                }
            )))
        }
    }
    let (p, cancelled) = cfg.gr_params().map_err(CliError::config)?;
    let mut body = json!({
        "gr_params": p,
        "susy_residual": p.susy_residual(),
        "susy_residual_degenerate": p.susy_residual_degenerate(),
    });
    if p.lambda == 0.0 {
        let em = em_dual_form(&p)?;
        let obj = body.as_object_mut().expect("object");
        obj.insert("omega_e".into(), json!(em.omega_e));
        obj.insert("omega_b".into(), json!(em.omega_b));
        obj.insert("em_residual".into(), json!(em.residual));
    }
    if let Some(flag) = cancelled {
        body.as_object_mut()
            .expect("object")
            .insert("bloch_siegert_cancelled".into(), json!(flag));
    }
    let meta = Meta::new(
        match which {
            MapKind::Rd => "map-rd",
            MapKind::Lambda => "map-lambda",
        },
        cfg,
    );
    Ok(render_report(&meta, body))
}

#[derive(Debug, Clone, Copy)]
pub enum MapKind {
    Rd,
    Lambda,
}
