//! Plain Monte-Carlo runs of the scheme with pathwise diagnostics.

use chc_core::noise::sample_increments;
use chc_core::stepper::{lyapunov_j, run_trajectory, Maxima, NoiseLevel, Stepper, Storage};

use crate::config::Config;
use crate::error::Result;
use crate::formats::{increments_to_bytes, mesh_to_text};
use crate::output::{f, Check, StudyOutput, Table};
use crate::parallel::map_indexed;
use crate::setup;

pub const TRAJECTORY_HEADER: [&str; 7] = [
    "step",
    "time",
    "mass",
    "J",
    "|Y|1",
    "newton_iters",
    "residual",
];

/// Energy residual tolerance at every accepted step.
pub const ENERGY_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-10;

struct SampleRun {
    checksum: u64,
    maxima: Option<Maxima>,
    failure: Option<String>,
}

pub fn run(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    let spec = setup::noise_spec(cfg)?;
    let basis = setup::basis(cfg, Some(&spec))?;
    if cfg.sigma > 0.0 {
        setup::require_admissible(&spec, &basis)?;
    }
    let potential = cfg.potential.build()?;
    let ops = setup::operators(cfg, cfg.n)?;
    let projector = setup::projector(&ops, &basis, &spec)?;
    let k = cfg.t_end / cfg.steps as f64;
    let stepper = Stepper::new(&ops, &potential, setup::stepper_config(cfg, k)?)?;
    let x0 = setup::initial_condition(cfg, &ops, &basis)?;
    let factors = [1];

    let mut trajectory = Table::new(&TRAJECTORY_HEADER);
    let first = sample_increments(&spec, &basis, cfg.t_end, cfg.steps, &factors, 0)?;
    let runs = map_indexed(
        workers,
        cfg.samples,
        |s| -> Result<(SampleRun, Vec<Vec<String>>)> {
            let inc = sample_increments(&spec, &basis, cfg.t_end, cfg.steps, &factors, s as u64)?;
            let noise = NoiseLevel {
                increments: &inc,
                factor: 1,
                projector: &projector,
            };
            let mut rows = Vec::new();
            let result = run_trajectory(
                &stepper,
                x0.clone(),
                cfg.steps,
                Some(noise),
                Storage::MaximaOnly,
                |state, diag| {
                    if s != 0 {
                        return;
                    }
                    let (energy, y1, iters, residual) = match diag {
                        Some(d) => (d.energy, d.y_h1, d.newton_iterations, d.residual),
                        None => (
                            lyapunov_j(&state.x, &ops, &potential),
                            ops.h1_seminorm(&state.y),
                            0,
                            0.0,
                        ),
                    };
                    rows.push(vec![
                        state.step.to_string(),
                        f(state.time),
                        f(ops.mean(&state.x)),
                        f(energy),
                        f(y1),
                        iters.to_string(),
                        f(residual),
                    ]);
                },
            );
            let run = match result {
                Ok(t) => SampleRun {
                    checksum: inc.checksum(),
                    maxima: Some(t.maxima),
                    failure: None,
                },
                Err(e @ chc_core::Error::StepFailed { .. }) => SampleRun {
                    checksum: inc.checksum(),
                    maxima: None,
                    failure: Some(e.to_string()),
                },
                Err(e) => return Err(e.into()),
            };
            Ok((run, rows))
        },
    )?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut summary = Table::new(&[
        "sample",
        "checksum",
        "status",
        "mass_drift",
        "sup_J",
        "sup_l2",
        "sup_negative_norm",
        "dissipation",
        "energy_residual",
        "energy_residual_flipped",
        "energy_increase",
        "max_newton_iters",
    ]);
    let (mut drift, mut residual, mut increase): (f64, f64, f64) =
        (0.0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut failures = 0;
    for (s, (r, rows)) in runs.iter().enumerate() {
        if s == 0 {
            rows.iter().for_each(|row| trajectory.push(row.clone()));
        }
        let mut row = vec![s.to_string(), format!("{:016x}", r.checksum)];
        match (&r.maxima, &r.failure) {
            (Some(m), _) => {
                drift = drift.max(m.mass_drift);
                residual = residual.max(m.energy_residual);
                increase = increase.max(m.energy_increase);
                row.extend([
                    "ok".to_string(),
                    f(m.mass_drift),
                    f(m.energy),
                    f(m.l2),
                    f(m.negative),
                    f(m.dissipation),
                    f(m.energy_residual),
                    f(m.energy_residual_flipped),
                    f(m.energy_increase),
                    m.newton_iterations.to_string(),
                ]);
            }
            (None, failure) => {
                failures += 1;
                row.push(failure.clone().unwrap_or_default());
                row.extend(std::iter::repeat_n(String::new(), 9));
            }
        }
        summary.push(row);
    }

    let mut checks = vec![
        Check::new(
            "newton failures",
            failures == 0,
            format!("{failures} of {} samples failed", cfg.samples),
        ),
        Check::new(
            "mass conservation",
            drift <= MASS_TOL,
            format!("max drift {drift:.3e} (max {MASS_TOL:e})"),
        ),
        Check::new(
            "energy inequality",
            residual <= ENERGY_TOL,
            format!("max residual {residual:.3e} (max {ENERGY_TOL:e})"),
        ),
    ];
    if cfg.sigma == 0.0 {
        checks.push(Check::new(
            "energy decreases",
            increase <= ENERGY_TOL,
            format!("max J(X^j) - J(X^(j-1)) = {increase:.3e} (max {ENERGY_TOL:e})"),
        ));
    }
    Ok(StudyOutput {
        tables: vec![
            ("trajectory".into(), trajectory),
            ("samples".into(), summary),
        ],
        checks,
        files: vec![
            ("increments_sample0.bin".into(), increments_to_bytes(&first)),
            ("mesh.txt".into(), mesh_to_text(ops.mesh()).into_bytes()),
        ],
    })
}
