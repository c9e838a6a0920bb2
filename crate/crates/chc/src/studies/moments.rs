//! Moment bounds along a refinement ladder: only their stability under
//! refinement is observable, the constants being non-constructive.

use chc_core::noise::sample_increments;
use chc_core::stepper::{
    chemical_potential, lyapunov_j, run_trajectory, Maxima, NoiseLevel, Stepper, Storage,
};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::output::{f, Check, StudyOutput, Table};
use crate::parallel::map_indexed;
use crate::setup;

use super::mean_se;

const STATISTICS: [&str; 4] = ["sup_negative_norm", "sup_l2", "sup_energy", "dissipation"];

/// `(statistic, p) -> sample value` for one trajectory.
fn statistic(m: &Maxima, which: usize, p: i32) -> f64 {
    match which {
        0 => m.negative.powi(2 * p),
        1 => m.l2.powi(2 * p),
        2 => m.energy.powi(p),
        _ => m.dissipation.powi(p),
    }
}

fn ratio(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == min {
        1.0
    } else {
        max / min
    }
}

pub fn study(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    let spec = setup::noise_spec(cfg)?;
    let basis = setup::basis(cfg, Some(&spec))?;
    setup::require_admissible(&spec, &basis)?;
    let potential = cfg.potential.build()?;
    if cfg.levels_n.len() != cfg.levels_steps.len() || cfg.levels_n.is_empty() {
        return Err(Error::Study {
            study: "moments",
            message: "levels_n and levels_N differ in length".into(),
        });
    }
    let (fine, factors) = setup::factors("moments", &cfg.levels_steps)?;
    let mut table = Table::new(&[
        "level",
        "n",
        "N",
        "h",
        "k",
        "M",
        "statistic",
        "p",
        "mean",
        "stderr",
    ]);
    let mut initial = Table::new(&["level", "negative_norm", "energy", "y_h1", "total"]);
    let mut sup_energy = Vec::new();
    let mut dissipation = Vec::new();
    let mut failures = 0;
    let mut mass_drift: f64 = 0.0;
    let mut max_residual = f64::NEG_INFINITY;
    for (level, ((&n, &steps), &factor)) in cfg
        .levels_n
        .iter()
        .zip(&cfg.levels_steps)
        .zip(&factors)
        .enumerate()
    {
        let ops = setup::operators(cfg, n)?;
        let projector = setup::projector(&ops, &basis, &spec)?;
        let k = cfg.t_end / steps as f64;
        let stepper = Stepper::new(&ops, &potential, setup::stepper_config(cfg, k)?)?;
        let x0 = setup::initial_condition(cfg, &ops, &basis)?;
        let y0 = chemical_potential(&x0, &ops, &potential)?;
        let neg = ops.negative_norm(&x0)?;
        let j0 = lyapunov_j(&x0, &ops, &potential);
        let y1 = ops.h1_seminorm(&y0);
        initial.push(vec![
            level.to_string(),
            f(neg),
            f(j0),
            f(y1),
            f(neg + j0 + y1),
        ]);

        let maxima = map_indexed(workers, cfg.samples, |s| -> Result<Option<Maxima>> {
            let inc = sample_increments(&spec, &basis, cfg.t_end, fine, &factors, s as u64)?;
            let noise = NoiseLevel {
                increments: &inc,
                factor,
                projector: &projector,
            };
            match run_trajectory(
                &stepper,
                x0.clone(),
                steps,
                Some(noise),
                Storage::MaximaOnly,
                |_, _| {},
            ) {
                Ok(t) => Ok(Some(t.maxima)),
                Err(chc_core::Error::StepFailed { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let ok: Vec<Maxima> = maxima.iter().flatten().copied().collect();
        failures += maxima.len() - ok.len();
        for m in &ok {
            mass_drift = mass_drift.max(m.mass_drift);
            max_residual = max_residual.max(m.energy_residual);
        }
        for (which, name) in STATISTICS.iter().enumerate() {
            for p in [1, 2] {
                let vals: Vec<f64> = ok.iter().map(|m| statistic(m, which, p)).collect();
                let (mean, se) = mean_se(&vals);
                if p == 1 && which == 2 {
                    sup_energy.push(mean);
                }
                if p == 1 && which == 3 {
                    dissipation.push(mean);
                }
                table.push(vec![
                    level.to_string(),
                    n.to_string(),
                    steps.to_string(),
                    f(ops.mesh().h()),
                    f(k),
                    ok.len().to_string(),
                    name.to_string(),
                    p.to_string(),
                    f(mean),
                    f(se),
                ]);
            }
        }
    }
    let (re, rd) = (ratio(&sup_energy), ratio(&dissipation));
    let checks = vec![
        Check::new(
            "sup energy ratio",
            re <= 3.0,
            format!("max/min of E sup J = {re:.4} (max 3)"),
        ),
        Check::new(
            "dissipation ratio",
            rd <= 3.0,
            format!("max/min of E sum k|Y|_1^2 = {rd:.4} (max 3)"),
        ),
        Check::new(
            "newton failures",
            failures == 0,
            format!("{failures} failed trajectories"),
        ),
        Check::new(
            "mass drift",
            mass_drift <= 1e-10,
            format!("max |mean(X^j) - mean(X^0)| = {mass_drift:.3e}"),
        ),
    ];
    let mut summary = Table::new(&["quantity", "value"]);
    summary.push(vec!["sup_energy_ratio".into(), f(re)]);
    summary.push(vec!["dissipation_ratio".into(), f(rd)]);
    summary.push(vec!["failed_trajectories".into(), failures.to_string()]);
    summary.push(vec!["max_mass_drift".into(), f(mass_drift)]);
    summary.push(vec!["max_energy_residual".into(), f(max_residual)]);
    Ok(StudyOutput {
        tables: vec![
            ("moments".into(), table),
            ("moments_initial".into(), initial),
            ("moments_summary".into(), summary),
        ],
        checks,
        files: Vec::new(),
    })
}
