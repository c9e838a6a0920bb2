//! Empirical Hölder quotients of discrete paths in time, over a dyadic
//! ladder of lags, under refinement of `k` with coupled noise.

use chc_core::fem::FemFunction;
use chc_core::noise::sample_increments;
use chc_core::stepper::{run_trajectory, NoiseLevel, Stepper, Storage};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::output::{f, Check, StudyOutput, Table};
use crate::parallel::map_indexed;
use crate::setup;

/// `max ||X^{(i+1)L} - X^{iL}|| / (L k)^gamma` over dyadic `L` dividing the
/// step count.
pub fn holder_quotient(
    ops: &chc_core::fem::OperatorSet,
    path: &[FemFunction],
    k: f64,
    gamma: f64,
) -> f64 {
    let steps = path.len().saturating_sub(1);
    let mut best: f64 = 0.0;
    let mut lag = steps;
    while lag >= 1 {
        if steps % lag == 0 {
            let scale = (lag as f64 * k).powf(gamma);
            for i in 0..steps / lag {
                let d = ops.l2_norm(&path[(i + 1) * lag].sub(&path[i * lag]));
                best = best.max(d / scale);
            }
        }
        lag /= 2;
    }
    best
}

pub fn study(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    let spec = setup::noise_spec(cfg)?;
    let basis = setup::basis(cfg, Some(&spec))?;
    setup::require_admissible(&spec, &basis)?;
    let potential = cfg.potential.build()?;
    if cfg.levels_n.len() != cfg.levels_steps.len() || cfg.levels_n.is_empty() {
        return Err(Error::Study {
            study: "holder",
            message: "levels_n and levels_N differ in length".into(),
        });
    }
    let (fine, factors) = setup::factors("holder", &cfg.levels_steps)?;
    let mut table = Table::new(&["level", "n", "N", "k", "M", "gamma", "quotient"]);
    // quotients[level][gamma], maximized over samples
    let mut quotients = Vec::new();
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
        let per_sample = map_indexed(workers, cfg.samples, |s| -> Result<Vec<f64>> {
            let inc = sample_increments(&spec, &basis, cfg.t_end, fine, &factors, s as u64)?;
            let noise = NoiseLevel {
                increments: &inc,
                factor,
                projector: &projector,
            };
            let traj = run_trajectory(
                &stepper,
                x0.clone(),
                steps,
                Some(noise),
                Storage::Full,
                |_, _| {},
            )?;
            let path: Vec<FemFunction> = traj.snapshots.into_iter().map(|s| s.x).collect();
            Ok(cfg
                .gammas
                .iter()
                .map(|&g| holder_quotient(&ops, &path, k, g))
                .collect())
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let q: Vec<f64> = (0..cfg.gammas.len())
            .map(|g| per_sample.iter().map(|v| v[g]).fold(0.0, f64::max))
            .collect();
        for (g, &gamma) in cfg.gammas.iter().enumerate() {
            table.push(vec![
                level.to_string(),
                n.to_string(),
                steps.to_string(),
                f(k),
                cfg.samples.to_string(),
                f(gamma),
                f(q[g]),
            ]);
        }
        quotients.push(q);
    }
    let mut checks = vec![Check::new(
        "quotients finite",
        quotients.iter().flatten().all(|q| q.is_finite()),
        "every level and exponent",
    )];
    if let Some(g) = cfg.gammas.iter().position(|&g| g == 0.25) {
        let vals: Vec<f64> = quotients.iter().map(|q| q[g]).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = if max == min { 1.0 } else { max / min };
        checks.push(Check::new(
            "stability at 0.25",
            ratio <= 3.0,
            format!("max/min quotient over k-refinement = {ratio:.4} (max 3)"),
        ));
    }
    Ok(StudyOutput {
        tables: vec![("holder".into(), table)],
        checks,
        ..Default::default()
    })
}
