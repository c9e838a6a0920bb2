//! Strong self-convergence of the nonlinear scheme on a coupled hierarchy;
//! the finest level stands in for the exact solution.

use chc_core::fem::{l2_distance_across, OperatorSet};
use chc_core::noise::{sample_increments, NoiseProjector, NoiseSpec, WienerIncrements};
use chc_core::potential::Potential;
use chc_core::spectral::EigenBasis;
use chc_core::stepper::{run_trajectory, NoiseLevel, State, Stepper, Storage};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::output::{f, Check, StudyOutput, Table};
use crate::parallel::map_indexed;
use crate::setup;

use super::{mean_se, rate_table, Against, LevelRow, Sweep};

struct Level {
    ops: OperatorSet,
    projector: NoiseProjector,
    steps: usize,
    factor: usize,
}

/// One sample: squared sup errors of every non-reference level, or the
/// failure message of the first level whose Newton solve failed.
struct SampleResult {
    checksum: u64,
    errors: std::result::Result<Vec<f64>, String>,
}

fn levels(cfg: &Config, noise: &NoiseSpec, basis: &EigenBasis) -> Result<Vec<Level>> {
    if cfg.levels_n.len() != cfg.levels_steps.len() || cfg.levels_n.len() < 2 {
        return Err(Error::Study {
            study: "strong",
            message: "need at least two (n, N) levels of equal count".into(),
        });
    }
    let (_, factors) = setup::factors("strong", &cfg.levels_steps)?;
    cfg.levels_n
        .iter()
        .zip(&cfg.levels_steps)
        .zip(factors)
        .map(|((&n, &steps), factor)| {
            let ops = setup::operators(cfg, n)?;
            let projector = setup::projector(&ops, basis, noise)?;
            Ok(Level {
                ops,
                projector,
                steps,
                factor,
            })
        })
        .collect()
}

fn trajectory(
    cfg: &Config,
    lv: &Level,
    basis: &EigenBasis,
    potential: &Potential,
    inc: &WienerIncrements,
) -> Result<Vec<State>> {
    let stepper = Stepper::new(
        &lv.ops,
        potential,
        setup::stepper_config(cfg, cfg.t_end / lv.steps as f64)?,
    )?;
    let x0 = setup::initial_condition(cfg, &lv.ops, basis)?;
    let noise = NoiseLevel {
        increments: inc,
        factor: lv.factor,
        projector: &lv.projector,
    };
    Ok(run_trajectory(
        &stepper,
        x0,
        lv.steps,
        Some(noise),
        Storage::Full,
        |_, _| {},
    )?
    .snapshots)
}

pub fn study(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    let spec = setup::noise_spec(cfg)?;
    let basis = setup::basis(cfg, Some(&spec))?;
    setup::require_admissible(&spec, &basis)?;
    let potential = cfg.potential.build()?;
    let levels = levels(cfg, &spec, &basis)?;
    let reference = levels
        .iter()
        .enumerate()
        .max_by_key(|(_, l)| l.steps)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (fine, factors) = setup::factors("strong", &cfg.levels_steps)?;
    let results = map_indexed(workers, cfg.samples, |s| -> Result<SampleResult> {
        let inc = sample_increments(&spec, &basis, cfg.t_end, fine, &factors, s as u64)?;
        let checksum = inc.checksum();
        let mut paths = Vec::with_capacity(levels.len());
        for lv in &levels {
            match trajectory(cfg, lv, &basis, &potential, &inc) {
                Ok(p) => paths.push(p),
                Err(Error::Core(e @ chc_core::Error::StepFailed { .. })) => {
                    return Ok(SampleResult {
                        checksum,
                        errors: Err(e.to_string()),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        let rref = &levels[reference];
        let rule = rref.ops.rule();
        let errors = levels
            .iter()
            .zip(&paths)
            .enumerate()
            .filter(|(i, _)| *i != reference)
            .map(|(_, (lv, path))| {
                let stride = rref.steps / lv.steps;
                path.iter()
                    .enumerate()
                    .map(|(n, state)| {
                        let d = l2_distance_across(
                            &rref.ops,
                            &paths[reference][n * stride].x,
                            &lv.ops,
                            &state.x,
                            rule,
                        );
                        d * d
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(SampleResult {
            checksum,
            errors: Ok(errors),
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let ok: Vec<&Vec<f64>> = results
        .iter()
        .filter_map(|r| r.errors.as_ref().ok())
        .collect();
    let failed = results.len() - ok.len();
    let compared: Vec<usize> = (0..levels.len()).filter(|&i| i != reference).collect();
    let rows: Vec<LevelRow> = compared
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let vals: Vec<f64> = ok.iter().map(|e| e[j]).collect();
            let (error, stderr) = mean_se(&vals);
            LevelRow {
                sweep: "strong",
                level: i,
                h: levels[i].ops.mesh().h(),
                k: cfg.t_end / levels[i].steps as f64,
                samples: ok.len(),
                error,
                stderr,
            }
        })
        .collect();
    let sweep = Sweep::new(rows, Against::K)?;

    let mut samples = Table::new(&["sample", "checksum", "status"]);
    for (s, r) in results.iter().enumerate() {
        let status = match &r.errors {
            Ok(_) => "ok".to_string(),
            Err(m) => m.clone(),
        };
        samples.push(vec![s.to_string(), format!("{:016x}", r.checksum), status]);
    }

    let mut checks = Vec::new();
    let decreasing = sweep
        .rows
        .windows(2)
        .all(|w| w[1].error <= 1.1 * w[0].error);
    let errors: Vec<String> = sweep
        .rows
        .iter()
        .map(|r| format!("{:.3e}", r.error))
        .collect();
    checks.push(Check::new(
        "errors decrease",
        decreasing && !sweep.rows.is_empty(),
        format!(
            "E max ||X_ref - X_l||^2 = [{}], 10% slack",
            errors.join(", ")
        ),
    ));
    if let (Some(first), Some(last)) = (sweep.rows.first(), sweep.rows.last()) {
        let separated = first.error - 2.0 * first.stderr > last.error + 2.0 * last.stderr;
        checks.push(Check::new(
            "coarse/fine separation",
            separated,
            format!(
                "coarsest {:.3e} +- {:.1e}, finest {:.3e} +- {:.1e} (2 SE)",
                first.error,
                2.0 * first.stderr,
                last.error,
                2.0 * last.stderr
            ),
        ));
    }
    checks.push(Check::new(
        "newton failures",
        failed == 0,
        format!("{failed} of {} samples aborted", results.len()),
    ));
    let mut fit = Table::new(&["quantity", "value"]);
    fit.push(vec!["failed_samples".into(), failed.to_string()]);
    fit.push(vec![
        "slope_k".into(),
        f(sweep.fit.map_or(f64::NAN, |r| r.slope)),
    ]);
    Ok(StudyOutput {
        tables: vec![
            ("strong".into(), rate_table(&[&sweep])),
            ("strong_samples".into(), samples),
            ("strong_summary".into(), fit),
        ],
        checks,
        files: Vec::new(),
    })
}
