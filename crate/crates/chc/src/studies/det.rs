//! Deterministic linear error rates, evaluated exactly in the discrete
//! eigenbasis of `A_h` and against the spectral semigroup.

use chc_core::eigen::DiscreteSpectrum;
use chc_core::fem::OperatorSet;
use chc_core::noise::projection_rule;
use chc_core::spectral::{EigenBasis, SpectralField};

use crate::config::Config;
use crate::error::Result;
use crate::output::StudyOutput;
use crate::parallel::map_indexed;
use crate::setup;

use super::{rate_table, Against, LevelRow, Sweep};

/// `(1 + k mu^2)^{-n}` without overflow.
fn resolvent_power(k: f64, mu: f64, n: usize) -> f64 {
    (-(n as f64) * (k * mu * mu).ln_1p()).exp()
}

struct Level {
    ops: OperatorSet,
    spectrum: DiscreteSpectrum,
}

fn level(cfg: &Config, n: usize) -> Result<Level> {
    let ops = setup::operators(cfg, n)?;
    let spectrum = DiscreteSpectrum::compute(&ops)?;
    Ok(Level { ops, spectrum })
}

fn data(cfg: &Config) -> Result<(EigenBasis, SpectralField)> {
    let basis = setup::basis(cfg, None)?;
    let v = setup::spectral_field(&basis, &cfg.v_modes, 0.0)?;
    Ok((basis, v))
}

/// `||E(T) v - R_{k,h}^N P_h v||` at one mesh and step count.
fn linear_error(
    cfg: &Config,
    basis: &EigenBasis,
    v: &SpectralField,
    lv: &Level,
    steps: usize,
) -> Result<f64> {
    let k = cfg.t_end / steps as f64;
    let rule = projection_rule(&lv.ops, basis);
    let phv = lv.ops.project_spectral(basis, v, &rule)?;
    let approx = lv
        .spectrum
        .apply_fn(&lv.ops, &phv, |mu| resolvent_power(k, mu, steps))?;
    let exact = basis.semigroup_apply(v, cfg.t_end)?;
    Ok(lv
        .ops
        .l2_distance_to(&approx, |x| basis.evaluate(&exact, x), &rule))
}

/// Spatial and temporal sweeps of the fully discrete linear error.
pub fn linear(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    let (basis, v) = data(cfg)?;
    let spatial_steps = (1.0 / cfg.spatial_k_factor).round().max(1.0) as usize;
    let spatial = map_indexed(workers, cfg.spatial_n.len(), |i| -> Result<LevelRow> {
        let n = cfg.spatial_n[i];
        let lv = level(cfg, n)?;
        let error = linear_error(cfg, &basis, &v, &lv, spatial_steps)?;
        Ok(row(
            "spatial",
            i,
            lv.ops.mesh().h(),
            cfg.t_end / spatial_steps as f64,
            error,
        ))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let fixed = level(cfg, cfg.temporal_n)?;
    let temporal = map_indexed(workers, cfg.temporal_steps.len(), |i| -> Result<LevelRow> {
        let steps = cfg.temporal_steps[i];
        let error = linear_error(cfg, &basis, &v, &fixed, steps)?;
        Ok(row(
            "temporal",
            i,
            fixed.ops.mesh().h(),
            cfg.t_end / steps as f64,
            error,
        ))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let spatial = Sweep::new(spatial, Against::H)?;
    let temporal = Sweep::new(temporal, Against::K)?;
    Ok(StudyOutput {
        tables: vec![("det".into(), rate_table(&[&spatial, &temporal]))],
        checks: vec![
            spatial.slope_check("spatial slope", 1.85, 2.15, Some(0.98)),
            temporal.slope_check("temporal slope", 0.4, 0.6, None),
        ],
        files: Vec::new(),
    })
}

/// Sweeps of `||A_h E_h(t) P_h v - A E(t) v||` in `h` and of
/// `||A_h (R_{k,h}^n - E_h(t_n)) P_h v||` in `k`.
pub fn derivative(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    let (basis, v) = data(cfg)?;
    let t = cfg.t_end;
    let exact = basis.apply_power(&basis.semigroup_apply(&v, t)?, 1.0)?;
    let spatial = map_indexed(workers, cfg.spatial_n.len(), |i| -> Result<LevelRow> {
        let lv = level(cfg, cfg.spatial_n[i])?;
        let rule = projection_rule(&lv.ops, &basis);
        let phv = lv.ops.project_spectral(&basis, &v, &rule)?;
        let approx = lv
            .spectrum
            .apply_fn(&lv.ops, &phv, |mu| mu * (-t * mu * mu).exp())?;
        let error = lv
            .ops
            .l2_distance_to(&approx, |x| basis.evaluate(&exact, x), &rule);
        Ok(row("spatial", i, lv.ops.mesh().h(), 0.0, error))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let fixed = level(cfg, cfg.temporal_n)?;
    let rule = projection_rule(&fixed.ops, &basis);
    let phv = fixed.ops.project_spectral(&basis, &v, &rule)?;
    let temporal = map_indexed(workers, cfg.temporal_steps.len(), |i| -> Result<LevelRow> {
        let steps = cfg.temporal_steps[i];
        let k = t / steps as f64;
        let diff = fixed.spectrum.apply_fn(&fixed.ops, &phv, |mu| {
            mu * (resolvent_power(k, mu, steps) - (-t * mu * mu).exp())
        })?;
        Ok(row(
            "temporal",
            i,
            fixed.ops.mesh().h(),
            k,
            fixed.ops.l2_norm(&diff),
        ))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let spatial = Sweep::new(spatial, Against::H)?;
    let temporal = Sweep::new(temporal, Against::K)?;
    Ok(StudyOutput {
        tables: vec![("det_deriv".into(), rate_table(&[&spatial, &temporal]))],
        checks: vec![
            spatial.slope_check("spatial slope", 1.7, f64::INFINITY, Some(0.98)),
            temporal.slope_check("temporal slope", 0.4, f64::INFINITY, Some(0.98)),
        ],
        files: Vec::new(),
    })
}

fn row(sweep: &'static str, level: usize, h: f64, k: f64, error: f64) -> LevelRow {
    LevelRow {
        sweep,
        level,
        h,
        k,
        samples: 1,
        error,
        stderr: 0.0,
    }
}
