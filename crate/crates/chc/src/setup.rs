//! Shared construction of meshes, bases, noise and initial data from a
//! [`Config`].

use chc_core::fem::{assemble, FemFunction, OperatorSet};
use chc_core::mesh::{build_interval_mesh, build_rectangle_mesh, Mesh};
use chc_core::noise::{self, admissibility, projection_rule, NoiseProjector, NoiseSpec};
use chc_core::spectral::{build_basis, EigenBasis, SpectralField};
use chc_core::stepper::StepperConfig;

use crate::config::{Config, DomainKind, ModeList};
use crate::error::{Error, Result};

pub fn mesh(cfg: &Config, n: usize) -> Result<Mesh> {
    Ok(match cfg.domain {
        DomainKind::Interval => build_interval_mesh(cfg.length, n)?,
        DomainKind::Rectangle => build_rectangle_mesh(cfg.lx, cfg.ly, n, n)?,
    })
}

pub fn operators(cfg: &Config, n: usize) -> Result<OperatorSet> {
    Ok(assemble(mesh(cfg, n)?)?)
}

/// Noise description with the truncation resolved.
pub fn noise_spec(cfg: &Config) -> Result<NoiseSpec> {
    let modes = if cfg.modes > 0 {
        cfg.modes
    } else {
        noise::truncation(cfg.domain_spec()?, cfg.decay, cfg.truncation_tol)?
    };
    Ok(NoiseSpec::new(cfg.decay, cfg.sigma, modes, cfg.seed)?)
}

/// Basis large enough for the noise and every listed mode.
pub fn basis(cfg: &Config, spec: Option<&NoiseSpec>) -> Result<EigenBasis> {
    let listed = cfg
        .x0_modes
        .iter()
        .chain(&cfg.v_modes)
        .map(|(j, _)| j + 1)
        .max()
        .unwrap_or(1);
    let len = listed.max(spec.map_or(1, NoiseSpec::basis_len)).max(2);
    Ok(build_basis(cfg.domain_spec()?, len)?)
}

/// Fail unless `||A^{1/2} Q^{1/2}||_HS` is finite.
pub fn require_admissible(spec: &NoiseSpec, basis: &EigenBasis) -> Result<f64> {
    let a = admissibility(spec, basis, 0.5)?;
    if !a.admissible {
        return Err(Error::Core(chc_core::Error::NotAdmissible {
            exponent: 1.0 - spec.decay,
        }));
    }
    Ok(a.value)
}

/// `mean + sum a_j phi_j`.
pub fn spectral_field(basis: &EigenBasis, modes: &ModeList, mean: f64) -> Result<SpectralField> {
    let mut f = SpectralField::zeros(basis.len());
    f.coeffs[0] += mean * basis.domain().measure().sqrt();
    for &(j, a) in modes {
        if j >= basis.len() {
            return Err(Error::invalid(
                "modes",
                format!("mode {j} outside the basis"),
            ));
        }
        f.coeffs[j] += a;
    }
    Ok(f)
}

/// `X_h^0 = P_h X_0`.
pub fn initial_condition(
    cfg: &Config,
    ops: &OperatorSet,
    basis: &EigenBasis,
) -> Result<FemFunction> {
    let x0 = spectral_field(basis, &cfg.x0_modes, cfg.x0_mean)?;
    Ok(ops.project_spectral(basis, &x0, &projection_rule(ops, basis))?)
}

pub fn projector(
    ops: &OperatorSet,
    basis: &EigenBasis,
    spec: &NoiseSpec,
) -> Result<NoiseProjector> {
    Ok(NoiseProjector::new(ops, basis, spec.basis_len())?)
}

pub fn stepper_config(cfg: &Config, k: f64) -> Result<StepperConfig> {
    let mut s = StepperConfig::new(k)?;
    s.newton_rtol = cfg.newton_rtol;
    s.newton_atol = cfg.newton_atol;
    s.max_newton_iters = cfg.newton_max_iters;
    s.validate()?;
    Ok(s)
}

/// Coarsening factors of a level hierarchy relative to its finest level.
pub fn factors(study: &'static str, steps: &[usize]) -> Result<(usize, Vec<usize>)> {
    let fine = *steps.iter().max().ok_or(Error::Study {
        study,
        message: "no levels".into(),
    })?;
    let factors = steps
        .iter()
        .map(|&s| {
            if fine % s == 0 {
                Ok(fine / s)
            } else {
                Err(Error::Study {
                    study,
                    message: format!("{s} steps do not divide the finest {fine}"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fine, factors))
}
