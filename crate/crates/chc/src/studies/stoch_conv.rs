//! Strong error of the discrete stochastic convolution
//! `W_h^n = sum_j R_{k,h}^{n-j+1} P_h Delta W^j` against the exact
//! `W_A(t) = int_0^t E(t - s) dW(s)`.
//!
//! Both are linear in the Brownian motions, so everything runs mode by mode:
//! the reference is sampled exactly in law per eigenmode and coupled to the
//! scheme through the same `Delta beta`, and the discrete side lives in the
//! eigenbasis of `A_h` with `G_ml = <phi_l, phi_{h,m}>`.

use chc_core::eigen::DiscreteSpectrum;
use chc_core::noise::{convolution_moments, convolution_pair, sample_increments, NoiseSpec};
use chc_core::rng::{normal_pair, tag, NormalStream};
use chc_core::spectral::EigenBasis;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::output::{f, Check, StudyOutput, Table};
use crate::parallel::map_indexed;
use crate::setup;

use super::{rate_table, rms_se, Against, LevelRow, Sweep};

/// Discrete spectrum of one mesh and the coupling matrix `G` (row-major,
/// `g[m * modes + l]`).
struct Coupling {
    h: f64,
    mu: Vec<f64>,
    g: Vec<f64>,
    modes: usize,
}

impl Coupling {
    fn new(cfg: &Config, n: usize, basis: &EigenBasis, spec: &NoiseSpec) -> Result<Self> {
        let ops = setup::operators(cfg, n)?;
        let spectrum = DiscreteSpectrum::compute(&ops)?;
        let projector = setup::projector(&ops, basis, spec)?;
        let modes = spec.basis_len();
        let dofs = ops.dofs();
        let mut g = vec![0.0; dofs * modes];
        for l in 1..modes {
            let c = spectrum.coefficients(&ops, projector.column(l))?;
            for (m, cm) in c.into_iter().enumerate() {
                g[m * modes + l] = cm;
            }
        }
        Ok(Coupling {
            h: ops.mesh().h(),
            mu: spectrum.eigenvalues().to_vec(),
            g,
            modes,
        })
    }

    fn dofs(&self) -> usize {
        self.mu.len()
    }

    /// `||sum_l a_l phi_l - sum_m z_m phi_{h,m}||^2`.
    fn distance_sq(&self, a: &[f64], z: &[f64]) -> f64 {
        let aa: f64 = a.iter().map(|v| v * v).sum();
        let mut zz = 0.0;
        let mut cross = 0.0;
        for (m, zm) in z.iter().enumerate() {
            zz += zm * zm;
            let row = &self.g[m * self.modes..(m + 1) * self.modes];
            cross += zm * row.iter().zip(a).map(|(g, a)| g * a).sum::<f64>();
        }
        (aa + zz - 2.0 * cross).max(0.0)
    }
}

/// Temporal sweep on a fixed fine mesh: RMS over samples of
/// `max_n ||W_A(t_n) - W_h^n||`.
fn temporal_sweep(
    cfg: &Config,
    basis: &EigenBasis,
    spec: &NoiseSpec,
    workers: usize,
) -> Result<Sweep> {
    let coupling = Coupling::new(cfg, cfg.temporal_n, basis, spec)?;
    let (fine, factors) = setup::factors("stoch-conv", &cfg.temporal_steps)?;
    let modes = spec.basis_len();
    let scales = spec.scales(basis)?;
    let k_fine = cfg.t_end / fine as f64;
    let per_sample = map_indexed(workers, cfg.samples, |s| -> Result<Vec<f64>> {
        let inc = sample_increments(spec, basis, cfg.t_end, fine, &factors, s as u64)?;
        // exact reference at every fine time, a[i * modes + l]
        let mut a = vec![0.0; (fine + 1) * modes];
        for l in 1..modes {
            let lambda = basis.eigenvalue(l);
            let decay = (-lambda * lambda * k_fine).exp();
            let mut stream = NormalStream::new(spec.seed, s as u64, tag::INCREMENTS, l as u64, 0);
            let mut acc = 0.0;
            for i in 0..fine {
                let (z1, z2) = stream.next_pair();
                let (db, conv) = convolution_pair(lambda, k_fine, z1, z2);
                debug_assert_eq!(db, inc.beta(l, i, 1));
                acc = decay * acc + conv;
                a[(i + 1) * modes + l] = scales[l] * acc;
            }
        }
        factors
            .iter()
            .map(|&factor| {
                let steps = fine / factor;
                let k = k_fine * factor as f64;
                let mut z = vec![0.0; coupling.dofs()];
                let mut forcing = vec![0.0; modes];
                let mut sup: f64 = 0.0;
                for step in 0..steps {
                    for (l, fl) in forcing.iter_mut().enumerate() {
                        *fl = scales[l] * inc.beta(l, step, factor);
                    }
                    for (m, zm) in z.iter_mut().enumerate() {
                        let row = &coupling.g[m * modes..(m + 1) * modes];
                        let w: f64 = row.iter().zip(&forcing).map(|(g, f)| g * f).sum();
                        let mu = coupling.mu[m];
                        *zm = (*zm + w) / (1.0 + k * mu * mu);
                    }
                    let t = (step + 1) * factor;
                    sup = sup.max(coupling.distance_sq(&a[t * modes..(t + 1) * modes], &z));
                }
                Ok(sup.sqrt())
            })
            .collect()
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows = factors
        .iter()
        .enumerate()
        .map(|(i, &factor)| {
            let errs: Vec<f64> = per_sample.iter().map(|e| e[i]).collect();
            let (error, stderr) = rms_se(&errs);
            LevelRow {
                sweep: "temporal",
                level: i,
                h: coupling.h,
                k: k_fine * factor as f64,
                samples: cfg.samples,
                error,
                stderr,
            }
        })
        .collect();
    Sweep::new(rows, Against::K)
}

/// Lower Cholesky factor of a symmetric positive semidefinite matrix
/// (row-major, dimension `n`); pivots below roundoff are treated as zero.
fn cholesky_psd(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = a[j * n + j];
        for p in 0..j {
            d -= l[j * n + p] * l[j * n + p];
        }
        if d <= 1e-14 * scale {
            continue;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / d;
        }
    }
    l
}

/// Spatial sweep of the semidiscrete error (the `k -> 0` limit of the
/// scheme), sampled exactly on `outputs` equispaced times.
///
/// For each noise mode `l` the vector `(A_l, Z_{0l}, ..., Z_{Dl})` of
/// Ornstein–Uhlenbeck processes driven by the same `beta_l` is Gaussian
/// with an explicit one-step transition.
fn spatial_sweep(
    cfg: &Config,
    basis: &EigenBasis,
    spec: &NoiseSpec,
    workers: usize,
) -> Result<Sweep> {
    let modes = spec.basis_len();
    let scales = spec.scales(basis)?;
    let outputs = cfg.outputs.max(1);
    let dt = cfg.t_end / outputs as f64;
    let mut rows = Vec::new();
    for (level, &n) in cfg.spatial_n.iter().enumerate() {
        let coupling = Coupling::new(cfg, n, basis, spec)?;
        let dim = coupling.dofs() + 1;
        // per mode: rates, one-step decay and the noise factor
        let transitions: Vec<(Vec<f64>, Vec<f64>)> = (0..modes)
            .map(|l| {
                let lam = basis.eigenvalue(l);
                let rates: Vec<f64> = std::iter::once(lam * lam)
                    .chain(coupling.mu.iter().map(|m| m * m))
                    .collect();
                let mut cov = vec![0.0; dim * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        let s = rates[a] + rates[b];
                        cov[a * dim + b] = if s == 0.0 {
                            dt
                        } else {
                            -(-s * dt).exp_m1() / s
                        };
                    }
                }
                let decay = rates.iter().map(|r| (-r * dt).exp()).collect();
                (decay, cholesky_psd(&cov, dim))
            })
            .collect();
        let sups = map_indexed(workers, cfg.samples, |s| {
            let mut a = vec![0.0; outputs * modes];
            let mut z = vec![0.0; outputs * coupling.dofs()];
            let mut state = vec![0.0; dim];
            let mut eps = vec![0.0; dim];
            for l in 1..modes {
                let (decay, chol) = &transitions[l];
                // the A_l coordinate has its own stream so it is shared by all meshes
                let mut sa =
                    NormalStream::new(spec.seed, s as u64, tag::SEMIDISCRETE, 2 * l as u64, 0);
                let mut sz =
                    NormalStream::new(spec.seed, s as u64, tag::SEMIDISCRETE, 2 * l as u64 + 1, 0);
                state.iter_mut().for_each(|v| *v = 0.0);
                for t in 0..outputs {
                    eps[0] = sa.next_pair().0;
                    let mut i = 1;
                    while i < dim {
                        let (p, q) = sz.next_pair();
                        eps[i] = p;
                        if i + 1 < dim {
                            eps[i + 1] = q;
                        }
                        i += 2;
                    }
                    for r in (0..dim).rev() {
                        let row = &chol[r * dim..r * dim + r + 1];
                        let xi: f64 = row.iter().zip(&eps).map(|(c, e)| c * e).sum();
                        state[r] = decay[r] * state[r] + xi;
                    }
                    a[t * modes + l] = scales[l] * state[0];
                    let zt = &mut z[t * coupling.dofs()..(t + 1) * coupling.dofs()];
                    for (m, zm) in zt.iter_mut().enumerate() {
                        *zm += scales[l] * coupling.g[m * modes + l] * state[m + 1];
                    }
                }
            }
            (0..outputs)
                .map(|t| {
                    coupling.distance_sq(
                        &a[t * modes..(t + 1) * modes],
                        &z[t * coupling.dofs()..(t + 1) * coupling.dofs()],
                    )
                })
                .fold(0.0, f64::max)
                .sqrt()
        })?;
        let (error, stderr) = rms_se(&sups);
        rows.push(LevelRow {
            sweep: "spatial",
            level,
            h: coupling.h,
            k: 0.0,
            samples: cfg.samples,
            error,
            stderr,
        });
    }
    Sweep::new(rows, Against::H)
}

/// Sample moments `E[x^2], E[x y], E[y^2]` (true means are zero) with their
/// standard errors.
fn moments(pairs: &[(f64, f64)]) -> [(f64, f64); 3] {
    let n = pairs.len() as f64;
    let stat = |g: &dyn Fn(&(f64, f64)) -> f64| {
        let vals: Vec<f64> = pairs.iter().map(g).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    [
        stat(&|p| p.0 * p.0),
        stat(&|p| p.0 * p.1),
        stat(&|p| p.1 * p.1),
    ]
}

/// Check the exact pair sampler against brute-force substep summation.
pub fn pair_check(cfg: &Config, workers: usize) -> Result<(Table, Vec<Check>)> {
    let (lambda, k, seed) = (cfg.pair_lambda, cfg.pair_k, cfg.seed);
    if cfg.pair_samples < 2 || cfg.pair_oracle_samples < 2 || cfg.pair_substeps == 0 {
        return Err(Error::Study {
            study: "stoch-conv",
            message: "pair check needs at least two samples".into(),
        });
    }
    let sampled: Vec<(f64, f64)> = (0..cfg.pair_samples)
        .map(|i| {
            let (z1, z2) = normal_pair(seed, i as u64, tag::PAIR_CHECK, 0, 0);
            convolution_pair(lambda, k, z1, z2)
        })
        .collect();
    let substeps = cfg.pair_substeps;
    let delta = k / substeps as f64;
    let damp = (-lambda * lambda * delta).exp();
    let sd = delta.sqrt();
    let oracle = map_indexed(workers, cfg.pair_oracle_samples, |i| {
        let mut stream = NormalStream::new(seed, i as u64, tag::PAIR_ORACLE, 0, 0);
        let (mut db, mut conv) = (0.0, 0.0);
        let mut step = |z: f64| {
            let d = sd * z;
            db += d;
            conv = conv * damp + d;
        };
        for _ in 0..substeps / 2 {
            let (p, q) = stream.next_pair();
            step(p);
            step(q);
        }
        if substeps % 2 == 1 {
            step(stream.next_pair().0);
        }
        (db, conv)
    })?;
    // the same Riemann sum evaluated deterministically
    let (mut s1, mut s2, mut w) = (0.0, 0.0, 1.0);
    for _ in 0..substeps {
        s1 += w;
        s2 += w * w;
        w *= damp;
    }
    let riemann = [k, delta * s1, delta * s2];
    let (var_b, cov, var_i) = convolution_moments(lambda, k);
    let exact = [var_b, cov, var_i];
    let ms = moments(&sampled);
    let mo = moments(&oracle);
    let names = ["var_increment", "covariance", "var_convolution"];
    let mut table = Table::new(&[
        "quantity",
        "exact",
        "riemann",
        "sampler",
        "sampler_se",
        "oracle",
        "oracle_se",
        "z_score",
    ]);
    let mut checks = Vec::new();
    for q in 0..3 {
        let z = (ms[q].0 - mo[q].0) / (ms[q].1 * ms[q].1 + mo[q].1 * mo[q].1).sqrt();
        table.push(vec![
            names[q].into(),
            f(exact[q]),
            f(riemann[q]),
            f(ms[q].0),
            f(ms[q].1),
            f(mo[q].0),
            f(mo[q].1),
            f(z),
        ]);
        checks.push(Check::new(
            format!("pair {} vs oracle", names[q]),
            z.abs() <= 4.0,
            format!(
                "sampler {:.6e} oracle {:.6e}, {z:.2} standard errors",
                ms[q].0, mo[q].0
            ),
        ));
    }
    Ok((table, checks))
}

/// Both sweeps and the pair check.
pub fn study(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    let spec = setup::noise_spec(cfg)?;
    let basis = setup::basis(cfg, Some(&spec))?;
    setup::require_admissible(&spec, &basis)?;
    let temporal = temporal_sweep(cfg, &basis, &spec, workers)?;
    let spatial = spatial_sweep(cfg, &basis, &spec, workers)?;
    let (pairs, pair_checks) = pair_check(cfg, workers)?;
    let mut checks = vec![
        temporal.slope_check("temporal slope", 0.35, 0.65, None),
        spatial.slope_check("spatial slope", 1.6, 2.4, None),
    ];
    checks.extend(pair_checks);
    Ok(StudyOutput {
        tables: vec![
            ("stoch_conv".into(), rate_table(&[&temporal, &spatial])),
            ("stoch_conv_pair".into(), pairs),
        ],
        checks,
        files: Vec::new(),
    })
}

/// The two sweeps without the pair check.
pub fn sweeps(cfg: &Config, workers: usize) -> Result<(Sweep, Sweep)> {
    let spec = setup::noise_spec(cfg)?;
    let basis = setup::basis(cfg, Some(&spec))?;
    setup::require_admissible(&spec, &basis)?;
    Ok((
        temporal_sweep(cfg, &basis, &spec, workers)?,
        spatial_sweep(cfg, &basis, &spec, workers)?,
    ))
}
