//! Flat `key = value` configuration.
//!
//! Every study starts from its own defaults; a file only overrides keys.
//! Unknown keys are errors, except `meta.*` lines which manifests carry for
//! bookkeeping, so a manifest can be fed back in as a configuration.

use std::fmt::Write as _;
use std::str::FromStr;

use chc_core::potential::Potential;
use chc_core::spectral::DomainSpec;

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "CHC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Run,
    Det,
    DetDeriv,
    StochConv,
    Strong,
    Moments,
    Holder,
}

impl StudyKind {
    pub const ALL: [StudyKind; 7] = [
        StudyKind::Run,
        StudyKind::Det,
        StudyKind::DetDeriv,
        StudyKind::StochConv,
        StudyKind::Strong,
        StudyKind::Moments,
        StudyKind::Holder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Run => "run",
            StudyKind::Det => "det",
            StudyKind::DetDeriv => "det-deriv",
            StudyKind::StochConv => "stoch-conv",
            StudyKind::Strong => "strong",
            StudyKind::Moments => "moments",
            StudyKind::Holder => "holder",
        }
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("study", format!("unknown study `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    DoubleWell,
    /// `F = 0`, the linear equation.
    Zero,
    Quartic([f64; 5]),
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        Ok(match self {
            PotentialSpec::DoubleWell => Potential::double_well(),
            PotentialSpec::Zero => Potential::none(),
            PotentialSpec::Quartic(c) => Potential::new(*c)?,
        })
    }
}

/// A spectral field given sparsely as `(mode, amplitude)` pairs.
pub type ModeList = Vec<(usize, f64)>;

/// Resolved configuration of one run or study.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub study: StudyKind,
    pub domain: DomainKind,
    pub length: f64,
    pub lx: f64,
    pub ly: f64,
    /// Cells per direction of the base mesh.
    pub n: usize,
    /// Time steps of the base run.
    pub steps: usize,
    pub t_end: f64,
    pub sigma: f64,
    pub decay: f64,
    /// Retained noise modes; 0 selects the truncation rule.
    pub modes: usize,
    pub truncation_tol: f64,
    pub potential: PotentialSpec,
    pub seed: u64,
    pub samples: usize,
    pub x0_mean: f64,
    pub x0_modes: ModeList,
    pub v_modes: ModeList,
    pub spatial_n: Vec<usize>,
    pub spatial_k_factor: f64,
    pub temporal_n: usize,
    pub temporal_steps: Vec<usize>,
    pub levels_n: Vec<usize>,
    pub levels_steps: Vec<usize>,
    pub outputs: usize,
    pub pair_lambda: f64,
    pub pair_k: f64,
    pub pair_samples: usize,
    pub pair_oracle_samples: usize,
    pub pair_substeps: usize,
    pub gammas: Vec<f64>,
    pub newton_rtol: f64,
    pub newton_atol: f64,
    pub newton_max_iters: usize,
}

const KEYS: &[&str] = &[
    "study",
    "domain",
    "L",
    "Lx",
    "Ly",
    "n",
    "N",
    "T",
    "sigma",
    "r",
    "J",
    "truncation_tol",
    "potential",
    "seed",
    "M",
    "x0_mean",
    "x0_modes",
    "v_modes",
    "spatial_n",
    "spatial_k_factor",
    "temporal_n",
    "temporal_N",
    "levels_n",
    "levels_N",
    "outputs",
    "pair_lambda",
    "pair_k",
    "pair_samples",
    "pair_oracle_samples",
    "pair_substeps",
    "gammas",
    "newton_rtol",
    "newton_atol",
    "newton_max_iters",
];

const REQUIRED: &[&str] = &["domain", "T", "study"];

impl Config {
    /// Defaults of each study: the configurations the acceptance suite runs.
    pub fn defaults(study: StudyKind) -> Self {
        let mut c = Config {
            study,
            domain: DomainKind::Interval,
            length: 1.0,
            lx: 1.0,
            ly: 1.0,
            n: 64,
            steps: 200,
            t_end: 0.1,
            sigma: 1.0,
            decay: 2.0,
            modes: 0,
            truncation_tol: 1e-6,
            potential: PotentialSpec::DoubleWell,
            seed: DEFAULT_SEED,
            samples: 16,
            x0_mean: 0.0,
            x0_modes: vec![(1, 0.1)],
            v_modes: vec![(1, 1.0)],
            spatial_n: vec![16, 32, 64, 128],
            spatial_k_factor: 1e-6,
            temporal_n: 512,
            temporal_steps: vec![8, 16, 32, 64],
            levels_n: vec![16, 32, 64, 128],
            levels_steps: vec![32, 64, 128, 256],
            outputs: 64,
            pair_lambda: std::f64::consts::PI * std::f64::consts::PI,
            pair_k: 1e-3,
            pair_samples: 100_000,
            pair_oracle_samples: 2_000,
            pair_substeps: 1_000_000,
            gammas: vec![0.25, 0.4, 0.45],
            newton_rtol: 1e-10,
            newton_atol: 1e-12,
            newton_max_iters: 50,
        };
        match study {
            StudyKind::Run => {}
            StudyKind::Det => {
                c.t_end = 0.01;
                c.potential = PotentialSpec::Zero;
                c.sigma = 0.0;
            }
            StudyKind::DetDeriv => {
                c.t_end = 0.01;
                c.potential = PotentialSpec::Zero;
                c.sigma = 0.0;
                c.temporal_n = 128;
            }
            StudyKind::StochConv => {
                c.potential = PotentialSpec::Zero;
                c.samples = 200;
                c.spatial_n = vec![8, 16, 32, 64];
                c.temporal_n = 256;
            }
            StudyKind::Strong => {
                c.samples = 64;
            }
            StudyKind::Moments => {
                c.samples = 64;
                c.levels_n = vec![16, 32, 64];
                c.levels_steps = vec![50, 100, 200];
            }
            StudyKind::Holder => {
                c.samples = 1;
                c.levels_n = vec![64, 64, 64];
                c.levels_steps = vec![256, 512, 1024];
            }
        }
        c
    }

    /// Parse a configuration file. `domain`, `T` and `study` must be present
    /// unless `study` is supplied by the caller.
    pub fn parse(text: &str, study: Option<StudyKind>) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let file_study = pairs.iter().find(|(k, _, _)| k == "study");
        let kind = match (file_study, study) {
            (Some((_, v, _)), Some(s)) => {
                let parsed: StudyKind = v.parse()?;
                if parsed != s {
                    return Err(Error::invalid(
                        "study",
                        format!(
                            "file selects `{}` but `{}` was requested",
                            parsed.name(),
                            s.name()
                        ),
                    ));
                }
                s
            }
            (Some((_, v, _)), None) => v.parse()?,
            (None, Some(s)) => s,
            (None, None) => return Err(Error::MissingKey("study".into())),
        };
        for key in REQUIRED.iter().filter(|k| **k != "study") {
            if !pairs.iter().any(|(k, _, _)| k == key) {
                return Err(Error::MissingKey((*key).into()));
            }
        }
        let mut config = Config::defaults(kind);
        for (key, value, line) in &pairs {
            config.set(key, value).map_err(|e| match e {
                Error::InvalidValue { key, message } => Error::Syntax {
                    line: *line,
                    message: format!("invalid value for `{key}`: {message}"),
                },
                other => other,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "study" => self.study = value.parse()?,
            "domain" => {
                self.domain = match value {
                    "interval" => DomainKind::Interval,
                    "rectangle" => DomainKind::Rectangle,
                    _ => return Err(Error::invalid(key, "expected `interval` or `rectangle`")),
                }
            }
            "L" => self.length = num(key, value)?,
            "Lx" => self.lx = num(key, value)?,
            "Ly" => self.ly = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "N" => self.steps = num(key, value)?,
            "T" => self.t_end = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "r" => self.decay = num(key, value)?,
            "J" => self.modes = num(key, value)?,
            "truncation_tol" => self.truncation_tol = num(key, value)?,
            "potential" => {
                self.potential = match value {
                    "double-well" => PotentialSpec::DoubleWell,
                    "none" => PotentialSpec::Zero,
                    _ => {
                        let c: Vec<f64> = list(key, value)?;
                        let c: [f64; 5] = c.try_into().map_err(|_| {
                            Error::invalid(
                                key,
                                "expected `double-well`, `none` or five coefficients",
                            )
                        })?;
                        PotentialSpec::Quartic(c)
                    }
                }
            }
            "seed" => self.seed = num(key, value)?,
            "M" => self.samples = num(key, value)?,
            "x0_mean" => self.x0_mean = num(key, value)?,
            "x0_modes" => self.x0_modes = modes(key, value)?,
            "v_modes" => self.v_modes = modes(key, value)?,
            "spatial_n" => self.spatial_n = list(key, value)?,
            "spatial_k_factor" => self.spatial_k_factor = num(key, value)?,
            "temporal_n" => self.temporal_n = num(key, value)?,
            "temporal_N" => self.temporal_steps = list(key, value)?,
            "levels_n" => self.levels_n = list(key, value)?,
            "levels_N" => self.levels_steps = list(key, value)?,
            "outputs" => self.outputs = num(key, value)?,
            "pair_lambda" => self.pair_lambda = num(key, value)?,
            "pair_k" => self.pair_k = num(key, value)?,
            "pair_samples" => self.pair_samples = num(key, value)?,
            "pair_oracle_samples" => self.pair_oracle_samples = num(key, value)?,
            "pair_substeps" => self.pair_substeps = num(key, value)?,
            "gammas" => self.gammas = list(key, value)?,
            "newton_rtol" => self.newton_rtol = num(key, value)?,
            "newton_atol" => self.newton_atol = num(key, value)?,
            "newton_max_iters" => self.newton_max_iters = num(key, value)?,
            k if k.starts_with("meta.") => {}
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be positive, got {v}")))
            }
        };
        positive("L", self.length)?;
        positive("Lx", self.lx)?;
        positive("Ly", self.ly)?;
        positive("T", self.t_end)?;
        positive("r", self.decay)?;
        positive("truncation_tol", self.truncation_tol)?;
        positive("newton_rtol", self.newton_rtol)?;
        positive("newton_atol", self.newton_atol)?;
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid("sigma", "must be nonnegative"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("N", "N must be ≥ 1"));
        }
        if self.n < 2 {
            return Err(Error::invalid("n", "n must be ≥ 2"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("M", "M must be ≥ 1"));
        }
        if self.levels_n.len() != self.levels_steps.len() {
            return Err(Error::invalid(
                "levels_N",
                "levels_n and levels_N must have equal length",
            ));
        }
        if self.temporal_steps.contains(&0) || self.levels_steps.contains(&0) {
            return Err(Error::invalid("N", "N must be ≥ 1"));
        }
        if self.newton_max_iters == 0 {
            return Err(Error::invalid("newton_max_iters", "must be ≥ 1"));
        }
        self.potential.build()?;
        Ok(())
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        Ok(match self.domain {
            DomainKind::Interval => DomainSpec::interval(self.length)?,
            DomainKind::Rectangle => DomainSpec::rectangle(self.lx, self.ly)?,
        })
    }

    /// All keys with their resolved values, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let joinf = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let modes = |v: &ModeList| {
            v.iter()
                .map(|(j, a)| format!("{j}:{a}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let potential = match self.potential {
            PotentialSpec::DoubleWell => "double-well".to_string(),
            PotentialSpec::Zero => "none".to_string(),
            PotentialSpec::Quartic(c) => joinf(&c),
        };
        let domain = match self.domain {
            DomainKind::Interval => "interval",
            DomainKind::Rectangle => "rectangle",
        };
        let values = [
            self.study.name().to_string(),
            domain.to_string(),
            self.length.to_string(),
            self.lx.to_string(),
            self.ly.to_string(),
            self.n.to_string(),
            self.steps.to_string(),
            self.t_end.to_string(),
            self.sigma.to_string(),
            self.decay.to_string(),
            self.modes.to_string(),
            self.truncation_tol.to_string(),
            potential,
            self.seed.to_string(),
            self.samples.to_string(),
            self.x0_mean.to_string(),
            modes(&self.x0_modes),
            modes(&self.v_modes),
            join(&self.spatial_n),
            self.spatial_k_factor.to_string(),
            self.temporal_n.to_string(),
            join(&self.temporal_steps),
            join(&self.levels_n),
            join(&self.levels_steps),
            self.outputs.to_string(),
            self.pair_lambda.to_string(),
            self.pair_k.to_string(),
            self.pair_samples.to_string(),
            self.pair_oracle_samples.to_string(),
            self.pair_substeps.to_string(),
            joinf(&self.gammas),
            self.newton_rtol.to_string(),
            self.newton_atol.to_string(),
            self.newton_max_iters.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// The configuration in its own file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Seed precedence: command-line flag, then `CHC_SEED`, then the file.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => s
            .parse()
            .map_err(|_| Error::invalid(SEED_ENV, format!("`{s}` is not a u64"))),
        None => Ok(config),
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) && !key.starts_with("meta.") {
            return Err(Error::UnknownKey(key.to_string()));
        }
        if out.iter().any(|(k, _, _)| k == key) {
            return Err(Error::Syntax {
                line: i + 1,
                message: format!("duplicate key `{key}`"),
            });
        }
        out.push((key.to_string(), value.to_string(), i + 1));
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{value}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|s| num(key, s.trim())).collect()
}

fn modes(key: &str, value: &str) -> Result<ModeList> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| {
            let (j, a) = item.split_once(':').ok_or_else(|| {
                Error::invalid(key, format!("expected `mode:amplitude`, got `{item}`"))
            })?;
            Ok((num(key, j.trim())?, num(key, a.trim())?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_materializes_defaults() {
        let c = Config::parse(
            "domain=interval\nL=1\nn=64\nT=0.1\nN=100\nstudy=run\n",
            None,
        )
        .unwrap();
        assert_eq!(c.study, StudyKind::Run);
        assert_eq!((c.n, c.steps, c.t_end), (64, 100, 0.1));
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.potential, PotentialSpec::DoubleWell);
    }

    #[test]
    fn errors_name_the_problem() {
        let base = "domain=interval\nT=0.1\nstudy=run\n";
        let e = Config::parse(&format!("{base}foo=1\n"), None).unwrap_err();
        assert!(e.to_string().contains("foo"));
        let e = Config::parse(&format!("{base}N=0\n"), None).unwrap_err();
        assert!(e.to_string().contains("N must be ≥ 1"), "{e}");
        let e = Config::parse("domain=interval\nstudy=run\n", None).unwrap_err();
        assert!(matches!(e, Error::MissingKey(k) if k == "T"));
        let e = Config::parse(&format!("{base}n=abc\n"), None).unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
    }

    #[test]
    fn text_roundtrip() {
        for kind in StudyKind::ALL {
            let mut c = Config::defaults(kind);
            c.x0_modes = vec![(1, 0.25), (3, -1e-3)];
            c.potential = PotentialSpec::Quartic([0.1, 0.0, -0.5, 0.0, 0.25]);
            let back = Config::parse(&c.to_text(), None).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), 3).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, 3).unwrap(), 3);
        assert!(resolve_seed(None, Some("x"), 3).is_err());
    }
}
