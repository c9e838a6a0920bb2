//! Convergence, stability and regularity studies.

pub mod det;
pub mod holder;
pub mod moments;
pub mod run;
pub mod stoch_conv;
pub mod strong;

use chc_core::rates::{fit_loglog, RateFit};

use crate::config::{Config, StudyKind};
use crate::error::Result;
use crate::output::{f, Check, StudyOutput, Table};

/// Run the study selected by `cfg.study` on `workers` threads.
pub fn run_study(cfg: &Config, workers: usize) -> Result<StudyOutput> {
    match cfg.study {
        StudyKind::Run => run::run(cfg, workers),
        StudyKind::Det => det::linear(cfg, workers),
        StudyKind::DetDeriv => det::derivative(cfg, workers),
        StudyKind::StochConv => stoch_conv::study(cfg, workers),
        StudyKind::Strong => strong::study(cfg, workers),
        StudyKind::Moments => moments::study(cfg, workers),
        StudyKind::Holder => holder::study(cfg, workers),
    }
}

/// One level of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRow {
    pub sweep: &'static str,
    pub level: usize,
    pub h: f64,
    pub k: f64,
    pub samples: usize,
    pub error: f64,
    pub stderr: f64,
}

/// A sweep's rows together with its log-log fit against `h` or `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<LevelRow>,
    pub fit: Option<RateFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Against {
    H,
    K,
}

impl Sweep {
    /// Fit `error` against the chosen step size; no fit when some error
    /// vanishes.
    pub fn new(rows: Vec<LevelRow>, against: Against) -> Result<Self> {
        let x: Vec<f64> = rows
            .iter()
            .map(|r| if against == Against::H { r.h } else { r.k })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r.error).collect();
        let fit = if y.iter().all(|&e| e > 0.0) {
            Some(fit_loglog(&x, &y)?)
        } else {
            None
        };
        Ok(Sweep { rows, fit })
    }

    pub fn vanishes(&self) -> bool {
        self.rows.iter().all(|r| r.error == 0.0)
    }

    /// Slope in `[lo, hi]` with `R^2 >= r2_min`; an identically vanishing
    /// error passes trivially.
    pub fn slope_check(&self, name: &str, lo: f64, hi: f64, r2_min: Option<f64>) -> Check {
        if self.vanishes() {
            return Check::new(name, true, "error vanishes at every level");
        }
        match self.fit {
            Some(fit) => {
                let in_range = fit.slope >= lo && fit.slope <= hi;
                let r2_ok = r2_min.is_none_or(|m| fit.r2 >= m);
                let r2_text =
                    r2_min.map_or(String::new(), |m| format!(", R^2 {:.4} (min {m})", fit.r2));
                Check::new(
                    name,
                    in_range && r2_ok,
                    format!("slope {:.4} in [{lo}, {hi}]{r2_text}", fit.slope),
                )
            }
            None => Check::new(name, false, "some levels have zero error"),
        }
    }
}

pub const RATE_HEADER: [&str; 9] = [
    "sweep", "level", "h", "k", "M", "error", "stderr", "slope", "r2",
];

pub fn rate_table(sweeps: &[&Sweep]) -> Table {
    let mut t = Table::new(&RATE_HEADER);
    for s in sweeps {
        let (slope, r2) = s
            .fit
            .map_or((f64::NAN, f64::NAN), |fit| (fit.slope, fit.r2));
        for r in &s.rows {
            t.push(vec![
                r.sweep.to_string(),
                r.level.to_string(),
                f(r.h),
                f(r.k),
                r.samples.to_string(),
                f(r.error),
                f(r.stderr),
                f(slope),
                f(r2),
            ]);
        }
    }
    t
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Root mean square with a delta-method standard error.
pub fn rms_se(values: &[f64]) -> (f64, f64) {
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    let (m, se) = mean_se(&squares);
    let rms = m.sqrt();
    (rms, if rms > 0.0 { se / (2.0 * rms) } else { 0.0 })
}
