//! Run configuration parsing and validation.
//!
//! Configs are flat `section.key = value` text (a TOML subset); lists use
//! bracket syntax. Unknown keys are rejected, and every validation error
//! names the offending key.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernel::{Kernel, KernelVariant};

/// The task to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Spectrum,
    Minimax,
    Curve,
    Nonres,
    Validate,
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectrum" => Ok(Task::Spectrum),
            "minimax" => Ok(Task::Minimax),
            "curve" => Ok(Task::Curve),
            "nonres" => Ok(Task::Nonres),
            "validate" => Ok(Task::Validate),
            other => Err(Error::Config {
                key: "task".into(),
                msg: format!(
                    "unknown task `{other}` (expected spectrum|minimax|curve|nonres|validate)"
                ),
            }),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Task::Spectrum => "spectrum",
            Task::Minimax => "minimax",
            Task::Curve => "curve",
            Task::Nonres => "nonres",
            Task::Validate => "validate",
        };
        f.write_str(s)
    }
}

/// How the nonresonance nonlinearity is specified.
#[derive(Debug, Clone)]
pub enum FKindConfig {
    LinearShift { m: Option<f64>, c: f64 },
    PiecewiseAsymptotic { slope_pos: Option<f64>, slope_neg: Option<f64> },
    CustomTable {
        breaks: Vec<f64>,
        values: Vec<f64>,
        slope_neg: f64,
        slope_pos: f64,
    },
}

/// Where the nonresonance target `(alpha, beta)` comes from.
#[derive(Debug, Clone)]
pub enum TargetConfig {
    /// Explicit pair.
    Explicit { alpha: f64, beta: f64 },
    /// Row of a previously produced curve CSV nearest to parameter `p`.
    CurveCsv { path: String, p: f64 },
}

/// A fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub domain: Domain<f64>,
    pub kernel: Kernel<f64>,
    pub n: usize,
    /// spectrum.*
    pub spectrum_k: usize,
    pub spectrum_tol: f64,
    /// minimax.*
    pub minimax_p: f64,
    pub minimax_n_path: usize,
    pub minimax_crit_tol: f64,
    pub minimax_polish_tol: f64,
    /// curve.*
    pub curve_p_max: f64,
    pub curve_dp: f64,
    pub curve_tol: f64,
    /// nonres.*
    pub nonres_tol: f64,
    pub f_kind: Option<FKindConfig>,
    pub f_target: Option<TargetConfig>,
}

fn cfg_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        msg: msg.into(),
    }
}

struct Reader {
    table: toml::Table,
    used: std::collections::BTreeSet<String>,
}

impl Reader {
    fn get(&mut self, key: &str) -> Option<&toml::Value> {
        let mut cur: &toml::Value = self.table.get(key.split('.').next().unwrap())?;
        for part in key.split('.').skip(1) {
            cur = cur.as_table()?.get(part)?;
        }
        self.used.insert(key.to_string());
        Some(cur)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| cfg_err(key, "expected a number")),
        }
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .map(Some)
                .ok_or_else(|| cfg_err(key, "expected a number")),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                let i = v
                    .as_integer()
                    .ok_or_else(|| cfg_err(key, "expected an integer"))?;
                usize::try_from(i).map_err(|_| cfg_err(key, "expected a nonnegative integer"))
            }
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| cfg_err(key, "expected a bool")),
        }
    }

    fn opt_str(&mut self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| cfg_err(key, "expected a string")),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| cfg_err(key, "expected a list"))?;
                let mut out = Vec::with_capacity(arr.len());
                for item in arr {
                    out.push(
                        item.as_float()
                            .or_else(|| item.as_integer().map(|i| i as f64))
                            .ok_or_else(|| cfg_err(key, "expected a list of numbers"))?,
                    );
                }
                Ok(Some(out))
            }
        }
    }

    /// Reject keys that were present but never consumed.
    fn check_unknown(&self) -> Result<()> {
        fn walk(prefix: &str, v: &toml::Value, leaves: &mut Vec<String>) {
            match v.as_table() {
                Some(t) => {
                    for (k, child) in t {
                        let key = if prefix.is_empty() {
                            k.clone()
                        } else {
                            format!("{prefix}.{k}")
                        };
                        walk(&key, child, leaves);
                    }
                }
                None => leaves.push(prefix.to_string()),
            }
        }
        let mut leaves = Vec::new();
        for (k, v) in &self.table {
            walk(k, v, &mut leaves);
        }
        for leaf in leaves {
            if !self.used.contains(&leaf) {
                return Err(cfg_err(&leaf, "unknown key"));
            }
        }
        Ok(())
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| cfg_err("<document>", format!("parse error: {e}")))?;
    let mut r = Reader {
        table,
        used: Default::default(),
    };

    let task = match r.opt_str("task")? {
        Some(s) => Some(s.parse::<Task>()?),
        None => None,
    };

    // Domain: either a list of [a, b] pairs or nothing (default (-1, 1)).
    let domain = match r.get("domain.intervals").cloned() {
        None => Domain::interval(-1.0, 1.0).unwrap(),
        Some(v) => {
            let key = "domain.intervals";
            let arr = v.as_array().ok_or_else(|| cfg_err(key, "expected a list"))?;
            let mut pairs = Vec::with_capacity(arr.len());
            for item in arr {
                let pair = item
                    .as_array()
                    .ok_or_else(|| cfg_err(key, "expected [a, b] pairs"))?;
                if pair.len() != 2 {
                    return Err(cfg_err(key, "each interval needs exactly two endpoints"));
                }
                let num = |v: &toml::Value| {
                    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
                };
                let a = num(&pair[0]).ok_or_else(|| cfg_err(key, "expected numbers"))?;
                let b = num(&pair[1]).ok_or_else(|| cfg_err(key, "expected numbers"))?;
                pairs.push((a, b));
            }
            Domain::new(pairs).map_err(|e| cfg_err(key, e.to_string()))?
        }
    };

    let s = r.f64("kernel.s", 0.25)?;
    let lambda = r.f64("kernel.lambda", 1.0)?;
    let allow_large_s = r.bool("kernel.allow_large_s", false)?;
    let variant = match r.opt_str("kernel.variant")?.as_deref() {
        None | Some("fractional") => KernelVariant::Fractional,
        Some("perturbed") => {
            let m_max = r.f64("kernel.m_max", 2.0)?;
            KernelVariant::Perturbed { m_max }
        }
        Some(other) => {
            return Err(cfg_err(
                "kernel.variant",
                format!("unknown variant `{other}` (expected fractional|perturbed)"),
            ))
        }
    };
    let kernel = Kernel::with_options(s, lambda, variant, allow_large_s)
        .map_err(|e| cfg_err("kernel.s", e.to_string()))?;

    let n = r.usize("mesh.n", 256)?;
    if n < 16 {
        return Err(cfg_err("mesh.n", "mesh must have at least 16 cells"));
    }

    let spectrum_k = r.usize("spectrum.k", 2)?;
    if spectrum_k == 0 {
        return Err(cfg_err("spectrum.k", "must request at least one eigenpair"));
    }
    let spectrum_tol = r.f64("spectrum.tol", 1e-10)?;
    let minimax_p = r.f64("minimax.p", 1.0)?;
    let minimax_n_path = r.usize("minimax.n_path", 33)?;
    if minimax_n_path < 3 {
        return Err(cfg_err("minimax.n_path", "path needs at least 3 points"));
    }
    let minimax_crit_tol = r.f64("minimax.crit_tol", 1e-6)?;
    let minimax_polish_tol = r.f64("minimax.polish_tol", 1e-12)?;
    let curve_p_max = r.f64("curve.p_max", 5.0)?;
    let curve_dp = r.f64("curve.dp", 0.1)?;
    let curve_tol = r.f64("curve.tol", 1e-10)?;
    let nonres_tol = r.f64("nonres.tol", 1e-9)?;

    for (key, v) in [
        ("spectrum.tol", spectrum_tol),
        ("minimax.crit_tol", minimax_crit_tol),
        ("minimax.polish_tol", minimax_polish_tol),
        ("curve.tol", curve_tol),
        ("nonres.tol", nonres_tol),
        ("curve.dp", curve_dp),
        ("curve.p_max", curve_p_max),
    ] {
        if !(v > 0.0) {
            return Err(cfg_err(key, "must be positive"));
        }
    }
    if minimax_p < 0.0 {
        return Err(cfg_err("minimax.p", "must be nonnegative"));
    }

    let f_kind = match r.opt_str("f.kind")?.as_deref() {
        None => None,
        Some("linear-shift") => Some(FKindConfig::LinearShift {
            m: r.opt_f64("f.m")?,
            c: r.f64("f.c", 1.0)?,
        }),
        Some("piecewise-asymptotic") => Some(FKindConfig::PiecewiseAsymptotic {
            slope_pos: r.opt_f64("f.slope_pos")?,
            slope_neg: r.opt_f64("f.slope_neg")?,
        }),
        Some("custom-table") => {
            let breaks = r
                .f64_list("f.breaks")?
                .ok_or_else(|| cfg_err("f.breaks", "required for custom-table"))?;
            let values = r
                .f64_list("f.values")?
                .ok_or_else(|| cfg_err("f.values", "required for custom-table"))?;
            let slope_neg = r
                .opt_f64("f.slope_neg")?
                .ok_or_else(|| cfg_err("f.slope_neg", "required for custom-table"))?;
            let slope_pos = r
                .opt_f64("f.slope_pos")?
                .ok_or_else(|| cfg_err("f.slope_pos", "required for custom-table"))?;
            Some(FKindConfig::CustomTable {
                breaks,
                values,
                slope_neg,
                slope_pos,
            })
        }
        Some(other) => {
            return Err(cfg_err(
                "f.kind",
                format!(
                    "unknown kind `{other}` (expected linear-shift|piecewise-asymptotic|custom-table)"
                ),
            ))
        }
    };

    let target_alpha = r.opt_f64("f.target_alpha")?;
    let target_beta = r.opt_f64("f.target_beta")?;
    let curve_csv = r.opt_str("f.curve_csv")?;
    let target_p = r.opt_f64("f.p")?;
    let f_target = match (target_alpha, target_beta, curve_csv) {
        (Some(alpha), Some(beta), None) => Some(TargetConfig::Explicit { alpha, beta }),
        (None, None, Some(path)) => Some(TargetConfig::CurveCsv {
            path,
            p: target_p.unwrap_or(0.0),
        }),
        (None, None, None) => None,
        _ => {
            return Err(cfg_err(
                "f.target_alpha",
                "give either both f.target_alpha and f.target_beta, or f.curve_csv (+ f.p)",
            ))
        }
    };

    if task == Some(Task::Nonres) && f_kind.is_none() {
        return Err(cfg_err("f.kind", "required when task = nonres"));
    }

    r.check_unknown()?;
    Ok(RunConfig {
        task,
        domain,
        kernel,
        n,
        spectrum_k,
        spectrum_tol,
        minimax_p,
        minimax_n_path,
        minimax_crit_tol,
        minimax_polish_tol,
        curve_p_max,
        curve_dp,
        curve_tol,
        nonres_tol,
        f_kind,
        f_target,
    })
}
