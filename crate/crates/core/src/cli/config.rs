//! Flat `key = value` run configuration. Keys are the field names of
//! [`Hyperparams`] and [`GibbsConfig`]; `L` and `R` are accepted for
//! `truncation` and `iterations`. `#` starts a comment.

use crate::error::{CasbahError, Result};
use crate::gibbs::GibbsConfig;
use crate::model::Hyperparams;

use super::io::fmt_f64;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "CASBAH_SEED";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub hyper: Hyperparams,
    pub gibbs: GibbsConfig,
    /// Covariate columns to read; all non-reserved columns when `None`.
    pub covariates: Option<Vec<String>>,
    pub standardize: bool,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| CasbahError::input(format!("config line {line}: `{key}` expects a number, got `{value}`")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CasbahError::input(format!("config line {line}: `{key}` expects true/false, got `{value}`"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CasbahError::input(format!("config line {line}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            let h = &mut cfg.hyper;
            let g = &mut cfg.gibbs;
            match key {
                "truncation" | "L" => h.truncation = parse_num(key, value, line)?,
                "mu_eta" => h.mu_eta = parse_num(key, value, line)?,
                "sigma2_eta" => h.sigma2_eta = parse_num(key, value, line)?,
                "gamma1" => h.gamma1 = parse_num(key, value, line)?,
                "gamma2" => h.gamma2 = parse_num(key, value, line)?,
                "xi" => h.xi = parse_num(key, value, line)?,
                "omega2" => h.omega2 = parse_num(key, value, line)?,
                "mu_theta" => h.mu_theta = parse_num(key, value, line)?,
                "sigma2_theta" => h.sigma2_theta = parse_num(key, value, line)?,
                "mu_lambda" => h.mu_lambda = parse_num(key, value, line)?,
                "sigma2_lambda" => h.sigma2_lambda = parse_num(key, value, line)?,
                "iterations" | "R" => g.iterations = parse_num(key, value, line)?,
                "burn_in" => g.burn_in = parse_num(key, value, line)?,
                "thin" => g.thin = parse_num(key, value, line)?,
                "tmvn_sweeps" => g.tmvn_sweeps = parse_num(key, value, line)?,
                "seed" => g.seed = parse_num(key, value, line)?,
                "covariates" => {
                    let names: Vec<String> = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                    cfg.covariates = Some(names);
                }
                "standardize" => cfg.standardize = parse_bool(key, value, line)?,
                _ => return Err(CasbahError::input(format!("config line {line}: unknown key `{key}`"))),
            }
        }
        cfg.hyper.validate()?;
        cfg.gibbs.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CasbahError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Applies `CASBAH_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.gibbs.seed = v
                .trim()
                .parse()
                .map_err(|_| CasbahError::input(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
        }
        Ok(())
    }

    /// Serialises back to the config grammar; `parse` reproduces `self`.
    pub fn to_text(&self) -> String {
        let h = &self.hyper;
        let g = &self.gibbs;
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("truncation", h.truncation.to_string());
        put("mu_eta", fmt_f64(h.mu_eta));
        put("sigma2_eta", fmt_f64(h.sigma2_eta));
        put("gamma1", fmt_f64(h.gamma1));
        put("gamma2", fmt_f64(h.gamma2));
        put("xi", fmt_f64(h.xi));
        put("omega2", fmt_f64(h.omega2));
        put("mu_theta", fmt_f64(h.mu_theta));
        put("sigma2_theta", fmt_f64(h.sigma2_theta));
        put("mu_lambda", fmt_f64(h.mu_lambda));
        put("sigma2_lambda", fmt_f64(h.sigma2_lambda));
        put("iterations", g.iterations.to_string());
        put("burn_in", g.burn_in.to_string());
        put("thin", g.thin.to_string());
        put("tmvn_sweeps", g.tmvn_sweeps.to_string());
        put("seed", g.seed.to_string());
        if let Some(c) = &self.covariates {
            put("covariates", c.join(","));
        }
        put("standardize", self.standardize.to_string());
        out
    }
}
