//! Effective run configuration: built from defaults, then a flat key =
//! value config file, then explicit command-line flags, in that order.
//! Every artifact embeds the result for reproducibility.

use std::path::PathBuf;

use spin7lab_core::integrator::IntegrationOptions;
use spin7lab_core::shooting::ShootingConfig;

/// Version stamp written into every artifact.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output format of an artifact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn parse(text: &str) -> Result<Format, String> {
        match text {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(format!(
                "unknown format {other:?}; expected csv, json or svg"
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

/// The tunable parameters shared by all commands.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub s_max: f64,
    pub max_steps: usize,
    pub capture_distance: f64,
    pub capture_rhs: f64,
    pub t_series: f64,
    pub t_ac_start: f64,
    pub ac_seed_order: u32,
    pub omega_eps: f64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let opts = IntegrationOptions::default();
        let shoot = ShootingConfig::default();
        RunConfig {
            tol_rel: opts.tol_rel,
            tol_abs: opts.tol_abs,
            s_max: opts.s_max,
            max_steps: opts.max_steps,
            capture_distance: opts.capture_distance,
            capture_rhs: opts.capture_rhs,
            t_series: shoot.t_series,
            t_ac_start: shoot.t_ac_start,
            ac_seed_order: shoot.ac_seed_order,
            omega_eps: shoot.omega_eps,
            out: None,
            format: None,
        }
    }
}

impl RunConfig {
    /// Apply one `key = value` assignment; keys match the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad_number = |what: &str| format!("config key {key}: cannot parse {what} {value:?}");
        let float = |slot: &mut f64| -> Result<(), String> {
            *slot = value.parse().map_err(|_| bad_number("number"))?;
            Ok(())
        };
        match key {
            "tol-rel" => float(&mut self.tol_rel),
            "tol-abs" => float(&mut self.tol_abs),
            "s-max" => float(&mut self.s_max),
            "t-series" => float(&mut self.t_series),
            "t-ac-start" => float(&mut self.t_ac_start),
            "omega-eps" => float(&mut self.omega_eps),
            "capture-distance" => float(&mut self.capture_distance),
            "capture-rhs" => float(&mut self.capture_rhs),
            "max-steps" => {
                self.max_steps = value.parse().map_err(|_| bad_number("integer"))?;
                Ok(())
            }
            "ac-seed-order" => {
                self.ac_seed_order = value.parse().map_err(|_| bad_number("integer"))?;
                Ok(())
            }
            "out" => {
                self.out = Some(PathBuf::from(value));
                Ok(())
            }
            "format" => {
                self.format = Some(Format::parse(value)?);
                Ok(())
            }
            other => Err(format!("unknown config key {other:?}")),
        }
    }

    /// Apply a whole config file: one assignment per line, `#` comments and
    /// blank lines allowed.
    pub fn apply_file(&mut self, text: &str, origin: &str) -> Result<(), String> {
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "{origin}:{}: expected `key = value`, got {raw:?}",
                    index + 1
                ));
            };
            self.set(key.trim(), value.trim())
                .map_err(|err| format!("{origin}:{}: {err}", index + 1))?;
        }
        Ok(())
    }

    pub fn integration_options(&self) -> IntegrationOptions {
        IntegrationOptions {
            tol_rel: self.tol_rel,
            tol_abs: self.tol_abs,
            s_max: self.s_max,
            max_steps: self.max_steps,
            capture_distance: self.capture_distance,
            capture_rhs: self.capture_rhs,
            fixed_step: None,
        }
    }

    pub fn shooting_config(&self) -> ShootingConfig {
        ShootingConfig {
            integration: self.integration_options(),
            t_series: self.t_series,
            t_ac_start: self.t_ac_start,
            ac_seed_order: self.ac_seed_order,
            omega_eps: self.omega_eps,
        }
    }

    /// The full effective configuration as JSON, embedded in every artifact.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "tol-rel": self.tol_rel,
            "tol-abs": self.tol_abs,
            "s-max": self.s_max,
            "max-steps": self.max_steps,
            "capture-distance": self.capture_distance,
            "capture-rhs": self.capture_rhs,
            "t-series": self.t_series,
            "t-ac-start": self.t_ac_start,
            "ac-seed-order": self.ac_seed_order,
            "omega-eps": self.omega_eps,
            "out": self.out.as_ref().map(|p| p.display().to_string()),
            "format": self.format.map(Format::name),
        })
    }
}
