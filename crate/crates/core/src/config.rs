//! Run configuration: every generation, navigation and fitting tunable in one
//! JSON document. Missing keys take their defaults; unknown keys are errors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::FitOptions;
use crate::populate::GenConfig;
use crate::validate::NavConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gen: GenConfig,
    pub nav: NavConfig,
    pub fit: FitOptions,
}

struct Checker(Vec<(String, String)>);

impl Checker {
    fn check(&mut self, ok: bool, field: &str, reason: &str) {
        if !ok {
            self.0.push((field.to_string(), reason.to_string()));
        }
    }

    fn non_negative(&mut self, v: f64, field: &str) {
        self.check(v.is_finite() && v >= 0.0, field, "must be finite and >= 0");
    }

    fn positive(&mut self, v: f64, field: &str) {
        self.check(v.is_finite() && v > 0.0, field, "must be finite and > 0");
    }

    fn unit(&mut self, v: f64, field: &str) {
        self.check((0.0..=1.0).contains(&v), field, "must lie in [0, 1]");
    }

    fn range(&mut self, r: [f64; 2], field: &str) {
        self.check(
            r.iter().all(|v| v.is_finite() && *v >= 0.0) && r[0] <= r[1],
            field,
            "must be [lo, hi] with 0 <= lo <= hi",
        );
    }

    fn palette(&mut self, p: &[String], field: &str) {
        self.check(!p.is_empty() && p.iter().all(|s| !s.is_empty()), field, "must be a non-empty list of names");
    }
}

impl RunConfig {
    /// Range and consistency checks on every field. The first problem found
    /// is reported.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker(Vec::new());
        let g = &self.gen;
        c.positive(g.layout.snap_tol, "gen.layout.snap_tol");
        c.non_negative(g.layout.floor_eps, "gen.layout.floor_eps");
        c.unit(g.layout.leaf_probability, "gen.layout.leaf_probability");
        c.unit(g.iou_threshold, "gen.iou_threshold");
        c.non_negative(g.clearance, "gen.clearance");
        c.non_negative(g.lambda_small, "gen.lambda_small");
        c.non_negative(g.lambda_clutter, "gen.lambda_clutter");
        c.check(g.max_tries >= 1, "gen.max_tries", "must be at least 1");
        c.non_negative(g.support_tol, "gen.support_tol");
        c.non_negative(g.lights.extra_lights_per_room, "gen.lights.extra_lights_per_room");
        c.range(g.lights.intensity, "gen.lights.intensity");
        c.unit(g.lights.rgb_lo, "gen.lights.rgb_lo");
        c.range(g.lights.shadow_bias, "gen.lights.shadow_bias");
        c.non_negative(g.lights.ceiling_drop, "gen.lights.ceiling_drop");
        c.palette(&g.palettes.structure.wall, "gen.palettes.structure.wall");
        c.palette(&g.palettes.structure.floor, "gen.palettes.structure.floor");
        c.palette(&g.palettes.structure.ceiling, "gen.palettes.structure.ceiling");
        for (class, p) in &g.palettes.object {
            c.palette(p, &format!("gen.palettes.object.{class}"));
        }

        let n = &self.nav;
        c.non_negative(n.agent_radius, "nav.agent_radius");
        c.positive(n.agent_height, "nav.agent_height");
        c.positive(n.cell, "nav.cell");
        c.positive(n.area_cutoff, "nav.area_cutoff");
        c.check(n.short_budget > 0, "nav.short_budget", "must be at least 1");
        c.check(n.long_budget > 0, "nav.long_budget", "must be at least 1");
        c.non_negative(n.min_start_dist, "nav.min_start_dist");
        c.non_negative(n.visibility_dist, "nav.visibility_dist");

        let f = &self.fit;
        c.positive(f.tol, "fit.tol");
        c.check(f.max_iter >= 1, "fit.max_iter", "must be at least 1");
        c.non_negative(f.ridge, "fit.ridge");
        c.check(f.level > 0.0 && f.level < 1.0, "fit.level", "must lie in (0, 1)");

        match c.0.into_iter().next() {
            None => Ok(()),
            Some((field, reason)) => Err(ConfigError::Invalid { field, reason }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse and validate a run configuration.
pub fn parse_run_config(bytes: &[u8]) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_defaults() {
        assert_eq!(parse_run_config(b"{}").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.gen.lambda_clutter = 0.4;
        cfg.nav.cell = 0.1;
        assert_eq!(parse_run_config(cfg.to_json().as_bytes()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected_at_any_depth() {
        for doc in [
            r#"{"colour": 1}"#,
            r#"{"gen": {"lambda_smal": 1.0}}"#,
            r#"{"gen": {"lights": {"count": 3}}}"#,
            r#"{"nav": {"radius": 0.2}}"#,
        ] {
            assert!(matches!(parse_run_config(doc.as_bytes()), Err(ConfigError::Parse { .. })), "{doc}");
        }
        let err = parse_run_config(br#"{"gen": {"lights": {"count": 3}}}"#).unwrap_err();
        assert!(err.to_string().contains("gen.lights"), "{err}");
    }

    #[test]
    fn out_of_range_values_rejected() {
        for (doc, field) in [
            (r#"{"gen": {"iou_threshold": 1.5}}"#, "gen.iou_threshold"),
            (r#"{"gen": {"lambda_small": -1}}"#, "gen.lambda_small"),
            (r#"{"gen": {"lights": {"intensity": [2, 1]}}}"#, "gen.lights.intensity"),
            (r#"{"gen": {"palettes": {"structure": {"wall": []}}}}"#, "gen.palettes.structure.wall"),
            (r#"{"nav": {"cell": 0}}"#, "nav.cell"),
            (r#"{"fit": {"level": 1.0}}"#, "fit.level"),
        ] {
            match parse_run_config(doc.as_bytes()) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }
}
