use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, IoContext, Result};

/// Which inputs drive motion estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotionMode {
    /// Boundary frames only: linear motion.
    Images,
    /// Events only, integrated on a flat gray base frame.
    Events,
    /// Key frame plus events for intermediate anchors, both frames for the
    /// endpoint.
    #[default]
    Both,
}

impl FromStr for MotionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "images" => Ok(MotionMode::Images),
            "events" => Ok(MotionMode::Events),
            "both" => Ok(MotionMode::Both),
            other => Err(Error::invalid(format!("unknown motion mode {other:?} (images, events, both)"))),
        }
    }
}

impl fmt::Display for MotionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionMode::Images => "images",
            MotionMode::Events => "events",
            MotionMode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Flow pyramid levels.
    pub levels: usize,
    /// Jacobi sweeps per pyramid level.
    pub iterations: usize,
    /// Re-linearizations per pyramid level; sweeps are split evenly.
    pub warps: usize,
    /// Smoothness weight, relative to 8-bit intensity units.
    pub alpha: f64,
    /// Intermediate sample times used for spline fitting.
    pub samples: usize,
    /// Spline control points.
    pub control_points: usize,
    pub mode: MotionMode,
    /// Contrast threshold of the event sensor.
    pub contrast_threshold: f64,
    pub log_eps: f64,
    /// Scale of the photometric-residual priority.
    pub priority_beta: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            iterations: 100,
            warps: 5,
            alpha: 10.0,
            samples: 8,
            control_points: 4,
            mode: MotionMode::Both,
            contrast_threshold: 0.1,
            log_eps: 1e-3,
            priority_beta: 10.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::invalid("flow pyramid needs at least one level"));
        }
        if self.warps == 0 || self.iterations == 0 {
            return Err(Error::invalid("flow solver needs at least one warp and one iteration"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("smoothness weight must be positive"));
        }
        if self.control_points < 2 {
            return Err(Error::invalid("spline needs at least 2 control points"));
        }
        if self.samples < self.control_points {
            return Err(Error::invalid(format!(
                "sample count {} is below control point count {}",
                self.samples, self.control_points
            )));
        }
        if !(self.contrast_threshold > 0.0) || !(self.log_eps > 0.0) {
            return Err(Error::invalid("contrast threshold and log epsilon must be positive"));
        }
        if !(self.priority_beta >= 0.0) {
            return Err(Error::invalid("priority scale must be non-negative"));
        }
        Ok(())
    }

    /// Applies flat `key = value` lines; `#` starts a comment. Unknown keys
    /// are errors.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = format!("line {}", i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, &loc, format!("expected key = value, found {line:?}")))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(origin, &loc, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path).at(path)?, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
        }
        match key {
            "levels" => self.levels = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "warps" => self.warps = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "control_points" => self.control_points = num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "contrast_threshold" => self.contrast_threshold = num(key, value)?,
            "log_eps" => self.log_eps = num(key, value)?,
            "priority_beta" => self.priority_beta = num(key, value)?,
            other => return Err(Error::invalid(format!("unknown estimator key {other:?}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config() {
        let mut cfg = EstimatorConfig::default();
        cfg.apply_text("# comment\nlevels = 3\nmode = images  # trailing\n\nalpha=10.5\n", Path::new("c")).unwrap();
        assert_eq!(cfg.levels, 3);
        assert_eq!(cfg.mode, MotionMode::Images);
        assert_eq!(cfg.alpha, 10.5);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let mut cfg = EstimatorConfig::default();
        let err = cfg.apply_text("levels = 3\nbogus = 1\n", Path::new("c")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(cfg.apply_text("levels 3\n", Path::new("c")).is_err());
        assert!(cfg.apply_text("levels = x\n", Path::new("c")).is_err());
    }

    #[test]
    fn validates_sample_count() {
        let cfg = EstimatorConfig { samples: 3, control_points: 4, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(EstimatorConfig::default().validate().is_ok());
    }
}
