//! Object-level features: extraction from frames, alignment across frames,
//! top-M̄ slot filling and detector failure injection.

mod extract;
mod features;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use extract::{connected_components, split_objects};
pub use features::{align_and_velocity, featurize, inject_drop, perturb, slot_order, FeatureVector};

use crate::envs::{Env, ObjectSet, BALL_CLASS, DECORATION_CLASS, PADDLE_CLASS};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorMode {
    Oracle,
    ConnectedComponents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorConfig {
    pub mode: ExtractorMode,
    pub m_bar: usize,
    pub intensity_threshold: f64,
    /// `(intensity, class_id)` levels used to classify components.
    pub class_levels: Vec<(f64, u32)>,
    /// `(class_id, probability)` of removing an object each frame.
    pub drop_probs: Vec<(u32, f64)>,
    pub split_simulation: bool,
    /// Centroid jitter std, in frame units.
    pub jitter_sigma: f64,
    pub miss_prob: f64,
    /// Matching radius as a fraction of the frame width.
    pub match_radius: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            mode: ExtractorMode::Oracle,
            m_bar: 16,
            intensity_threshold: 0.1,
            class_levels: vec![(0.6, PADDLE_CLASS), (1.0, BALL_CLASS), (0.35, DECORATION_CLASS)],
            drop_probs: Vec::new(),
            split_simulation: false,
            jitter_sigma: 0.0,
            miss_prob: 0.0,
            match_radius: 0.25,
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.m_bar == 0 {
            return Err(Error::Config("m_bar must be at least 1".into()));
        }
        if !(self.intensity_threshold > 0.0 && self.intensity_threshold < 1.0) {
            return Err(Error::Config("intensity_threshold must be in (0, 1)".into()));
        }
        if self.drop_probs.iter().any(|(_, p)| !prob(*p)) || !prob(self.miss_prob) {
            return Err(Error::Config("probabilities must be in [0, 1]".into()));
        }
        if self.jitter_sigma < 0.0 || self.match_radius <= 0.0 {
            return Err(Error::Config("jitter_sigma must be >= 0 and match_radius > 0".into()));
        }
        Ok(())
    }

    pub fn num_features(&self) -> usize {
        4 * self.m_bar
    }

    /// Applies one of the under-fitted detector presets (30, 50, 80, 100).
    pub fn with_underfit(mut self, percent: u32) -> Result<Self> {
        let (s, p) = underfit_noise(percent)
            .ok_or_else(|| Error::Config(format!("no under-fit preset {percent}; use 30, 50, 80 or 100")))?;
        self.jitter_sigma = s;
        self.miss_prob = p;
        Ok(self)
    }
}

/// `(sigma, miss_prob)` for a detector trained to `percent` of convergence.
pub fn underfit_noise(percent: u32) -> Option<(f64, f64)> {
    match percent {
        30 => Some((0.06, 0.4)),
        50 => Some((0.04, 0.2)),
        80 => Some((0.02, 0.08)),
        100 => Some((0.0, 0.0)),
        _ => None,
    }
}

/// Per-episode feature extractor; remembers the previous frame's objects.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    pub cfg: ExtractorConfig,
    prev: Option<ObjectSet>,
    rng: Rng,
}

impl FeaturePipeline {
    pub fn new(cfg: ExtractorConfig) -> Self {
        FeaturePipeline {
            cfg,
            prev: None,
            rng: rng::stream(0, &[0x0B1E]),
        }
    }

    pub fn reset(&mut self, seed: u64) {
        self.prev = None;
        self.rng = rng::stream(seed, &[0x0B1E]);
    }

    pub fn detect(&mut self, env: &dyn Env) -> Result<ObjectSet> {
        let raw = match self.cfg.mode {
            ExtractorMode::Oracle => env.oracle_objects(),
            ExtractorMode::ConnectedComponents => env
                .render_frame()
                .map(|f| connected_components(&f, self.cfg.intensity_threshold, &self.cfg.class_levels)),
        }
        .ok_or_else(|| Error::InvalidInput(format!("env {} exposes no objects", env.spec().id)))?;
        let mut set = if self.cfg.split_simulation { split_objects(&raw) } else { raw };
        if self.cfg.jitter_sigma > 0.0 || self.cfg.miss_prob > 0.0 {
            set = perturb(&set, self.cfg.jitter_sigma, self.cfg.miss_prob, &mut self.rng);
        }
        if !self.cfg.drop_probs.is_empty() {
            set = inject_drop(&set, &self.cfg.drop_probs, &mut self.rng);
        }
        Ok(set)
    }

    pub fn observe(&mut self, env: &dyn Env) -> Result<FeatureVector> {
        let curr = self.detect(env)?;
        let radius = self.cfg.match_radius * curr.width as f64;
        let aligned = match &self.prev {
            Some(prev) => align_and_velocity(prev, &curr, radius),
            None => curr,
        };
        let fv = featurize(&aligned, self.cfg.m_bar);
        self.prev = Some(aligned);
        Ok(fv)
    }
}

/// Writes `f0..f{F-1},y0..y{A-1}` rows.
pub fn write_dataset_csv(path: &Path, x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<()> {
    let nf = x.first().map_or(0, Vec::len);
    let na = y.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..nf).map(|i| format!("f{i}")).collect();
    header.extend((0..na).map(|i| format!("y{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for (xr, yr) in x.iter().zip(y) {
        let row: Vec<String> = xr.iter().chain(yr).map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_dataset_csv`].
pub fn read_dataset_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            hint: "run distill first".into(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidInput("empty dataset file".into()))?;
    let nf = header.split(',').filter(|c| c.starts_with('f')).count();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidInput(format!("dataset row {}: {e}", i + 1)))?;
        let (a, b) = vals.split_at(nf.min(vals.len()));
        x.push(a.to_vec());
        y.push(b.to_vec());
    }
    Ok((x, y))
}
