use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::policy::MlpPolicy;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: policy parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub env: String,
    pub policy: MlpPolicy,
    pub optimizer: Option<Adam>,
    /// Set when training ended without reaching the env's reward threshold.
    #[serde(default)]
    pub below_threshold: bool,
}

impl Checkpoint {
    pub fn new(env: &str, policy: MlpPolicy, optimizer: Option<Adam>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            env: env.to_string(),
            policy,
            optimizer,
            below_threshold: false,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path: path.to_path_buf(),
                hint: "run train-teacher first".into(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ActionMode;
    use crate::rng;

    #[test]
    fn round_trip_is_bitwise() {
        let mut r = rng::stream(9, &[]);
        let mut policy = MlpPolicy::new(4, 2, &[64, 64], ActionMode::Continuous, true, &mut r);
        for i in 0..10 {
            policy.obs_norm.as_mut().unwrap().update(&[i as f64 * 0.37, 1.0 / (i as f64 + 1.0), 0.1, -3.3]);
        }
        let mut opt = Adam::new(policy.param_count(), 5e-4);
        let mut params = policy.params();
        let g: Vec<f64> = params.iter().map(|p| p.sin()).collect();
        opt.step(&mut params, &g).unwrap();
        policy.set_params(&params).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("teacher.json");
        let ck = Checkpoint::new("pendulum", policy.clone(), Some(opt));
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let s = [0.123456789, -1.5, 2.25, 1e-3];
        let (a, v) = policy.forward(&s).unwrap();
        let (b, w) = back.policy.forward(&s).unwrap();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(v.to_bits(), w.to_bits());
    }

    #[test]
    fn missing_file_names_the_artifact() {
        let err = Checkpoint::load(Path::new("/nonexistent/teacher.json")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { .. }));
    }
}
