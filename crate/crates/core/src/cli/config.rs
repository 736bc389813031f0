use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs;
use crate::error::{Error, Result};
use crate::gp::GpConfig;
use crate::objects::ExtractorConfig;
use crate::pipeline::{FinetuneConfig, PpoConfig};

pub const MANIFEST_FILE: &str = "run-manifest.toml";

/// Resolved settings for one run. Loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: String,
    /// Master seed; every stage derives its streams from it.
    pub seed: u64,
    pub out: PathBuf,
    /// Parallel fitness workers. Results do not depend on this.
    pub workers: usize,
    /// Rows in the distillation dataset.
    pub distill_samples: usize,
    /// Deterministic episodes used by `eval` and the ablations.
    pub eval_episodes: usize,
    pub ppo: PpoConfig,
    pub gp: GpConfig,
    pub extractor: ExtractorConfig,
    pub finetune: FinetuneConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: "cartpole-cont".into(),
            seed: 0,
            out: PathBuf::from("runs/default"),
            workers: 1,
            distill_samples: 2000,
            eval_episodes: 20,
            ppo: PpoConfig {
                total_steps: 1_000_000,
                ..Default::default()
            },
            gp: GpConfig::default(),
            extractor: ExtractorConfig::default(),
            finetune: FinetuneConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key=value` with a dotted key, e.g. `gp.generations=100`.
    /// The value is read as TOML, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("'{key}' does not name a config key")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value);
                break;
            }
            node = table
                .get_mut(*part)
                .ok_or_else(|| Error::Config(format!("unknown config section '{part}' in '{key}'")))?;
        }
        *self = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Checks ids and ranges and makes sure the output directory is writable.
    pub fn validate(&self) -> Result<()> {
        envs::make(&self.env).map_err(|_| {
            Error::Config(format!("unknown env '{}'; expected one of {}", self.env, envs::ENV_IDS.join(", ")))
        })?;
        if self.workers == 0 || self.distill_samples == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("workers, distill_samples and eval_episodes must be positive".into()));
        }
        self.ppo.validate()?;
        self.gp.validate()?;
        self.extractor.validate()?;
        self.finetune.validate()?;
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Error::Config(format!("output directory {}: {e}", self.out.display())))?;
        let probe = self.out.join(".write-probe");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", self.out.display())))
    }

    /// GP settings as used by the stages: seeded from the master seed and
    /// sharing the worker count.
    pub fn stage_gp(&self, stream: u64) -> GpConfig {
        GpConfig {
            seed: crate::rng::derive(self.seed, &[0x6E, stream]),
            workers: self.workers,
            ..self.gp.clone()
        }
    }

    pub fn write_manifest(&self) -> Result<PathBuf> {
        let path = self.out.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Dotted keys of every setting with their default values.
pub fn config_keys() -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
        match v {
            toml::Value::Table(t) => {
                for (k, v) in t {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", &toml::Value::try_from(RunConfig::default()).expect("config serializes"), &mut out);
    // unset optionals are skipped by the serializer
    out.push(("finetune.target_reward".into(), "(unset)".into()));
    out
}

/// Help text listing the keys whose top-level section is in `sections`.
pub fn keys_help(sections: &[&str]) -> String {
    let mut s = String::from("Config keys read (set in --config or with --set key=value):\n");
    for (k, v) in config_keys() {
        let head = k.split('.').next().unwrap_or_default();
        if sections.contains(&head) {
            s.push_str(&format!("  {k} = {v}\n"));
        }
    }
    s
}
