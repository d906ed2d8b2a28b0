use std::fs;
use std::path::{Path, PathBuf};

use fcdd_core::model::{LossVariant, Supervision};
use fcdd_core::synth::NUM_CATEGORIES;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FCDD_OUT";
pub const DEFAULT_OUT: &str = "fcdd-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Baseline,
    Proposed,
}

impl From<LossArg> for LossVariant {
    fn from(a: LossArg) -> Self {
        match a {
            LossArg::Baseline => LossVariant::Baseline,
            LossArg::Proposed => LossVariant::Proposed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SupervisionArg {
    Unsup,
    Semi,
}

impl From<SupervisionArg> for Supervision {
    fn from(a: SupervisionArg) -> Self {
        match a {
            SupervisionArg::Unsup => Supervision::Unsupervised,
            SupervisionArg::Semi => Supervision::Semi,
        }
    }
}

/// Everything a gen-data/train invocation needs. Unknown JSON keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    /// Defaults to `<output_dir>/data`.
    pub dataset_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub categories: Vec<u32>,
    pub seeds: Vec<u64>,
    pub data_seed: u64,
    pub train_images: usize,
    pub test_images: usize,
    pub image_size: usize,
    pub epochs: u32,
    pub batch_size: usize,
    pub loss_variants: Vec<LossArg>,
    pub supervision: SupervisionArg,
    pub alpha: f64,
    /// Runs trained concurrently.
    pub jobs: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            dataset_root: None,
            output_dir: default_out_dir(),
            categories: (0..NUM_CATEGORIES).collect(),
            seeds: (0..6).collect(),
            data_seed: 0,
            train_images: 8,
            test_images: 16,
            image_size: 64,
            epochs: 50,
            batch_size: 16,
            loss_variants: vec![LossArg::Baseline, LossArg::Proposed],
            supervision: SupervisionArg::Unsup,
            alpha: 0.10,
            jobs: 1,
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn dataset_root(&self) -> PathBuf {
        self.dataset_root.clone().unwrap_or_else(|| self.output_dir.join("data"))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invalid(m));
        if self.categories.is_empty() {
            return fail("no categories selected".into());
        }
        if let Some(c) = self.categories.iter().find(|&&c| c >= NUM_CATEGORIES) {
            return fail(format!("category {c} out of range [0, {}]", NUM_CATEGORIES - 1));
        }
        let mut sorted = self.categories.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.categories.len() {
            return fail("duplicate categories".into());
        }
        if self.seeds.is_empty() {
            return fail("no seeds given".into());
        }
        if self.loss_variants.is_empty() {
            return fail("no loss variants given".into());
        }
        if self.train_images == 0 {
            return fail("train_images must be positive".into());
        }
        if self.test_images < 2 {
            return fail("test_images must be at least 2 (one normal, one anomalous)".into());
        }
        if self.supervision == SupervisionArg::Semi && self.test_images < 6 {
            return fail(
                "semi-supervised runs need test_images >= 6 so that proxies leave anomalies to evaluate".into(),
            );
        }
        if self.image_size < 32 || !self.image_size.is_multiple_of(4) {
            return fail(format!("image_size must be a multiple of 4 and at least 32, got {}", self.image_size));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.jobs == 0 {
            return fail("jobs must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let c = HarnessConfig::default();
        let text = c.to_canonical_json();
        assert_eq!(HarnessConfig::from_json(&text).unwrap(), c);
        assert!(text.contains(r#""loss_variants":["baseline","proposed"]"#));
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(HarnessConfig::from_json(r#"{"epochz": 3}"#).is_err());
        assert!(HarnessConfig::from_json(r#"{"loss_variants": ["other"]}"#).is_err());
        let partial = HarnessConfig::from_json(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.seeds.len(), 6);
    }

    #[test]
    fn validation() {
        assert!(HarnessConfig::default().validate().is_ok());
        let bad = HarnessConfig { categories: vec![10], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HarnessConfig { alpha: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HarnessConfig { image_size: 30, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
