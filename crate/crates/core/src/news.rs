//! Public news: a unit gaussian stream, optionally overridden at scripted
//! steps.
//!
//! The scripted variant draws from the underlying gaussian stream at every
//! step and discards the draw where an override applies, so all non-scripted
//! steps see exactly the values the pure gaussian source would have produced
//! with the same seed. That keeps scripted scenarios comparable with their
//! unscripted twins step for step.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

/// Config-facing description of the news process.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NewsSpec {
    Gaussian,
    Scripted { entries: Vec<ScriptedEntry> },
}

// The derive would accept unknown fields next to "kind" (a limitation of
// internally tagged enums), so deserialization goes through a strict repr.
impl<'de> Deserialize<'de> for NewsSpec {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(rename_all = "snake_case")]
        enum Kind {
            Gaussian,
            Scripted,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            kind: Kind,
            entries: Option<Vec<ScriptedEntry>>,
        }
        let repr = Repr::deserialize(deserializer)?;
        match (repr.kind, repr.entries) {
            (Kind::Gaussian, None) => Ok(NewsSpec::Gaussian),
            (Kind::Gaussian, Some(_)) => {
                Err(serde::de::Error::custom("gaussian news takes no entries"))
            }
            (Kind::Scripted, Some(entries)) => Ok(NewsSpec::Scripted { entries }),
            (Kind::Scripted, None) => Err(serde::de::Error::custom("scripted news needs entries")),
        }
    }
}

impl Default for NewsSpec {
    fn default() -> Self {
        NewsSpec::Gaussian
    }
}

impl NewsSpec {
    /// Same checks a `NewsSource` would apply, without building one.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            NewsSpec::Gaussian => Ok(()),
            NewsSpec::Scripted { entries } => build_overrides(entries).map(drop),
        }
    }
}

/// A block of consecutive scripted news values: step `start_step` receives
/// `values[0]`, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEntry {
    pub start_step: usize,
    pub values: Vec<f64>,
}

/// Sequential news generator. Steps must be queried in order, each exactly
/// once.
#[derive(Debug, Clone)]
pub struct NewsSource {
    rng: ChaCha12Rng,
    overrides: BTreeMap<usize, f64>,
    cursor: usize,
}

impl NewsSource {
    pub fn gaussian(rng: ChaCha12Rng) -> Self {
        NewsSource { rng, overrides: BTreeMap::new(), cursor: 0 }
    }

    /// Gaussian stream with scripted overrides. Entries may not overlap and
    /// every value must be finite.
    pub fn scripted(entries: &[ScriptedEntry], rng: ChaCha12Rng) -> Result<Self, ConfigError> {
        Ok(NewsSource { rng, overrides: build_overrides(entries)?, cursor: 0 })
    }

    pub fn from_spec(spec: &NewsSpec, rng: ChaCha12Rng) -> Result<Self, ConfigError> {
        match spec {
            NewsSpec::Gaussian => Ok(NewsSource::gaussian(rng)),
            NewsSpec::Scripted { entries } => NewsSource::scripted(entries, rng),
        }
    }

    /// News for step `t`. Panics if steps are skipped, repeated, or queried
    /// out of order; the generator is strictly sequential.
    pub fn next_news(&mut self, t: usize) -> f64 {
        assert_eq!(
            t, self.cursor,
            "news queried out of order: asked for step {t}, cursor at {}",
            self.cursor
        );
        self.cursor += 1;
        let draw: f64 = self.rng.sample(StandardNormal);
        self.overrides.get(&t).copied().unwrap_or(draw)
    }
}

fn build_overrides(entries: &[ScriptedEntry]) -> Result<BTreeMap<usize, f64>, ConfigError> {
    let mut overrides = BTreeMap::new();
    for entry in entries {
        if entry.values.is_empty() {
            return Err(ConfigError::invalid(
                "news.entries",
                format!("entry at step {} has no values", entry.start_step),
            ));
        }
        for (i, &v) in entry.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ConfigError::invalid(
                    "news.entries",
                    format!("non-finite news value {v} at step {}", entry.start_step + i),
                ));
            }
            if overrides.insert(entry.start_step + i, v).is_some() {
                return Err(ConfigError::invalid(
                    "news.entries",
                    format!("step {} scripted twice", entry.start_step + i),
                ));
            }
        }
    }
    Ok(overrides)
}
