use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, Sampler, SamplerError, Slot};

/// Scripted outputs for one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureScript {
    /// Raw outputs returned to sampled requests, in draw order.
    pub samples: Vec<String>,
    /// Raw output returned to the greedy request.
    pub greedy: String,
}

/// On-disk fixture: component path (original schema names) to script.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FixtureFile {
    /// Draw samples in a seed-determined permutation of the script instead
    /// of script order.
    #[serde(default)]
    pub shuffle: bool,
    pub components: BTreeMap<String, FixtureScript>,
}

impl FixtureFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Adds (or replaces) the script for one component.
    pub fn with_script<I, T>(mut self, component: &str, samples: I, greedy: &str) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        self.components.insert(
            component.to_string(),
            FixtureScript {
                samples: samples.into_iter().map(Into::into).collect(),
                greedy: greedy.to_string(),
            },
        );
        self
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Deterministic stand-in for a model. Sampled request `k` for a component
/// returns entry `k` of its (possibly shuffled) script; running past the
/// end is an error.
#[derive(Debug, Clone)]
pub struct FixtureSampler {
    scripts: BTreeMap<String, (FixtureScript, Vec<usize>)>,
}

impl FixtureSampler {
    pub fn new(file: FixtureFile, seed: u64) -> Self {
        let shuffle = file.shuffle;
        let scripts = file
            .components
            .into_iter()
            .map(|(path, script)| {
                let mut order: Vec<usize> = (0..script.samples.len()).collect();
                if shuffle {
                    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&path)));
                }
                (path, (script, order))
            })
            .collect();
        Self { scripts }
    }

    /// Shortest script length: the largest `N` every component can serve
    /// without retries.
    pub fn max_samples(&self) -> usize {
        self.scripts
            .values()
            .map(|(s, _)| s.samples.len())
            .min()
            .unwrap_or(0)
    }
}

impl Sampler for FixtureSampler {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, SamplerError> {
        let (script, order) = self
            .scripts
            .get(request.component)
            .ok_or_else(|| SamplerError::MissingScript(request.component.to_string()))?;
        match request.slot {
            Slot::Greedy => Ok(script.greedy.clone()),
            Slot::Sample(k) => order
                .get(k)
                .map(|&i| script.samples[i].clone())
                .ok_or_else(|| SamplerError::ScriptExhausted {
                    component: request.component.to_string(),
                    requested: k,
                    available: order.len(),
                }),
        }
    }
}

// stable per-component seed mixing, independent of std's hasher
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}
