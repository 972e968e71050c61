//! Campaign parameters, JSON loading and the test-environment sweep.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::contract::CampaignConfig;
use crate::types::{Address, Amount};

pub const DEFAULT_SEED: u64 = 42;

/// Participants per role addressable without id collisions.
pub const ROLE_CAPACITY: usize = 0x1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: expected a JSON object")]
    NotAnObject,
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilestoneParams {
    pub target: u128,
    pub reward: u128,
}

/// Campaign parameters as read from a JSON config document. Every field is
/// optional.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignParams {
    pub organizers: usize,
    pub beneficiaries: usize,
    pub min_donation: u128,
    pub start_time: u64,
    pub duration: u64,
    pub max_participants: usize,
    pub max_reward: u128,
    pub milestones: Vec<MilestoneParams>,
}

impl Default for CampaignParams {
    fn default() -> Self {
        Self {
            organizers: 2,
            beneficiaries: 3,
            min_donation: 100,
            start_time: 100,
            duration: 1000,
            max_participants: 10,
            max_reward: 1_000_000,
            milestones: Vec::new(),
        }
    }
}

impl CampaignParams {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if !value.is_object() {
            return Err(ConfigError::NotAnObject);
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn organizer_addresses(&self) -> Vec<Address> {
        (0..self.organizers).map(organizer).collect()
    }

    pub fn beneficiary_addresses(&self) -> Vec<Address> {
        (0..self.beneficiaries).map(beneficiary).collect()
    }

    pub fn campaign_config(&self) -> CampaignConfig {
        CampaignConfig {
            organizers: self.organizer_addresses(),
            beneficiaries: self.beneficiary_addresses(),
            min_donation: Amount(self.min_donation),
            start_time: self.start_time,
            duration: self.duration,
            max_participants: self.max_participants,
            max_reward: Amount(self.max_reward),
        }
    }

    pub fn deadline(&self) -> Option<u64> {
        self.start_time.checked_add(self.duration)
    }
}

pub fn organizer(i: usize) -> Address {
    Address(0x0001 + i as u32)
}

pub fn beneficiary(i: usize) -> Address {
    Address(0x1001 + i as u32)
}

pub fn donor(i: usize) -> Address {
    Address(0x2001 + i as u32)
}

/// One parameterization under which a relation runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestEnv {
    pub params: CampaignParams,
    pub seed: u64,
}

impl TestEnv {
    pub fn new(params: CampaignParams, seed: u64) -> Self {
        Self { params, seed }
    }

    /// Environment family around `base`: organizers 1..=4, beneficiaries
    /// 1..=4, minimum donation 1 or 100, zero to two milestones. Sizes above
    /// `base.max_participants` are skipped.
    pub fn sweep(base: &CampaignParams, seed: u64) -> Vec<TestEnv> {
        let mut envs = Vec::new();
        for organizers in 1..=4usize {
            for beneficiaries in 1..=4usize {
                if organizers > base.max_participants || beneficiaries > base.max_participants {
                    continue;
                }
                for min_donation in [1u128, 100] {
                    for count in 0..=2usize {
                        let milestones = (0..count)
                            .map(|i| MilestoneParams {
                                target: min_donation * (organizers as u128 + 3 * (i as u128 + 1)),
                                reward: 10 * (i as u128 + 1),
                            })
                            .collect();
                        let params = CampaignParams {
                            organizers,
                            beneficiaries,
                            min_donation,
                            milestones,
                            ..base.clone()
                        };
                        envs.push(TestEnv::new(params, seed));
                    }
                }
            }
        }
        envs
    }
}

impl Default for TestEnv {
    fn default() -> Self {
        Self::new(CampaignParams::default(), DEFAULT_SEED)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let p = CampaignParams::from_json("{}").unwrap();
        assert_eq!(p, CampaignParams::default());
        assert_eq!(p.min_donation, 100);
        assert_eq!(p.duration, 1000);
        assert_eq!(p.max_participants, 10);
        assert_eq!(p.max_reward, 1_000_000);
    }

    #[test]
    fn partial_document_overrides_fields() {
        let p = CampaignParams::from_json(
            r#"{"organizers": 4, "milestones": [{"target": 500, "reward": 50}]}"#,
        )
        .unwrap();
        assert_eq!(p.organizers, 4);
        assert_eq!(p.beneficiaries, 3);
        assert_eq!(
            p.milestones,
            vec![MilestoneParams {
                target: 500,
                reward: 50
            }]
        );
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(CampaignParams::from_json(r#"{"organisers": 2}"#).is_err());
        assert!(CampaignParams::from_json("[1, 2]").is_err());
    }

    #[test]
    fn addresses_distinct_across_roles() {
        let p = CampaignParams {
            organizers: 10,
            beneficiaries: 10,
            ..CampaignParams::default()
        };
        let mut all = p.organizer_addresses();
        all.extend(p.beneficiary_addresses());
        all.push(donor(0));
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = CampaignParams::default();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.min_donation = 1;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn sweep_covers_the_family() {
        let envs = TestEnv::sweep(&CampaignParams::default(), 7);
        assert_eq!(envs.len(), 4 * 4 * 2 * 3);
        assert!(envs.iter().all(|e| e.seed == 7));
        let small = CampaignParams {
            max_participants: 2,
            ..CampaignParams::default()
        };
        assert_eq!(TestEnv::sweep(&small, 7).len(), 2 * 2 * 2 * 3);
    }

    #[test]
    fn sweep_milestones_lie_beyond_activation_total() {
        for env in TestEnv::sweep(&CampaignParams::default(), 1) {
            let activation = env.params.min_donation * env.params.organizers as u128;
            for m in &env.params.milestones {
                assert!(m.target > activation);
                assert!(m.reward <= env.params.max_reward);
            }
        }
    }
}
