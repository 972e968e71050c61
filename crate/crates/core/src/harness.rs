//! Baseline check, coverage-based applicability and the relation × mutant
//! kill matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{CampaignParams, TestEnv};
use crate::mutation::{coverage_trace, with_active_mutant, Mutant, MutantId};
use crate::relations::{run_mr, MrResult, MrVerdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Killed,
    Alive,
    Error,
}

impl From<MrResult> for Outcome {
    fn from(r: MrResult) -> Self {
        match r {
            MrResult::Violated => Outcome::Killed,
            MrResult::Pass => Outcome::Alive,
            MrResult::SetupError => Outcome::Error,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Killed => "KILLED",
            Outcome::Alive => "ALIVE",
            Outcome::Error => "ERROR",
        })
    }
}

/// A relation that did not pass on the original model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BaselineOffense {
    pub mr: u8,
    pub params: CampaignParams,
    pub result: MrResult,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("BASELINE_FAILURE: {} relation run(s) did not pass on the original model", offending.len())]
    BaselineFailure { offending: Vec<BaselineOffense> },
    #[error("BASELINE_FAILURE EMPTY_SWEEP: no environments to check")]
    EmptySweep,
    #[error("UNKNOWN_MR: {0}")]
    UnknownMr(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaselineReport {
    pub envs: usize,
    pub runs: usize,
}

fn check_ids(mrs: &[u8]) -> Result<(), HarnessError> {
    match mrs
        .iter()
        .find(|&&mr| !(1..=crate::relations::MR_COUNT).contains(&mr))
    {
        Some(&mr) => Err(HarnessError::UnknownMr(mr)),
        None => Ok(()),
    }
}

fn run_clean(mr: u8, env: &TestEnv) -> MrVerdict {
    run_mr(mr, env).expect("relation ids checked")
}

/// Every relation must pass on the original model for every environment.
pub fn run_baseline(envs: &[TestEnv], mrs: &[u8]) -> Result<BaselineReport, HarnessError> {
    check_ids(mrs)?;
    run_baseline_with(envs, mrs, run_clean)
}

/// [`run_baseline`] with a substitute relation runner.
pub fn run_baseline_with<F>(
    envs: &[TestEnv],
    mrs: &[u8],
    runner: F,
) -> Result<BaselineReport, HarnessError>
where
    F: Fn(u8, &TestEnv) -> MrVerdict + Sync,
{
    if envs.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    let jobs: Vec<(u8, &TestEnv)> = envs
        .iter()
        .flat_map(|env| mrs.iter().map(move |&mr| (mr, env)))
        .collect();
    let offending: Vec<BaselineOffense> = jobs
        .par_iter()
        .map(|&(mr, env)| (mr, env, runner(mr, env)))
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|(_, _, v)| v.result != MrResult::Pass)
        .map(|(mr, env, v)| BaselineOffense {
            mr,
            params: env.params.clone(),
            result: v.result,
            detail: v.detail,
        })
        .collect();
    if offending.is_empty() {
        Ok(BaselineReport {
            envs: envs.len(),
            runs: jobs.len(),
        })
    } else {
        Err(HarnessError::BaselineFailure { offending })
    }
}

/// Mutants whose site the relation's clean run evaluates.
pub fn compute_applicability(
    mrs: &[u8],
    mutants: &[Mutant],
    env: &TestEnv,
) -> BTreeMap<u8, BTreeSet<MutantId>> {
    mrs.par_iter()
        .map(|&mr| {
            let (_, sites) = coverage_trace(|| run_mr(mr, env));
            let ids = mutants
                .iter()
                .filter(|m| sites.contains(&m.site))
                .map(|m| m.mutant_id)
                .collect();
            (mr, ids)
        })
        .collect()
}

pub fn run_cell(mr: u8, mutant: &Mutant, env: &TestEnv) -> Outcome {
    let verdict = with_active_mutant(Some(mutant), || run_mr(mr, env))
        .expect("matrix cells run on a clean context")
        .expect("relation ids checked");
    verdict.result.into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub mr: u8,
    pub mutant: MutantId,
    pub outcome: Outcome,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrCounts {
    pub killed: usize,
    pub alive: usize,
    pub error: usize,
    pub applicable: usize,
}

impl MrCounts {
    /// killed / (killed + alive); `None` when no cell was classified either
    /// way.
    pub fn rate(&self) -> Option<f64> {
        let denominator = self.killed + self.alive;
        (denominator > 0).then(|| self.killed as f64 / denominator as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KillMatrix {
    pub seed: u64,
    pub config_hash: String,
    pub mutants: Vec<Mutant>,
    pub mrs: Vec<u8>,
    pub applicable: BTreeMap<u8, BTreeSet<MutantId>>,
    /// mr-major, mutant-id-minor.
    pub cells: Vec<Cell>,
}

impl KillMatrix {
    pub fn outcome(&self, mr: u8, mutant: MutantId) -> Option<Outcome> {
        self.cells
            .iter()
            .find(|c| c.mr == mr && c.mutant == mutant)
            .map(|c| c.outcome)
    }

    pub fn counts(&self, mr: u8) -> MrCounts {
        let mut counts = MrCounts {
            applicable: self.applicable.get(&mr).map_or(0, BTreeSet::len),
            ..MrCounts::default()
        };
        for c in self.cells.iter().filter(|c| c.mr == mr) {
            match c.outcome {
                Outcome::Killed => counts.killed += 1,
                Outcome::Alive => counts.alive += 1,
                Outcome::Error => counts.error += 1,
            }
        }
        counts
    }

    pub fn kill_rate(&self, mr: u8) -> Option<f64> {
        self.counts(mr).rate()
    }

    pub fn killed_distinct(&self) -> BTreeSet<MutantId> {
        self.cells
            .iter()
            .filter(|c| c.outcome == Outcome::Killed)
            .map(|c| c.mutant)
            .collect()
    }

    /// Distinct killed mutants over all mutants in the matrix; 0 when empty.
    pub fn overall_detection(&self) -> f64 {
        if self.mutants.is_empty() {
            0.0
        } else {
            self.killed_distinct().len() as f64 / self.mutants.len() as f64
        }
    }
}

/// Runs every applicable (relation, mutant) cell on `env`.
pub fn run_matrix(
    mrs: &[u8],
    mutants: &[Mutant],
    env: &TestEnv,
) -> Result<KillMatrix, HarnessError> {
    check_ids(mrs)?;
    let applicable = compute_applicability(mrs, mutants, env);
    let jobs: Vec<(u8, &Mutant)> = mrs
        .iter()
        .flat_map(|mr| {
            let ids = &applicable[mr];
            mutants
                .iter()
                .filter(move |m| ids.contains(&m.mutant_id))
                .map(move |m| (*mr, m))
        })
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(mr, m)| Cell {
            mr,
            mutant: m.mutant_id,
            outcome: run_cell(mr, m, env),
        })
        .collect();
    Ok(KillMatrix {
        seed: env.seed,
        config_hash: env.params.config_hash(),
        mutants: mutants.to_vec(),
        mrs: mrs.to_vec(),
        applicable,
        cells,
    })
}
