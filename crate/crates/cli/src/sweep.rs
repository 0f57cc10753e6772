//! Campaigns over targets × sequence lengths.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use spider_core::calibrate::{classify_candidates, most_severe, ComplexityClass};
use spider_core::fuzzer::{run_campaign, CampaignConfig, FuzzReport};
use spider_core::generators::GeneratorMode;
use spider_core::testbed::ServiceRegistry;

pub const DEFAULT_LENGTHS: [usize; 7] = [1, 50, 100, 250, 500, 1000, 2000];
pub const DEFAULT_BUDGET_EXECS: u64 = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub targets: Vec<String>,
    pub lengths: Vec<usize>,
    pub budget_execs: Option<u64>,
    pub budget_secs: Option<f64>,
    pub t_max: u64,
    pub seed: u64,
    pub mode: GeneratorMode,
    /// Keep going past a target's first flagged length.
    pub full_sweep: bool,
}

impl SweepPlan {
    pub fn validate(&self, registry: &ServiceRegistry) -> Result<(), String> {
        if self.targets.is_empty() {
            return Err("no targets to sweep".into());
        }
        for t in &self.targets {
            if !registry.contains(t) {
                return Err(format!("unknown target {t:?}"));
            }
        }
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err("lengths must be positive and non-empty".into());
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err("lengths must be strictly ascending".into());
        }
        self.config(&self.targets[0], self.lengths[0])
            .validate()
            .map_err(|e| e.to_string())
    }

    pub fn config(&self, target: &str, seq_len: usize) -> CampaignConfig {
        let mut config =
            CampaignConfig::new(target, seq_len, self.t_max, self.seed).with_mode(self.mode);
        config.budget_execs = self.budget_execs;
        config.budget_secs = self.budget_secs;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub seq_len: usize,
    pub executions: u64,
    pub flags_total: u64,
    pub candidates: usize,
    pub false_positives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<ComplexityClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: String,
    /// Smallest length whose campaign flagged anything; `None` if none did.
    pub smallest_n: Option<usize>,
    pub campaigns: Vec<CampaignSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub plan: SweepPlan,
    pub targets: Vec<TargetSummary>,
}

impl SweepReport {
    pub fn has_candidate(&self) -> bool {
        self.targets
            .iter()
            .flat_map(|t| &t.campaigns)
            .any(|c| c.candidates > 0)
    }
}

/// One finished campaign.
pub struct CampaignRun {
    pub target: String,
    pub seq_len: usize,
    pub report: Result<FuzzReport, String>,
}

/// Runs the plan on up to `jobs` worker threads. Each target's lengths are
/// taken in ascending order; unless the plan asks for a full sweep, lengths
/// above a target's first flagged one are skipped, and any that already ran
/// on another worker are dropped, so the result does not depend on `jobs`.
pub fn run_sweep(
    registry: &ServiceRegistry,
    plan: &SweepPlan,
    jobs: usize,
) -> (SweepReport, Vec<CampaignRun>) {
    let tasks: VecDeque<(usize, usize)> = plan
        .lengths
        .iter()
        .flat_map(|&n| (0..plan.targets.len()).map(move |t| (t, n)))
        .collect();
    let tasks = Mutex::new(tasks);
    let smallest: Mutex<BTreeMap<usize, usize>> = Mutex::new(BTreeMap::new());
    let done: Mutex<Vec<(usize, CampaignRun)>> = Mutex::new(Vec::new());

    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1) {
            scope.spawn(|| loop {
                let Some((t, n)) = tasks.lock().expect("task lock").pop_front() else {
                    break;
                };
                if !plan.full_sweep
                    && smallest
                        .lock()
                        .expect("lock")
                        .get(&t)
                        .is_some_and(|&m| m < n)
                {
                    continue;
                }
                let target = &plan.targets[t];
                let report = run_campaign(registry, &plan.config(target, n))
                    .map(|mut r| {
                        classify_candidates(&mut r, None);
                        r
                    })
                    .map_err(|e| e.to_string());
                if report.as_ref().is_ok_and(|r| r.flags_total > 0) {
                    let mut s = smallest.lock().expect("lock");
                    let e = s.entry(t).or_insert(n);
                    *e = (*e).min(n);
                }
                done.lock().expect("lock").push((
                    t,
                    CampaignRun {
                        target: target.clone(),
                        seq_len: n,
                        report,
                    },
                ));
            });
        }
    });

    let smallest = smallest.into_inner().expect("lock");
    let mut runs: Vec<(usize, CampaignRun)> = done
        .into_inner()
        .expect("lock")
        .into_iter()
        .filter(|(t, r)| plan.full_sweep || smallest.get(t).is_none_or(|&m| r.seq_len <= m))
        .collect();
    runs.sort_by_key(|(t, r)| (*t, r.seq_len));

    let targets = plan
        .targets
        .iter()
        .enumerate()
        .map(|(t, target)| TargetSummary {
            target: target.clone(),
            smallest_n: smallest.get(&t).copied(),
            campaigns: runs
                .iter()
                .filter(|(i, _)| *i == t)
                .map(|(_, run)| summarize(run))
                .collect(),
        })
        .collect();
    let report = SweepReport {
        plan: plan.clone(),
        targets,
    };
    (report, runs.into_iter().map(|(_, r)| r).collect())
}

fn summarize(run: &CampaignRun) -> CampaignSummary {
    match &run.report {
        Ok(r) => {
            let candidates = r.candidates().count();
            CampaignSummary {
                seq_len: run.seq_len,
                executions: r.executions,
                flags_total: r.flags_total,
                candidates,
                false_positives: r.flags.len() - candidates,
                complexity: most_severe(r),
                error: None,
            }
        }
        Err(e) => CampaignSummary {
            seq_len: run.seq_len,
            executions: 0,
            flags_total: 0,
            candidates: 0,
            false_positives: 0,
            complexity: None,
            error: Some(e.clone()),
        },
    }
}
