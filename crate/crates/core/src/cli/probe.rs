//! Randomized search for instances that violate the blockwise quadratic-form
//! premise or the subunital domination `K_w ⪯ K`. Every violation is
//! recorded as a self-contained scenario that reproduces it under `run`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use super::report::{TaskReport, PROBE_SCHEMA};
use super::runner::{run_scenario, RunOptions};
use super::scenario::{Expect, Scenario, Task, TaskOp, Tolerances, SCENARIO_SCHEMA};
use crate::channels::{self, CPMap, MapSet, Word};
use crate::error::Result;
use crate::kernels::{self, gram, PDKernel};
use crate::linalg::{self, DEFAULT_PSD_TOL, DEFAULT_RANK_TOL};
use crate::matrix::{c64, ComplexMatrix, C64};
use crate::model::{self, LiftSet, DEFAULT_CERT_TOL};
use crate::random::{self, KernelKind, MapKind};
use crate::randomdyn::sub_seed;

#[derive(Debug, Clone, Serialize)]
pub struct ProbeConfig {
    pub instances: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub rank_deficient: bool,
    pub map_kind: MapKind,
    pub labels: usize,
    pub max_kraus: usize,
    /// Random α per instance and label, on top of the Gram null vectors.
    pub alphas: usize,
    /// Longest word tried for the domination check.
    pub max_word_len: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            seed: 0,
            n: 1,
            d: 2,
            rank_deficient: false,
            map_kind: MapKind::Subunital,
            labels: 2,
            max_kraus: 3,
            alphas: 8,
            max_word_len: 2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProbeStats {
    pub instances: usize,
    pub premise_evaluations: usize,
    pub premise_violations: usize,
    pub domination_evaluations: usize,
    pub domination_violations: usize,
    pub admissible_instances: usize,
    pub contractive_instances: usize,
    /// Instances where every lift is admissible with `d_norm ≤ cb + tol`.
    pub cb_bound_holds_instances: usize,
    pub max_d_norm_over_cb: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Premise,
    Domination,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub instance: usize,
    pub kind: ViolationKind,
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Re-runnable scenario reproducing the violation.
    pub scenario: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltinCase {
    pub name: String,
    pub scenario: Value,
    pub tasks: Vec<TaskReport>,
    pub reproduced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub schema: String,
    pub config: ProbeConfig,
    pub builtin: Vec<BuiltinCase>,
    pub stats: ProbeStats,
    pub violations: Vec<Violation>,
}

impl ProbeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("probe report serializes")
    }
}

fn regression_scenario(name: &str, k: &PDKernel, maps: &MapSet, seed: u64, tasks: Vec<Task>) -> Scenario {
    Scenario {
        schema: SCENARIO_SCHEMA.to_owned(),
        name: Some(name.to_owned()),
        kernel: k.clone(),
        kernel2: None,
        maps: maps.clone(),
        tasks,
        seed,
        tolerances: Tolerances::default(),
    }
}

fn dephasing() -> CPMap {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CPMap::new("s", vec![ComplexMatrix::identity(2).scale_real(h), ComplexMatrix::diag(&[h, -h])])
        .expect("valid Kraus family")
}

/// Fixed falsification anchors, run through the scenario runner.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let maps = MapSet::new([dephasing()]);
    let ones = PDKernel::single(ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])).expect("2x2 block");
    let rank_one = regression_scenario(
        "dephasing on a rank-one block",
        &ones,
        &maps,
        0,
        vec![Task::new(TaskOp::ProbeRegression {
            label: "s".into(),
            alpha: Some(vec![c64(h, 0.0), c64(-h, 0.0)]),
            word: Some(Word::new(["s"])),
            expect_violation: true,
        })],
    );
    let correlated = PDKernel::single(ComplexMatrix::from_real(&[&[1.0, 0.5], &[0.5, 1.0]])).expect("2x2 block");
    let certificate = regression_scenario(
        "dephasing on a correlated full-rank block",
        &correlated,
        &maps,
        0,
        vec![Task {
            op: TaskOp::Certify,
            expect: Some(Expect {
                error: None,
                values: vec![
                    super::scenario::ExpectedValue { pointer: "/labels/0/d_norm".into(), value: 2.0.into() },
                    super::scenario::ExpectedValue { pointer: "/model_contractive".into(), value: false.into() },
                ],
                tol: 1e-9,
            }),
        }],
    );
    let swap =
        CPMap::new("s", vec![ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])]).expect("valid Kraus family");
    let diag = PDKernel::single(ComplexMatrix::diag(&[1.0, 0.0])).expect("2x2 block");
    let oscillation = regression_scenario(
        "unitary swap on a rank-one block",
        &diag,
        &MapSet::new([swap]),
        0,
        vec![Task {
            op: TaskOp::Limit { label: "s".into(), max_iter: None },
            expect: Some(Expect { error: Some("ErrNotConverged".into()), values: Vec::new(), tol: 0.0 }),
        }],
    );
    vec![rank_one, certificate, oscillation]
}

/// Candidate α: Gram null vectors first, then Gaussian draws.
fn alphas(rng: &mut ChaCha8Rng, g: &ComplexMatrix, count: usize) -> Result<Vec<Vec<C64>>> {
    let eig = linalg::hermitian_eigen(g)?;
    let cutoff = DEFAULT_RANK_TOL * eig.max().max(1.0);
    let mut out: Vec<Vec<C64>> =
        (0..eig.values.len()).filter(|&i| eig.values[i] <= cutoff).map(|i| eig.vectors.column(i)).collect();
    out.extend((0..count).map(|_| random::gaussian_vector(rng, g.rows())));
    Ok(out)
}

fn probe_instance(
    cfg: &ProbeConfig,
    index: usize,
    stats: &mut ProbeStats,
    violations: &mut Vec<Violation>,
) -> Result<()> {
    let seed = sub_seed(cfg.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = if cfg.rank_deficient { KernelKind::RankDeficient } else { KernelKind::FullRank };
    let k = random::random_kernel(&mut rng, cfg.n, cfg.d, kind);
    let maps = random::random_maps(&mut rng, cfg.labels, cfg.d, cfg.max_kraus, cfg.map_kind);
    let g = gram(&k);
    let scale = linalg::op_norm(&g).max(1.0);
    stats.instances += 1;

    let candidates = alphas(&mut rng, &g, cfg.alphas)?;
    for phi in maps.iter() {
        for alpha in &candidates {
            stats.premise_evaluations += 1;
            let p = model::premise_check(&k, phi, alpha, 1e-9 * scale)?;
            if !p.holds {
                stats.premise_violations += 1;
                let task = Task::new(TaskOp::ProbeRegression {
                    label: phi.label().to_owned(),
                    alpha: Some(alpha.clone()),
                    word: None,
                    expect_violation: true,
                });
                let s = regression_scenario(&format!("probe instance {index}: premise"), &k, &maps, seed, vec![task]);
                violations.push(Violation {
                    instance: index,
                    kind: ViolationKind::Premise,
                    label: phi.label().to_owned(),
                    lhs: p.lhs,
                    rhs: p.rhs,
                    scenario: serde_json::to_value(&s).unwrap_or(Value::Null),
                });
                break;
            }
        }
    }

    if maps.iter().all(|phi| channels::is_subunital(phi, 1e-12)) {
        for w in random::all_words(&maps, cfg.max_word_len).into_iter().filter(|w| !w.is_empty()) {
            stats.domination_evaluations += 1;
            let kw = channels::iterate_kernel(&k, &w, &maps)?;
            let dom = kernels::dominates(&k, &kw, DEFAULT_PSD_TOL)?;
            if !dom.is_psd {
                stats.domination_violations += 1;
                let label = w.labels()[0].clone();
                let task = Task::new(TaskOp::ProbeRegression {
                    label: label.clone(),
                    alpha: None,
                    word: Some(w.clone()),
                    expect_violation: true,
                });
                let s =
                    regression_scenario(&format!("probe instance {index}: domination"), &k, &maps, seed, vec![task]);
                violations.push(Violation {
                    instance: index,
                    kind: ViolationKind::Domination,
                    label,
                    lhs: dom.min_eig,
                    rhs: 0.0,
                    scenario: serde_json::to_value(&s).unwrap_or(Value::Null),
                });
                break;
            }
        }
    }

    let kf = kernels::kolmogorov(&k, DEFAULT_RANK_TOL)?;
    let lifts = LiftSet::new(&kf, &maps, None)?;
    let cert = model::certify(&lifts, DEFAULT_CERT_TOL);
    if lifts.all_admissible() {
        stats.admissible_instances += 1;
    }
    if cert.model_contractive {
        stats.contractive_instances += 1;
    }
    if cert.cb_bound_holds_everywhere() {
        stats.cb_bound_holds_instances += 1;
    }
    for c in cert.labels.iter().filter(|c| c.admissible && c.cb_value > 0.0) {
        stats.max_d_norm_over_cb = stats.max_d_norm_over_cb.max(c.d_norm / c.cb_value);
    }
    Ok(())
}

pub fn probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    let builtin = builtin_scenarios()
        .into_iter()
        .map(|s| {
            let out = run_scenario(&s, &RunOptions::default());
            BuiltinCase {
                name: s.name.clone().unwrap_or_default(),
                scenario: serde_json::to_value(&s).unwrap_or(Value::Null),
                reproduced: out.exit_code() == 0,
                tasks: out.report.tasks,
            }
        })
        .collect();
    let mut stats = ProbeStats::default();
    let mut violations = Vec::new();
    for i in 0..cfg.instances {
        probe_instance(cfg, i, &mut stats, &mut violations)?;
    }
    Ok(ProbeReport { schema: PROBE_SCHEMA.to_owned(), config: cfg.clone(), builtin, stats, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_reproduce() {
        let r = probe(&ProbeConfig { instances: 0, ..Default::default() }).unwrap();
        assert_eq!(r.builtin.len(), 3);
        for b in &r.builtin {
            assert!(b.reproduced, "{}: {:?}", b.name, b.tasks);
        }
        let premise = r.builtin[0].tasks[0].result.as_ref().unwrap();
        assert!((premise.pointer("/premise/lhs").unwrap().as_f64().unwrap() - 1.0).abs() < 1e-14);
        assert!(premise.pointer("/premise/rhs").unwrap().as_f64().unwrap().abs() < 1e-14);
        assert_eq!(premise.pointer("/domination/dominated"), Some(&Value::Bool(false)));
    }

    #[test]
    fn rank_deficient_probe_finds_violations() {
        let cfg = ProbeConfig { instances: 10, seed: 3, n: 1, d: 2, rank_deficient: true, ..Default::default() };
        let r = probe(&cfg).unwrap();
        assert_eq!(r.stats.instances, 10);
        assert!(r.stats.premise_violations > 0);
    }
}
