use std::fs;
use std::path::Path;

use evorl::agent::{load_agent, save_agent, Agent, Checkpoint, LearnerState};
use evorl::config::{Algo, BestSelection, RunConfig};
use evorl::exec::Pool;
use evorl::experiment::{run_experiment, ExperimentSpec, ExperimentSummary};
use evorl::posteval::{post_evaluate, posteval_seeds};
use evorl::train::{continue_es, es_start, read_curve, train, TrainSpec};
use evorl::LabError;
use evorl_core::env::{EnvId, EnvSpec};
use evorl_core::exec::Serial;
use evorl_core::nn::{ActionMode, ObsNormalizer, ParamVector};
use evorl_core::policy::PolicyHead;

fn small_config(env: EnvId, replications: usize) -> RunConfig {
    let text = format!(
        "replications = {replications}\nes.pop_pairs = 4\nes.hidden = 8\nppo.hidden = 8\nppo.rollout_steps = 64\nppo.minibatch_size = 32\nppo.epochs = 2\noffpolicy.hidden = 8\noffpolicy.batch_size = 16\noffpolicy.warmup_steps = 50\noffpolicy.report_interval = 100\neval.episodes = 1\neval.interval = 1\nposteval.episodes = 5\n"
    );
    RunConfig::parse(env, &text).unwrap()
}

fn spec(
    algo: Algo,
    env: EnvId,
    replications: usize,
    budget: u64,
    out: Option<&Path>,
) -> ExperimentSpec {
    let config = small_config(env, replications);
    ExperimentSpec {
        algo,
        env: config.env_spec(env, true),
        config,
        master_seed: 17,
        budget,
        out: out.map(Path::to_path_buf),
    }
}

fn curve_files(dir: &Path) -> Vec<Vec<u8>> {
    let mut reps: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    reps.sort();
    reps.iter()
        .map(|d| fs::read(d.join("curve.csv")).unwrap())
        .collect()
}

#[test]
fn ten_replications_give_ten_records_with_distinct_seeds() {
    let s = spec(Algo::Es, EnvId::SparseGoal, 10, 3000, None);
    let result = run_experiment(&s, &Serial).unwrap();
    assert_eq!(result.replications.len(), 10);
    assert_eq!(result.summary.agents.len(), 10);
    let mut seeds = s.replication_seeds();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 10);
    for r in result.successes() {
        assert_eq!(r.posteval.returns.len(), 5);
        assert!(r.rows.iter().all(|row| row.eval_steps <= 3000));
    }
}

#[test]
fn curves_are_byte_identical_across_reruns_and_worker_counts() {
    for algo in Algo::ALL {
        let env = if algo == Algo::Ppo {
            EnvId::Paddle
        } else {
            EnvId::SparseGoal
        };
        let budget = if algo.is_es() { 8000 } else { 600 };
        let mut outputs = Vec::new();
        for workers in [1, 1, 3] {
            let dir = tempfile::tempdir().unwrap();
            let s = spec(algo, env, 3, budget, Some(dir.path()));
            run_experiment(&s, &Pool::new(workers).unwrap()).unwrap();
            let files = curve_files(dir.path());
            assert_eq!(files.len(), 3);
            assert!(
                files.iter().all(|f| f.split(|&b| b == b'\n').count() > 2),
                "{algo}: empty curve"
            );
            outputs.push(files);
        }
        assert_eq!(outputs[0], outputs[1], "{algo}: rerun differs");
        assert_eq!(
            outputs[0], outputs[2],
            "{algo}: worker count changes output"
        );
    }
}

#[test]
fn zero_budget_post_evaluates_the_initial_policy() {
    for algo in Algo::ALL {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(algo, EnvId::SparseGoal, 2, 0, Some(dir.path()));
        let result = run_experiment(&s, &Serial).unwrap();
        assert_eq!(result.summary.agents.len(), 2);
        for r in result.successes() {
            assert!(r.rows.is_empty());
            assert_eq!(r.best.score, None);
            assert_eq!(r.posteval.returns.len(), 5);
        }
        let csv = fs::read_to_string(dir.path().join("rep_00/curve.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1, "{algo}: header only");
    }
}

#[test]
fn failed_replications_are_recorded_and_the_rest_continue() {
    let dir = tempfile::tempdir().unwrap();
    // A plain file where a replication directory should go.
    fs::write(dir.path().join("rep_01"), "blocked").unwrap();
    let s = spec(Algo::Es, EnvId::SparseGoal, 3, 2000, Some(dir.path()));
    let result = run_experiment(&s, &Serial).unwrap();
    assert_eq!(result.summary.failures.len(), 1);
    assert_eq!(result.summary.failures[0].index, 1);
    assert_eq!(result.summary.agents.len(), 2);
    let saved = ExperimentSummary::load(dir.path()).unwrap();
    assert_eq!(saved, result.summary);
    assert!(dir.path().join("rep_02/best.json").exists());
}

#[test]
fn global_selection_takes_the_top_scores_across_replications() {
    let mut s = spec(Algo::Es, EnvId::Paddle, 3, 12_000, None);
    s.config.selection = BestSelection::GlobalTop;
    let result = run_experiment(&s, &Serial).unwrap();
    let mut all: Vec<f64> = result
        .successes()
        .flat_map(|r| r.candidates.iter().map(|a| a.score.unwrap()))
        .collect();
    all.sort_by(|a, b| b.total_cmp(a));
    let picked: Vec<f64> = result
        .summary
        .agents
        .iter()
        .map(|a| a.score.unwrap())
        .collect();
    assert_eq!(picked, all[..3]);
}

#[test]
fn checkpoints_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(Algo::Sac, EnvId::SparseGoal, 1, 400, Some(dir.path()));
    let result = run_experiment(&s, &Serial).unwrap();
    let rep = result.successes().next().unwrap();
    let loaded = load_agent(&dir.path().join("rep_00/best.json")).unwrap();
    assert_eq!(loaded, rep.best);
    let state = Checkpoint::<LearnerState>::load(&dir.path().join("rep_00/state.json")).unwrap();
    assert!(matches!(state.payload, LearnerState::Sac(_)));
    assert_eq!(state.env, s.env);
}

#[test]
fn unsupported_checkpoint_versions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.json");
    let agent = standing_hopper(false);
    save_agent(&path, &agent).unwrap();
    let text = fs::read_to_string(&path)
        .unwrap()
        .replacen("\"version\": 1", "\"version\": 99", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(load_agent(&path), Err(LabError::Invalid(_))));
}

#[test]
fn resumed_es_matches_an_uninterrupted_run() {
    let config = small_config(EnvId::Hopper, 1);
    let env = config.env_spec(EnvId::Hopper, false);
    let t = |budget| TrainSpec {
        algo: Algo::Es,
        env,
        config: config.clone(),
        seed: 5,
        budget,
    };
    let full = train(&t(60_000), &Serial, |_| Ok(())).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let half = train(&t(30_000), &Serial, |_| Ok(())).unwrap();
    Checkpoint::new(Algo::Es, env, &half.learner)
        .save(&path)
        .unwrap();
    let saved = Checkpoint::<LearnerState>::load(&path).unwrap();
    assert_eq!(saved.payload, half.learner);
    let rest = continue_es(
        Algo::Es,
        &env,
        saved.payload,
        60_000,
        1,
        &Serial,
        |_| Ok(()),
    )
    .unwrap();

    let mut joined = half.rows.clone();
    joined.extend(rest.rows);
    assert_eq!(joined, full.rows);
    assert_eq!(rest.learner, full.learner);
    assert_eq!(rest.best, full.best);
}

#[test]
fn fresh_es_learner_matches_the_configured_network() {
    let config = small_config(EnvId::Hopper, 1);
    let t = TrainSpec {
        algo: Algo::EsSuperSym,
        env: EnvSpec::new(EnvId::Hopper),
        config,
        seed: 1,
        budget: 0,
    };
    let LearnerState::Es { config, policy, .. } = es_start(&t).unwrap() else {
        panic!("not an ES learner")
    };
    assert_eq!(policy.layer_sizes(), &[7, 8, 2]);
    assert_eq!(config.seed_mode, evorl_core::es::SeedMode::SuperSymmetric);
}

fn standing_hopper(incentive: bool) -> Agent {
    let config = RunConfig::for_env(EnvId::Hopper);
    let env = config.env_spec(EnvId::Hopper, incentive);
    let probe = env.build();
    let policy =
        evorl::train::es_policy_spec(7, probe.action_space(), &[8], ActionMode::Deterministic)
            .unwrap();
    Agent {
        algo: Algo::Es,
        env,
        policy: ParamVector::zeros(policy),
        normalizer: ObsNormalizer::new(7),
        head: PolicyHead::Plain,
        training_mode: ActionMode::Deterministic,
        picked_at: 0,
        score: None,
    }
}

#[test]
fn standing_hopper_post_evaluates_to_zero_displacement() {
    let agent = standing_hopper(false);
    let seeds = posteval_seeds(&agent.env, 3, 5);
    let report = post_evaluate(&agent, &agent.env, &seeds, false).unwrap();
    assert_eq!(report.returns.len(), 5);
    assert_eq!(report.displacements, vec![0.0; 5]);
    assert_eq!(report.mean_displacement, 0.0);
    assert_eq!(report.mean_return, 0.0);
    let again = post_evaluate(&agent, &agent.env, &seeds, false).unwrap();
    assert_eq!(report, again);
}

#[test]
fn posteval_rejects_a_mismatched_environment() {
    let agent = standing_hopper(true);
    let paddle = EnvSpec::new(EnvId::Paddle);
    let seeds = posteval_seeds(&paddle, 0, 5);
    assert!(post_evaluate(&agent, &paddle, &seeds, false).is_err());
}

#[test]
fn curve_csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(Algo::Ppo, EnvId::Paddle, 1, 256, Some(dir.path()));
    run_experiment(&s, &Serial).unwrap();
    let text = fs::read_to_string(dir.path().join("rep_00/curve.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "eval_steps,generation_or_update,mean_return,best_return,center_or_eval_return"
    );
    let rows = read_curve(&text).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.last().unwrap().eval_steps, 256);
}
