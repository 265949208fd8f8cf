//! One test per acceptance check, each printing a single pass/fail line.
//!
//! The first five checks pit the library against independently written
//! re-derivations (a direct constraint transcription, hand-computed costs, a
//! high-precision threshold curve, finite differences, a restricted
//! exhaustive search). The last four exercise end-to-end behavior: learning
//! progress, capacity and load trends, and bitwise reproducibility.

use std::panic::AssertUnwindSafe;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use vecsim_core::baselines::{baseline_decision, evaluate_baseline, evaluate_learner, PolicyKind};
use vecsim_core::config::{ScenarioConfig, Thresholds, UtilityWeights};
use vecsim_core::cost::{
    completion_time, delay_threshold, fleet_utility, offload_energy, ComputeAllocation,
    ComputeTarget,
};
use vecsim_core::decision::{
    check_constraints, evaluate_joint, random_decision, random_instance, Decision, InstanceParams,
    MicroInstance,
};
use vecsim_core::env::VecEnv;
use vecsim_core::learn::{
    actor_gradients, critic_gradients, train_maddpg, AgentArrangement, EpisodeLog, Gradients,
    LearnConfig, Maddpg, Transition,
};
use vecsim_core::rng::stream;
use vecsim_core::scenario::{Task, TaskStatus, TaskType};

fn report(line: &str, body: impl FnOnce()) {
    match std::panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("{line}: pass"),
        Err(e) => {
            println!("{line}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

// ---------------------------------------------------------------------------
// 1. constraint checker against a direct transcription

/// Re-derives the eight per-vehicle constraint verdicts from first
/// principles, sharing no code with the checker under test.
fn direct_flags(inst: &MicroInstance, joint: &[Decision]) -> Vec<[bool; 8]> {
    let kk = inst.vehicles.len();
    let has_task = |k: usize| inst.vehicles[k].task.is_some();
    let has_out = |k: usize| {
        inst.vehicles[k].task.as_ref().is_some_and(|t| t.output_ratio * t.size_bits > 0.0)
    };

    // c3: VEC compute budget
    let mut vec_sum = 1.0 - inst.vec_free;
    for (k, d) in joint.iter().enumerate() {
        if has_task(k) && d.vec_server {
            vec_sum += d.b_vec;
        }
    }
    let c3 = vec_sum <= 1.0;

    // c4-c7: per-channel occupancy, one column per channel
    let column_ok = |pool: usize, row_of: &dyn Fn(usize, &Decision) -> Option<&Vec<bool>>| {
        let mut counts: Vec<f64> =
            inst.pool_free[pool].iter().map(|f| if *f { 0.0 } else { 1.0 }).collect();
        for (k, d) in joint.iter().enumerate() {
            if let Some(row) = row_of(k, d) {
                for (c, z) in counts.iter_mut().zip(row) {
                    if *z {
                        *c += 1.0;
                    }
                }
            }
        }
        counts.iter().all(|c| *c <= 1.0)
    };
    let c4 = column_ok(0, &|k, d| (has_task(k) && d.vec_server).then_some(&d.z_v2i_up));
    let c5 =
        column_ok(1, &|k, d| (has_task(k) && d.vec_server && has_out(k)).then_some(&d.z_v2i_down));
    let any_v2v = |d: &Decision| d.v2v.iter().any(|b| *b);
    let c6 = column_ok(2, &|k, d| (has_task(k) && any_v2v(d)).then_some(&d.z_v2v_up));
    let c7 =
        column_ok(3, &|k, d| (has_task(k) && any_v2v(d) && has_out(k)).then_some(&d.z_v2v_down));

    // c2: per-vehicle CPU budget
    let mut cpu: Vec<f64> = inst.vehicles.iter().map(|v| 1.0 - v.local_free).collect();
    for (k, d) in joint.iter().enumerate() {
        if !has_task(k) {
            continue;
        }
        for (j, f) in d.v2v.iter().enumerate() {
            if *f {
                cpu[j] += d.b_remote;
            }
        }
        if d.local {
            cpu[k] += d.b_local;
        }
    }

    let flag_count = |d: &Decision| {
        usize::from(d.hold)
            + usize::from(d.vec_server)
            + usize::from(d.local)
            + d.v2v.iter().filter(|b| **b).count()
    };
    let ceil_ttis = |amount: f64, per_tti: f64| -> Option<f64> {
        if amount <= 0.0 {
            return Some(0.0);
        }
        if per_tti <= 0.0 {
            return None;
        }
        Some((amount / per_tti).ceil())
    };
    let tti_s = inst.tti_ms / 1000.0;

    (0..kk)
        .map(|k| {
            let d = &joint[k];
            let c1 = flag_count(d) <= 1;
            let c2 = cpu[k] <= 1.0;
            // c8: deadline of the selected pattern, trivially met when no
            // task or no single pattern is selected
            let c8 = match (&inst.vehicles[k].task, flag_count(d)) {
                (Some(task), 1) => {
                    let total_ms = if d.hold {
                        Some(inst.hold_wait_ms)
                    } else {
                        let (b, cpu_hz, up, down) = if d.local {
                            (d.b_local, inst.vehicles[k].cpu, f64::INFINITY, f64::INFINITY)
                        } else if d.vec_server {
                            let up = d
                                .z_v2i_up
                                .iter()
                                .zip(&inst.rates.v2i_up[k])
                                .filter(|(z, _)| **z)
                                .map(|(_, r)| *r)
                                .sum::<f64>();
                            let down = d
                                .z_v2i_down
                                .iter()
                                .zip(&inst.rates.v2i_down[k])
                                .filter(|(z, _)| **z)
                                .map(|(_, r)| *r)
                                .sum::<f64>();
                            (d.b_vec, inst.vec_cpu, up, down)
                        } else {
                            let j = d.v2v.iter().position(|b| *b).unwrap();
                            let up = d
                                .z_v2v_up
                                .iter()
                                .zip(&inst.rates.v2v_up[k][j])
                                .filter(|(z, _)| **z)
                                .map(|(_, r)| *r)
                                .sum::<f64>();
                            let down = d
                                .z_v2v_down
                                .iter()
                                .zip(&inst.rates.v2v_down[k][j])
                                .filter(|(z, _)| **z)
                                .map(|(_, r)| *r)
                                .sum::<f64>();
                            (d.b_remote, inst.vehicles[j].cpu, up, down)
                        };
                        let process = ceil_ttis(task.density * task.size_bits, b * cpu_hz * tti_s);
                        let transfer = if d.local {
                            Some(0.0)
                        } else {
                            let upload = ceil_ttis(task.size_bits, up * tti_s);
                            let download =
                                ceil_ttis(task.output_ratio * task.size_bits, down * tti_s);
                            match (upload, download) {
                                (Some(a), Some(b)) => Some(a + b),
                                _ => None,
                            }
                        };
                        match (process, transfer) {
                            (Some(p), Some(t)) => Some((p + t) * inst.tti_ms),
                            _ => None,
                        }
                    };
                    match total_ms {
                        Some(ms) => task.age_ms + ms <= task.threshold_ms,
                        None => false,
                    }
                }
                _ => true,
            };
            [c1, c2, c3, c4, c5, c6, c7, c8]
        })
        .collect()
}

#[test]
fn constraint_checker_agrees_with_a_direct_transcription() {
    report("[1/9] constraint checker vs direct transcription (1000 joints)", || {
        let mut rng = stream(42, "acceptance-constraints");
        for t in 0..1000usize {
            let params = InstanceParams {
                vehicle_count: 1 + t % 3,
                channels_per_pool: 1 + t % 2,
                aged_tasks: t % 2 == 0,
                occupied: t % 5 == 0,
                arrival_probability: 0.8,
            };
            let inst = random_instance(&mut rng, &params);
            let layout = inst.layout();
            let joint: Vec<Decision> =
                (0..params.vehicle_count).map(|_| random_decision(&mut rng, &layout)).collect();
            let reports = check_constraints(&inst, &joint).unwrap();
            let expected = direct_flags(&inst, &joint);
            for (k, (r, e)) in reports.iter().zip(&expected).enumerate() {
                for c in 0..8 {
                    assert_eq!(
                        r.c[c].satisfied,
                        e[c],
                        "trial {t} vehicle {k} c{} disagrees",
                        c + 1
                    );
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 2. cost model hand checks

#[test]
fn cost_model_reproduces_hand_computed_examples() {
    report("[2/9] cost model hand checks (4-TTI offload, 1 J local, U = 6)", || {
        let task = Task {
            id: 0,
            owner: 0,
            task_type: TaskType::Hpa,
            size_bits: 1.0e6,
            density: 20.0,
            output_ratio: 0.0,
            energy_density: 1.25e-26,
            generated_at: 0,
            threshold_ms: 100.0,
            status: TaskStatus::Queued,
        };
        // 1 Mbit at 0.5 Mbit/TTI plus 2e7 cycles at 1e7 cycles/TTI: 2 + 2 TTIs
        let vec_alloc = ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: 1.0,
            target_cpu: 1.0e10,
            uplink_bps: 0.5e9,
            downlink_bps: 0.0,
        };
        let p = completion_time(&task, &vec_alloc, 1.0).unwrap();
        assert_eq!((p.upload, p.process, p.download), (2, 2, 0));
        assert_eq!(p.total(), 4);

        // 1.25e-26 J/cycle^2 * 2e7 cycles * (2e9 Hz)^2 = 1.0 J
        let local_alloc = ComputeAllocation {
            target: ComputeTarget::Local,
            fraction: 1.0,
            target_cpu: 2.0e9,
            uplink_bps: 0.0,
            downlink_bps: 0.0,
        };
        let ca = Task { task_type: TaskType::Ca, ..task };
        let e = offload_energy(&ca, &local_alloc, 0.5, false).unwrap();
        assert!((e - 1.0).abs() <= 1e-12, "local energy {e}");

        // 0.8 * 10 - 0.4 * 5 = 6
        let (u, tr, en) = fleet_utility(&[10.0], &[5.0], &UtilityWeights::default());
        assert!((u - 6.0).abs() <= 1e-12, "utility {u}");
        assert_eq!((tr, en), (10.0, 5.0));
    });
}

// ---------------------------------------------------------------------------
// 3. speed-dependent threshold curve

#[test]
fn hpa_threshold_curve_matches_a_high_precision_evaluation() {
    report("[3/9] speed-delay threshold curve (5 points, strictly decreasing)", || {
        let v_max = 80.0 / 3.6;
        let thr = Thresholds::default();
        let alpha = v_max / 1.96;
        let mut prev = f64::INFINITY;
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let v = frac * v_max;
            let got = delay_threshold(TaskType::Hpa, v, v_max, &thr).unwrap();
            let expected = thr.thr2 * (-(v * v - v_max * v_max) / (2.0 * alpha * alpha)).exp();
            assert!(
                (got - expected).abs() <= 1e-10 * expected.max(1.0),
                "v = {frac} v_max: {got} vs {expected}"
            );
            assert!(got < prev, "not strictly decreasing at v = {frac} v_max");
            prev = got;
        }
        let at_limit = delay_threshold(TaskType::Hpa, v_max, v_max, &thr).unwrap();
        assert_eq!(at_limit, thr.thr2, "threshold at the speed limit");
    });
}

// ---------------------------------------------------------------------------
// 4. gradients against central finite differences

fn flat_grads(g: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for l in 0..g.weights.len() {
        out.extend_from_slice(&g.weights[l]);
        out.extend_from_slice(&g.biases[l]);
    }
    out
}

fn assert_grads_close(analytic: &[f64], fd: &[f64], what: &str) {
    assert_eq!(analytic.len(), fd.len());
    for (i, (a, f)) in analytic.iter().zip(fd).enumerate() {
        let denom = a.abs().max(f.abs()).max(1e-6);
        assert!(
            (a - f).abs() <= 1e-4 * denom,
            "{what} param {i}: analytic {a} vs finite difference {f}"
        );
    }
}

#[test]
fn gradients_match_central_finite_differences() {
    report("[4/9] analytic gradients vs finite differences (100 nets)", || {
        let h = 1e-5;
        let gamma = 0.95;
        let mut rng = stream(9, "acceptance-gradients");
        let mat = |rows: usize, cols: usize, rng: &mut ChaCha12Rng| -> Vec<Vec<f64>> {
            (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        };
        for i in 0..100u64 {
            let n_agents = 1 + (i as usize) % 3;
            let state_dim = 2 + (i as usize) % 3;
            let action_dim = 2 + (i as usize) % 2;
            let cfg = LearnConfig {
                critic_hidden: vec![4],
                actor_hidden: vec![3],
                ..LearnConfig::default()
            };
            let mut net = Maddpg::new(state_dim, action_dim, n_agents, cfg, 1000 + i);
            let owned: Vec<Transition> = (0..3)
                .map(|_| Transition {
                    states: mat(n_agents, state_dim, &mut rng),
                    actions: mat(n_agents, action_dim, &mut rng),
                    rewards: (0..n_agents).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    next_states: mat(n_agents, state_dim, &mut rng),
                    done: false,
                })
                .collect();
            let batch: Vec<&Transition> = owned.iter().collect();
            for k in 0..n_agents {
                let (_, g) = critic_gradients(&net.agents, k, &batch, gamma).unwrap();
                let analytic = flat_grads(&g);
                let base = net.agents[k].critic.flatten();
                let mut fd = Vec::with_capacity(base.len());
                for j in 0..base.len() {
                    let mut p = base.clone();
                    p[j] = base[j] + h;
                    net.agents[k].critic.load_flat(&p).unwrap();
                    let (lp, _) = critic_gradients(&net.agents, k, &batch, gamma).unwrap();
                    p[j] = base[j] - h;
                    net.agents[k].critic.load_flat(&p).unwrap();
                    let (lm, _) = critic_gradients(&net.agents, k, &batch, gamma).unwrap();
                    fd.push((lp - lm) / (2.0 * h));
                }
                net.agents[k].critic.load_flat(&base).unwrap();
                assert_grads_close(&analytic, &fd, &format!("net {i} critic {k}"));

                let (_, g) = actor_gradients(&net.agents, k, &batch).unwrap();
                let analytic = flat_grads(&g);
                let base = net.agents[k].actor.flatten();
                let mut fd = Vec::with_capacity(base.len());
                for j in 0..base.len() {
                    let mut p = base.clone();
                    p[j] = base[j] + h;
                    net.agents[k].actor.load_flat(&p).unwrap();
                    let (op, _) = actor_gradients(&net.agents, k, &batch).unwrap();
                    p[j] = base[j] - h;
                    net.agents[k].actor.load_flat(&p).unwrap();
                    let (om, _) = actor_gradients(&net.agents, k, &batch).unwrap();
                    fd.push((op - om) / (2.0 * h));
                }
                net.agents[k].actor.load_flat(&base).unwrap();
                assert_grads_close(&analytic, &fd, &format!("net {i} actor {k}"));
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 5. heuristics against the exhaustive-search fixtures

/// Best utility among the quantized executing options of a lone vehicle,
/// enumerated from scratch; 0 when nothing feasible remains (the hold
/// fallback commits no resources).
fn best_lone_executing_utility(inst: &MicroInstance) -> f64 {
    let pools = inst.pool_sizes();
    let blank = || {
        let mut d = Decision::hold(1, pools);
        d.hold = false;
        d
    };
    let mut candidates: Vec<Decision> = Vec::new();
    if let Some(task) = &inst.vehicles[0].task {
        for b in [0.5, 1.0] {
            let mut d = blank();
            d.local = true;
            d.b_local = b;
            candidates.push(d);
        }
        if task.task_type != TaskType::Ca {
            let free: Vec<usize> = inst.pool_free[0]
                .iter()
                .enumerate()
                .filter(|(_, f)| **f)
                .map(|(i, _)| i)
                .collect();
            let free_down: Vec<usize> = inst.pool_free[1]
                .iter()
                .enumerate()
                .filter(|(_, f)| **f)
                .map(|(i, _)| i)
                .collect();
            let has_out = task.output_ratio * task.size_bits > 0.0;
            for b in [0.5, 1.0] {
                for up_mask in 1u32..1 << free.len() {
                    let down_masks: Vec<u32> = if has_out {
                        (1u32..1 << free_down.len()).collect()
                    } else {
                        vec![0]
                    };
                    for down_mask in down_masks {
                        let mut d = blank();
                        d.vec_server = true;
                        d.b_vec = b;
                        for (bit, ch) in free.iter().enumerate() {
                            d.z_v2i_up[*ch] = up_mask >> bit & 1 == 1;
                        }
                        for (bit, ch) in free_down.iter().enumerate() {
                            d.z_v2i_down[*ch] = down_mask >> bit & 1 == 1;
                        }
                        candidates.push(d);
                    }
                }
            }
            // a lone vehicle has no V2V targets
            assert!(inst.vehicles[0].neighbors.is_empty());
        }
    }
    let mut best: Option<f64> = None;
    for d in candidates {
        let eval = evaluate_joint(inst, std::slice::from_ref(&d)).unwrap();
        let r = &eval.reports[0];
        if r.feasible() && r.deadline_met() && best.is_none_or(|b| eval.utility > b) {
            best = Some(eval.utility);
        }
    }
    best.unwrap_or(0.0)
}

#[test]
fn heuristics_never_beat_the_exhaustive_search() {
    report("[5/9] heuristic utilities vs exhaustive search (100 fixtures)", || {
        let dir = tempfile::tempdir().unwrap();
        let paths = vecsim::fixtures::make_fixtures(100, 7, dir.path()).unwrap();
        assert_eq!(paths.len(), 100);
        let mut rng = stream(7, "acceptance-fixtures");
        let mut lone = 0usize;
        for path in &paths {
            let fx = vecsim::fixtures::load_fixture(path).unwrap();
            let kk = fx.instance.vehicles.len();
            // the stored optimum must round-trip
            let eval = evaluate_joint(&fx.instance, &fx.decisions).unwrap();
            assert!(
                (eval.utility - fx.utility).abs() <= 1e-12,
                "{path:?}: stored utility does not reproduce"
            );
            for kind in [PolicyKind::Al, PolicyKind::Av, PolicyKind::Rd, PolicyKind::Edg] {
                let joint: Vec<Decision> = (0..kk)
                    .map(|k| baseline_decision(kind, &fx.instance, k, &mut rng))
                    .collect();
                let eval = evaluate_joint(&fx.instance, &joint).unwrap();
                if eval.reports.iter().all(|r| r.feasible() && r.deadline_met()) {
                    assert!(
                        eval.utility <= fx.utility + 1e-9,
                        "{path:?}: {kind:?} beats the exhaustive search"
                    );
                }
            }
            if kk == 1 {
                lone += 1;
                let greedy = baseline_decision(PolicyKind::Edg, &fx.instance, 0, &mut rng);
                let got = evaluate_joint(&fx.instance, &[greedy]).unwrap().utility;
                let want = best_lone_executing_utility(&fx.instance);
                assert!(
                    (got - want).abs() <= 1e-9,
                    "{path:?}: greedy {got} vs restricted search {want}"
                );
            }
        }
        assert!(lone >= 30, "only {lone} single-vehicle fixtures");
    });
}

// ---------------------------------------------------------------------------
// 6 and 7 share trained policies

fn desk_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig { seed, arrival_probability: 0.1, ..ScenarioConfig::default() }
}

/// Small nets and several gradient passes per episode: the configuration has
/// to both learn to execute and finish on one desktop core.
fn desk_schedule() -> LearnConfig {
    LearnConfig {
        critic_hidden: vec![64, 32],
        actor_hidden: vec![32],
        updates_per_episode: 4,
        critic_lr: 1e-3,
        actor_lr: 3e-4,
        noise_end: 0.1,
        ..LearnConfig::default()
    }
}

static TRAINED: OnceLock<Vec<(Maddpg, Vec<EpisodeLog>)>> = OnceLock::new();

fn trained() -> &'static [(Maddpg, Vec<EpisodeLog>)] {
    TRAINED.get_or_init(|| {
        [11, 12, 13]
            .into_iter()
            .map(|seed| {
                let mut env = VecEnv::new(desk_scenario(seed)).unwrap();
                train_maddpg(&mut env, &desk_schedule(), AgentArrangement::PerVehicle).unwrap()
            })
            .collect()
    })
}

fn fleet_mean(log: &EpisodeLog) -> f64 {
    log.mean_reward.iter().sum::<f64>() / log.mean_reward.len() as f64
}

#[test]
fn training_improves_and_beats_the_random_policy() {
    report("[6/9] training raises rewards and beats random offloading", || {
        for (seed, (_, logs)) in [11, 12, 13].into_iter().zip(trained()) {
            let leading: f64 = logs[..100].iter().map(fleet_mean).sum::<f64>() / 100.0;
            let trailing: f64 =
                logs[logs.len() - 100..].iter().map(fleet_mean).sum::<f64>() / 100.0;
            assert!(
                trailing > leading,
                "seed {seed}: trailing {trailing:.4} not above leading {leading:.4}"
            );
        }
        let learner = &trained()[0].0;
        let cfg = desk_scenario(0);
        let mut wins = 0;
        for seed in 100..110 {
            let ours =
                evaluate_learner(learner, AgentArrangement::PerVehicle, &cfg, 5, seed).unwrap();
            let random = evaluate_baseline(PolicyKind::Rd, &cfg, 5, seed).unwrap();
            if ours.mean_utility > random.mean_utility {
                wins += 1;
            }
        }
        assert!(wins >= 8, "trained policy wins only {wins}/10 paired seeds");
    });
}

/// Nonincreasing, allowing one adjacent pair to sit inside `eps` of each
/// other; every other pair must strictly decrease.
fn decreasing_with_one_tie(xs: &[f64], eps: f64) -> bool {
    let mut ties = 0;
    for w in xs.windows(2) {
        if w[1] > w[0] + eps {
            return false;
        }
        if (w[1] - w[0]).abs() <= eps {
            ties += 1;
        }
    }
    ties <= 1
}

const CAPACITIES: [f64; 4] = [8.0e9, 10.0e9, 12.0e9, 14.0e9];

fn mean_baseline_delay(kind: PolicyKind, cfg: &ScenarioConfig) -> f64 {
    let mut sum = 0.0;
    for seed in 200..210 {
        sum += evaluate_baseline(kind, cfg, 10, seed).unwrap().mean_delay_ms;
    }
    sum / 10.0
}

#[test]
fn delay_falls_with_server_capacity() {
    report("[7/9] completion delay falls with VEC capacity (greedy, trained, not all-local)", || {
        let mut greedy = Vec::new();
        let mut all_local = Vec::new();
        let mut learned = Vec::new();
        let learner = &trained()[0].0;
        for cap in CAPACITIES {
            let cfg = ScenarioConfig { vec_cpu: cap, ..desk_scenario(0) };
            greedy.push(mean_baseline_delay(PolicyKind::Edg, &cfg));
            all_local.push(mean_baseline_delay(PolicyKind::Al, &cfg));
            let mut sum = 0.0;
            for seed in 200..205 {
                sum += evaluate_learner(learner, AgentArrangement::PerVehicle, &cfg, 10, seed)
                    .unwrap()
                    .mean_delay_ms;
            }
            learned.push(sum / 5.0);
        }
        assert!(
            decreasing_with_one_tie(&greedy, 0.05),
            "greedy delays not falling: {greedy:?}"
        );
        assert!(
            decreasing_with_one_tie(&learned, 0.05),
            "learned delays not falling: {learned:?}"
        );
        assert!(
            all_local.windows(2).all(|w| w[0] == w[1]),
            "all-local delays not constant: {all_local:?}"
        );
    });
}

// ---------------------------------------------------------------------------
// 8. load trend

#[test]
fn delay_rises_and_utility_falls_with_fleet_size() {
    report("[8/9] delay rises and utility falls with fleet size (greedy)", || {
        let mut delays = Vec::new();
        let mut utilities = Vec::new();
        for k in [3usize, 5, 7] {
            let cfg = ScenarioConfig { vehicle_count: k, ..desk_scenario(0) };
            let mut d = 0.0;
            let mut u = 0.0;
            for seed in 200..210 {
                let m = evaluate_baseline(PolicyKind::Edg, &cfg, 10, seed).unwrap();
                d += m.mean_delay_ms;
                u += m.mean_utility;
            }
            delays.push(d / 10.0);
            utilities.push(u / 10.0);
        }
        assert!(
            delays.windows(2).all(|w| w[1] >= w[0]),
            "delays not nondecreasing: {delays:?}"
        );
        assert!(
            utilities.windows(2).all(|w| w[1] <= w[0]),
            "utilities not nonincreasing: {utilities:?}"
        );
    });
}

// ---------------------------------------------------------------------------
// 9. bitwise reproducibility

#[test]
fn repeated_runs_produce_identical_metrics() {
    report("[9/9] repeated runs are byte-identical", || {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("desk.json");
        std::fs::write(&cfg_path, r#"{"episode_length": 20, "arrival_probability": 0.2}"#)
            .unwrap();
        for out in ["a", "b"] {
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_vecsim"))
                .args([
                    "run",
                    "--config",
                    cfg_path.to_str().unwrap(),
                    "--policy",
                    "EDG",
                    "--seeds",
                    "1..4",
                    "--out",
                    out,
                    "--episodes",
                    "3",
                ])
                .current_dir(dir.path())
                .status()
                .unwrap();
            assert!(status.success());
        }
        let a = std::fs::read(dir.path().join("a/metrics.csv")).unwrap();
        let b = std::fs::read(dir.path().join("b/metrics.csv")).unwrap();
        assert_eq!(a, b, "metrics.csv differs between identical runs");
    });
}
