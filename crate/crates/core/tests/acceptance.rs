//! Acceptance report: one PASS/FAIL line per criterion. Always exits 0; the
//! lines are the result. Set `ACCEPTANCE_ONLY=1,2,9` to run a subset.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use symforest::cli::ablate::{self, median, sgd_comparison, DROP_PROBS};
use symforest::cli::{stages, EvalTarget, RunConfig};
use symforest::envs::{self, ObjectPong, Pendulum, Skin};
use symforest::expr::{match_var_over_const, random_tree, render, Action, ActionMode, Forest, TreeGenConfig};
use symforest::gp::GpConfig;
use symforest::objects::ExtractorConfig;
use symforest::pipeline::{
    action_trace, clipped_surrogate, evaluate_policy, neural_guided_finetune, ppo_objective, train_teacher,
    FinetuneConfig, MixedPolicy, PpoConfig, RolloutBuffer, Transition,
};
use symforest::rng;
use symforest::tinynn::{log_prob, sample_action, Checkpoint, MlpPolicy, SampleGrad};

type Check = Result<(bool, String), String>;

struct Ctx {
    root: PathBuf,
    /// Stage III results of the classic-control runs, for the elitism check.
    elitism: Vec<(String, f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

// criterion 1

/// Relative error, measured absolutely below magnitude 1e-3.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn gradient_fidelity(_: &mut Ctx) -> Check {
    let mut r = rng::stream(101, &[]);
    let cfg = TreeGenConfig::with_features(3);
    let h = 1e-5;
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let tree = random_tree(&cfg, &mut r);
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let c = tree.constants();
        let g = tree.grad_constants(&x, 1.0).map_err(|e| e.to_string())?;
        for k in 0..c.len() {
            let at = |d: f64| {
                let mut v = c.clone();
                v[k] += d;
                tree.with_constants(&v).eval_unchecked(&x)
            };
            let (hi, mid, lo) = (at(h), at(0.0), at(-h));
            let fd = (hi - lo) / (2.0 * h);
            let (right, left) = ((hi - mid) / h, (mid - lo) / h);
            // kinks, steps and saturated regions have no derivative to compare
            if !fd.is_finite() || (right - left).abs() > 1e-3 * fd.abs().max(1.0) || fd.abs() > 1e6 {
                skipped += 1;
                continue;
            }
            checked += 1;
            worst = worst.max(rel_err(fd, g[k]));
        }
    }

    let mut p = MlpPolicy::new(4, 3, &[16, 16], ActionMode::Continuous, false, &mut r);
    let scaled: Vec<f64> = p.params().iter().map(|v| v * 3.0).collect();
    p.set_params(&scaled).map_err(|e| e.to_string())?;
    let states: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let loss = |_: usize, l: &[f64], v: f64, s: &[f64]| SampleGrad {
        loss: l.iter().map(|x| x.sin()).sum::<f64>() + v * v + s.iter().map(|x| x * x).sum::<f64>(),
        d_logits: l.iter().map(|x| x.cos()).collect(),
        d_value: 2.0 * v,
        d_log_std: s.iter().map(|x| 2.0 * x).collect(),
    };
    let (_, g) = p.backward(&states, loss).map_err(|e| e.to_string())?;
    let base = p.params();
    let mut nn_worst = 0.0f64;
    for k in 0..base.len() {
        let at = |d: f64| {
            let mut q = p.clone();
            let mut v = base.clone();
            v[k] += d;
            q.set_params(&v).unwrap();
            q.backward(&states, loss).unwrap().0
        };
        nn_worst = nn_worst.max(rel_err((at(h) - at(-h)) / (2.0 * h), g[k]));
    }
    let pass = worst <= 1e-4 && nn_worst <= 1e-4 && checked > 0;
    Ok((
        pass,
        format!(
            "100 trees: {checked} constants checked ({skipped} at kinks skipped), max rel err {worst:.2e}; network: {} params, max rel err {nn_worst:.2e}",
            base.len()
        ),
    ))
}

// criterion 2

fn advantage_oracle(rewards: &[f64], values: &[f64], v_end: f64, gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut a = -values[t];
            for (k, r) in rewards.iter().enumerate().skip(t) {
                a += gamma.powi((k - t) as i32) * r;
            }
            a + gamma.powi((n - t) as i32) * v_end
        })
        .collect()
}

fn transition(reward: f64, value: f64) -> Transition {
    Transition {
        state: vec![],
        action: Action::Discrete(0),
        reward,
        next_state: vec![],
        done: false,
        terminal: false,
        logprob_old: 0.0,
        value,
        next_value: 0.0,
        advantage: 0.0,
        return_target: 0.0,
    }
}

fn ppo_oracle(_: &mut Ctx) -> Check {
    let mut r = rng::stream(202, &[]);
    let mut mismatches = 0;
    for ep in 0..50 {
        let terminal = ep % 2 == 0;
        let rewards: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..11).map(|_| r.random_range(-2.0..2.0)).collect();
        let mut buf = RolloutBuffer::new();
        for t in 0..10 {
            let mut tr = transition(rewards[t], values[t]);
            if t == 9 {
                tr.done = true;
                tr.terminal = terminal;
                tr.next_value = values[10];
            }
            buf.push(tr);
        }
        buf.compute_advantages(0.9).map_err(|e| e.to_string())?;
        let want = advantage_oracle(&rewards, &values, if terminal { 0.0 } else { values[10] }, 0.9);
        mismatches += buf
            .transitions
            .iter()
            .zip(&want)
            .filter(|(t, w)| t.advantage.to_bits() != w.to_bits())
            .count();
    }

    let c1 = clipped_surrogate(1.3, 1.0, 0.2);
    let c2 = clipped_surrogate(0.5, -1.0, 0.2);
    let teacher = MlpPolicy::new(3, 2, &[8], ActionMode::Discrete, false, &mut r);
    let advs = [0.5, -1.25, 2.0, 0.75];
    let batch: Vec<Transition> = advs
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let s = vec![i as f64 * 0.3, -0.2, 0.1];
            let act = Action::Discrete(i % 2);
            let mut t = transition(0.0, 0.0);
            t.logprob_old = log_prob(&teacher.logits(&s).unwrap(), &[], &act);
            t.state = s;
            t.action = act;
            t.advantage = a;
            t
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let cfg = PpoConfig {
        normalize_advantages: false,
        ..Default::default()
    };
    let s = ppo_objective(&refs, &teacher, &cfg).map_err(|e| e.to_string())?.surrogate;
    let mean_a = advs.iter().sum::<f64>() / advs.len() as f64;
    let pass = mismatches == 0 && c1 == 1.2 && c2 == -0.8 && s == mean_a;
    Ok((
        pass,
        format!("500 advantages, {mismatches} bit mismatches; clip cases {c1}, {c2}; r=1 objective {s} vs mean A {mean_a}"),
    ))
}

// criteria 3 and 4

fn run_pipeline(cfg: &RunConfig) -> Result<(f64, Vec<f64>, f64, f64), String> {
    let e = |x: symforest::Error| x.to_string();
    cfg.validate().map_err(e)?;
    stages::stage_train_teacher(cfg).map_err(e)?;
    stages::stage_distill(cfg).map_err(e)?;
    let (_, ft) = stages::stage_finetune(cfg).map_err(e)?;
    let rows = stages::evaluate_artifacts(cfg, EvalTarget::Finetuned).map_err(e)?;
    let ev = &rows[0].1;
    Ok((ev.mean, ev.rewards.clone(), ft.forest_reward, ft.warm_start_reward))
}

fn classic_config(ctx: &Ctx, env: &str, seed: u64) -> RunConfig {
    RunConfig {
        env: env.into(),
        seed,
        out: ctx.root.join(format!("{env}-seed{seed}")),
        ..Default::default()
    }
}

fn full_pipeline(ctx: &mut Ctx) -> Check {
    let mut pass = true;
    let mut detail = Vec::new();
    for env in ["mountaincar-cont", "pendulum", "cartpole-cont"] {
        let started = Instant::now();
        let mut means = Vec::new();
        let mut ok = true;
        for seed in 0..3 {
            let cfg = classic_config(ctx, env, seed);
            let (mean, rewards, fit, warm) = run_pipeline(&cfg)?;
            ctx.elitism.push((format!("{env}/{seed}"), fit, warm));
            ok &= match env {
                "mountaincar-cont" => mean >= 90.0,
                "pendulum" => mean >= -200.0,
                _ => rewards.iter().all(|r| *r >= 1000.0),
            };
            means.push(fmt(mean));
        }
        let secs = started.elapsed().as_secs_f64();
        ok &= secs <= 1800.0;
        pass &= ok;
        detail.push(format!("{env} [{}] {:.0}s {}", means.join(", "), secs, if ok { "ok" } else { "short" }));
    }
    Ok((pass, detail.join("; ")))
}

fn distilled_form(ctx: &mut Ctx) -> Check {
    let mut r = rng::stream(404, &[]);
    let probes: Vec<Vec<f64>> = (0..1000)
        .map(|_| vec![r.random_range(-1.2..0.6), r.random_range(-0.07..0.07)])
        .collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for seed in 0..3 {
        let cfg = classic_config(ctx, "mountaincar-cont", seed);
        if !cfg.out.join(stages::DISTILLED_FILE).exists() {
            run_pipeline(&cfg)?;
        }
        let forest = stages::load_forest(&cfg, stages::DISTILLED_FILE).map_err(|e| e.to_string())?;
        let tree = &forest.trees[0];
        let ok = match match_var_over_const(tree, &probes) {
            Some(m) => {
                let ok = m.var == 1 && (0.155..=0.195).contains(&m.divisor) && m.max_abs_diff < 1e-3;
                detail.push(format!(
                    "seed {seed}: {} ~ x{}/{:.4} (max diff {:.1e})",
                    render(tree),
                    m.var,
                    m.divisor,
                    m.max_abs_diff
                ));
                ok
            }
            None => {
                detail.push(format!("seed {seed}: {} has no variable gain", render(tree)));
                false
            }
        };
        pass &= ok;
    }
    Ok((pass, detail.join("; ")))
}

// criterion 5

fn sgd_ablation(_: &mut Ctx) -> Check {
    let runs = sgd_comparison(&GpConfig::default(), 1, 0, 10).map_err(|e| e.to_string())?;
    let med = |k: usize| median(&runs[k].generations.iter().map(|g| *g as f64).collect::<Vec<_>>());
    let (vanilla, sgd) = (med(0), med(1));
    Ok((
        sgd < vanilla,
        format!(
            "median generations to MSE<1e-6: gp+sgd {sgd}, vanilla {vanilla} (per seed {:?} vs {:?})",
            runs[1].generations, runs[0].generations
        ),
    ))
}

// criterion 6

fn ng_ablation(ctx: &mut Ctx) -> Check {
    let started = Instant::now();
    let mut with = Vec::new();
    let mut without = Vec::new();
    let mut notes = Vec::new();
    for k in 0..5u64 {
        let cfg = RunConfig {
            env: "objectpong".into(),
            seed: rng::derive(0, &[0x4E, k]),
            out: ctx.root.join(format!("ng/seed{k}")),
            ..Default::default()
        };
        let t = ablate::ng_trial(&cfg).map_err(|e| e.to_string())?;
        with.push(t.with_ng.0 as f64);
        without.push(t.without_ng.0 as f64);
        notes.push(format!(
            "teacher {:.1} warm {:.1} ng {}/{:.1} plain {}/{:.1}",
            t.teacher_reward, t.warm_start_reward, t.with_ng.0, t.with_ng.1, t.without_ng.0, t.without_ng.1
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    let (m_ng, m_plain) = (median(&with), median(&without));
    Ok((
        m_ng < m_plain && secs <= 3600.0,
        format!("median generations NG {m_ng} vs no-NG {m_plain}, {secs:.0}s [{}]", notes.join("; ")),
    ))
}

// criteria 7 and 8

fn pong_config(ctx: &Ctx) -> RunConfig {
    RunConfig {
        env: "objectpong".into(),
        seed: 0,
        out: ctx.root.join("pong"),
        ..Default::default()
    }
}

fn pong_forest(ctx: &Ctx) -> Result<(RunConfig, Forest), String> {
    let cfg = pong_config(ctx);
    if !cfg.out.join(stages::FINETUNED_FILE).exists() {
        run_pipeline(&cfg)?;
    }
    let f = stages::load_forest(&cfg, stages::FINETUNED_FILE).map_err(|e| e.to_string())?;
    Ok((cfg, f))
}

fn drop_robustness(ctx: &mut Ctx) -> Check {
    let (cfg, _) = pong_forest(ctx)?;
    let table = ablate::run_preset(&cfg, "drop-robustness", 1).map_err(|e| e.to_string())?;
    let rewards = table.column("mean_reward");
    let ball = &rewards[..DROP_PROBS.len()];
    let monotone = ball.windows(2).all(|w| w[1] <= w[0] + 1.0);
    let (d0, d1) = (rewards[DROP_PROBS.len()], rewards[DROP_PROBS.len() + 1]);
    let change = if d0 != 0.0 { (d1 - d0).abs() / d0.abs() } else { (d1 - d0).abs() };
    Ok((
        monotone && change <= 0.05,
        format!(
            "ball drop {:?} -> rewards [{}]; decoration p=1 changes reward by {:.1}%",
            DROP_PROBS,
            ball.iter().map(|r| fmt(*r)).collect::<Vec<_>>().join(", "),
            change * 100.0
        ),
    ))
}

fn skin_transfer(ctx: &mut Ctx) -> Check {
    let (cfg, _) = pong_forest(ctx)?;
    let table = ablate::run_preset(&cfg, "transfer-skin", 1).map_err(|e| e.to_string())?;
    let r = table.column("mean_reward");
    let retention = r[1] / r[0];
    Ok((
        r[0] > 0.0 && retention >= 0.8,
        format!("objectpong {} -> objectpong-skin2 {} (retention {:.1}%)", fmt(r[0]), fmt(r[1]), retention * 100.0),
    ))
}

// criterion 9

fn same_distillation(dir: &Path, workers: usize) -> Result<String, String> {
    let cfg = RunConfig {
        env: "cartpole-cont".into(),
        seed: 11,
        out: dir.to_path_buf(),
        workers,
        ppo: PpoConfig {
            total_steps: 8192,
            ..Default::default()
        },
        gp: GpConfig {
            generations: 40,
            ..Default::default()
        },
        ..Default::default()
    };
    let e = |x: symforest::Error| x.to_string();
    cfg.validate().map_err(e)?;
    stages::stage_train_teacher(&cfg).map_err(e)?;
    stages::stage_distill(&cfg).map_err(e)?;
    let f = stages::load_forest(&cfg, stages::DISTILLED_FILE).map_err(e)?;
    let data = std::fs::read_to_string(cfg.out.join(stages::DATASET_FILE)).map_err(|x| x.to_string())?;
    Ok(format!("{}|{}", f.trees.iter().map(render).collect::<Vec<_>>().join(";"), data))
}

fn determinism(ctx: &mut Ctx) -> Check {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    let a = same_distillation(&ctx.root.join("det/a"), 1)?;
    let b = same_distillation(&ctx.root.join("det/b"), 1)?;
    let c = same_distillation(&ctx.root.join("det/c"), 3)?;
    check(a == b, "distillation repeat");
    check(a == c, "distillation with 3 workers");

    let tiny = PpoConfig {
        rollout_len: 512,
        total_steps: 1024,
        eval_interval: 1,
        eval_episodes: 2,
        ..Default::default()
    };
    let ex = ExtractorConfig::default();
    let t1 = train_teacher("pendulum", &tiny, &ex, 3).map_err(|e| e.to_string())?;
    let t2 = train_teacher("pendulum", &tiny, &ex, 3).map_err(|e| e.to_string())?;
    check(t1.curve == t2.curve && t1.policy == t2.policy, "teacher training repeat");

    let path = ctx.root.join("det/ck.json");
    let ck = Checkpoint::new("pendulum", t1.policy.clone(), Some(t1.optimizer.clone()));
    ck.save(&path).map_err(|e| e.to_string())?;
    let back = Checkpoint::load(&path).map_err(|e| e.to_string())?;
    let bits = |p: &MlpPolicy| p.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    check(bits(&back.policy) == bits(&ck.policy), "checkpoint round trip");

    let mut r = rng::stream(909, &[]);
    let teacher = MlpPolicy::new(64, 3, &[32], ActionMode::Discrete, false, &mut r);
    let mixed = MixedPolicy::new(teacher.clone());
    let same = (0..10u64).all(|s| action_trace(&teacher, "objectpong", &ex, s).ok() == action_trace(&mixed, "objectpong", &ex, s).ok());
    check(same, "empty mixed policy equals teacher");

    let init = Forest::new(
        ["(sub (var 5) (var 1))", "(const 0)", "(sub (var 1) (var 5))"]
            .iter()
            .map(|s| symforest::expr::parse_with_features(s, 64).unwrap())
            .collect(),
        ActionMode::Discrete,
    )
    .map_err(|e| e.to_string())?;
    let ft = FinetuneConfig {
        iterations: 2,
        eval_episodes: 2,
        buffer_len: 200,
        ..Default::default()
    };
    let run = |workers: usize| {
        let gp = GpConfig {
            population_size: 12,
            workers,
            ..Default::default()
        };
        neural_guided_finetune(&teacher, &init, "objectpong", &ex, &gp, &PpoConfig::default(), &ft, 5).unwrap()
    };
    let (w1, w4) = (run(1), run(4));
    check(w1.forest == w4.forest && w1.history.len() == w4.history.len(), "stage III with 4 workers");
    check(w1.forest_reward >= w1.warm_start_reward, "stage III elitism");
    for (name, fit, warm) in &ctx.elitism {
        check(fit >= warm, &format!("stage III elitism on {name}"));
    }

    let mut tracker_hits = 0;
    for seed in 0..100 {
        let mut env = ObjectPong::new(Skin::Base);
        envs::Env::reset(&mut env, seed);
        loop {
            let a = Action::Discrete(env.tracker_action());
            if envs::Env::step(&mut env, &a).map_err(|e| e.to_string())?.done {
                break;
            }
        }
        tracker_hits += usize::from(env.misses() == 0 && env.hits() > 0);
    }
    check(tracker_hits == 100, "tracker hit rate");

    let mut p = Pendulum::new();
    envs::Env::reset(&mut p, 0);
    p.set_state(0.0, 0.0);
    let mut upright = 0.0f64;
    for _ in 0..200 {
        let s = envs::Env::step(&mut p, &Action::Continuous(vec![0.0])).map_err(|e| e.to_string())?;
        upright = upright.min(s.reward);
        if s.done {
            break;
        }
    }
    check(upright > -1e-9, "pendulum upright rest");

    let probe = Forest::new(vec![symforest::expr::parse_with_features("(mul (const 10) (var 1))", 2).unwrap()], ActionMode::Continuous)
        .map_err(|e| e.to_string())?;
    let mc = evaluate_policy(&probe, "mountaincar-cont", &ex, 10, 1, true).map_err(|e| e.to_string())?;
    check(mc.rewards.iter().all(|r| *r <= 100.0), "mountaincar reward bound");

    let logits = [0.3, -1.2, 2.0];
    let mut counts = [0usize; 3];
    let mut sr = rng::stream(77, &[]);
    for _ in 0..100_000 {
        if let Ok(Action::Discrete(a)) = sample_action(&logits, &[], ActionMode::Discrete, false, &mut sr) {
            counts[a] += 1;
        }
    }
    let probs = symforest::expr::softmax(&logits);
    check(
        counts.iter().zip(&probs).all(|(c, p)| (*c as f64 / 1e5 - p).abs() <= 0.01),
        "softmax sampling frequencies",
    );

    let secs = started.elapsed().as_secs_f64();
    check(secs <= 300.0, "time budget");
    let total = 13 + ctx.elitism.len();
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            format!("{total} checks passed in {secs:.0}s")
        } else {
            format!("failed: {} ({secs:.0}s)", failures.join(", "))
        },
    ))
}

type Criterion = (u32, &'static str, fn(&mut Ctx) -> Check, Option<f64>);

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let keep = std::env::var("ACCEPTANCE_KEEP").is_ok();
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = if keep { std::env::temp_dir().join("symforest-acceptance") } else { tmp.path().to_path_buf() };
    let mut ctx = Ctx {
        root,
        elitism: Vec::new(),
    };
    let criteria: [Criterion; 9] = [
        (1, "gradient fidelity", gradient_fidelity, Some(10.0)),
        (2, "advantage and clip oracle", ppo_oracle, None),
        (3, "full pipeline rewards", full_pipeline, None),
        (4, "distilled MountainCar form", distilled_form, None),
        (5, "SGD strategy speeds up regression", sgd_ablation, None),
        (6, "neural guidance speeds up fine-tuning", ng_ablation, None),
        (7, "drop robustness", drop_robustness, None),
        (8, "skin transfer", skin_transfer, None),
        (9, "determinism and invariants", determinism, None),
    ];
    println!("acceptance report");
    for (id, name, f, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let started = Instant::now();
        let (mut pass, detail) = match f(&mut ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = started.elapsed().as_secs_f64();
        if budget.is_some_and(|b| secs > b) {
            pass = false;
        }
        println!("{} criterion {id} ({name}, {secs:.1}s): {detail}", if pass { "PASS" } else { "FAIL" });
    }
}
