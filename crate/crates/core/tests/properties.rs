use proptest::prelude::*;

use symforest::envs::{ObjectSet, SceneObject};
use symforest::expr::{parse_with_features, random_tree, render, simplify, softmax, ExprTree, Forest, ActionMode, TreeGenConfig};
use symforest::objects::featurize;
use symforest::pipeline::{RolloutBuffer, Transition};
use symforest::expr::Action;
use symforest::rng;
use symforest::tinynn::Adam;

fn tree(seed: u64, nf: usize) -> ExprTree {
    let cfg = TreeGenConfig {
        num_features: nf,
        max_depth: 6,
        ..TreeGenConfig::with_features(nf)
    };
    random_tree(&cfg, &mut rng::stream(seed, &[0x7E57]))
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_then_parse_is_identity(seed in any::<u64>()) {
        let t = tree(seed, 3);
        let back = parse_with_features(&render(&t), 3).unwrap();
        prop_assert_eq!(render(&back), render(&t));
    }

    #[test]
    fn evaluation_is_total(seed in any::<u64>(), x in point()) {
        prop_assert!(tree(seed, 3).eval(&x).unwrap().is_finite());
    }

    #[test]
    fn simplify_preserves_value(seed in any::<u64>(), x in point()) {
        let t = tree(seed, 3);
        let s = simplify(&t);
        let (a, b) = (t.eval(&x).unwrap(), s.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
        prop_assert!(s.node_count() <= t.node_count());
    }

    #[test]
    fn constant_gradient_matches_central_difference(seed in any::<u64>(), x in point()) {
        let t = tree(seed, 3);
        let c = t.constants();
        let g = t.grad_constants(&x, 1.0).unwrap();
        prop_assert_eq!(g.len(), c.len());
        let h = 1e-5;
        for k in 0..c.len() {
            let at = |d: f64| {
                let mut v = c.clone();
                v[k] += d;
                t.with_constants(&v).eval(&x).unwrap()
            };
            let (hi, lo, mid) = (at(h), at(-h), at(0.0));
            let fd = (hi - lo) / (2.0 * h);
            // skip kinks and saturation where the derivative is not defined
            let one_sided = ((hi - mid) / h, (mid - lo) / h);
            let smooth = (one_sided.0 - one_sided.1).abs() <= 1e-3 * fd.abs().max(1.0);
            if smooth && fd.is_finite() && fd.abs() < 1e6 {
                prop_assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1.0), "const {}: fd {} analytic {}", k, fd, g[k]);
            }
        }
    }

    #[test]
    fn softmax_normalizes_and_ignores_shifts(v in prop::collection::vec(-50.0f64..50.0, 1..8), shift in -100.0f64..100.0) {
        let p = softmax(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn forest_json_round_trip(seed in any::<u64>()) {
        let f = Forest::new(vec![tree(seed, 4), tree(seed ^ 1, 4)], ActionMode::Discrete).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        f.save_json("objectpong", &path).unwrap();
        let (env, back) = Forest::load_json(&path).unwrap();
        prop_assert_eq!(env, "objectpong");
        prop_assert_eq!(back, f);
    }

    #[test]
    fn features_fill_slots_in_order(
        objs in prop::collection::vec((0u32..3, 0.0f64..64.0, 0.0f64..64.0, 0.0f64..1.0), 0..24),
        m_bar in 1usize..20,
    ) {
        let set = ObjectSet::new(64, 64, objs.iter().map(|&(c, x, y, conf)| SceneObject::new(c, x, y, 2.0, 2.0, conf)).collect());
        let f = featurize(&set, m_bar);
        prop_assert_eq!(f.values.len(), 4 * m_bar);
        prop_assert_eq!(f.slot_classes.len(), objs.len().min(m_bar));
        for k in 0..m_bar {
            let pos = &f.values[4 * k..4 * k + 2];
            prop_assert!(pos.iter().all(|v| (0.0..=1.0).contains(v)));
            if k >= objs.len() {
                prop_assert!(f.values[4 * k..4 * k + 4].iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn advantages_match_direct_sum(
        rewards in prop::collection::vec(-2.0f64..2.0, 1..12),
        values in prop::collection::vec(-2.0f64..2.0, 13),
        terminal in any::<bool>(),
        gamma in 0.5f64..1.0,
    ) {
        let n = rewards.len();
        let mut buf = RolloutBuffer::new();
        for t in 0..n {
            let last = t + 1 == n;
            buf.push(Transition {
                state: vec![],
                action: Action::Discrete(0),
                reward: rewards[t],
                next_state: vec![],
                done: last,
                terminal: last && terminal,
                logprob_old: 0.0,
                value: values[t],
                next_value: if last { values[n] } else { 0.0 },
                advantage: 0.0,
                return_target: 0.0,
            });
        }
        buf.compute_advantages(gamma).unwrap();
        let v_end = if terminal { 0.0 } else { values[n] };
        for t in 0..n {
            let mut a = -values[t];
            let mut disc = 1.0;
            for r in &rewards[t..] {
                a += disc * r;
                disc *= gamma;
            }
            a += disc * v_end;
            let got = buf.transitions[t].advantage;
            prop_assert!((got - a).abs() <= 1e-12 * a.abs().max(1.0));
            prop_assert_eq!(buf.transitions[t].return_target, got + values[t]);
        }
    }

    #[test]
    fn adam_zero_gradient_and_zero_rate_are_no_ops(p in prop::collection::vec(-5.0f64..5.0, 1..10), g in prop::collection::vec(-5.0f64..5.0, 10)) {
        let mut params = p.clone();
        Adam::new(p.len(), 0.01).step(&mut params, &vec![0.0; p.len()]).unwrap();
        prop_assert_eq!(&params, &p);
        Adam::new(p.len(), 0.0).step(&mut params, &g[..p.len()]).unwrap();
        prop_assert_eq!(&params, &p);
    }
}
