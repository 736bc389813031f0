use std::path::Path;
use std::time::Instant;

use super::config::{FinetuneConfig, PpoConfig};
use super::policy::{run_episode, Observer, Policy};
use super::rollout::{clipped_surrogate, clipped_surrogate_grad, ratio, RolloutBuffer, Transition};
use crate::envs;
use crate::error::{Error, Result};
use crate::expr::{Action, ActionMode, ExprTree, Forest};
use crate::gp::{
    best_index, evaluate, evolve_generation, Candidate, Fitness, ForestGenome, Genome, GpConfig, Strategy,
    varying_columns, VariationConfig, Workers,
};
use crate::objects::ExtractorConfig;
use crate::rng;
use crate::tinynn::{log_prob, log_prob_grad, sample_action, MlpPolicy};

/// Teacher with borrowed symbolic overrides; `None` slots use the teacher.
struct SlotView<'a> {
    teacher: &'a MlpPolicy,
    slots: Vec<Option<&'a ExprTree>>,
}

impl Policy for SlotView<'_> {
    fn action_mode(&self) -> ActionMode {
        self.teacher.action_mode
    }

    fn num_actions(&self) -> usize {
        self.slots.len()
    }

    fn num_features(&self) -> usize {
        self.teacher.state_dim()
    }

    fn outputs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut out = if self.slots.iter().all(Option::is_some) {
            vec![0.0; self.slots.len()]
        } else {
            self.teacher.logits(obs)?
        };
        for (o, slot) in out.iter_mut().zip(&self.slots) {
            if let Some(t) = slot {
                *o = t.eval_unchecked(obs);
            }
        }
        Ok(out)
    }

    fn log_std(&self) -> &[f64] {
        &self.teacher.log_std
    }
}

/// Everything a fitness call needs to play its episodes.
struct Arena<'a> {
    teacher: &'a MlpPolicy,
    env_id: &'a str,
    extractor: &'a ExtractorConfig,
    seeds: &'a [u64],
}

impl Arena<'_> {
    fn mean_reward(&self, view: &SlotView, seeds: &[u64]) -> f64 {
        let Ok(mut env) = envs::make(self.env_id) else {
            return f64::MIN;
        };
        let mut observer = Observer::for_env(env.spec(), self.extractor);
        let mut total = 0.0;
        for &s in seeds {
            match run_episode(env.as_mut(), &mut observer, view, s, true) {
                Ok(r) => total += r,
                Err(_) => return f64::MIN,
            }
        }
        total / seeds.len() as f64
    }

    fn forest_reward(&self, trees: &[ExprTree]) -> f64 {
        self.mean_reward(
            &SlotView {
                teacher: self.teacher,
                slots: trees.iter().map(Some).collect(),
            },
            self.seeds,
        )
    }
}

/// Buffer of mixed-policy experience turned into a PPO surrogate over the
/// outputs of selected slots.
struct Surrogate {
    obs: Vec<Vec<f64>>,
    /// Policy outputs at collection time; candidate slots are overwritten.
    base: Vec<Vec<f64>>,
    actions: Vec<Action>,
    logp_old: Vec<f64>,
    adv: Vec<f64>,
    log_std: Vec<f64>,
    clip_eps: f64,
}

impl Surrogate {
    fn collect(arena: &Arena, view: &SlotView, len: usize, ppo: &PpoConfig, seed: u64) -> Result<Self> {
        let mut env = envs::make(arena.env_id)?;
        let mut observer = Observer::for_env(env.spec(), arena.extractor);
        let mut act_rng = rng::stream(seed, &[0x5B0F]);
        let mut buffer = RolloutBuffer::new();
        let mut base = Vec::with_capacity(len);
        let mut episode = 0u64;
        let mut obs = Vec::new();
        let mut fresh = true;
        while buffer.len() < len {
            if fresh {
                let s = rng::derive(seed, &[0x5B0E, episode]);
                episode += 1;
                let state = env.reset(s);
                observer.reset(s);
                obs = observer.observe(env.as_ref(), &state)?;
            }
            let out = view.outputs(&obs)?;
            let action = sample_action(&out, view.log_std(), view.action_mode(), false, &mut act_rng)?;
            let logp = log_prob(&out, view.log_std(), &action);
            let value = arena.teacher.value(&obs)?;
            let r = env.step(&action)?;
            let next_obs = observer.observe(env.as_ref(), &r.next_state)?;
            let terminal = r.done && !r.truncated;
            let next_value = if !terminal && (r.done || buffer.len() + 1 == len) {
                arena.teacher.value(&next_obs)?
            } else {
                0.0
            };
            base.push(out);
            buffer.push(Transition {
                state: std::mem::replace(&mut obs, next_obs),
                action,
                reward: r.reward,
                next_state: Vec::new(),
                done: r.done,
                terminal,
                logprob_old: logp,
                value,
                next_value,
                advantage: 0.0,
                return_target: 0.0,
            });
            fresh = r.done;
        }
        buffer.compute_advantages(ppo.gamma)?;
        let raw: Vec<f64> = buffer.transitions.iter().map(|t| t.advantage).collect();
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let std = (raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        let adv = raw.iter().map(|a| (a - mean) / (std + 1e-8)).collect();
        let (mut o, mut acts, mut lp) = (Vec::new(), Vec::new(), Vec::new());
        for t in buffer.transitions {
            o.push(t.state);
            acts.push(t.action);
            lp.push(t.logprob_old);
        }
        Ok(Surrogate {
            obs: o,
            base,
            actions: acts,
            logp_old: lp,
            adv,
            log_std: view.log_std().to_vec(),
            clip_eps: ppo.clip_eps,
        })
    }

    /// Negated surrogate with slot outputs from `trees`, and the gradient over
    /// the trees' constants concatenated in `trees` order.
    fn loss_grad(&self, trees: &[(usize, &ExprTree)]) -> (f64, Vec<f64>) {
        let n = self.obs.len() as f64;
        let mut grads: Vec<Vec<f64>> = trees.iter().map(|(_, t)| vec![0.0; t.num_constants()]).collect();
        let mut loss = 0.0;
        let mut values = Vec::new();
        for k in 0..self.obs.len() {
            values.clone_from(&self.base[k]);
            for (slot, t) in trees {
                values[*slot] = t.eval_unchecked(&self.obs[k]);
            }
            let lp = log_prob(&values, &self.log_std, &self.actions[k]);
            let r = ratio(lp, self.logp_old[k]);
            loss -= clipped_surrogate(r, self.adv[k], self.clip_eps) / n;
            let d_lp = clipped_surrogate_grad(r, self.adv[k], self.clip_eps);
            if d_lp == 0.0 {
                continue;
            }
            let (dv, _) = log_prob_grad(&values, &self.log_std, &self.actions[k]);
            for ((slot, t), g) in trees.iter().zip(&mut grads) {
                let up = -d_lp * dv[*slot] / n;
                if up != 0.0 && !g.is_empty() {
                    t.accumulate_grad(&self.obs[k], up, g);
                }
            }
        }
        (loss, grads.concat())
    }
}

/// Fitness of one slot's tree inside a fixed mixed-policy context.
struct SlotFitness<'a> {
    arena: &'a Arena<'a>,
    context: &'a [Option<ExprTree>],
    slot: usize,
    seeds: &'a [u64],
    surrogate: Option<Surrogate>,
}

impl Fitness<ExprTree> for SlotFitness<'_> {
    fn fitness(&self, tree: &ExprTree, _stream: u64) -> f64 {
        let mut slots: Vec<Option<&ExprTree>> = self.context.iter().map(Option::as_ref).collect();
        slots[self.slot] = Some(tree);
        self.arena.mean_reward(
            &SlotView {
                teacher: self.arena.teacher,
                slots,
            },
            self.seeds,
        )
    }

    fn loss_grad(&self, tree: &ExprTree) -> Option<(f64, Vec<f64>)> {
        self.surrogate.as_ref().map(|s| s.loss_grad(&[(self.slot, tree)]))
    }
}

/// Fitness of a whole forest acting without the teacher.
struct ForestFitness<'a> {
    arena: &'a Arena<'a>,
    seeds: &'a [u64],
    surrogate: Option<Surrogate>,
}

impl Fitness<ForestGenome> for ForestFitness<'_> {
    fn fitness(&self, g: &ForestGenome, _stream: u64) -> f64 {
        let view = SlotView {
            teacher: self.arena.teacher,
            slots: g.0.iter().map(Some).collect(),
        };
        self.arena.mean_reward(&view, self.seeds)
    }

    fn loss_grad(&self, g: &ForestGenome) -> Option<(f64, Vec<f64>)> {
        let trees: Vec<(usize, &ExprTree)> = g.0.iter().enumerate().collect();
        self.surrogate.as_ref().map(|s| s.loss_grad(&trees))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneRecord {
    pub iteration: usize,
    /// Slot evolved in this step; `None` when all trees evolve together.
    pub action: Option<usize>,
    /// Cumulative GP generations so far.
    pub generation: usize,
    /// Best candidate fitness in its own context.
    pub best_fitness: f64,
    /// Reward of the current all-symbolic forest on the fitness seeds.
    pub forest_reward: f64,
    pub best_node_count: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneResult {
    /// Best all-symbolic forest seen, the warm start included.
    pub forest: Forest,
    pub forest_reward: f64,
    pub warm_start_reward: f64,
    pub history: Vec<FinetuneRecord>,
    /// First generation at which the all-symbolic forest reached the target.
    pub generations_to_target: Option<usize>,
}

/// Seeds of the fixed episodes used for Stage III fitness.
pub fn fitness_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    (0..episodes).map(|k| rng::derive(seed, &[0xF17, k as u64])).collect()
}

fn generation_seeds(seed: u64, generation: usize, episodes: usize) -> Vec<u64> {
    (0..episodes).map(|k| rng::derive(seed, &[0xF18, generation as u64, k as u64])).collect()
}

fn seeded_population<G: Genome>(init: &G, size: usize, var: &VariationConfig, rng: &mut rng::Rng) -> Vec<Candidate<G>> {
    const MUTATIONS: [Strategy; 3] = [Strategy::Subtree, Strategy::Hoist, Strategy::Point];
    let mut pop = vec![Candidate::new(init.clone())];
    for k in 1..size {
        pop.push(Candidate::new(init.vary(MUTATIONS[k % 3], init, var, rng)));
    }
    pop
}

/// Stage III. With neural guidance each outer iteration runs one GP
/// generation per action `i`, scoring trees for slot `i` inside a mixed
/// policy whose earlier slots hold the current fine-tuned trees and whose
/// later slots use the teacher. Without it, whole forests evolve as one genome.
#[allow(clippy::too_many_arguments)]
pub fn neural_guided_finetune(
    teacher: &MlpPolicy,
    init: &Forest,
    env_id: &str,
    extractor: &ExtractorConfig,
    gp: &GpConfig,
    ppo: &PpoConfig,
    ft: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneResult> {
    gp.validate()?;
    ppo.validate()?;
    ft.validate()?;
    let env = envs::make(env_id)?;
    let spec = env.spec().clone();
    let nf = Observer::for_env(&spec, extractor).num_features(&spec);
    let na = spec.num_actions;
    if init.num_actions() != na || teacher.num_actions() != na {
        return Err(Error::DimensionMismatch {
            expected: na,
            got: if init.num_actions() != na { init.num_actions() } else { teacher.num_actions() },
        });
    }
    if init.num_features() != nf || teacher.state_dim() != nf {
        return Err(Error::DimensionMismatch {
            expected: nf,
            got: if init.num_features() != nf { init.num_features() } else { teacher.state_dim() },
        });
    }

    let seeds = fitness_seeds(seed, ft.eval_episodes);
    let arena = Arena {
        teacher,
        env_id,
        extractor,
        seeds: &seeds,
    };
    let probe = SlotView {
        teacher,
        slots: vec![None; na],
    };
    let probe = Surrogate::collect(&arena, &probe, ft.buffer_len, ppo, rng::derive(seed, &[0xAC7]))?;
    let mut var = VariationConfig {
        gen: gp.tree_gen(nf),
        max_depth: gp.max_depth,
    };
    var.gen.active_features = varying_columns(&probe.obs);
    let workers = Workers::new(gp.workers);
    let mut init_rng = rng::stream(seed, &[0x1417F]);
    let mut breed_rng = rng::stream(seed, &[0xB4EEF]);
    let use_sgd = gp.strategy_probs.get(Strategy::Sgd) > 0.0;
    let started = Instant::now();

    let warm = arena.forest_reward(&init.trees);
    let mut best = (warm, init.trees.clone());
    let target = ft.target_reward;
    let mut reached = target.filter(|t| warm >= *t).map(|_| 0);
    let mut history = Vec::new();
    let mut generation = 0;

    let already = reached.is_some();
    let mut note = |rec: FinetuneRecord, trees: &[ExprTree], best: &mut (f64, Vec<ExprTree>)| {
        if rec.forest_reward > best.0 {
            *best = (rec.forest_reward, trees.to_vec());
        }
        if reached.is_none() && target.is_some_and(|t| rec.forest_reward >= t) {
            reached = Some(rec.generation);
        }
        log::info!(
            "stage3 gen {} slot {:?} fitness {:.3} forest {:.3}",
            rec.generation,
            rec.action,
            rec.best_fitness,
            rec.forest_reward
        );
        history.push(rec);
        reached.is_some()
    };

    if !already && ft.neural_guidance {
        let mut current = init.trees.clone();
        let mut pops: Vec<Option<(Vec<Candidate<ExprTree>>, Vec<Option<ExprTree>>)>> = vec![None; na];
        'outer: for it in 0..ft.iterations {
            for i in 0..na {
                generation += 1;
                let context: Vec<Option<ExprTree>> =
                    (0..na).map(|j| (j < i).then(|| current[j].clone())).collect();
                let surrogate = if use_sgd {
                    let mut slots: Vec<Option<&ExprTree>> = context.iter().map(Option::as_ref).collect();
                    slots[i] = Some(&current[i]);
                    let view = SlotView { teacher, slots };
                    Some(Surrogate::collect(&arena, &view, ft.buffer_len, ppo, rng::derive(seed, &[0x5B, generation as u64]))?)
                } else {
                    None
                };
                let gen_seeds = if ft.resample_episodes { generation_seeds(seed, generation, ft.eval_episodes) } else { seeds.clone() };
                let fitness = SlotFitness {
                    arena: &arena,
                    context: &context,
                    slot: i,
                    seeds: &gen_seeds,
                    surrogate,
                };
                let mut pop = match pops[i].take() {
                    None => seeded_population(&current[i], gp.population_size, &var, &mut init_rng),
                    Some((mut pop, old_context)) => {
                        if ft.resample_episodes || old_context != context {
                            pop.iter_mut().for_each(|c| c.fitness = None);
                        }
                        pop
                    }
                };
                evaluate(&mut pop, &fitness, generation, &workers);
                let pop = evolve_generation(&pop, &fitness, gp, &var, generation, &workers, &mut breed_rng);
                let elite = &pop[best_index(&pop)];
                current[i] = elite.genome.clone();
                let rec = FinetuneRecord {
                    iteration: it,
                    action: Some(i),
                    generation,
                    best_fitness: elite.raw(),
                    forest_reward: arena.forest_reward(&current),
                    best_node_count: elite.genome.node_count(),
                    wall_time_s: started.elapsed().as_secs_f64(),
                };
                pops[i] = Some((pop, context));
                if note(rec, &current, &mut best) {
                    break 'outer;
                }
            }
        }
    } else if !already {
        let mut pop = seeded_population(&ForestGenome(init.trees.clone()), gp.population_size, &var, &mut init_rng);
        let mut elite = ForestGenome(init.trees.clone());
        'gens: for it in 0..ft.iterations {
            for _ in 0..na {
                generation += 1;
                let surrogate = if use_sgd {
                    let view = SlotView {
                        teacher,
                        slots: elite.0.iter().map(Some).collect(),
                    };
                    Some(Surrogate::collect(&arena, &view, ft.buffer_len, ppo, rng::derive(seed, &[0x5B, generation as u64]))?)
                } else {
                    None
                };
                let gen_seeds = if ft.resample_episodes { generation_seeds(seed, generation, ft.eval_episodes) } else { seeds.clone() };
                let fitness = ForestFitness {
                    arena: &arena,
                    seeds: &gen_seeds,
                    surrogate,
                };
                if ft.resample_episodes {
                    pop.iter_mut().for_each(|c| c.fitness = None);
                }
                evaluate(&mut pop, &fitness, generation, &workers);
                pop = evolve_generation(&pop, &fitness, gp, &var, generation, &workers, &mut breed_rng);
                let e = &pop[best_index(&pop)];
                elite = e.genome.clone();
                let rec = FinetuneRecord {
                    iteration: it,
                    action: None,
                    generation,
                    best_fitness: e.raw(),
                    forest_reward: if ft.resample_episodes { arena.forest_reward(&e.genome.0) } else { e.raw() },
                    best_node_count: e.genome.node_count(),
                    wall_time_s: started.elapsed().as_secs_f64(),
                };
                if note(rec, &elite.0, &mut best) {
                    break 'gens;
                }
            }
        }
    }

    Ok(FinetuneResult {
        forest: Forest::new(best.1, init.action_mode)?,
        forest_reward: best.0,
        warm_start_reward: warm,
        history,
        generations_to_target: reached,
    })
}

pub const STAGE3_CSV_HEADER: &str = "iteration,action,generation,best_fitness,forest_reward,best_node_count,wall_time_s";

pub fn write_stage3_csv(path: &Path, history: &[FinetuneRecord]) -> Result<()> {
    let mut out = format!("{STAGE3_CSV_HEADER}\n");
    for r in history {
        let action = r.action.map_or("all".to_string(), |a| a.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3}\n",
            r.iteration, action, r.generation, r.best_fitness, r.forest_reward, r.best_node_count, r.wall_time_s
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
