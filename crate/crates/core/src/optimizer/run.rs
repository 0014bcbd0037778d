//! The annealed outer loop: pool → train → ascend (→ explore) at every scale
//! of the t-sequence.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::explore::{parallel_explore_step, Candidate, ExploreConfig};
use super::gradient::{ascend_at_scale, initialize_first_scale, GradConfig};
use super::trace::{Phase, TraceRecord, TraceSink};
use crate::error::{Error, Result};
use crate::problems::{Fitness, Problem};
use crate::rng::{stream, tag};
use crate::sampling::{build_training_pool, FitnessPool, LocalPrior, PoolConfig, PriorStage};
use crate::schedule::{build_t_sequence, interpolant_by_name, Interpolant};
use crate::scorefield::{train_flow_matching, TrainConfig, VectorFieldModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub tn: usize,
    pub t_end: f64,
    pub pn: usize,
    pub interpolant: String,
    pub pool_size: usize,
    pub pool: PoolConfig,
    pub train: TrainConfig,
    /// Training steps for the first, untrained model; 0 means `train.steps`.
    pub cold_steps: usize,
    pub grad: GradConfig,
    pub local_prior: bool,
    /// Parallel exploration; absent means a single solution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explore: Option<ExploreConfig>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tn: 30,
            t_end: 2e-3,
            pn: 3,
            interpolant: "linear".into(),
            pool_size: 1 << 16,
            pool: PoolConfig::default(),
            train: TrainConfig::default(),
            cold_steps: 0,
            grad: GradConfig::default(),
            local_prior: true,
            explore: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end <= 1.0) {
            return Err(Error::Config(format!("t_end must lie in (0,1], got {}", self.t_end)));
        }
        if self.pool_size < 2 {
            return Err(Error::Config("pool_size must be >= 2".into()));
        }
        if interpolant_by_name(&self.interpolant).is_none() {
            return Err(Error::Config(format!("unknown interpolant {:?}", self.interpolant)));
        }
        if !(self.pool.c_pstd > 0.0) {
            return Err(Error::Config("pool.c_pstd must be positive".into()));
        }
        if !(self.pool.mass > 0.0 && self.pool.mass < 1.0) {
            return Err(Error::Config("pool.mass must lie in (0,1)".into()));
        }
        self.train.validate()?;
        self.grad.validate()?;
        if let Some(e) = &self.explore {
            e.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub id: usize,
    /// Native coordinates.
    pub x: Vec<f64>,
    pub x_normalized: Vec<f64>,
    /// Objective in native units (NaN when infeasible).
    pub objective: f64,
    pub feasible: bool,
    pub raw_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub scale: usize,
    pub t: f64,
    pub solution: usize,
    pub x_normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Sorted by decreasing raw fitness.
    pub solutions: Vec<SolutionReport>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub t_values: Vec<f64>,
}

impl RunResult {
    pub fn best(&self) -> &SolutionReport {
        &self.solutions[0]
    }
}

fn pool_record(scale: usize, t: f64, solution: Option<usize>, pool: &FitnessPool) -> TraceRecord {
    TraceRecord {
        solution,
        fitness: pool.best_raw(),
        aux: pool.temp,
        ..TraceRecord::new(scale, t, Phase::Pool)
    }
}

/// Work done for one solution (or the shared model) at one scale.
struct Outcome {
    cand: Candidate,
    model: Option<VectorFieldModel>,
    records: Vec<TraceRecord>,
    seconds: [f64; 3],
}

struct Ctx<'a> {
    problem: &'a Problem,
    cfg: &'a OptimizerConfig,
    interp: Arc<dyn Interpolant>,
    seed: u64,
}

impl Ctx<'_> {
    fn fitness(&self, x: &[f64]) -> f64 {
        self.problem.raw_fitness(x).or_neg_inf()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        match self.problem.raw_fitness(x) {
            Fitness::Feasible(_) => self.problem.objective(&self.problem.denormalize(x)),
            Fitness::Infeasible => f64::NAN,
        }
    }

    fn train_cfg(&self, cold: bool) -> TrainConfig {
        let mut c = self.cfg.train.clone();
        if cold && self.cfg.cold_steps > 0 {
            c.steps = self.cfg.cold_steps;
        }
        c
    }

    fn pool(&self, stage: &PriorStage, scale: usize, slot: u64) -> Result<FitnessPool> {
        let mut rng = stream(self.seed, &[tag::POOL, scale as u64, slot]);
        build_training_pool(self.problem, stage, self.cfg.pool_size, &self.cfg.pool, &mut rng)
    }

    fn train(&self, pool: &FitnessPool, t: f64, init: Option<VectorFieldModel>, scale: usize, slot: u64) -> Result<(VectorFieldModel, crate::scorefield::TrainReport)> {
        let cold = init.is_none();
        let init = if self.cfg.train.warm_start { init } else { None };
        let mut rng = stream(self.seed, &[tag::TRAIN, scale as u64, slot]);
        let cfg = self.train_cfg(cold || !self.cfg.train.warm_start);
        train_flow_matching(pool, t, &cfg, init, self.interp.clone(), &mut rng)
    }

    fn train_record(&self, scale: usize, t: f64, solution: Option<usize>, rep: &crate::scorefield::TrainReport) -> TraceRecord {
        TraceRecord {
            solution,
            step: rep.best_step,
            fitness: f64::NAN,
            aux: rep.final_loss,
            ..TraceRecord::new(scale, t, Phase::Train)
        }
    }

    fn ascend(&self, model: &VectorFieldModel, cand: &Candidate, scale: usize, t: f64) -> Result<(Candidate, Vec<TraceRecord>)> {
        let mut rng = stream(self.seed, &[tag::ASCENT, scale as u64, cand.id as u64]);
        let res = ascend_at_scale(model, &cand.x, t, &self.cfg.grad, &mut rng)?;
        let records = res
            .steps
            .iter()
            .map(|s| TraceRecord {
                step: s.step,
                solution: Some(cand.id),
                fitness: self.fitness(&s.x),
                grad_norm: s.grad_norm,
                step_norm: s.step_norm,
                aux: self.objective(&s.x),
                grad: s.grad.clone(),
                ..TraceRecord::new(scale, t, Phase::Ascend)
            })
            .collect();
        let fitness = self.fitness(&res.x);
        Ok((
            Candidate {
                x: res.x,
                fitness,
                ..cand.clone()
            },
            records,
        ))
    }

    /// Local-prior pool, finetune and ascent for one solution.
    fn local_step(&self, cand: &Candidate, init: Option<VectorFieldModel>, scale: usize, t: f64, t_prior: f64) -> Result<Outcome> {
        let clock = Instant::now();
        let stage = match LocalPrior::at_scale(cand.x.clone(), self.interp.as_ref(), t_prior, self.cfg.pool.mass) {
            Ok(p) => PriorStage::Local(p),
            // alpha = 0 at the prior's scale: the local prior is the whole box.
            Err(Error::DegenerateKernel { .. }) | Err(Error::InvalidArgument(_)) => PriorStage::Global,
            Err(e) => return Err(e),
        };
        let slot = cand.id as u64 + 1;
        let pool = self.pool(&stage, scale, slot)?;
        let t_pool = clock.elapsed().as_secs_f64();
        let mut records = vec![pool_record(scale, t, Some(cand.id), &pool)];
        let clock = Instant::now();
        let (model, rep) = self.train(&pool, t, init, scale, slot)?;
        records.push(self.train_record(scale, t, Some(cand.id), &rep));
        let t_train = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let (next, asc) = self.ascend(&model, cand, scale, t)?;
        records.extend(asc);
        Ok(Outcome {
            cand: next,
            model: Some(model),
            records,
            seconds: [t_pool, t_train, clock.elapsed().as_secs_f64()],
        })
    }
}

fn abort(scale: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Aborted {
        scale,
        source: Box::new(e),
    }
}

/// Runs the full annealing schedule on `problem` (optimized in normalized
/// coordinates) and returns the surviving solutions, best first.
///
/// Every random draw comes from a stream keyed by `(seed, purpose, scale,
/// solution)`, so results do not depend on thread scheduling.
pub fn run_optimization(problem: &Problem, cfg: &OptimizerConfig, seed: u64, sink: &mut dyn TraceSink) -> Result<RunResult> {
    cfg.validate()?;
    let ts = build_t_sequence(cfg.tn, cfg.t_end)?;
    let interp = interpolant_by_name(&cfg.interpolant).expect("validated");
    let ctx = Ctx {
        problem,
        cfg,
        interp: interp.clone(),
        seed,
    };
    let tn = cfg.tn;
    let mut shared: Option<VectorFieldModel> = None;
    let mut lineage: BTreeMap<usize, VectorFieldModel> = BTreeMap::new();
    let mut cands: Vec<Candidate> = Vec::new();
    let mut next_id = 0usize;
    let mut trajectory = Vec::new();

    for i in 0..=tn {
        let t = ts.get(i);
        let mut records: Vec<TraceRecord> = Vec::new();
        let mut seconds = [0.0f64; 4];
        let local_stage = cfg.local_prior && i > 0 && i >= cfg.pn;

        if i == 0 {
            let clock = Instant::now();
            let pool = ctx.pool(&PriorStage::Global, 0, 0).map_err(abort(0))?;
            records.push(pool_record(0, t, None, &pool));
            seconds[0] = clock.elapsed().as_secs_f64();
            let clock = Instant::now();
            let (model, rep) = ctx.train(&pool, t, None, 0, 0).map_err(abort(0))?;
            records.push(ctx.train_record(0, t, None, &rep));
            seconds[1] = clock.elapsed().as_secs_f64();
            let mut rng = stream(seed, &[tag::INIT]);
            let x = initialize_first_scale(&model, cfg.grad.monte_size, &mut rng).map_err(abort(0))?;
            let fitness = ctx.fitness(&x);
            records.push(TraceRecord {
                solution: Some(0),
                fitness,
                aux: ctx.objective(&x),
                ..TraceRecord::new(0, t, Phase::Init)
            });
            cands.push(Candidate {
                id: 0,
                parent: None,
                x,
                fitness,
            });
            next_id = 1;
            shared = Some(model);
        } else if !local_stage {
            let clock = Instant::now();
            let pool = ctx.pool(&PriorStage::Global, i, 0).map_err(abort(i))?;
            records.push(pool_record(i, t, None, &pool));
            seconds[0] = clock.elapsed().as_secs_f64();
            let clock = Instant::now();
            let (model, rep) = ctx.train(&pool, t, shared.take(), i, 0).map_err(abort(i))?;
            records.push(ctx.train_record(i, t, None, &rep));
            seconds[1] = clock.elapsed().as_secs_f64();
            let clock = Instant::now();
            let results: Vec<(Candidate, Vec<TraceRecord>)> = cands
                .par_iter()
                .map(|c| ctx.ascend(&model, c, i, t))
                .collect::<Result<_>>()
                .map_err(abort(i))?;
            seconds[2] = clock.elapsed().as_secs_f64();
            cands = results
                .into_iter()
                .map(|(c, r)| {
                    records.extend(r);
                    c
                })
                .collect();
            shared = Some(model);
        } else {
            let t_prior = ts.get(i - cfg.pn);
            let inits: Vec<Option<VectorFieldModel>> = cands
                .iter()
                .map(|c| {
                    lineage
                        .get(&c.id)
                        .or_else(|| c.parent.and_then(|p| lineage.get(&p)))
                        .or(shared.as_ref())
                        .cloned()
                })
                .collect();
            let outcomes: Vec<Outcome> = cands
                .par_iter()
                .zip(inits.into_par_iter())
                .map(|(c, init)| ctx.local_step(c, init, i, t, t_prior))
                .collect::<Result<_>>()
                .map_err(abort(i))?;
            lineage.clear();
            cands = outcomes
                .into_iter()
                .map(|o| {
                    records.extend(o.records);
                    for k in 0..3 {
                        seconds[k] += o.seconds[k];
                    }
                    if let Some(m) = o.model {
                        lineage.insert(o.cand.id, m);
                    }
                    o.cand
                })
                .collect();
        }

        if let Some(ecfg) = &cfg.explore {
            let clock = Instant::now();
            let mut rng = stream(seed, &[tag::EXPLORE, i as u64]);
            let fitness = |x: &[f64]| ctx.fitness(x);
            cands = parallel_explore_step(
                std::mem::take(&mut cands),
                &fitness,
                interp.as_ref(),
                t,
                i,
                tn,
                ecfg,
                i < tn,
                &mut next_id,
                &mut rng,
            );
            let count = cands.len() as f64;
            for c in &cands {
                records.push(TraceRecord {
                    solution: Some(c.id),
                    fitness: c.fitness,
                    aux: count,
                    ..TraceRecord::new(i, t, Phase::Explore)
                });
            }
            // Children inherit their parent's model.
            let mut next_lineage = BTreeMap::new();
            for c in &cands {
                let src = lineage.get(&c.id).or_else(|| c.parent.and_then(|p| lineage.get(&p)));
                if let Some(m) = src {
                    next_lineage.insert(c.id, m.clone());
                }
            }
            lineage = next_lineage;
            seconds[3] = clock.elapsed().as_secs_f64();
        }

        records.sort_by_key(|r| r.sort_key());
        for r in &records {
            sink.record(r)?;
        }
        for (k, phase) in [Phase::Pool, Phase::Train, Phase::Ascend, Phase::Explore].into_iter().enumerate() {
            sink.timing(i, phase, seconds[k])?;
        }
        for c in &cands {
            trajectory.push(TrajectoryPoint {
                scale: i,
                t,
                solution: c.id,
                x_normalized: c.x.clone(),
            });
        }
    }

    let mut solutions: Vec<SolutionReport> = cands
        .iter()
        .map(|c| {
            let raw = problem.raw_fitness(&c.x);
            SolutionReport {
                id: c.id,
                x: problem.denormalize(&c.x),
                x_normalized: c.x.clone(),
                objective: ctx.objective(&c.x),
                feasible: raw.is_feasible(),
                raw_fitness: raw.or_neg_inf(),
            }
        })
        .collect();
    solutions.sort_by(|a, b| b.raw_fitness.total_cmp(&a.raw_fitness).then(a.id.cmp(&b.id)));
    Ok(RunResult {
        solutions,
        trajectory,
        t_values: ts.values.clone(),
    })
}
