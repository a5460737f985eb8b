//! Particle swarm optimization of the per-class threshold vector.
//!
//! Positions live in the unit box. Every generation draws its random
//! coefficients sequentially from the swarm's own stream before any fitness is
//! evaluated, so evaluating particles in parallel cannot change the outcome.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledRecord;
use crate::ensemble::{decision_rule, MetaClassifier};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub population: usize,
    pub generations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max: f64,
    pub seed: u64,
    /// Place the first particle of a threshold search on the best uniform threshold.
    #[serde(default = "enabled")]
    pub warm_start: bool,
}

fn enabled() -> bool {
    true
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 50,
            inertia: 0.729,
            c1: 1.49445,
            c2: 1.49445,
            v_max: 0.5,
            seed: 0,
            warm_start: true,
        }
    }
}

impl PsoConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::InvalidConfig("population must be at least 1".into()));
        }
        let finite_non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_non_negative(self.inertia) || !finite_non_negative(self.c1) || !finite_non_negative(self.c2) {
            return Err(Error::InvalidConfig("inertia and acceleration coefficients must be >= 0".into()));
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::InvalidConfig("v_max must be positive".into()));
        }
        Ok(())
    }
}

/// Something to maximize over `[0, 1]^dim`.
pub trait Objective: Sync {
    fn evaluate(&self, position: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, position: &[f64]) -> f64 {
        self(position)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fitness: f64,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best_position: Vec<f64>,
    pub global_best_fitness: f64,
    pub generation: usize,
    rng: ChaCha8Rng,
}

fn evaluate_all<O: Objective + ?Sized>(objective: &O, positions: &[&[f64]]) -> Vec<f64> {
    positions.par_iter().map(|p| objective.evaluate(p)).collect()
}

/// Random swarm: positions uniform in the unit box, velocities uniform in `±v_max`.
pub fn init_swarm<O: Objective + ?Sized>(config: &PsoConfig, dim: usize, objective: &O) -> Result<Swarm> {
    config.validate()?;
    if dim == 0 {
        return Err(Error::InvalidConfig("swarm dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut particles: Vec<Particle> = (0..config.population)
        .map(|_| {
            let position: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect();
            let velocity: Vec<f64> = (0..dim).map(|_| rng.random_range(-config.v_max..=config.v_max)).collect();
            Particle { best_position: position.clone(), position, velocity, fitness: f64::NAN, best_fitness: f64::NAN }
        })
        .collect();

    let positions: Vec<&[f64]> = particles.iter().map(|p| p.position.as_slice()).collect();
    let fitness = evaluate_all(objective, &positions);
    for (p, f) in particles.iter_mut().zip(fitness) {
        p.fitness = f;
        p.best_fitness = f;
    }

    let mut best = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.best_fitness > particles[best].best_fitness {
            best = i;
        }
    }
    Ok(Swarm {
        global_best_position: particles[best].best_position.clone(),
        global_best_fitness: particles[best].best_fitness,
        particles,
        generation: 0,
        rng,
    })
}

impl Swarm {
    pub fn dim(&self) -> usize {
        self.global_best_position.len()
    }

    /// Moves particle `index` to `position` and re-evaluates it as if freshly initialized.
    pub fn place<O: Objective + ?Sized>(&mut self, index: usize, position: Vec<f64>, objective: &O) {
        let f = objective.evaluate(&position);
        let p = &mut self.particles[index];
        p.fitness = f;
        p.best_fitness = f;
        p.best_position.clone_from(&position);
        p.position = position;
        if f > self.global_best_fitness {
            self.global_best_fitness = f;
            self.global_best_position.clone_from(&p.position);
        }
    }

    /// One velocity/position update for every particle, then re-evaluation and
    /// best tracking. Bests only move on strict improvement.
    pub fn step<O: Objective + ?Sized>(&mut self, config: &PsoConfig, objective: &O) {
        let dim = self.dim();
        let draws: Vec<(f64, f64)> =
            (0..self.particles.len() * dim).map(|_| (self.rng.random::<f64>(), self.rng.random::<f64>())).collect();

        for (i, p) in self.particles.iter_mut().enumerate() {
            for d in 0..dim {
                let (r1, r2) = draws[i * dim + d];
                let x = p.position[d];
                let v = config.inertia * p.velocity[d]
                    + config.c1 * r1 * (p.best_position[d] - x)
                    + config.c2 * r2 * (self.global_best_position[d] - x);
                let v = v.clamp(-config.v_max, config.v_max);
                let next = x + v;
                if !(0.0..=1.0).contains(&next) {
                    p.position[d] = next.clamp(0.0, 1.0);
                    p.velocity[d] = 0.0;
                } else {
                    p.position[d] = next;
                    p.velocity[d] = v;
                }
            }
        }

        let positions: Vec<&[f64]> = self.particles.iter().map(|p| p.position.as_slice()).collect();
        let fitness = evaluate_all(objective, &positions);
        for (p, f) in self.particles.iter_mut().zip(fitness) {
            p.fitness = f;
            if f > p.best_fitness {
                p.best_fitness = f;
                p.best_position.clone_from(&p.position);
            }
            if f > self.global_best_fitness {
                self.global_best_fitness = f;
                self.global_best_position.clone_from(&p.position);
            }
        }
        self.generation += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Global best after initialization and after each generation (`G + 1` values).
    pub history: Vec<f64>,
}

fn run<O: Objective + ?Sized>(config: &PsoConfig, objective: &O, mut swarm: Swarm) -> OptimizeResult {
    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(swarm.global_best_fitness);
    for _ in 0..config.generations {
        swarm.step(config, objective);
        history.push(swarm.global_best_fitness);
    }
    OptimizeResult { best_position: swarm.global_best_position, best_fitness: swarm.global_best_fitness, history }
}

/// Generic maximizer over `[0, 1]^dim`.
pub fn optimize_function<O: Objective + ?Sized>(
    config: &PsoConfig,
    objective: &O,
    dim: usize,
) -> Result<OptimizeResult> {
    Ok(run(config, objective, init_swarm(config, dim, objective)?))
}

/// Threshold search against the joint accuracy / benign-rejection fitness.
pub fn optimize(config: &PsoConfig, ctx: &FitnessContext) -> Result<OptimizeResult> {
    let mut swarm = init_swarm(config, ctx.dim(), ctx)?;
    if config.warm_start {
        let (t, _) = ctx.best_uniform_threshold();
        swarm.place(0, vec![t; ctx.dim()], ctx);
    }
    Ok(run(config, ctx, swarm))
}

/// Precomputed validation scores, so fitness only re-applies the decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessContext {
    dim: usize,
    weights: Vec<f64>,
    attack_scores: Vec<f64>,
    attack_truth: Vec<usize>,
    benign_scores: Vec<f64>,
}

impl FitnessContext {
    pub fn new(
        meta: &MetaClassifier,
        attack_validation: &[LabeledRecord],
        benign_validation: &[LabeledRecord],
    ) -> Result<Self> {
        let attack_truth = attack_validation
            .iter()
            .enumerate()
            .map(|(row, r)| {
                meta.class_index(&r.label).ok_or_else(|| Error::UnknownLabel { row, label: r.label.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        let attack = meta.score_batch(&attack_validation.iter().map(|r| &*r.features).collect::<Vec<_>>())?;
        let benign = meta.score_batch(&benign_validation.iter().map(|r| &*r.features).collect::<Vec<_>>())?;
        let ctx = Self::from_scores(meta.weights(), attack, attack_truth, benign)?;
        for (i, name) in meta.class_names().into_iter().enumerate() {
            if !ctx.attack_truth.contains(&i) {
                return Err(Error::MissingClassInValidation(name.to_owned()));
            }
        }
        Ok(ctx)
    }

    /// Builds a context from raw score rows (`rows[i][k]` = score of record `i` under entry `k`).
    pub fn from_scores(
        weights: Vec<f64>,
        attack_scores: Vec<Vec<f64>>,
        attack_truth: Vec<usize>,
        benign_scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let dim = weights.len();
        if attack_scores.is_empty() {
            return Err(Error::EmptyValidationSet("attack"));
        }
        if benign_scores.is_empty() {
            return Err(Error::EmptyValidationSet("benign"));
        }
        if attack_scores.len() != attack_truth.len() {
            return Err(Error::LengthMismatch { expected: attack_scores.len(), actual: attack_truth.len() });
        }
        if let Some(row) = attack_scores.iter().chain(&benign_scores).find(|r| r.len() != dim) {
            return Err(Error::LengthMismatch { expected: dim, actual: row.len() });
        }
        if let Some(&t) = attack_truth.iter().find(|&&t| t >= dim) {
            return Err(Error::InvalidConfig(format!("class index {t} outside ensemble of {dim}")));
        }
        Ok(Self {
            dim,
            weights,
            attack_scores: attack_scores.concat(),
            attack_truth,
            benign_scores: benign_scores.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn attack_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.attack_scores.chunks_exact(self.dim)
    }

    fn benign_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.benign_scores.chunks_exact(self.dim)
    }

    /// Fraction of attack validation records assigned their own class.
    pub fn accuracy(&self, thresholds: &[f64]) -> f64 {
        let correct = self
            .attack_rows()
            .zip(&self.attack_truth)
            .filter(|(s, &t)| decision_rule(s, thresholds, &self.weights) == Some(t))
            .count();
        correct as f64 / self.attack_truth.len() as f64
    }

    /// Fraction of benign validation records rejected as unknown.
    pub fn detection(&self, thresholds: &[f64]) -> f64 {
        let rows = self.benign_scores.len() / self.dim;
        let rejected = self.benign_rows().filter(|s| decision_rule(s, thresholds, &self.weights).is_none()).count();
        rejected as f64 / rows as f64
    }

    pub fn fitness(&self, thresholds: &[f64]) -> Result<f64> {
        if thresholds.len() != self.dim {
            return Err(Error::LengthMismatch { expected: self.dim, actual: thresholds.len() });
        }
        Ok((self.accuracy(thresholds) + self.detection(thresholds)) / 2.0)
    }

    /// Every distinct score in the context, sorted. Fitness is piecewise constant
    /// between consecutive values.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.attack_scores.iter().chain(&self.benign_scores).copied().collect();
        v.push(0.0);
        v.push(1.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Exhaustive search over thresholds shared by every entry. Returns the midpoint
    /// of the first best plateau and its fitness.
    pub fn best_uniform_threshold(&self) -> (f64, f64) {
        let points = self.breakpoints();
        let mut best = (points[0], f64::NEG_INFINITY);
        for (i, &b) in points.iter().enumerate() {
            let f = self.evaluate(&vec![b; self.dim]);
            if f > best.1 {
                let next = points.get(i + 1).copied().unwrap_or(b);
                best = ((b + next) / 2.0, f);
            }
        }
        best
    }
}

impl Objective for FitnessContext {
    fn evaluate(&self, position: &[f64]) -> f64 {
        (self.accuracy(position) + self.detection(position)) / 2.0
    }
}
