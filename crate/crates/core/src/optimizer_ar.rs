//! Adaptive-range local search over degree-distribution coefficients.
//!
//! Generation 0 is built by a queen's-move walk through the feasible box.
//! Each later generation keeps the incumbent as member 1 and draws every
//! other member uniformly within `S_R` of it, coordinate-wise. When the best
//! threshold improves by less than `delta` the run counts a stall; after
//! `stall_generations` stalls it halts, otherwise the range is reset to
//! `R_M * max_j |best_j - next_best_j|`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::check_design::complete_ensemble;
use crate::density_evolution::{threshold, ChannelKind, DeConfig, ThresholdResult};
use crate::ensemble::{Ensemble, VariableClass};
use crate::error::{Error, Result};
use crate::template::Structure;

/// Attempts per point before queen's-move initialization gives up.
const MAX_TRIES: usize = 10_000;
/// Attempts per member when sampling around the incumbent.
const RESAMPLE_TRIES: usize = 100;
/// Grid used to key the objective cache.
const CACHE_QUANTUM: f64 = 1e-9;
/// Tolerance of the validation every evaluated ensemble must pass.
pub const CANDIDATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArConfig {
    pub pop_size: usize,
    pub range_mult: f64,
    pub init_range: f64,
    pub delta: f64,
    pub stall_generations: usize,
    /// Safety cap; the stall rule normally ends the run far earlier.
    pub max_generations: usize,
    pub min_range: f64,
    pub max_range: f64,
    pub seed: u64,
}

impl Default for ArConfig {
    fn default() -> Self {
        ArConfig {
            pop_size: 100,
            range_mult: 1.25,
            init_range: 0.1,
            delta: 1e-5,
            stall_generations: 3,
            max_generations: 500,
            min_range: 1e-6,
            max_range: 0.5,
            seed: 0,
        }
    }
}

impl ArConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.range_mult,
            self.init_range,
            self.delta,
            self.min_range,
            self.max_range,
        ]
        .iter()
        .all(|&v| v > 0.0 && v.is_finite());
        if self.pop_size < 2 || !positive || self.stall_generations == 0 {
            return Err(Error::Config(format!("invalid AR configuration {self:?}")));
        }
        if self.min_range > self.max_range {
            return Err(Error::Config("min_range exceeds max_range".into()));
        }
        Ok(())
    }
}

/// Axis-aligned box of the free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("bounds need matching non-empty lo/hi".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidArgument("empty bounds".into()));
        }
        Ok(Bounds { lo, hi })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn reflect(&self, j: usize, mut x: f64) -> f64 {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        for _ in 0..4 {
            if x < lo {
                x = 2.0 * lo - x;
            } else if x > hi {
                x = 2.0 * hi - x;
            } else {
                return x;
            }
        }
        x.clamp(lo, hi)
    }

    fn uniform(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
            .collect()
    }
}

fn queen_move(b: &Bounds, from: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mut p = from.to_vec();
    let dim = b.dim();
    if dim == 1 || rng.random_bool(0.5) {
        let j = rng.random_range(0..dim);
        let w = b.hi[j] - b.lo[j];
        p[j] = b.reflect(j, p[j] + rng.random_range(-w..=w));
    } else {
        let w = (0..dim)
            .map(|j| b.hi[j] - b.lo[j])
            .fold(f64::INFINITY, f64::min);
        let t = rng.random_range(0.0..=w);
        for (j, x) in p.iter_mut().enumerate() {
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            *x = b.reflect(j, *x + s * t);
        }
    }
    p
}

/// Queen's-move initial population: a uniform feasible first point, then a
/// chain of rook moves (one coordinate) and diagonal moves (all coordinates
/// by the same length, random signs), each reflected into the box and kept
/// only if feasible and new.
pub fn queens_init(
    bounds: &Bounds,
    n: usize,
    feasible: &dyn Fn(&[f64]) -> Result<()>,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    let mut first_err = None;
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..MAX_TRIES {
        let p = bounds.uniform(rng);
        match feasible(&p) {
            Ok(()) => {
                points.push(p);
                break;
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if points.is_empty() {
        return Err(first_err.unwrap_or_else(|| Error::Infeasible("empty feasible set".into())));
    }
    while points.len() < n {
        let prev = points.last().expect("non-empty").clone();
        let fresh = |p: &Vec<f64>, pts: &[Vec<f64>]| feasible(p).is_ok() && !pts.contains(p);
        let mut next = None;
        for _ in 0..MAX_TRIES {
            let p = queen_move(bounds, &prev, rng);
            if fresh(&p, &points) {
                next = Some(p);
                break;
            }
        }
        if next.is_none() {
            for _ in 0..MAX_TRIES {
                let p = bounds.uniform(rng);
                if fresh(&p, &points) {
                    next = Some(p);
                    break;
                }
            }
        }
        match next {
            Some(p) => points.push(p),
            None => {
                return Err(Error::Infeasible(format!(
                    "could not find {n} distinct feasible starting points"
                )))
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArGeneration {
    pub generation: usize,
    pub best_value: f64,
    /// Search range used to draw this generation.
    pub search_range: f64,
    pub best: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArTrace {
    pub generations: Vec<ArGeneration>,
}

impl ArTrace {
    pub fn to_csv(&self) -> String {
        let dim = self.generations.first().map_or(0, |g| g.best.len());
        let mut out = String::from("generation,best_threshold,search_range");
        for j in 1..=dim {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for g in &self.generations {
            let _ = write!(out, "{},{},{}", g.generation, g.best_value, g.search_range);
            for x in &g.best {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ArOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub trace: ArTrace,
    /// Objective evaluations actually run (cache misses).
    pub evaluations: usize,
}

fn cache_key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v / CACHE_QUANTUM).round() as i64).collect()
}

/// Scores every member, running the objective once per distinct point and
/// in parallel; results come back in member order.
fn evaluate(
    pop: &[Vec<f64>],
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    cache: &mut HashMap<Vec<i64>, f64>,
) -> (Vec<f64>, usize) {
    let keys: Vec<Vec<i64>> = pop.iter().map(|x| cache_key(x)).collect();
    let mut todo: Vec<usize> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        if !cache.contains_key(k) && !todo.iter().any(|&t| keys[t] == *k) {
            todo.push(i);
        }
    }
    let fresh: Vec<f64> = todo.par_iter().map(|&i| objective(&pop[i])).collect();
    for (&i, v) in todo.iter().zip(fresh) {
        cache.insert(keys[i].clone(), v);
    }
    (keys.iter().map(|k| cache[k]).collect(), todo.len())
}

/// Index of the largest value, lowest index on ties, skipping `skip`.
fn argmax(values: &[f64], skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if Some(i) == skip || v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Maximizes `objective` over the feasible part of `bounds`. Infeasible
/// points should score `-inf`; they are never drawn if `feasible` rejects
/// them.
pub fn ar_optimize(
    bounds: &Bounds,
    feasible: &dyn Fn(&[f64]) -> Result<()>,
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    cfg: &ArConfig,
) -> Result<ArOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = HashMap::new();
    let mut pop = queens_init(bounds, cfg.pop_size, feasible, &mut rng)?;
    let mut range = cfg.init_range;
    let (mut values, mut evaluations) = evaluate(&pop, objective, &mut cache);
    let mut best_i = argmax(&values, None).expect("non-empty population");
    if values[best_i] == f64::NEG_INFINITY {
        return Err(Error::Infeasible(
            "every initial candidate scored as infeasible".into(),
        ));
    }
    let mut best = pop[best_i].clone();
    let mut best_value = values[best_i];
    let mut trace = ArTrace::default();
    trace.generations.push(ArGeneration {
        generation: 0,
        best_value,
        search_range: range,
        best: best.clone(),
    });
    let mut stalls = 0;
    for generation in 1..=cfg.max_generations {
        pop = (0..cfg.pop_size)
            .map(|i| {
                if i == 0 {
                    return best.clone();
                }
                for _ in 0..RESAMPLE_TRIES {
                    let p: Vec<f64> = best
                        .iter()
                        .enumerate()
                        .map(|(j, &c)| {
                            let lo = (c - range).max(bounds.lo[j]);
                            let hi = (c + range).min(bounds.hi[j]);
                            if hi > lo {
                                rng.random_range(lo..=hi)
                            } else {
                                lo
                            }
                        })
                        .collect();
                    if feasible(&p).is_ok() {
                        return p;
                    }
                }
                best.clone()
            })
            .collect();
        let (v, n) = evaluate(&pop, objective, &mut cache);
        values = v;
        evaluations += n;
        best_i = argmax(&values, None).expect("non-empty population");
        let improvement = values[best_i] - best_value;
        let drawn_with = range;
        best = pop[best_i].clone();
        best_value = values[best_i];
        let next_best = argmax(&values, Some(best_i)).map(|i| pop[i].clone());
        trace.generations.push(ArGeneration {
            generation,
            best_value,
            search_range: drawn_with,
            best: best.clone(),
        });
        if improvement < cfg.delta {
            stalls += 1;
            if stalls >= cfg.stall_generations {
                break;
            }
            if let Some(nb) = &next_best {
                let spread = best
                    .iter()
                    .zip(nb)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                range = (cfg.range_mult * spread).clamp(cfg.min_range, cfg.max_range);
            }
        } else {
            stalls = 0;
        }
    }
    Ok(ArOutcome {
        best,
        best_value,
        trace,
        evaluations,
    })
}

/// Maps free variables to the coefficients of a fixed structure.
///
/// The free variables are, in class order, every coefficient that is not
/// tied, not fixed and not the dependent one. The dependent coefficient is
/// the last untied, unfixed transmitted class; it is set so the transmitted
/// coefficients sum to one.
#[derive(Debug, Clone)]
pub struct CoefficientProblem {
    structure: Structure,
    rate: f64,
    channel: ChannelKind,
    de: DeConfig,
    free: Vec<usize>,
    dependent: usize,
}

impl CoefficientProblem {
    pub fn new(structure: Structure, rate: f64, channel: ChannelKind, de: DeConfig) -> Result<Self> {
        let n = structure.classes.len();
        let tied = |k: usize| structure.ties.iter().any(|&(t, _)| t == k);
        let fixed = |k: usize| structure.fixed.iter().any(|&(f, _)| f == k);
        let dependent = (0..n)
            .rev()
            .find(|&k| !structure.classes[k].0.is_punctured() && !tied(k) && !fixed(k))
            .ok_or_else(|| {
                Error::Config("structure needs an untied, unfixed transmitted class".into())
            })?;
        let free: Vec<usize> = (0..n)
            .filter(|&k| k != dependent && !tied(k) && !fixed(k))
            .collect();
        Ok(CoefficientProblem {
            structure,
            rate,
            channel,
            de,
            free,
            dependent,
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Class indices of the free variables.
    pub fn free_classes(&self) -> &[usize] {
        &self.free
    }

    pub fn bounds(&self) -> Result<Bounds> {
        Bounds::unit(self.dim())
    }

    /// All class coefficients implied by `x`; entries may be negative.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        let s = &self.structure;
        let mut c = vec![0.0; s.classes.len()];
        for (&k, &v) in self.free.iter().zip(x) {
            c[k] = v;
        }
        for &(k, v) in &s.fixed {
            c[k] = v;
        }
        // Ties pointing at the dependent class scale its share of the sum.
        let mut known = 0.0;
        let mut weight = 1.0;
        for (k, (b, _)) in s.classes.iter().enumerate() {
            if b.is_punctured() || k == self.dependent {
                continue;
            }
            match s.ties.iter().find(|&&(t, _)| t == k) {
                Some(&(_, src)) if src == self.dependent => weight += 1.0,
                Some(&(_, src)) => known += c[src],
                None => known += c[k],
            }
        }
        c[self.dependent] = (1.0 - known) / weight;
        for &(t, src) in &s.ties {
            c[t] = c[src];
        }
        c
    }

    /// Inverse of [`coefficients`](Self::coefficients) on the free classes.
    pub fn free_values(&self, coeffs: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&k| coeffs[k]).collect()
    }

    pub fn ensemble(&self, x: &[f64]) -> Result<Ensemble> {
        let c = self.coefficients(x);
        if let Some(k) = c.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::Infeasible(format!(
                "class {} coefficient {} is negative",
                k + 1,
                c[k]
            )));
        }
        let s = &self.structure;
        let vars = s
            .classes
            .iter()
            .zip(&c)
            .map(|((b, d), &v)| VariableClass::new(*b, d.clone(), v))
            .collect();
        let ens = complete_ensemble(vars, s.edge_types, self.rate, &s.check_groups)?;
        if let Some(cm) = s.c_max {
            if ens.chk_classes().len() > cm {
                return Err(Error::Infeasible(format!(
                    "{} check classes above {cm}",
                    ens.chk_classes().len()
                )));
            }
        }
        let report = ens.validate(CANDIDATE_TOL);
        if let Some(v) = report.first() {
            return Err(Error::Infeasible(format!("violates {}", v.constraint)));
        }
        Ok(ens)
    }

    pub fn feasible(&self, x: &[f64]) -> Result<()> {
        self.ensemble(x).map(|_| ())
    }

    pub fn threshold(&self, x: &[f64]) -> Result<ThresholdResult> {
        threshold(&self.ensemble(x)?, self.channel, &self.de)
    }

    /// Threshold, or `-inf` for infeasible points.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.threshold(x)
            .map(|r| r.threshold)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientOutcome {
    pub ensemble: Ensemble,
    pub threshold: ThresholdResult,
    pub trace: ArTrace,
    pub evaluations: usize,
}

/// Optimizes the coefficients of `structure` for `channel` at `rate`.
pub fn optimize_coefficients(
    structure: &Structure,
    rate: f64,
    channel: ChannelKind,
    de: &DeConfig,
    cfg: &ArConfig,
) -> Result<CoefficientOutcome> {
    let problem = CoefficientProblem::new(structure.clone(), rate, channel, *de)?;
    if problem.dim() == 0 {
        let threshold = problem.threshold(&[])?;
        return Ok(CoefficientOutcome {
            ensemble: problem.ensemble(&[])?,
            trace: ArTrace {
                generations: vec![ArGeneration {
                    generation: 0,
                    best_value: threshold.threshold,
                    search_range: 0.0,
                    best: Vec::new(),
                }],
            },
            threshold,
            evaluations: 1,
        });
    }
    let out = ar_optimize(
        &problem.bounds()?,
        &|x| problem.feasible(x),
        &|x| problem.objective(x),
        cfg,
    )?;
    Ok(CoefficientOutcome {
        ensemble: problem.ensemble(&out.best)?,
        threshold: problem.threshold(&out.best)?,
        trace: out.trace,
        evaluations: out.evaluations,
    })
}
