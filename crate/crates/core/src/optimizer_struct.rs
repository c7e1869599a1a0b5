//! Differential evolution over integer structure genes.
//!
//! Every gene decodes to a structure through a [`StructureTemplate`] and is
//! scored by an inner adaptive-range run over its coefficients. The outer
//! search is rand/1/bin: `mutant = a + round(F (b - c))` clamped to the
//! domains, binomial crossover with one forced coordinate, and greedy
//! replacement. Equal thresholds prefer the lower maximum variable degree.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density_evolution::{ChannelKind, DeConfig};
use crate::error::{Error, Result};
use crate::optimizer_ar::{optimize_coefficients, ArConfig, CoefficientOutcome};
use crate::template::{Structure, StructureTemplate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifeConfig {
    pub population: usize,
    pub f: f64,
    pub cr: f64,
    pub max_generations: usize,
    pub stall_generations: usize,
    pub seed: u64,
}

impl Default for DifeConfig {
    fn default() -> Self {
        DifeConfig {
            population: 10,
            f: 0.5,
            cr: 0.8,
            max_generations: 30,
            stall_generations: 3,
            seed: 0,
        }
    }
}

impl DifeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::Config(format!(
                "population {} is below 4",
                self.population
            )));
        }
        if !(self.f > 0.0 && self.f.is_finite()) || !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::Config(format!(
                "need F > 0 and CR in [0, 1], got F={} CR={}",
                self.f, self.cr
            )));
        }
        if self.stall_generations == 0 {
            return Err(Error::Config("stall_generations must be positive".into()));
        }
        Ok(())
    }
}

/// Finalizer of splitmix64.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the inner run for `gene`: a stable function of the master seed
/// and the gene content only.
pub fn gene_seed(master: u64, gene: &[u32]) -> u64 {
    gene.iter()
        .fold(mix64(master), |h, &g| mix64(h ^ u64::from(g)))
}

/// Score of one gene.
#[derive(Debug, Clone)]
pub struct GeneScore {
    /// Best inner threshold, `-inf` when the gene is infeasible.
    pub threshold: f64,
    pub max_degree: u32,
    pub outcome: Option<Arc<CoefficientOutcome>>,
}

impl GeneScore {
    fn infeasible() -> Self {
        GeneScore {
            threshold: f64::NEG_INFINITY,
            max_degree: u32::MAX,
            outcome: None,
        }
    }

    /// Higher threshold wins; equal thresholds go to the lower maximum degree.
    pub fn beats(&self, other: &GeneScore) -> bool {
        self.threshold > other.threshold
            || (self.threshold == other.threshold && self.max_degree < other.max_degree)
    }
}

/// Everything the score of a gene depends on besides the gene itself.
#[derive(Debug, Clone)]
pub struct StructProblem<'a> {
    pub template: &'a StructureTemplate,
    pub rate: f64,
    pub channel: ChannelKind,
    pub de: DeConfig,
    pub ar: ArConfig,
}

impl StructProblem<'_> {
    fn fingerprint(&self) -> String {
        format!(
            "{:?}|{}|{}|{:?}|{:?}",
            self.template, self.rate, self.channel, self.de, self.ar
        )
    }

    pub fn decode(&self, gene: &[u32]) -> Result<Structure> {
        self.template.decode_gene(gene)
    }

    /// Runs the inner optimization for `gene`.
    pub fn score(&self, gene: &[u32]) -> GeneScore {
        let Ok(structure) = self.decode(gene) else {
            return GeneScore::infeasible();
        };
        let ar = ArConfig {
            seed: gene_seed(self.ar.seed, gene),
            ..self.ar
        };
        match optimize_coefficients(&structure, self.rate, self.channel, &self.de, &ar) {
            Ok(o) => GeneScore {
                threshold: o.threshold.threshold,
                max_degree: o.ensemble.max_variable_degree(),
                outcome: Some(Arc::new(o)),
            },
            Err(_) => GeneScore::infeasible(),
        }
    }
}

/// Threshold of the best coefficients for `gene`, or `-inf`.
pub fn struct_objective(problem: &StructProblem<'_>, gene: &[u32]) -> f64 {
    problem.score(gene).threshold
}

/// Problem fingerprint and the scores computed under it.
type Bound = (Option<String>, HashMap<Vec<u32>, GeneScore>);

/// Gene scores shared between runs of the same problem.
#[derive(Debug, Default)]
pub struct GeneCache {
    inner: Mutex<Bound>,
}

impl GeneCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bind(&self, fingerprint: String) -> Result<()> {
        let mut g = self.inner.lock().expect("cache lock");
        match &g.0 {
            Some(f) if *f != fingerprint => Err(Error::Config(
                "gene cache was filled by a different problem".into(),
            )),
            Some(_) => Ok(()),
            None => {
                g.0 = Some(fingerprint);
                Ok(())
            }
        }
    }

    fn get(&self, gene: &[u32]) -> Option<GeneScore> {
        self.inner.lock().expect("cache lock").1.get(gene).cloned()
    }

    fn insert(&self, gene: Vec<u32>, score: GeneScore) {
        self.inner.lock().expect("cache lock").1.insert(gene, score);
    }

    /// Scores `genes`, running each distinct uncached gene once, in parallel.
    fn score_all(&self, problem: &StructProblem<'_>, genes: &[Vec<u32>]) -> (Vec<GeneScore>, usize) {
        let mut todo: Vec<&Vec<u32>> = Vec::new();
        for g in genes {
            if self.get(g).is_none() && !todo.contains(&g) {
                todo.push(g);
            }
        }
        let fresh: Vec<GeneScore> = todo.par_iter().map(|g| problem.score(g)).collect();
        for (g, s) in todo.iter().zip(fresh) {
            self.insert((*g).clone(), s);
        }
        let scores = genes
            .iter()
            .map(|g| self.get(g).expect("scored above"))
            .collect();
        (scores, todo.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifeGeneration {
    pub generation: usize,
    pub best_threshold: f64,
    pub best_gene: Vec<u32>,
    /// Every member's gene after selection.
    pub population: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DifeTrace {
    pub generations: Vec<DifeGeneration>,
}

fn gene_text(g: &[u32]) -> String {
    g.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

impl DifeTrace {
    /// One row per generation: `generation,best_threshold,best_gene`, with
    /// the gene entries separated by spaces.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,best_threshold,best_gene\n");
        for g in &self.generations {
            let _ = writeln!(
                out,
                "{},{},{}",
                g.generation,
                g.best_threshold,
                gene_text(&g.best_gene)
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DifeOutcome {
    pub gene: Vec<u32>,
    pub structure: Structure,
    pub best: Arc<CoefficientOutcome>,
    pub trace: DifeTrace,
    /// Inner runs started by this call (cache misses).
    pub evaluations: usize,
}

fn random_gene(domains: &[(u32, u32)], rng: &mut impl Rng) -> Vec<u32> {
    domains
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..=hi))
        .collect()
}

/// Initial population: the whole gene space when it fits, otherwise
/// distinct uniform draws.
fn initial_population(
    template: &StructureTemplate,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<u32>> {
    let domains = template.gene_domains();
    if let Some(mut all) = template.enumerate_genes(n as u64) {
        while all.len() < n {
            all.push(random_gene(&domains, rng));
        }
        return all;
    }
    let mut pop: Vec<Vec<u32>> = Vec::with_capacity(n);
    while pop.len() < n {
        let mut g = random_gene(&domains, rng);
        for _ in 0..1000 {
            if !pop.contains(&g) {
                break;
            }
            g = random_gene(&domains, rng);
        }
        pop.push(g);
    }
    pop
}

fn best_index(scores: &[GeneScore]) -> usize {
    let mut b = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.beats(&scores[b]) {
            b = i;
        }
    }
    b
}

/// Three distinct member indices, all different from `i`.
fn pick_three(n: usize, i: usize, rng: &mut impl Rng) -> [usize; 3] {
    let mut out = [0; 3];
    let mut k = 0;
    while k < 3 {
        let c = rng.random_range(0..n);
        if c != i && !out[..k].contains(&c) {
            out[k] = c;
            k += 1;
        }
    }
    out
}

/// Joint structure and coefficient optimization. `cache`, when given, is
/// reused across calls on the same problem.
pub fn dife_optimize(
    problem: &StructProblem<'_>,
    cfg: &DifeConfig,
    cache: Option<&GeneCache>,
) -> Result<DifeOutcome> {
    cfg.validate()?;
    problem.ar.validate()?;
    let local = GeneCache::new();
    let cache = cache.unwrap_or(&local);
    cache.bind(problem.fingerprint())?;
    let domains = problem.template.gene_domains();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop = initial_population(problem.template, cfg.population, &mut rng);
    let (mut scores, mut evaluations) = cache.score_all(problem, &pop);
    let mut b = best_index(&scores);
    let mut trace = DifeTrace::default();
    let record = |generation, pop: &[Vec<u32>], scores: &[GeneScore], b: usize| DifeGeneration {
        generation,
        best_threshold: scores[b].threshold,
        best_gene: pop[b].clone(),
        population: pop.to_vec(),
    };
    trace.generations.push(record(0, &pop, &scores, b));

    let mut stalls = 0;
    if !domains.is_empty() {
        for generation in 1..=cfg.max_generations {
            let trials: Vec<Vec<u32>> = (0..pop.len())
                .map(|i| {
                    let [a, bb, c] = pick_three(pop.len(), i, &mut rng);
                    let forced = rng.random_range(0..domains.len());
                    domains
                        .iter()
                        .enumerate()
                        .map(|(j, &(lo, hi))| {
                            let cross = j == forced || rng.random::<f64>() < cfg.cr;
                            if !cross {
                                return pop[i][j];
                            }
                            let diff = f64::from(pop[bb][j]) - f64::from(pop[c][j]);
                            let v = (f64::from(pop[a][j]) + (cfg.f * diff).round())
                                .clamp(f64::from(lo), f64::from(hi));
                            v as u32
                        })
                        .collect()
                })
                .collect();
            let (trial_scores, n) = cache.score_all(problem, &trials);
            evaluations += n;
            let before = scores[b].clone();
            for (i, (t, s)) in trials.into_iter().zip(trial_scores).enumerate() {
                if s.beats(&scores[i]) {
                    pop[i] = t;
                    scores[i] = s;
                }
            }
            b = best_index(&scores);
            trace.generations.push(record(generation, &pop, &scores, b));
            if scores[b].beats(&before) {
                stalls = 0;
            } else {
                stalls += 1;
                if stalls >= cfg.stall_generations {
                    break;
                }
            }
        }
    }

    let best = scores[b].outcome.clone().ok_or_else(|| {
        Error::Infeasible("no gene in the final population is feasible".into())
    })?;
    Ok(DifeOutcome {
        gene: pop[b].clone(),
        structure: problem.decode(&pop[b])?,
        best,
        trace,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::parse_template;

    fn problem(t: &StructureTemplate) -> StructProblem<'_> {
        StructProblem {
            template: t,
            rate: 0.5,
            channel: ChannelKind::Bec,
            de: DeConfig::default(),
            ar: ArConfig {
                pop_size: 10,
                ..ArConfig::default()
            },
        }
    }

    const TOY: &str = "\
met-template v1
edge_types 1
v_max 2
c_max 2
d_vmax 10
group 1 residual
class b=channel d=2..3
class b=channel d=5..6
";

    #[test]
    fn gene_seed_depends_on_content() {
        assert_eq!(gene_seed(1, &[2, 3]), gene_seed(1, &[2, 3]));
        assert_ne!(gene_seed(1, &[2, 3]), gene_seed(1, &[3, 2]));
        assert_ne!(gene_seed(1, &[2, 3]), gene_seed(2, &[2, 3]));
    }

    #[test]
    fn config_validation() {
        let t = parse_template(TOY).unwrap();
        let cfg = DifeConfig {
            population: 3,
            ..DifeConfig::default()
        };
        assert!(matches!(dife_optimize(&problem(&t), &cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn tie_break_prefers_lower_degree() {
        let a = GeneScore {
            threshold: 0.4,
            max_degree: 5,
            outcome: None,
        };
        let b = GeneScore {
            max_degree: 6,
            ..a.clone()
        };
        assert!(a.beats(&b) && !b.beats(&a) && !a.beats(&a));
        assert!(!GeneScore::infeasible().beats(&b));
    }

    #[test]
    fn small_space_is_fully_evaluated() {
        let t = parse_template(TOY).unwrap();
        let cache = GeneCache::new();
        let cfg = DifeConfig {
            population: 4,
            ..DifeConfig::default()
        };
        let out = dife_optimize(&problem(&t), &cfg, Some(&cache)).unwrap();
        assert_eq!(cache.len(), 4);
        let p = problem(&t);
        let best = t
            .enumerate_genes(4)
            .unwrap()
            .into_iter()
            .map(|g| struct_objective(&p, &g))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.best.threshold.threshold, best);
        assert!(out.trace.to_csv().starts_with("generation,best_threshold,best_gene\n"));
    }

    #[test]
    fn cache_refuses_other_problems() {
        let t = parse_template(TOY).unwrap();
        let cache = GeneCache::new();
        let cfg = DifeConfig {
            population: 4,
            max_generations: 0,
            ..DifeConfig::default()
        };
        dife_optimize(&problem(&t), &cfg, Some(&cache)).unwrap();
        let mut other = problem(&t);
        other.rate = 0.4;
        assert!(matches!(dife_optimize(&other, &cfg, Some(&cache)), Err(Error::Config(_))));
    }
}
