//! Modified clonal selection algorithm (MCSA) over SBT antibodies.
//!
//! Affinity is the average forecasting error rate (AFER) of an antibody's
//! one-step-ahead predictions on the training series, in percent; lower is
//! better. Each iteration sorts the population, clones the best fraction
//! (more clones for better ranks), hypermutates clones (harder for worse
//! ranks), drops clones similar to something already present, merges and
//! suppresses duplicates, keeps the best `P`, and tops the population back up
//! with fresh random antibodies.
//!
//! Every random draw comes from a stream keyed by `(seed, phase, iteration,
//! slot)`, so parallel and serial evaluation produce identical runs.

use std::cmp::Ordering;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{random_antibody, Antibody, ExpressionTree, ModelDoc, SbtTemplate};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McsaConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub cloning_coefficient: f64,
    pub reproduction_coefficient: f64,
    pub mutation_min: f64,
    pub mutation_max: f64,
    pub constant_sigma: f64,
    pub similarity_constant_tol: f64,
    pub stagnation_window: Option<usize>,
    pub seed: u64,
    pub template: SbtTemplate,
    pub constant_range: (f64, f64),
}

impl Default for McsaConfig {
    fn default() -> Self {
        McsaConfig {
            population_size: 20,
            iterations: 600,
            cloning_coefficient: 0.3,
            reproduction_coefficient: 0.8,
            mutation_min: 0.05,
            mutation_max: 0.4,
            constant_sigma: 0.1,
            similarity_constant_tol: 1e-3,
            stagnation_window: None,
            seed: 0,
            template: SbtTemplate::default(),
            constant_range: (-250.0, 250.0),
        }
    }
}

impl McsaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if !(self.cloning_coefficient > 0.0 && self.cloning_coefficient <= 1.0) {
            return bad("cloning_coefficient must lie in (0, 1]");
        }
        if !(self.reproduction_coefficient > 0.0 && self.reproduction_coefficient <= 1.0) {
            return bad("reproduction_coefficient must lie in (0, 1]");
        }
        if !(0.0 <= self.mutation_min
            && self.mutation_min <= self.mutation_max
            && self.mutation_max <= 1.0)
        {
            return bad("mutation probabilities must satisfy 0 <= min <= max <= 1");
        }
        if !(self.constant_sigma >= 0.0) || !(self.similarity_constant_tol >= 0.0) {
            return bad("constant_sigma and similarity_constant_tol must be non-negative");
        }
        let (lo, hi) = self.constant_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("constant_range must be a finite interval");
        }
        if self.template.spine_count < 1 {
            return bad("template spine_count must be at least 1");
        }
        if self.stagnation_window == Some(0) {
            return bad("stagnation_window must be positive when set");
        }
        Ok(())
    }

    /// Number of antibodies selected for cloning, `⌈β·P⌉`.
    pub fn selected_count(&self) -> usize {
        let raw = self.cloning_coefficient * self.population_size as f64;
        ((raw - 1e-9).ceil() as usize).clamp(1, self.population_size)
    }

    /// Clones produced by the antibody at 1-based `rank`: `max(1, round(ρ·P/rank))`.
    pub fn clone_count(&self, rank: usize) -> usize {
        let raw = self.reproduction_coefficient * self.population_size as f64 / rank as f64;
        (raw.round() as usize).max(1)
    }

    /// Per-locus mutation probability for a clone of the parent at `rank`.
    pub fn mutation_probability(&self, rank: usize, n_sel: usize) -> f64 {
        let span = (n_sel.max(2) - 1) as f64;
        self.mutation_min
            + (self.mutation_max - self.mutation_min) * (rank.saturating_sub(1)) as f64 / span
    }
}

/// Average forecasting error rate in percent over positions `k+1..=n`.
///
/// `forecast` receives the lag window `[d[j-1], d[j-2], ..., d[j-k]]` and
/// returns `None` for an invalid prediction, which makes the whole score `+∞`.
pub fn afer<F>(actual: &[f64], k: usize, forecast: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let n = actual.len();
    if n <= k {
        return Err(Error::TrainTooShort { len: n, needed: k });
    }
    if let Some(j) = (k..n).find(|&j| actual[j] == 0.0) {
        return Err(Error::ZeroDenominator { position: j + 1 });
    }
    Ok(afer_unchecked(actual, k, forecast))
}

fn afer_unchecked<F>(actual: &[f64], k: usize, forecast: F) -> f64
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let n = actual.len();
    let rev: Vec<f64> = actual.iter().rev().copied().collect();
    let mut sum = 0.0;
    for j in k..n {
        let window = &rev[n - j..n - j + k];
        match forecast(window) {
            Some(f) => sum += ((f - actual[j]) / actual[j]).abs(),
            None => return f64::INFINITY,
        }
    }
    let score = sum * 100.0 / (n - k) as f64;
    if score.is_nan() {
        f64::INFINITY
    } else {
        score
    }
}

/// AFER of an antibody's decoded model at its effective order.
pub fn antibody_afer(ab: &Antibody, actual: &[f64]) -> Result<f64> {
    let k = ab.effective_order()?;
    let tree = ab.to_tree();
    afer(actual, k, |w| tree.evaluate_unchecked(w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityRecord {
    pub antibody: Antibody,
    pub affinity: f64,
}

fn by_affinity(a: &AffinityRecord, b: &AffinityRecord) -> Ordering {
    a.affinity.total_cmp(&b.affinity)
}

/// A clone awaiting mutation, tagged with its parent's 1-based rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ClonedAntibody {
    pub antibody: Antibody,
    pub rank: usize,
}

/// Clones the `⌈β·P⌉` best antibodies of an ascending-sorted population.
pub fn select_and_clone(population: &[AffinityRecord], cfg: &McsaConfig) -> Vec<ClonedAntibody> {
    let n_sel = cfg.selected_count().min(population.len());
    population[..n_sel]
        .iter()
        .enumerate()
        .flat_map(|(i, rec)| {
            let rank = i + 1;
            (0..cfg.clone_count(rank)).map(move |_| ClonedAntibody {
                antibody: rec.antibody.clone(),
                rank,
            })
        })
        .collect()
}

/// Rank-scaled point mutation; the result always differs from `clone`.
pub fn hypermutate<R: Rng>(
    clone: &Antibody,
    rank: usize,
    n_sel: usize,
    cfg: &McsaConfig,
    rng: &mut R,
) -> Antibody {
    let p = cfg.mutation_probability(rank, n_sel);
    loop {
        let mut ab = clone.clone();
        for locus in ab.loci() {
            if rng.random::<f64>() < p {
                ab.resample_locus(locus, false, cfg.constant_range, rng);
            }
        }
        let (lo, hi) = cfg.constant_range;
        for c in ab.constants.iter_mut() {
            if rng.random::<f64>() < p {
                let z: f64 = StandardNormal.sample(rng);
                *c = (*c + z * cfg.constant_sigma * c.abs().max(1.0)).clamp(lo, hi);
            }
        }
        if ab == *clone {
            let loci = ab.loci();
            let locus = loci[rng.random_range(0..loci.len())];
            ab.resample_locus(locus, true, cfg.constant_range, rng);
        }
        if ab.effective_order().is_ok() {
            return ab;
        }
    }
}

/// Drops clones similar to a population member or to an earlier surviving clone.
pub fn self_destruct_similar(
    clones: Vec<ClonedAntibody>,
    population: &[AffinityRecord],
    cfg: &McsaConfig,
) -> Vec<ClonedAntibody> {
    let tol = cfg.similarity_constant_tol;
    let mut survivors: Vec<ClonedAntibody> = Vec::with_capacity(clones.len());
    for c in clones {
        let dup = population
            .iter()
            .any(|p| p.antibody.is_similar(&c.antibody, tol))
            || survivors
                .iter()
                .any(|s| s.antibody.is_similar(&c.antibody, tol));
        if !dup {
            survivors.push(c);
        }
    }
    survivors
}

/// Keeps the first of each group of similar records; input must already be sorted.
fn suppress(sorted: Vec<AffinityRecord>, tol: f64) -> Vec<AffinityRecord> {
    let mut kept: Vec<AffinityRecord> = Vec::with_capacity(sorted.len());
    for rec in sorted {
        if !kept
            .iter()
            .any(|k| k.antibody.is_similar(&rec.antibody, tol))
        {
            kept.push(rec);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub best_afer: f64,
    /// Mean over antibodies with finite affinity.
    pub mean_afer: f64,
    pub invalid_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub antibody: Antibody,
    pub train_afer: f64,
    pub analytic: String,
    pub order_k: usize,
    pub seed: u64,
    pub trace: Vec<IterationStats>,
}

impl FittedModel {
    pub fn tree(&self) -> ExpressionTree {
        self.antibody.to_tree()
    }

    /// Wraps an already-known antibody (e.g. loaded from disk) with its score.
    pub fn from_antibody(antibody: Antibody, train_afer: f64, seed: u64) -> Result<Self> {
        let order_k = antibody.effective_order()?;
        Ok(FittedModel {
            analytic: antibody.to_tree().to_analytic_string(),
            antibody,
            train_afer,
            order_k,
            seed,
            trace: Vec::new(),
        })
    }

    pub fn to_doc(&self, config_digest: &str, train_range: Option<(i64, i64)>) -> FittedModelDoc {
        FittedModelDoc {
            model: ModelDoc::new(&self.antibody, self.train_afer),
            seed: self.seed,
            config_digest: config_digest.to_string(),
            train_range,
        }
    }
}

/// Model file with provenance: the genome model fields plus seed, digest and training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModelDoc {
    #[serde(flatten)]
    pub model: ModelDoc,
    pub seed: u64,
    pub config_digest: String,
    pub train_range: Option<(i64, i64)>,
}

impl FittedModelDoc {
    pub fn fitted(&self) -> Result<FittedModel> {
        let ab = self.model.antibody()?;
        FittedModel::from_antibody(
            ab,
            self.model.train_afer.unwrap_or(f64::INFINITY),
            self.seed,
        )
    }
}

/// Writes `iteration,best_afer,mean_afer,invalid_count` rows.
pub fn write_fit_log<W: Write>(trace: &[IterationStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "best_afer", "mean_afer", "invalid_count"])?;
    for s in trace {
        w.write_record([
            s.iteration.to_string(),
            s.best_afer.to_string(),
            s.mean_afer.to_string(),
            s.invalid_count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("fit log", e))?;
    Ok(())
}

fn check_train(train: &[f64], template: SbtTemplate) -> Result<()> {
    let needed = template.k_max() + 1;
    if train.len() <= needed {
        return Err(Error::TrainTooShort {
            len: train.len(),
            needed,
        });
    }
    if let Some(j) = train.iter().skip(1).position(|&v| v == 0.0) {
        return Err(Error::ZeroDenominator { position: j + 2 });
    }
    if let Some(j) = train.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidSeries {
            id: "train".into(),
            message: format!("value at position {} is not finite", j + 1),
        });
    }
    Ok(())
}

fn score(ab: &Antibody, train: &[f64]) -> f64 {
    let k = ab
        .effective_order()
        .expect("antibodies keep a lagged terminal");
    let tree = ab.to_tree();
    afer_unchecked(train, k, |w| tree.evaluate_unchecked(w))
}

fn evaluate_all(antibodies: Vec<Antibody>, train: &[f64]) -> Vec<AffinityRecord> {
    antibodies
        .into_par_iter()
        .map(|antibody| AffinityRecord {
            affinity: score(&antibody, train),
            antibody,
        })
        .collect()
}

fn stats(iteration: usize, best: f64, population: &[AffinityRecord]) -> IterationStats {
    let finite: Vec<f64> = population
        .iter()
        .map(|r| r.affinity)
        .filter(|a| a.is_finite())
        .collect();
    IterationStats {
        iteration,
        best_afer: best,
        mean_afer: if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        },
        invalid_count: population.len() - finite.len(),
    }
}

const PHASE_INIT: u64 = 0;
const PHASE_MUTATE: u64 = 1;
const PHASE_REPLENISH: u64 = 2;
const PHASE_SEED: u64 = 3;

/// Runs MCSA from a random initial population.
pub fn mcsa_run(train: &[f64], cfg: &McsaConfig) -> Result<FittedModel> {
    mcsa_run_seeded(train, cfg, &[])
}

/// Runs MCSA with the first population slots filled by `seeds` (extra seeds are ignored).
pub fn mcsa_run_seeded(train: &[f64], cfg: &McsaConfig, seeds: &[Antibody]) -> Result<FittedModel> {
    cfg.validate()?;
    check_train(train, cfg.template)?;
    for s in seeds {
        s.validate()?;
        if s.template != cfg.template {
            return Err(Error::InvalidConfig(format!(
                "seed antibody has spine count {}, configuration expects {}",
                s.template.spine_count, cfg.template.spine_count
            )));
        }
    }
    let p = cfg.population_size;
    let tol = cfg.similarity_constant_tol;

    let initial: Vec<Antibody> = (0..p)
        .map(|slot| match seeds.get(slot) {
            Some(s) => s.clone(),
            None => random_antibody(
                cfg.template,
                &mut rng::stream(cfg.seed, &[PHASE_INIT, slot as u64]),
                cfg.constant_range,
            ),
        })
        .collect();
    let mut population = evaluate_all(initial, train);
    population.sort_by(by_affinity);
    let mut best = population[0].clone();
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut since_improvement = 0;

    for iteration in 1..=cfg.iterations {
        debug_assert_eq!(population.len(), p);
        population.sort_by(by_affinity);
        let n_sel = cfg.selected_count();
        let clones = select_and_clone(&population, cfg);
        let mutated: Vec<ClonedAntibody> = clones
            .into_par_iter()
            .enumerate()
            .map(|(slot, c)| {
                let mut r = rng::stream(cfg.seed, &[PHASE_MUTATE, iteration as u64, slot as u64]);
                ClonedAntibody {
                    antibody: hypermutate(&c.antibody, c.rank, n_sel, cfg, &mut r),
                    rank: c.rank,
                }
            })
            .collect();
        let survivors = self_destruct_similar(mutated, &population, cfg);
        let scored = evaluate_all(survivors.into_iter().map(|c| c.antibody).collect(), train);

        let mut merged = std::mem::take(&mut population);
        merged.extend(scored);
        merged.sort_by(by_affinity);
        let mut next = suppress(merged, tol);
        next.truncate(p);

        let missing = p - next.len();
        let fresh: Vec<Antibody> = (0..missing)
            .map(|slot| {
                random_antibody(
                    cfg.template,
                    &mut rng::stream(cfg.seed, &[PHASE_REPLENISH, iteration as u64, slot as u64]),
                    cfg.constant_range,
                )
            })
            .collect();
        next.extend(evaluate_all(fresh, train));
        next.sort_by(by_affinity);
        population = next;

        if population[0].affinity < best.affinity {
            best = population[0].clone();
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        trace.push(stats(iteration, best.affinity, &population));
        if cfg
            .stagnation_window
            .is_some_and(|w| since_improvement >= w)
        {
            break;
        }
    }

    let mut model = FittedModel::from_antibody(best.antibody, best.affinity, cfg.seed)?;
    model.trace = trace;
    Ok(model)
}

/// `ab` followed by `P − 1` hypermutated variants of it, for warm-started runs.
pub fn seeded_population(ab: &Antibody, cfg: &McsaConfig) -> Vec<Antibody> {
    let n_sel = cfg.selected_count();
    let mut out = vec![ab.clone()];
    for slot in 1..cfg.population_size {
        let rank = (slot - 1) % n_sel + 1;
        let mut r = rng::stream(cfg.seed, &[PHASE_SEED, slot as u64]);
        out.push(hypermutate(ab, rank, n_sel, cfg, &mut r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Locus;

    fn cfg() -> McsaConfig {
        McsaConfig::default()
    }

    #[test]
    fn afer_examples() {
        let d = [1.0, 2.0, 3.0, 4.0];
        // perfect one-step forecast: f = d[j-1] + 1
        assert_eq!(afer(&d, 1, |w| Some(w[0] + 1.0)).unwrap(), 0.0);
        assert_eq!(afer(&[5.0, 2.0], 1, |_| Some(1.0)).unwrap(), 50.0);
        let d = [7.0, 1.0, 2.0];
        let f = [1.1, 1.8];
        let got = afer(&d, 1, |w| Some(if w[0] == 7.0 { f[0] } else { f[1] })).unwrap();
        assert!((got - 10.0).abs() < 1e-12);
    }

    #[test]
    fn afer_errors_and_invalid() {
        assert!(matches!(
            afer(&[1.0, 0.0, 2.0], 1, |_| Some(1.0)),
            Err(Error::ZeroDenominator { position: 2 })
        ));
        assert!(matches!(
            afer(&[1.0, 2.0], 2, |_| Some(1.0)),
            Err(Error::TrainTooShort { .. })
        ));
        // the first k values are never scored, so a zero there is fine
        assert!(afer(&[0.0, 2.0], 1, |_| Some(2.0)).is_ok());
        assert_eq!(afer(&[1.0, 2.0, 3.0], 1, |_| None).unwrap(), f64::INFINITY);
    }

    #[test]
    fn afer_window_orientation() {
        let d = [1.0, 2.0, 4.0, 8.0, 16.0];
        // d[j] = d[j-1] + d[j-2] + ... no: d[j] = 2·d[j-1] = d[j-1] + 2·d[j-2]
        let got = afer(&d, 2, |w| Some(w[0] + 2.0 * w[1])).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn selection_counts() {
        let c = cfg();
        assert_eq!(c.selected_count(), 6);
        let counts: Vec<usize> = (1..=6).map(|r| c.clone_count(r)).collect();
        assert_eq!(counts, vec![16, 8, 5, 4, 3, 3]);
        assert_eq!(counts.iter().sum::<usize>(), 39);
        let one = McsaConfig {
            cloning_coefficient: 1.0 / 20.0,
            ..cfg()
        };
        assert_eq!(one.selected_count(), 1);
    }

    #[test]
    fn select_and_clone_uses_ranks() {
        let c = cfg();
        let mut r = rng::stream(1, &[]);
        let population: Vec<AffinityRecord> = (0..20)
            .map(|i| AffinityRecord {
                antibody: random_antibody(c.template, &mut r, c.constant_range),
                affinity: i as f64,
            })
            .collect();
        let clones = select_and_clone(&population, &c);
        assert_eq!(clones.len(), 39);
        assert!(clones[..16]
            .iter()
            .all(|k| k.rank == 1 && k.antibody == population[0].antibody));
        assert_eq!(clones.last().unwrap().rank, 6);
    }

    #[test]
    fn mutation_schedule_endpoints() {
        let c = cfg();
        assert_eq!(c.mutation_probability(1, 6), c.mutation_min);
        assert!((c.mutation_probability(6, 6) - c.mutation_max).abs() < 1e-15);
        assert_eq!(c.mutation_probability(1, 1), c.mutation_min);
    }

    #[test]
    fn hypermutation_always_changes_something() {
        let c = McsaConfig {
            mutation_min: 0.0,
            mutation_max: 0.0,
            ..cfg()
        };
        let mut r = rng::stream(9, &[]);
        for _ in 0..500 {
            let ab = random_antibody(c.template, &mut r, c.constant_range);
            let m = hypermutate(&ab, 1, 6, &c, &mut r);
            assert_ne!(m, ab);
            m.validate().unwrap();
            assert_eq!(m.template, ab.template);
        }
    }

    #[test]
    fn full_rate_mutation_hamming_distance() {
        let c = McsaConfig {
            mutation_min: 1.0,
            mutation_max: 1.0,
            template: SbtTemplate::new(1).unwrap(),
            ..cfg()
        };
        let mut r = rng::stream(21, &[]);
        let base = random_antibody(c.template, &mut r, c.constant_range);
        let loci = base.loci();
        let expected: f64 = loci
            .iter()
            .map(|&l| 1.0 - 1.0 / base.alphabet_size(l) as f64)
            .sum();
        let trials = 10_000;
        let mut total = 0usize;
        for _ in 0..trials {
            let m = hypermutate(&base, 1, 6, &c, &mut r);
            total += hamming(&base, &m, &loci);
        }
        let mean = total as f64 / trials as f64;
        // redraws of all-constant leaves and the forced-change rule nudge this slightly
        assert!(
            (mean - expected).abs() < 0.15,
            "mean {mean}, expected {expected}"
        );
    }

    fn hamming(a: &Antibody, b: &Antibody, loci: &[Locus]) -> usize {
        loci.iter()
            .filter(|&&l| match l {
                Locus::InternalFunctional(i) => {
                    a.internal_genes[i].functional != b.internal_genes[i].functional
                }
                Locus::Operation(i) => {
                    a.internal_genes[i].operation != b.internal_genes[i].operation
                }
                Locus::LeafFunctional(i) => {
                    a.leaf_genes[i].functional != b.leaf_genes[i].functional
                }
                Locus::Terminal(i) => a.leaf_genes[i].terminal != b.leaf_genes[i].terminal,
            })
            .count()
    }

    #[test]
    fn similarity_rule() {
        let c = cfg();
        let ab = Antibody::parse("L*S/S?SdC-S+EaCbEa", &[100.0]).unwrap();
        let near = Antibody::parse("L*S/S?SdC-S+EaCbEa", &[100.05]).unwrap();
        let far = Antibody::parse("L*S/S?SdC-S+EaCbEa", &[150.0]).unwrap();
        let clone = |a: &Antibody| ClonedAntibody {
            antibody: a.clone(),
            rank: 1,
        };
        assert_eq!(
            self_destruct_similar(vec![clone(&ab), clone(&ab)], &[], &c).len(),
            1
        );
        assert_eq!(
            self_destruct_similar(vec![clone(&ab), clone(&near)], &[], &c).len(),
            1
        );
        assert_eq!(
            self_destruct_similar(vec![clone(&ab), clone(&far)], &[], &c).len(),
            2
        );
        let pop = [AffinityRecord {
            antibody: ab.clone(),
            affinity: 1.0,
        }];
        assert!(self_destruct_similar(vec![clone(&ab)], &pop, &c).is_empty());
    }

    fn planted_train() -> Vec<f64> {
        // d[j] = d[j-1] + sin(d[j-2]) over a few points, no zeros
        let mut d: Vec<f64> = vec![3.0, 3.5, 4.0, 4.2, 4.1, 4.4];
        while d.len() < 20 {
            let j = d.len();
            let next = d[j - 1] + 0.3 * d[j - 2].sin();
            d.push(next);
        }
        d
    }

    #[test]
    fn minimal_run() {
        let c = McsaConfig {
            population_size: 2,
            iterations: 1,
            template: SbtTemplate::new(1).unwrap(),
            ..cfg()
        };
        let m = mcsa_run(&planted_train(), &c).unwrap();
        assert_eq!(m.trace.len(), 1);
        assert!(m.train_afer >= 0.0);
    }

    #[test]
    fn trace_monotone_and_deterministic() {
        let c = McsaConfig {
            iterations: 80,
            template: SbtTemplate::new(1).unwrap(),
            seed: 5,
            ..cfg()
        };
        let train = planted_train();
        let a = mcsa_run(&train, &c).unwrap();
        for w in a.trace.windows(2) {
            assert!(w[1].best_afer <= w[0].best_afer);
        }
        let b = mcsa_run(&train, &c).unwrap();
        assert_eq!(a, b);
        let recomputed = antibody_afer(&a.antibody, &train).unwrap();
        assert_eq!(recomputed, a.train_afer);
    }

    #[test]
    fn stagnation_stops_early() {
        let c = McsaConfig {
            iterations: 10_000,
            stagnation_window: Some(5),
            template: SbtTemplate::new(1).unwrap(),
            ..cfg()
        };
        let m = mcsa_run(&planted_train(), &c).unwrap();
        assert!(m.trace.len() < 10_000);
    }

    #[test]
    fn rejects_bad_training_data() {
        let c = McsaConfig {
            template: SbtTemplate::new(1).unwrap(),
            ..cfg()
        };
        assert!(matches!(
            mcsa_run(&[1.0; 6], &c),
            Err(Error::TrainTooShort { .. })
        ));
        let mut t = planted_train();
        t[4] = 0.0;
        assert!(matches!(
            mcsa_run(&t, &c),
            Err(Error::ZeroDenominator { position: 5 })
        ));
        let bad = McsaConfig {
            population_size: 1,
            ..c
        };
        assert!(mcsa_run(&planted_train(), &bad).is_err());
    }

    #[test]
    fn seeded_run_never_worse_than_seed() {
        let c = McsaConfig {
            iterations: 20,
            template: SbtTemplate::new(1).unwrap(),
            ..cfg()
        };
        let train = planted_train();
        let seed_ab = Antibody::parse("_+_-_a_aC-_+_a_a_a", &[]).unwrap();
        let seed_score = antibody_afer(&seed_ab, &train).unwrap();
        let seeds = seeded_population(&seed_ab, &c);
        assert_eq!(seeds.len(), c.population_size);
        assert_eq!(seeds[0], seed_ab);
        let m = mcsa_run_seeded(&train, &c, &seeds).unwrap();
        assert!(m.train_afer <= seed_score);
    }

    #[test]
    fn fit_log_format() {
        let trace = vec![IterationStats {
            iteration: 1,
            best_afer: 0.5,
            mean_afer: 2.25,
            invalid_count: 3,
        }];
        let mut buf = Vec::new();
        write_fit_log(&trace, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,best_afer,mean_afer,invalid_count\n1,0.5,2.25,3\n"
        );
    }
}
