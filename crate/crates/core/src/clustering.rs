//! Crisp k-means over time series under a recency-weighted Euclidean metric.
//!
//! Element `j` (1-based) of an `n`-point series carries weight `j/n`, so
//! differences near the forecast origin count more than early ones. Because
//! the weights are shared by every member of a cluster, the elementwise mean is
//! still the optimal centroid and the usual Lloyd iteration applies.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::Dataset;

/// Squared recency-weighted distance, `Σ_j (j/n)·(v_j − t_j)²`.
pub fn weighted_sq_distance(v: &[f64], t: &[f64]) -> Result<f64> {
    if v.len() != t.len() {
        return Err(Error::LengthMismatch {
            left: v.len(),
            right: t.len(),
        });
    }
    Ok(sq_dist(v, t))
}

fn sq_dist(v: &[f64], t: &[f64]) -> f64 {
    let n = v.len() as f64;
    v.iter()
        .zip(t)
        .enumerate()
        .map(|(j, (a, b))| (j + 1) as f64 / n * (a - b) * (a - b))
        .sum()
}

pub fn weighted_distance(v: &[f64], t: &[f64]) -> Result<f64> {
    weighted_sq_distance(v, t).map(f64::sqrt)
}

/// Crisp c-partition: `assignment[i]` is the 0-based cluster of series `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    c: usize,
    assignment: Vec<usize>,
}

impl Partition {
    /// Checks that every label is `< c` and every cluster is non-empty.
    pub fn new(c: usize, assignment: Vec<usize>) -> Result<Self> {
        let p = Partition { c, assignment };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let m = self.assignment.len();
        if self.c == 0 || self.c > m {
            return Err(Error::Clustering(format!(
                "cluster count {} invalid for {m} series",
                self.c
            )));
        }
        if let Some(&bad) = self.assignment.iter().find(|&&r| r >= self.c) {
            return Err(Error::Clustering(format!(
                "label {bad} out of range for c = {}",
                self.c
            )));
        }
        let sizes = self.sizes();
        if let Some(r) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster(r));
        }
        if self.c > 1 && sizes.contains(&m) {
            return Err(Error::Clustering("one cluster holds every series".into()));
        }
        Ok(())
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, series: usize) -> usize {
        self.assignment[series]
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.c];
        for &r in &self.assignment {
            sizes[r] += 1;
        }
        sizes
    }

    /// Label-independent view: blocks of member indices, sorted.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = (0..self.c).map(|r| self.members(r)).collect();
        blocks.sort();
        blocks
    }

    /// Short stable digest of the induced set partition (label-independent).
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for block in self.blocks() {
            for i in block {
                h.update((i as u64).to_le_bytes());
            }
            h.update(b"|");
        }
        hex::encode(&h.finalize()[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModelSet {
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    RandomPartition,
    #[default]
    Plusplus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub c: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init: Init,
    /// Follow Lloyd convergence with single-series transfer passes.
    pub transfers: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            c: 4,
            epsilon: 1e-9,
            max_iterations: 300,
            restarts: 10,
            seed: 0,
            init: Init::Plusplus,
            transfers: true,
        }
    }
}

impl KMeansConfig {
    pub fn with_clusters(c: usize) -> Self {
        KMeansConfig {
            c,
            ..Default::default()
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.c < 1 {
            return Err(Error::InvalidConfig(
                "cluster count must be at least 1".into(),
            ));
        }
        if self.c > m {
            return Err(Error::Clustering(format!(
                "{} clusters requested for {m} series",
                self.c
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig("epsilon must be non-negative".into()));
        }
        if self.max_iterations < 1 || self.restarts < 1 {
            return Err(Error::InvalidConfig(
                "max_iterations and restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `J(U, V) = Σ_r Σ_i u_r(t_i)·d²(v_r, t_i)`.
pub fn objective(ds: &Dataset, p: &Partition, centroids: &[Vec<f64>]) -> f64 {
    objective_rows(&ds.rows(), p.assignment(), centroids)
}

fn objective_rows(rows: &[&[f64]], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(assignment)
        .map(|(t, &r)| sq_dist(&centroids[r], t))
        .sum()
}

pub fn update_centroids(ds: &Dataset, p: &Partition) -> Result<Vec<Vec<f64>>> {
    centroids_rows(&ds.rows(), p.assignment(), p.c())
}

fn centroids_rows(rows: &[&[f64]], assignment: &[usize], c: usize) -> Result<Vec<Vec<f64>>> {
    let n = rows[0].len();
    let mut sums = vec![vec![0.0; n]; c];
    let mut counts = vec![0usize; c];
    for (t, &r) in rows.iter().zip(assignment) {
        counts[r] += 1;
        for (acc, v) in sums[r].iter_mut().zip(t.iter()) {
            *acc += v;
        }
    }
    for (r, (sum, &count)) in sums.iter_mut().zip(&counts).enumerate() {
        if count == 0 {
            return Err(Error::EmptyCluster(r));
        }
        for v in sum.iter_mut() {
            *v /= count as f64;
        }
    }
    Ok(sums)
}

/// Outcome of one Lloyd run, including the objective after every iteration.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

fn nearest(t: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (r, v) in centroids.iter().enumerate() {
        let d = sq_dist(v, t);
        if d < best_d {
            best = r;
            best_d = d;
        }
    }
    best
}

/// Moves the series farthest from its centroid into each empty cluster.
fn repair_empty(rows: &[&[f64]], assignment: &mut [usize], centroids: &[Vec<f64>], c: usize) {
    loop {
        let mut sizes = vec![0usize; c];
        for &r in assignment.iter() {
            sizes[r] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..rows.len())
            .filter(|&i| sizes[assignment[i]] > 1)
            .map(|i| (i, sq_dist(&centroids[assignment[i]], rows[i])))
            .fold(None::<(usize, f64)>, |acc, (i, d)| match acc {
                Some((_, bd)) if bd >= d => acc,
                _ => Some((i, d)),
            })
            .map(|(i, _)| i)
            .expect("c <= m leaves a cluster with two members");
        assignment[donor] = empty;
    }
}

fn initial_assignment<R: Rng>(rows: &[&[f64]], c: usize, init: Init, rng: &mut R) -> Vec<usize> {
    let m = rows.len();
    match init {
        Init::RandomPartition => {
            let mut order: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut assignment = vec![0; m];
            for (k, &i) in order.iter().enumerate() {
                assignment[i] = if k < c { k } else { rng.random_range(0..c) };
            }
            assignment
        }
        Init::Plusplus => {
            let mut seeds = vec![rng.random_range(0..m)];
            let mut d2: Vec<f64> = rows.iter().map(|t| sq_dist(rows[seeds[0]], t)).collect();
            while seeds.len() < c {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut x = rng.random::<f64>() * total;
                    let mut pick = m - 1;
                    for (i, &w) in d2.iter().enumerate() {
                        if w > 0.0 && x < w {
                            pick = i;
                            break;
                        }
                        x -= w;
                    }
                    if d2[pick] == 0.0 {
                        pick = (0..m).rev().find(|&i| d2[i] > 0.0).unwrap();
                    }
                    pick
                } else {
                    let free: Vec<usize> = (0..m).filter(|i| !seeds.contains(i)).collect();
                    free[rng.random_range(0..free.len())]
                };
                seeds.push(next);
                for (i, t) in rows.iter().enumerate() {
                    d2[i] = d2[i].min(sq_dist(rows[next], t));
                }
            }
            let centroids: Vec<Vec<f64>> = seeds.iter().map(|&i| rows[i].to_vec()).collect();
            let mut assignment: Vec<usize> = rows.iter().map(|t| nearest(t, &centroids)).collect();
            // seeds own their clusters even when duplicated elsewhere
            for (r, &i) in seeds.iter().enumerate() {
                assignment[i] = r;
            }
            repair_empty(rows, &mut assignment, &centroids, c);
            assignment
        }
    }
}

/// One Lloyd run from a seeded initialization.
pub fn kmeans_run(ds: &Dataset, cfg: &KMeansConfig, restart: usize) -> Result<KMeansRun> {
    cfg.validate(ds.len())?;
    check_separable(ds, cfg.c)?;
    Ok(lloyd(&ds.rows(), cfg, restart))
}

fn lloyd(rows: &[&[f64]], cfg: &KMeansConfig, restart: usize) -> KMeansRun {
    let c = cfg.c;
    let mut rng = rng::stream(cfg.seed, &[restart as u64]);
    let mut assignment = initial_assignment(rows, c, cfg.init, &mut rng);
    let mut centroids =
        centroids_rows(rows, &assignment, c).expect("initial partition is non-empty");
    let mut j = objective_rows(rows, &assignment, &centroids);
    let mut trace = vec![j];
    let mut iterations = 0;
    loop {
        while iterations < cfg.max_iterations {
            iterations += 1;
            let mut next: Vec<usize> = rows.iter().map(|t| nearest(t, &centroids)).collect();
            repair_empty(rows, &mut next, &centroids, c);
            let next_centroids =
                centroids_rows(rows, &next, c).expect("repaired partition is non-empty");
            let next_j = objective_rows(rows, &next, &next_centroids);
            let converged = (j - next_j).abs() <= cfg.epsilon;
            // floating-point noise can nudge J up by an ulp once converged
            if next_j > j {
                trace.push(j);
                break;
            }
            assignment = next;
            centroids = next_centroids;
            j = next_j;
            trace.push(j);
            if converged {
                break;
            }
        }
        if !cfg.transfers
            || iterations >= cfg.max_iterations
            || !transfer_pass(rows, &mut assignment, &mut centroids)
        {
            break;
        }
        j = objective_rows(rows, &assignment, &centroids);
        trace.push(j);
    }
    KMeansRun {
        assignment,
        centroids,
        objective: j,
        iterations,
        trace,
    }
}

/// Single-series transfers: moves each series to another cluster whenever
/// that lowers J, accounting for both centroids shifting. Moving `t` from
/// cluster `a` to `b` changes J by `n_b/(n_b+1)·d²(t, v_b) − n_a/(n_a−1)·d²(t, v_a)`.
/// Returns whether anything moved.
fn transfer_pass(rows: &[&[f64]], assignment: &mut [usize], centroids: &mut Vec<Vec<f64>>) -> bool {
    let c = centroids.len();
    let mut moved = false;
    let mut sizes = vec![0usize; c];
    for &r in assignment.iter() {
        sizes[r] += 1;
    }
    for i in 0..rows.len() {
        let a = assignment[i];
        if sizes[a] < 2 {
            continue;
        }
        let leave = sizes[a] as f64 / (sizes[a] - 1) as f64 * sq_dist(&centroids[a], rows[i]);
        let mut best: Option<(usize, f64)> = None;
        for b in (0..c).filter(|&b| b != a) {
            let join = sizes[b] as f64 / (sizes[b] + 1) as f64 * sq_dist(&centroids[b], rows[i]);
            if best.is_none_or(|(_, cost)| join < cost) {
                best = Some((b, join));
            }
        }
        if let Some((b, join)) = best {
            if join < leave - 1e-12 * (1.0 + leave) {
                assignment[i] = b;
                sizes[a] -= 1;
                sizes[b] += 1;
                *centroids =
                    centroids_rows(rows, assignment, c).expect("transfers keep clusters non-empty");
                moved = true;
            }
        }
    }
    moved
}

fn check_separable(ds: &Dataset, c: usize) -> Result<()> {
    if c > 1 {
        let first = &ds.series()[0].values;
        if ds.series().iter().all(|s| &s.values == first) {
            return Err(Error::Clustering(
                "all series are identical; no valid partition with more than one cluster".into(),
            ));
        }
    }
    Ok(())
}

/// Best of `cfg.restarts` independent Lloyd runs (lowest J, ties to the lowest restart index).
pub fn kmeans(ds: &Dataset, cfg: &KMeansConfig) -> Result<(Partition, ClusterModelSet)> {
    cfg.validate(ds.len())?;
    check_separable(ds, cfg.c)?;
    let rows = ds.rows();
    let runs: Vec<KMeansRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|restart| lloyd(&rows, cfg, restart))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            if run.objective < best.objective {
                run
            } else {
                best
            }
        })
        .expect("restarts >= 1");
    let partition = Partition::new(cfg.c, best.assignment)?;
    Ok((
        partition,
        ClusterModelSet {
            centroids: best.centroids,
            objective: best.objective,
            iterations_used: best.iterations,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub c: usize,
    pub objective: f64,
    pub assignment_digest: String,
    #[serde(skip)]
    pub partition: Partition,
}

pub fn sweep_clusters(
    ds: &Dataset,
    c_range: std::ops::RangeInclusive<usize>,
    cfg: &KMeansConfig,
) -> Result<Vec<SweepRow>> {
    if *c_range.start() < 1 || *c_range.end() > ds.len() || c_range.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "cluster range {}..{} must lie within 1..{}",
            c_range.start(),
            c_range.end(),
            ds.len()
        )));
    }
    c_range
        .map(|c| {
            let (partition, model) = kmeans(ds, &KMeansConfig { c, ..cfg.clone() })?;
            Ok(SweepRow {
                c,
                objective: model.objective,
                assignment_digest: partition.digest(),
                partition,
            })
        })
        .collect()
}

/// Persisted partition: `{c, objective, assignment:{series_id: cluster_index}, centroids}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub c: usize,
    pub objective: f64,
    pub assignment: BTreeMap<String, usize>,
    pub centroids: Vec<Vec<f64>>,
}

impl PartitionDoc {
    pub fn new(ds: &Dataset, p: &Partition, model: &ClusterModelSet) -> Self {
        PartitionDoc {
            c: p.c(),
            objective: model.objective,
            assignment: ds
                .series()
                .iter()
                .zip(p.assignment())
                .map(|(s, &r)| (s.id.clone(), r))
                .collect(),
            centroids: model.centroids.clone(),
        }
    }

    /// Rebuilds the partition in dataset order.
    pub fn partition(&self, ds: &Dataset) -> Result<Partition> {
        let assignment = ds
            .series()
            .iter()
            .map(|s| {
                self.assignment
                    .get(&s.id)
                    .copied()
                    .ok_or_else(|| Error::UnknownSeries(s.id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(self.c, assignment)
    }
}
