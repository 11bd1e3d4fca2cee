//! Synthetic groups generated from known laws, for demos and tests.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::genome::{Antibody, ExpressionTree};
use crate::rng;
use crate::series::{Dataset, TimeSeries};

/// Extends `init` to `n` points by repeatedly applying `tree` to the latest
/// values. `None` if the law produces an invalid or non-finite value.
pub fn iterate(tree: &ExpressionTree, init: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut d = init.to_vec();
    while d.len() < n {
        let window: Vec<f64> = d.iter().rev().copied().collect();
        let v = tree.evaluate(&window).ok()??;
        if !v.is_finite() {
            return None;
        }
        d.push(v);
    }
    d.truncate(n);
    Some(d)
}

/// One cluster of a planted group: a law, its starting values, and the
/// relative noise applied to each member.
#[derive(Debug, Clone)]
pub struct PlantedCluster {
    pub law: Antibody,
    pub init: Vec<f64>,
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PlantedGroup {
    pub dataset: Dataset,
    /// Generating cluster of each series, in dataset order.
    pub truth: Vec<usize>,
    /// Noise-free base series of each cluster.
    pub bases: Vec<Vec<f64>>,
}

/// Builds a group where every member of a cluster is a positive affine image
/// `offset + scale * base` of its cluster's law-generated base series, with
/// multiplicative Gaussian noise of the member's relative size.
pub fn planted_group(
    clusters: &[PlantedCluster],
    n: usize,
    first_epoch: i64,
    seed: u64,
) -> Result<PlantedGroup> {
    let epochs: Vec<i64> = (0..n as i64).map(|j| first_epoch + j).collect();
    let mut series = Vec::new();
    let mut truth = Vec::new();
    let mut bases = Vec::new();
    for (r, cl) in clusters.iter().enumerate() {
        let base = iterate(&cl.law.to_tree(), &cl.init, n).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "law of cluster {r} does not iterate to {n} finite points"
            ))
        })?;
        for (i, &noise) in cl.noise.iter().enumerate() {
            let mut g = rng::stream(seed, &[r as u64, i as u64]);
            let offset = g.random_range(20.0..80.0);
            let scale = g.random_range(0.5..2.0);
            let jitter =
                Normal::new(0.0, noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let values = base
                .iter()
                .map(|&b| (offset + scale * b) * (1.0 + jitter.sample(&mut g)))
                .collect();
            let id = format!("c{r}m{i}");
            series.push(TimeSeries::new(id, values, epochs.clone())?);
            truth.push(r);
        }
        bases.push(base);
    }
    Ok(PlantedGroup {
        dataset: Dataset::new(epochs, series)?,
        truth,
        bases,
    })
}

/// Three affine-equivariant laws without constants, four members each:
/// `a + b - c` (trend with alternation), `a - b + c` (period four) and
/// `a + c - d` (trend with period three). `noise` scales member jitter.
pub fn three_law_group(n: usize, noise: f64, seed: u64) -> Result<PlantedGroup> {
    let law = |s: &str| Antibody::parse(s, &[]);
    let jitter = vec![noise, noise, 2.0 * noise, 4.0 * noise];
    let clusters = vec![
        PlantedCluster {
            law: law("_+_-_a_a_-_+_a_b_c")?,
            init: vec![10.0, 12.0, 11.0],
            noise: jitter.clone(),
        },
        PlantedCluster {
            law: law("_+_-_a_a_+_-_a_b_c")?,
            init: vec![10.0, 14.0, 10.0],
            noise: jitter.clone(),
        },
        PlantedCluster {
            law: law("_+_-_a_a_-_+_a_c_d")?,
            init: vec![10.0, 11.0, 13.0, 12.0],
            noise: jitter,
        },
    ];
    planted_group(&clusters, n, 2000, seed)
}
