//! From raw draws to component-specific inference.
//!
//! The usual pipeline is [`kplus_distribution`] → [`filter_to_kplus`] →
//! [`ppr_identify`] → [`posterior_summary`] / [`map_partition`], followed by
//! [`ari`] and [`confusion_and_mcr`] against a reference partition.
//!
//! Cluster labels are 0-based throughout. Identified clusters are ordered by
//! ascending mean cluster size.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::clustering::{kmeans, ClusteringError, KMeansConfig, Points};
use crate::sampler::SweepRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PostprocessError {
    #[error("no draws to process")]
    NoDraws,
    #[error("no sweep has exactly {k_plus} filled components")]
    EmptySelection { k_plus: usize },
    #[error("identification failed: {0}")]
    Identification(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("assignments were not stored for these draws")]
    MissingAssignments,
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
}

/// A partition of `labels.len()` items into `n_groups` groups labeled
/// `0..n_groups`, each non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    n_groups: usize,
}

impl Partition {
    /// Relabel arbitrary group ids onto `0..n_groups`, keeping their sorted
    /// order.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut distinct: Vec<usize> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let map: HashMap<usize, usize> =
            distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        Self {
            labels: raw.iter().map(|l| map[l]).collect(),
            n_groups: distinct.len(),
        }
    }

    /// Partition from string class names; groups are numbered in sorted
    /// name order. Returns the names alongside.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> (Self, Vec<String>) {
        let mut distinct: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let map: HashMap<&str, usize> = distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let p = Self {
            labels: names.iter().map(|s| map[s.as_ref()]).collect(),
            n_groups: distinct.len(),
        };
        (p, distinct.into_iter().map(String::from).collect())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Relative frequency of each `K₊` value over the given sweeps.
pub fn kplus_distribution(records: &[SweepRecord]) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.k_plus).or_insert(0) += 1;
    }
    let n = records.len() as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

/// Most frequent `K₊`; ties go to the smaller value.
pub fn kplus_mode(dist: &BTreeMap<usize, f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&k, &p) in dist {
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((k, p));
        }
    }
    best.map(|(k, _)| k)
}

/// The filled components of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSweep {
    /// Position in the record slice the draws came from.
    pub source_index: usize,
    pub iter: usize,
    pub eta: Vec<f64>,
    pub mu: Vec<DVector<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    pub counts: Vec<usize>,
    pub s: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDraws {
    pub k_plus: usize,
    pub sweeps: Vec<FilteredSweep>,
    pub n_total: usize,
}

impl FilteredDraws {
    pub fn retained_fraction(&self) -> f64 {
        self.sweeps.len() as f64 / self.n_total as f64
    }
}

/// Keep the sweeps with exactly `k_plus` filled components and drop the
/// empty components. Weights are kept as drawn.
pub fn filter_to_kplus(
    records: &[SweepRecord],
    k_plus: usize,
) -> Result<FilteredDraws, PostprocessError> {
    if records.is_empty() {
        return Err(PostprocessError::NoDraws);
    }
    let sweeps: Vec<FilteredSweep> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.k_plus == k_plus)
        .map(|(idx, r)| {
            let filled: Vec<usize> = (0..r.k).filter(|&k| r.counts[k] > 0).collect();
            let mut new_index = vec![usize::MAX; r.k];
            for (to, &from) in filled.iter().enumerate() {
                new_index[from] = to;
            }
            FilteredSweep {
                source_index: idx,
                iter: r.iter,
                eta: filled.iter().map(|&k| r.eta[k]).collect(),
                mu: filled.iter().map(|&k| r.mu[k].clone()).collect(),
                sigma: filled.iter().map(|&k| r.sigma[k].clone()).collect(),
                counts: filled.iter().map(|&k| r.counts[k]).collect(),
                s: r.s
                    .as_ref()
                    .map(|s| s.iter().map(|&l| new_index[l]).collect()),
            }
        })
        .collect();
    if sweeps.is_empty() {
        return Err(PostprocessError::EmptySelection { k_plus });
    }
    Ok(FilteredDraws {
        k_plus,
        sweeps,
        n_total: records.len(),
    })
}

/// Coordinates used to cluster the pooled component draws.
#[derive(Clone, Copy)]
pub enum PprFunctional {
    /// The full mean vector `μ_k`.
    Means,
    /// Selected coordinates of `μ_k`.
    MeanCoordinates(&'static [usize]),
    Custom(fn(f64, &DVector<f64>, &DMatrix<f64>) -> Vec<f64>),
}

impl PprFunctional {
    fn eval(&self, eta: f64, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Vec<f64> {
        match self {
            PprFunctional::Means => mu.iter().cloned().collect(),
            PprFunctional::MeanCoordinates(idx) => idx.iter().map(|&i| mu[i]).collect(),
            PprFunctional::Custom(f) => f(eta, mu, sigma),
        }
    }
}

impl std::fmt::Debug for PprFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PprFunctional::Means => write!(f, "Means"),
            PprFunctional::MeanCoordinates(i) => write!(f, "MeanCoordinates({i:?})"),
            PprFunctional::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedDraws {
    pub k_plus: usize,
    /// Positions in the original record slice.
    pub kept_sweeps: Vec<usize>,
    /// `permutations[m][j]` is the identified label of component `j` in
    /// kept sweep `m`.
    pub permutations: Vec<Vec<usize>>,
    pub non_permutation_rate: f64,
    /// Kept sweeps with components reordered to identified labels.
    pub relabeled: Vec<FilteredSweep>,
    pub n_eligible: usize,
}

/// Relabel by clustering the pooled component draws in the point process
/// representation.
///
/// A sweep is kept when its `K₊` components fall into `K₊` distinct
/// clusters.
pub fn ppr_identify<R: Rng + ?Sized>(
    draws: &FilteredDraws,
    functional: PprFunctional,
    rng: &mut R,
) -> Result<IdentifiedDraws, PostprocessError> {
    let kp = draws.k_plus;
    if draws.sweeps.is_empty() {
        return Err(PostprocessError::NoDraws);
    }
    if let Some(bad) = draws.sweeps.iter().find(|s| s.mu.len() != kp) {
        return Err(PostprocessError::Identification(format!(
            "sweep {} has {} components, expected {kp}",
            bad.iter,
            bad.mu.len()
        )));
    }
    let mut pooled = Vec::new();
    let mut dim = 0;
    for sw in &draws.sweeps {
        for k in 0..kp {
            let v = functional.eval(sw.eta[k], &sw.mu[k], &sw.sigma[k]);
            dim = v.len();
            pooled.extend(v);
        }
    }
    if dim == 0 {
        return Err(PostprocessError::Identification(
            "functional has no coordinates".into(),
        ));
    }
    let km = kmeans(Points::new(&pooled, dim)?, &KMeansConfig::new(kp), rng)?;
    let mut centers = km.centers.clone();
    centers.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    centers.dedup();
    let distinct = centers.len().min(km.n_nonempty);
    if distinct < kp {
        return Err(PostprocessError::Identification(format!(
            "k-means found only {distinct} distinct clusters, expected {kp}"
        )));
    }

    let mut kept = Vec::new();
    let mut raw_perms = Vec::new();
    let mut seen = vec![false; kp];
    for (m, chunk) in km.labels.chunks(kp).enumerate() {
        seen.iter_mut().for_each(|x| *x = false);
        let distinct = chunk
            .iter()
            .all(|&l| !std::mem::replace(&mut seen[l], true));
        if distinct {
            kept.push(m);
            raw_perms.push(chunk.to_vec());
        }
    }
    if kept.is_empty() {
        return Err(PostprocessError::Identification(
            "no sweep is a permutation of the cluster labels".into(),
        ));
    }

    // order clusters by ascending mean size
    let mut size = vec![0.0; kp];
    for (&m, perm) in kept.iter().zip(&raw_perms) {
        for (j, &c) in perm.iter().enumerate() {
            size[c] += draws.sweeps[m].counts[j] as f64;
        }
    }
    let mut order: Vec<usize> = (0..kp).collect();
    order.sort_by(|&a, &b| size[a].total_cmp(&size[b]).then(a.cmp(&b)));
    let mut rank = vec![0; kp];
    for (pos, &c) in order.iter().enumerate() {
        rank[c] = pos;
    }

    let permutations: Vec<Vec<usize>> = raw_perms
        .iter()
        .map(|p| p.iter().map(|&c| rank[c]).collect())
        .collect();
    let relabeled = kept
        .iter()
        .zip(&permutations)
        .map(|(&m, perm)| relabel_sweep(&draws.sweeps[m], perm))
        .collect();
    let n_eligible = draws.sweeps.len();
    Ok(IdentifiedDraws {
        k_plus: kp,
        kept_sweeps: kept.iter().map(|&m| draws.sweeps[m].source_index).collect(),
        non_permutation_rate: 1.0 - kept.len() as f64 / n_eligible as f64,
        permutations,
        relabeled,
        n_eligible,
    })
}

fn relabel_sweep(sw: &FilteredSweep, perm: &[usize]) -> FilteredSweep {
    let inv = inverse_permutation(perm);
    FilteredSweep {
        source_index: sw.source_index,
        iter: sw.iter,
        eta: inv.iter().map(|&j| sw.eta[j]).collect(),
        mu: inv.iter().map(|&j| sw.mu[j].clone()).collect(),
        sigma: inv.iter().map(|&j| sw.sigma[j].clone()).collect(),
        counts: inv.iter().map(|&j| sw.counts[j]).collect(),
        s: sw.s.as_ref().map(|s| s.iter().map(|&l| perm[l]).collect()),
    }
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub k_plus: usize,
    pub n_kept: usize,
    pub eta: Vec<f64>,
    pub mu: Vec<DVector<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    /// Mean number of observations per cluster.
    pub mean_size: Vec<f64>,
}

/// Posterior means over the kept, relabeled draws.
pub fn posterior_summary(id: &IdentifiedDraws) -> Result<PosteriorSummary, PostprocessError> {
    let first = id.relabeled.first().ok_or(PostprocessError::NoDraws)?;
    let n = id.relabeled.len() as f64;
    let kp = id.k_plus;
    let mut eta = vec![0.0; kp];
    let mut mean_size = vec![0.0; kp];
    let mut mu: Vec<DVector<f64>> = first.mu.iter().map(|m| DVector::zeros(m.len())).collect();
    let mut sigma: Vec<DMatrix<f64>> = first
        .sigma
        .iter()
        .map(|s| DMatrix::zeros(s.nrows(), s.ncols()))
        .collect();
    for sw in &id.relabeled {
        for k in 0..kp {
            eta[k] += sw.eta[k];
            mean_size[k] += sw.counts[k] as f64;
            mu[k] += &sw.mu[k];
            sigma[k] += &sw.sigma[k];
        }
    }
    Ok(PosteriorSummary {
        k_plus: kp,
        n_kept: id.relabeled.len(),
        eta: eta.into_iter().map(|x| x / n).collect(),
        mu: mu.into_iter().map(|x| x / n).collect(),
        sigma: sigma.into_iter().map(|x| x / n).collect(),
        mean_size: mean_size.into_iter().map(|x| x / n).collect(),
    })
}

/// Relabeled assignment vectors of the kept sweeps.
pub fn identified_assignments(id: &IdentifiedDraws) -> Result<Vec<&[usize]>, PostprocessError> {
    id.relabeled
        .iter()
        .map(|sw| sw.s.as_deref().ok_or(PostprocessError::MissingAssignments))
        .collect()
}

fn check_draws<S: AsRef<[usize]>>(draws: &[S]) -> Result<usize, PostprocessError> {
    let n = draws
        .first()
        .ok_or(PostprocessError::NoDraws)?
        .as_ref()
        .len();
    for d in draws {
        if d.as_ref().len() != n {
            return Err(PostprocessError::LengthMismatch {
                left: n,
                right: d.as_ref().len(),
            });
        }
    }
    Ok(n)
}

/// Most frequent label of each observation; ties go to the smaller label.
pub fn map_partition<S: AsRef<[usize]>>(draws: &[S]) -> Result<Partition, PostprocessError> {
    let n = check_draws(draws)?;
    let k = draws
        .iter()
        .flat_map(|d| d.as_ref().iter().cloned())
        .max()
        .unwrap_or(0)
        + 1;
    let mut counts = vec![0usize; n * k];
    for d in draws {
        for (i, &l) in d.as_ref().iter().enumerate() {
            counts[i * k + l] += 1;
        }
    }
    let modal: Vec<usize> = counts
        .chunks(k)
        .map(|c| {
            let mut best = 0;
            for (l, &v) in c.iter().enumerate() {
                if v > c[best] {
                    best = l;
                }
            }
            best
        })
        .collect();
    Ok(Partition::from_labels(&modal))
}

/// Fraction of sweeps in which each pair of observations shares a label.
pub fn coallocation_matrix<S: AsRef<[usize]> + Sync>(
    draws: &[S],
) -> Result<DMatrix<f64>, PostprocessError> {
    let n = check_draws(draws)?;
    let together = draws
        .par_iter()
        .fold(
            || vec![0u32; n * n],
            |mut acc, d| {
                let s = d.as_ref();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if s[i] == s[j] {
                            acc[i * n + j] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; n * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let m = draws.len() as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => together[i * n + j] as f64 / m,
        std::cmp::Ordering::Greater => together[j * n + i] as f64 / m,
    }))
}

fn contingency(
    a: &[usize],
    b: &[usize],
) -> (
    HashMap<(usize, usize), usize>,
    HashMap<usize, usize>,
    HashMap<usize, usize>,
) {
    let mut joint = HashMap::new();
    let mut ma = HashMap::new();
    let mut mb = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *ma.entry(x).or_insert(0) += 1;
        *mb.entry(y).or_insert(0) += 1;
    }
    (joint, ma, mb)
}

/// Variation of information (natural log) between two labelings.
pub fn variation_of_information(a: &[usize], b: &[usize]) -> Result<f64, PostprocessError> {
    if a.len() != b.len() {
        return Err(PostprocessError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let n = a.len() as f64;
    let (joint, ma, mb) = contingency(a, b);
    let mut vi = 0.0;
    for (&(x, y), &c) in &joint {
        let c = c as f64;
        vi -= c / n * ((c / ma[&x] as f64).ln() + (c / mb[&y] as f64).ln());
    }
    Ok(vi.max(0.0))
}

/// Upper bound on the number of sampled partitions searched by
/// [`vi_partition`].
pub const VI_MAX_CANDIDATES: usize = 2000;

/// Relabel by order of first appearance, so equal partitions compare equal.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// The sampled partition with the smallest mean variation of information
/// to all sampled partitions. Draws are thinned evenly to at most
/// [`VI_MAX_CANDIDATES`]. Returns the partition and its mean distance.
pub fn vi_partition<S: AsRef<[usize]> + Sync>(
    draws: &[S],
) -> Result<(Partition, f64), PostprocessError> {
    check_draws(draws)?;
    let stride = draws.len().div_ceil(VI_MAX_CANDIDATES);
    let thinned: Vec<&[usize]> = draws.iter().step_by(stride).map(|d| d.as_ref()).collect();

    // distinct partitions with multiplicities, first appearance first
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut uniq: Vec<(&[usize], usize)> = Vec::new();
    for d in &thinned {
        let c = canonical(d);
        match index.get(&c) {
            Some(&u) => uniq[u].1 += 1,
            None => {
                index.insert(c, uniq.len());
                uniq.push((d, 1));
            }
        }
    }
    let total = thinned.len() as f64;
    let scores: Vec<f64> = uniq
        .par_iter()
        .map(|(cand, _)| {
            uniq.iter()
                .map(|(other, w)| {
                    *w as f64 * variation_of_information(cand, other).unwrap_or(f64::INFINITY)
                })
                .sum::<f64>()
                / total
        })
        .collect();
    let mut best = 0;
    for (u, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = u;
        }
    }
    Ok((Partition::from_labels(uniq[best].0), scores[best]))
}

/// Adjusted Rand index of two labelings.
pub fn ari_labels(a: &[usize], b: &[usize]) -> Result<f64, PostprocessError> {
    if a.len() != b.len() {
        return Err(PostprocessError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let pairs = |c: usize| (c * c.saturating_sub(1) / 2) as f64;
    let (joint, ma, mb) = contingency(a, b);
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sa: f64 = ma.values().map(|&c| pairs(c)).sum();
    let sb: f64 = mb.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len());
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max_index = 0.5 * (sa + sb);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(if index == max_index { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

pub fn ari(a: &Partition, b: &Partition) -> Result<f64, PostprocessError> {
    ari_labels(a.labels(), b.labels())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    /// Rows follow `truth_order`, columns follow `estimated_order`.
    pub table: Vec<Vec<usize>>,
    /// Truth groups by ascending size.
    pub truth_order: Vec<usize>,
    /// Estimated groups, paired position-wise with `truth_order`; unpaired
    /// groups come last.
    pub estimated_order: Vec<usize>,
    pub mcr: f64,
}

/// Confusion table (rows truth, columns estimate) after size-sorted greedy
/// alignment, and the misclassification rate.
///
/// Both partitions are sorted by group size. With equal group counts the
/// `i`-th smallest truth group is paired with the smallest remaining
/// estimated group; among equally large candidates the one overlapping most
/// wins. With unequal counts, pairs are formed greedily by largest overlap,
/// ties going to the smaller groups.
pub fn confusion_and_mcr(
    estimated: &Partition,
    truth: &Partition,
) -> Result<Confusion, PostprocessError> {
    if estimated.len() != truth.len() {
        return Err(PostprocessError::LengthMismatch {
            left: estimated.len(),
            right: truth.len(),
        });
    }
    let (kt, ke) = (truth.n_groups(), estimated.n_groups());
    let mut cell = vec![vec![0usize; ke]; kt];
    for (&t, &e) in truth.labels().iter().zip(estimated.labels()) {
        cell[t][e] += 1;
    }
    let ts = truth.group_sizes();
    let es = estimated.group_sizes();
    let mut truth_order: Vec<usize> = (0..kt).collect();
    truth_order.sort_by_key(|&g| (ts[g], g));
    let mut remaining: Vec<usize> = (0..ke).collect();
    remaining.sort_by_key(|&g| (es[g], g));
    let mut estimated_order = Vec::with_capacity(ke);
    if kt != ke {
        let mut free_t: Vec<usize> = truth_order.clone();
        let mut pairs = Vec::new();
        while !free_t.is_empty() && !remaining.is_empty() {
            let mut best = (0, 0, 0);
            for (it, &t) in free_t.iter().enumerate() {
                for (ie, &e) in remaining.iter().enumerate() {
                    if cell[t][e] > cell[free_t[best.0]][remaining[best.1]] || (it, ie) == (0, 0) {
                        best = (it, ie, cell[t][e]);
                    }
                }
            }
            pairs.push((free_t.remove(best.0), remaining.remove(best.1)));
        }
        // rows keep ascending truth size; unpaired rows go last
        truth_order.sort_by_key(|&t| (pairs.iter().all(|p| p.0 != t), ts[t], t));
        for &t in &truth_order {
            if let Some(p) = pairs.iter().find(|p| p.0 == t) {
                estimated_order.push(p.1);
            }
        }
        remaining.clear();
        remaining.extend((0..ke).filter(|e| !estimated_order.contains(e)));
        remaining.sort_by_key(|&g| (es[g], g));
    }
    for &t in &truth_order {
        if kt != ke {
            break;
        }
        let Some(&first) = remaining.first() else {
            break;
        };
        let smallest = es[first];
        let pick = remaining
            .iter()
            .enumerate()
            .take_while(|(_, &g)| es[g] == smallest)
            .max_by(|(ia, &a), (ib, &b)| cell[t][a].cmp(&cell[t][b]).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        estimated_order.push(remaining.remove(pick));
    }
    estimated_order.extend(remaining);
    let table: Vec<Vec<usize>> = truth_order
        .iter()
        .map(|&t| estimated_order.iter().map(|&e| cell[t][e]).collect())
        .collect();
    let diag: usize = (0..kt.min(ke)).map(|i| table[i][i]).sum();
    let n = truth.len();
    let mcr = if n == 0 {
        0.0
    } else {
        1.0 - diag as f64 / n as f64
    };
    Ok(Confusion {
        table,
        truth_order,
        estimated_order,
        mcr,
    })
}
