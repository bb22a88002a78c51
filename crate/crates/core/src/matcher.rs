//! Common-support trimming and 1:1 nearest-neighbour matching.
//!
//! Controls are sorted by score once per matching pass; each query locates
//! its neighbours by bisection. Treated units are processed in a random order
//! drawn from the supplied generator, and exact distance ties are broken
//! uniformly at random.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propensity::PropensityScores;
use crate::stats;

/// A unit's position in the dataset together with its matching score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub index: usize,
    pub score: f64,
}

/// Result of one matching pass. All indices refer to dataset rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchSet {
    /// `(treated, control)` pairs in the order they were formed.
    pub pairs: Vec<(usize, usize)>,
    /// Control side of `pairs`, with multiplicity.
    pub matched_controls: Vec<usize>,
    /// Treated units left without a match (caliper matching only). Sorted.
    pub dropped_treated: Vec<usize>,
    /// Controls never used, including those trimmed off common support. Sorted.
    pub dropped_controls: Vec<usize>,
    /// Absolute caliper width, when one was applied.
    pub caliper_used: Option<f64>,
}

impl MatchSet {
    /// `kept[i]` is true when unit `i` appears in at least one pair.
    pub fn kept(&self, n_units: usize) -> Vec<bool> {
        let mut kept = vec![false; n_units];
        for &(t, c) in &self.pairs {
            kept[t] = true;
            kept[c] = true;
        }
        kept
    }

    /// Number of distinct units that appear in at least one pair.
    pub fn n_kept(&self, n_units: usize) -> usize {
        self.kept(n_units).into_iter().filter(|&k| k).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMeasure {
    /// Propensity score on the probability scale.
    Score,
    /// Linear predictor `Xγ`.
    LinearPredictor,
}

/// Which scores the caliper SD is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaliperPool {
    /// Treated units plus controls retained after trimming.
    Retained,
    /// Every unit in the dataset.
    AllUnits,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    With,
    Without { caliper_sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub replacement: Replacement,
    pub distance: DistanceMeasure,
    pub caliper_pool: CaliperPool,
    pub trim: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            replacement: Replacement::With,
            distance: DistanceMeasure::Score,
            caliper_pool: CaliperPool::Retained,
            trim: true,
        }
    }
}

impl MatchOptions {
    pub fn without_replacement(caliper_sd: f64) -> Self {
        Self {
            replacement: Replacement::Without { caliper_sd },
            ..Self::default()
        }
    }
}

/// Indices of controls whose score lies within `[min, max]` of the treated scores.
pub fn trim_common_support(scores: &[f64], z: &[bool]) -> Result<Vec<usize>> {
    if scores.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: scores.len(),
        });
    }
    let (lo, hi) = scores
        .iter()
        .zip(z)
        .filter(|(_, &t)| t)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&s, _)| {
            (lo.min(s), hi.max(s))
        });
    if lo > hi {
        return Err(Error::NoTreatedUnits);
    }
    Ok(scores
        .iter()
        .zip(z)
        .enumerate()
        .filter(|(_, (&s, &t))| !t && lo <= s && s <= hi)
        .map(|(i, _)| i)
        .collect())
}

fn sorted_by_score(units: &[Unit]) -> Vec<Unit> {
    let mut v = units.to_vec();
    v.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
    v
}

fn shuffled_order<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn sorted_indices(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Range `[lo, hi)` of positions in `sorted` holding controls at the minimum
/// distance from `t`. The range is contiguous: it covers the run of equal
/// scores just below `t`, the run at or above `t`, or both when they tie.
fn nearest_range(sorted: &[Unit], t: f64) -> (usize, usize) {
    let pos = sorted.partition_point(|c| c.score < t);
    let below = pos.checked_sub(1).map(|i| t - sorted[i].score);
    let above = sorted.get(pos).map(|c| c.score - t);
    let run_start = |v: f64| sorted.partition_point(|c| c.score < v);
    let run_end = |v: f64| sorted.partition_point(|c| c.score <= v);
    match (below, above) {
        (Some(dl), Some(dr)) if dl == dr => {
            (run_start(sorted[pos - 1].score), run_end(sorted[pos].score))
        }
        (Some(dl), Some(dr)) if dl < dr => (run_start(sorted[pos - 1].score), pos),
        (_, Some(_)) => (pos, run_end(sorted[pos].score)),
        (Some(_), None) => (run_start(sorted[pos - 1].score), pos),
        (None, None) => (0, 0),
    }
}

/// 1:1 nearest-neighbour matching with replacement. Every treated unit is paired.
pub fn match_with_replacement<R: Rng + ?Sized>(
    treated: &[Unit],
    controls: &[Unit],
    rng: &mut R,
) -> Result<MatchSet> {
    if treated.is_empty() {
        return Err(Error::NoTreatedUnits);
    }
    if controls.is_empty() {
        return Err(Error::EmptyControlPool);
    }
    let sorted = sorted_by_score(controls);
    let mut used = vec![false; sorted.len()];
    let mut ms = MatchSet::default();
    for ti in shuffled_order(treated.len(), rng) {
        let t = treated[ti];
        let (lo, hi) = nearest_range(&sorted, t.score);
        let pick = if hi - lo > 1 {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        used[pick] = true;
        ms.pairs.push((t.index, sorted[pick].index));
        ms.matched_controls.push(sorted[pick].index);
    }
    ms.dropped_controls = sorted_indices(
        sorted
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(c, _)| c.index)
            .collect(),
    );
    Ok(ms)
}

/// Binary indexed tree over 0/1 availability flags.
struct Fenwick {
    tree: Vec<usize>,
}

impl Fenwick {
    fn all_ones(n: usize) -> Self {
        let mut tree = vec![0; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                tree[j] += tree[i];
            }
        }
        Self { tree }
    }

    /// Sum over positions `[0, end)`.
    fn prefix(&self, end: usize) -> usize {
        let mut i = end;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    fn remove(&mut self, pos: usize) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Position of the `k`-th (1-based) available slot.
    fn find_kth(&self, mut k: usize) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] < k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Matching without replacement: each treated unit (in random order) draws
/// one control uniformly from the unused controls within `width` of its
/// score. Treated units with no candidate are dropped.
pub fn match_within_caliper<R: Rng + ?Sized>(
    treated: &[Unit],
    controls: &[Unit],
    width: f64,
    rng: &mut R,
) -> MatchSet {
    let sorted = sorted_by_score(controls);
    let mut available = Fenwick::all_ones(sorted.len());
    let mut used = vec![false; sorted.len()];
    let mut ms = MatchSet {
        caliper_used: Some(width),
        ..MatchSet::default()
    };
    let mut dropped = Vec::new();
    for ti in shuffled_order(treated.len(), rng) {
        let t = treated[ti];
        let lo = sorted.partition_point(|c| c.score < t.score && t.score - c.score > width);
        let hi = sorted.partition_point(|c| c.score <= t.score || c.score - t.score <= width);
        let before = available.prefix(lo);
        let count = available.prefix(hi) - before;
        if count == 0 {
            dropped.push(t.index);
            continue;
        }
        let pick = available.find_kth(before + rng.random_range(0..count) + 1);
        available.remove(pick);
        used[pick] = true;
        ms.pairs.push((t.index, sorted[pick].index));
        ms.matched_controls.push(sorted[pick].index);
    }
    ms.dropped_treated = sorted_indices(dropped);
    ms.dropped_controls = sorted_indices(
        sorted
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(c, _)| c.index)
            .collect(),
    );
    ms
}

/// Caliper matching with width `caliper_sd` times the SD of the pooled
/// treated and control scores passed in.
pub fn match_no_replacement_caliper<R: Rng + ?Sized>(
    treated: &[Unit],
    controls: &[Unit],
    caliper_sd: f64,
    rng: &mut R,
) -> Result<MatchSet> {
    if !(caliper_sd > 0.0 && caliper_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "caliper_sd must be positive, got {caliper_sd}"
        )));
    }
    let pooled: Vec<f64> = treated.iter().chain(controls).map(|u| u.score).collect();
    let width = caliper_sd * stats::sample_sd(&pooled);
    Ok(match_within_caliper(treated, controls, width, rng))
}

/// Full matching pass over a dataset's scores: pick the distance measure,
/// trim to common support, then match.
pub fn match_sample<R: Rng + ?Sized>(
    scores: &PropensityScores,
    z: &[bool],
    opts: &MatchOptions,
    rng: &mut R,
) -> Result<MatchSet> {
    match_sample_among(scores, z, opts, None, rng)
}

/// As [`match_sample`], but controls with `eligible[i] == false` are never
/// considered (they still count as dropped).
pub fn match_sample_among<R: Rng + ?Sized>(
    scores: &PropensityScores,
    z: &[bool],
    opts: &MatchOptions,
    eligible: Option<&[bool]>,
    rng: &mut R,
) -> Result<MatchSet> {
    let dist = match opts.distance {
        DistanceMeasure::Score => &scores.ps,
        DistanceMeasure::LinearPredictor => &scores.eta,
    };
    if dist.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: dist.len(),
        });
    }
    let treated: Vec<Unit> = z
        .iter()
        .enumerate()
        .filter(|(_, &t)| t)
        .map(|(i, _)| Unit {
            index: i,
            score: dist[i],
        })
        .collect();
    if treated.is_empty() {
        return Err(Error::NoTreatedUnits);
    }
    let control_idx = if opts.trim {
        trim_common_support(dist, z)?
    } else {
        (0..z.len()).filter(|&i| !z[i]).collect()
    };
    let controls: Vec<Unit> = control_idx
        .iter()
        .filter(|&&i| eligible.is_none_or(|e| e[i]))
        .map(|&i| Unit {
            index: i,
            score: dist[i],
        })
        .collect();

    let mut ms = match opts.replacement {
        Replacement::With => match_with_replacement(&treated, &controls, rng)?,
        Replacement::Without { caliper_sd } => match opts.caliper_pool {
            CaliperPool::Retained => {
                match_no_replacement_caliper(&treated, &controls, caliper_sd, rng)?
            }
            CaliperPool::AllUnits => {
                if !(caliper_sd > 0.0 && caliper_sd.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "caliper_sd must be positive, got {caliper_sd}"
                    )));
                }
                let width = caliper_sd * stats::sample_sd(dist);
                match_within_caliper(&treated, &controls, width, rng)
            }
        },
    };

    // Controls trimmed off support count as dropped too.
    let mut matched = vec![false; z.len()];
    for &c in &ms.matched_controls {
        matched[c] = true;
    }
    ms.dropped_controls = (0..z.len()).filter(|&i| !z[i] && !matched[i]).collect();
    Ok(ms)
}

/// How often each unit is kept across a collection of matching passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchFrequency {
    /// Fraction of passes in which each unit appears in a pair.
    pub fraction: Vec<f64>,
    /// Percentage of all units kept in at least one pass.
    pub pct_at_least_once: f64,
}

pub fn match_frequency(matchsets: &[MatchSet], n_units: usize) -> Result<MatchFrequency> {
    if matchsets.is_empty() {
        return Err(Error::InsufficientDraws {
            required: 1,
            found: 0,
        });
    }
    let mut counts = vec![0usize; n_units];
    let mut stamp = vec![usize::MAX; n_units];
    for (k, ms) in matchsets.iter().enumerate() {
        for &(t, c) in &ms.pairs {
            for u in [t, c] {
                if u >= n_units {
                    return Err(Error::DimensionMismatch {
                        expected: n_units,
                        found: u + 1,
                    });
                }
                if stamp[u] != k {
                    stamp[u] = k;
                    counts[u] += 1;
                }
            }
        }
    }
    let k = matchsets.len() as f64;
    let ever = counts.iter().filter(|&&c| c > 0).count();
    Ok(MatchFrequency {
        fraction: counts.iter().map(|&c| c as f64 / k).collect(),
        pct_at_least_once: if n_units == 0 {
            0.0
        } else {
            100.0 * ever as f64 / n_units as f64
        },
    })
}
