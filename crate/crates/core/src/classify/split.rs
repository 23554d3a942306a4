use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Disjoint train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub train_fraction: f64,
}

fn group_by_class(rows: impl Iterator<Item = usize>, labels: &[u16]) -> BTreeMap<u16, Vec<usize>> {
    let mut classes: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for r in rows {
        classes.entry(labels[r]).or_default().push(r);
    }
    classes
}

/// Per-class shuffle-and-cut split.
///
/// Classes are visited in ascending label order and each is shuffled by a
/// single SplitMix64 stream seeded with `seed`. A class of size `m` puts
/// `round(fraction · m)` rows in train, clamped so both sides keep at
/// least one row.
pub fn stratified_split(labels: &[u16], fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {fraction} outside (0, 1)"
        )));
    }
    let classes = group_by_class(0..labels.len(), labels);
    if let Some((&label, rows)) = classes.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::ClassTooSmall {
            label,
            count: rows.len(),
        });
    }
    if classes.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rng = SplitMix64::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for rows in classes.into_values() {
        let mut rows = rows;
        rows.shuffle(&mut rng);
        let m = rows.len();
        let n_train = ((fraction * m as f64).round() as usize).clamp(1, m - 1);
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        test,
        seed,
        train_fraction: fraction,
    })
}

/// Draws at most `cap` of `rows`, keeping class proportions.
///
/// Quotas use largest remainders with at least one row per class, so the
/// result can exceed `cap` only when `cap` is below the class count.
pub fn stratified_subsample(rows: &[usize], labels: &[u16], cap: usize, seed: u64) -> Vec<usize> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let classes = group_by_class(rows.iter().copied(), labels);
    let total = rows.len();
    let mut quotas: Vec<(usize, f64)> = classes
        .values()
        .map(|r| {
            let exact = cap as f64 * r.len() as f64 / total as f64;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for &c in by_remainder.iter().take(cap.saturating_sub(assigned)) {
        quotas[c].0 += 1;
    }

    let mut rng = SplitMix64::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut out = Vec::with_capacity(cap);
    for (rows, (quota, _)) in classes.into_values().zip(quotas) {
        let mut rows = rows;
        rows.shuffle(&mut rng);
        out.extend_from_slice(&rows[..quota.clamp(1, rows.len())]);
    }
    out.sort_unstable();
    out
}
