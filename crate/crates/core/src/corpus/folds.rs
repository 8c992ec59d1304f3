use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A video and the parent sequence it belongs to. Pre-fall, fall and post-fall
/// cuts of one recording share a `group_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedVideo {
    pub video_id: String,
    pub group_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// `video_id -> fold index` in `0..k`.
    pub folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, video_id: &str) -> Option<usize> {
        self.folds.get(video_id).copied()
    }

    /// Video ids in `fold`, sorted.
    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(v, _)| v.as_str())
            .collect()
    }
}

/// Splits videos into `k` folds so that whole parent groups land in one fold.
///
/// Groups are sorted, shuffled with a ChaCha8 stream seeded from `seed`, and dealt
/// round-robin, so fold sizes (in groups) differ by at most one.
pub fn assign_folds(videos: &[GroupedVideo], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "fold count must be >= 2, got {k}"
        )));
    }
    let mut groups: Vec<&str> = videos
        .iter()
        .map(|v| v.group_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if groups.len() < k {
        return Err(Error::Infeasible(format!(
            "{} parent groups cannot fill {k} folds",
            groups.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let group_fold: BTreeMap<&str, usize> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| (*g, i % k))
        .collect();

    let mut folds = BTreeMap::new();
    for v in videos {
        let fold = group_fold[v.group_id.as_str()];
        if let Some(prev) = folds.insert(v.video_id.clone(), fold) {
            if prev != fold {
                return Err(Error::InvalidInput(format!(
                    "video {} listed under two parent groups",
                    v.video_id
                )));
            }
        }
    }
    Ok(FoldAssignment { k, seed, folds })
}
