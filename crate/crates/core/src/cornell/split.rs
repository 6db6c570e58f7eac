use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, RgbdSample};

pub const FOLDS: usize = 5;

/// Recorded in every plan so a fold assignment can be reproduced elsewhere.
pub const SHUFFLE_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.3, seed_from_u64) driving a Fisher-Yates shuffle (rand 0.8 SliceRandom::shuffle) of the sorted keys";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    ImageWise,
    ObjectWise,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "image-wise" | "image" => Ok(SplitMode::ImageWise),
            "object-wise" | "object" => Ok(SplitMode::ObjectWise),
            other => Err(format!("unknown split mode {other:?}; use image-wise or object-wise")),
        }
    }
}

/// Anything with a sample id and an object identity.
pub trait Identified {
    fn sample_id(&self) -> &str;
    fn object_id(&self) -> &str;
}

impl Identified for RgbdSample {
    fn sample_id(&self) -> &str {
        &self.id
    }

    fn object_id(&self) -> &str {
        &self.object_id
    }
}

impl<T: Identified + ?Sized> Identified for &T {
    fn sample_id(&self) -> &str {
        (**self).sample_id()
    }

    fn object_id(&self) -> &str {
        (**self).object_id()
    }
}

impl Identified for (String, String) {
    fn sample_id(&self) -> &str {
        &self.0
    }

    fn object_id(&self) -> &str {
        &self.1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
    /// Sample ids per fold, each fold sorted.
    pub folds: Vec<Vec<String>>,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
}

fn default_algorithm() -> String {
    SHUFFLE_ALGORITHM.to_string()
}

impl SplitPlan {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.folds.iter().position(|f| f.iter().any(|s| s == id))
    }

    /// Checks that the folds partition `items` and, object-wise, that no
    /// object spans two folds.
    pub fn check<T: Identified>(&self, items: &[T]) -> Result<(), String> {
        let mut fold_of: HashMap<&str, usize> = HashMap::new();
        for (k, fold) in self.folds.iter().enumerate() {
            for id in fold {
                if fold_of.insert(id, k).is_some() {
                    return Err(format!("sample {id} appears in more than one fold"));
                }
            }
        }
        if fold_of.len() != items.len() {
            return Err(format!("plan covers {} samples, dataset has {}", fold_of.len(), items.len()));
        }
        let mut object_fold: HashMap<&str, usize> = HashMap::new();
        for item in items {
            let k = *fold_of
                .get(item.sample_id())
                .ok_or_else(|| format!("sample {} is in no fold", item.sample_id()))?;
            if self.mode == SplitMode::ObjectWise {
                let prev = *object_fold.entry(item.object_id()).or_insert(k);
                if prev != k {
                    return Err(format!("object {} spans folds {prev} and {k}", item.object_id()));
                }
            }
        }
        Ok(())
    }
}

/// Seeded 5-fold plan. Image-wise: shuffled ids cut into contiguous folds
/// whose sizes differ by at most one. Object-wise: shuffled object ids dealt
/// round-robin into the folds, each object taking all of its samples along.
pub fn make_splits<T: Identified>(items: &[T], mode: SplitMode, seed: u64) -> Result<SplitPlan, DataError> {
    let ids: BTreeSet<&str> = items.iter().map(Identified::sample_id).collect();
    if ids.len() != items.len() {
        return Err(DataError::Split("sample ids are not unique".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); FOLDS];
    match mode {
        SplitMode::ImageWise => {
            if ids.len() < FOLDS {
                return Err(DataError::Split(format!(
                    "{} samples cannot fill {FOLDS} folds",
                    ids.len()
                )));
            }
            let mut order: Vec<&str> = ids.into_iter().collect();
            order.shuffle(&mut rng);
            let (base, extra) = (order.len() / FOLDS, order.len() % FOLDS);
            let mut rest = order.as_slice();
            for (k, fold) in folds.iter_mut().enumerate() {
                let (head, tail) = rest.split_at(base + usize::from(k < extra));
                fold.extend(head.iter().map(|s| s.to_string()));
                rest = tail;
            }
        }
        SplitMode::ObjectWise => {
            let mut by_object: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for item in items {
                by_object.entry(item.object_id()).or_default().push(item.sample_id());
            }
            if by_object.len() < FOLDS {
                return Err(DataError::Split(format!(
                    "object-wise splitting needs at least {FOLDS} objects, found {}",
                    by_object.len()
                )));
            }
            let mut objects: Vec<&str> = by_object.keys().copied().collect();
            objects.shuffle(&mut rng);
            for (pos, obj) in objects.iter().enumerate() {
                folds[pos % FOLDS].extend(by_object[obj].iter().map(|s| s.to_string()));
            }
        }
    }
    for fold in &mut folds {
        fold.sort_by_key(|id| (id.parse::<u64>().unwrap_or(u64::MAX), id.clone()));
    }
    Ok(SplitPlan {
        mode,
        seed,
        folds,
        algorithm: default_algorithm(),
    })
}
