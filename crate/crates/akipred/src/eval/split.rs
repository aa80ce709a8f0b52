//! Patient-level train/test splitting, stratified k-fold partitioning and
//! random under-sampling. All stays of one patient land on one side of every
//! boundary.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Minimal view of a stay for splitting purposes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StayRef {
    pub stay_id: String,
    pub patient_id: String,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub ratio: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn patients_of(stays: &[StayRef]) -> BTreeMap<&str, Vec<&StayRef>> {
    let mut map: BTreeMap<&str, Vec<&StayRef>> = BTreeMap::new();
    for stay in stays {
        map.entry(stay.patient_id.as_str()).or_default().push(stay);
    }
    map
}

/// Shuffle patients by seed and assign them greedily to the training side
/// until it holds `ratio` of the stays; everyone else tests. Output id lists
/// are sorted, so equal seeds give identical plans byte for byte.
pub fn patient_split(stays: &[StayRef], ratio: f64, seed: u64) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParam("split ratio must be in (0, 1)".into()));
    }
    let by_patient = patients_of(stays);
    if by_patient.len() < 2 {
        return Err(Error::TooFewPatients { needed: 2, found: by_patient.len() });
    }
    let mut patients: Vec<&str> = by_patient.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);

    let target = ratio * stays.len() as f64;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut train_stays = 0usize;
    for patient in patients {
        let group = &by_patient[patient];
        if (train_stays as f64) < target {
            train_stays += group.len();
            train.extend(group.iter().map(|s| s.stay_id.clone()));
        } else {
            test.extend(group.iter().map(|s| s.stay_id.clone()));
        }
    }
    if test.is_empty() {
        // a single huge patient swallowed the target; hand the last train
        // patient to the test side
        let last = by_patient.keys().next_back().unwrap();
        let moved: Vec<String> = by_patient[last].iter().map(|s| s.stay_id.clone()).collect();
        train.retain(|id| !moved.contains(id));
        test = moved;
    }
    train.sort();
    test.sort();
    Ok(SplitPlan { seed, ratio, train, test })
}

/// Patient-atomic k folds, stratified by patient label (any positive stay).
/// Returns sorted stay-id lists, one per fold.
pub fn kfold(stays: &[StayRef], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::InvalidParam("k must be >= 2".into()));
    }
    let by_patient = patients_of(stays);
    if by_patient.len() < k {
        return Err(Error::TooFewPatients { needed: k, found: by_patient.len() });
    }
    let mut positives: Vec<&str> = Vec::new();
    let mut negatives: Vec<&str> = Vec::new();
    for (patient, group) in &by_patient {
        if group.iter().any(|s| s.label == 1) {
            positives.push(patient);
        } else {
            negatives.push(patient);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, patient) in positives.iter().chain(negatives.iter()).enumerate() {
        folds[i % k].extend(by_patient[*patient].iter().map(|s| s.stay_id.clone()));
    }
    for fold in folds.iter_mut() {
        fold.sort();
    }
    Ok(folds)
}

/// Indices of the undersampled rows: every positive row is kept and the
/// negatives are drawn without replacement down to `neg_per_pos` negatives
/// per positive (all of them if already fewer). Indices come back sorted, so
/// row order is preserved.
pub fn undersample_indices(labels: &[u8], neg_per_pos: f64, seed: u64) -> Result<Vec<usize>> {
    if neg_per_pos <= 0.0 {
        return Err(Error::InvalidParam("neg_per_pos must be positive".into()));
    }
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut negatives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass);
    }
    let target = ((positives.len() as f64) * neg_per_pos).round() as usize;
    if negatives.len() > target {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        negatives.shuffle(&mut rng);
        negatives.truncate(target);
    }
    let mut keep = positives;
    keep.extend(negatives);
    keep.sort_unstable();
    Ok(keep)
}

/// Undersampled copy of a matrix (rows stay in stay-id order).
pub fn undersample(matrix: &FeatureMatrix, neg_per_pos: f64, seed: u64) -> Result<FeatureMatrix> {
    let keep = undersample_indices(&matrix.labels, neg_per_pos, seed)?;
    Ok(matrix.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn single_stay_cohort(n: usize) -> Vec<StayRef> {
        (0..n)
            .map(|i| StayRef {
                stay_id: format!("s{i:04}"),
                patient_id: format!("p{i:04}"),
                label: (i % 5 == 0) as u8,
            })
            .collect()
    }

    #[test]
    fn ten_patients_split_seven_three() {
        let stays = single_stay_cohort(10);
        let plan = patient_split(&stays, 0.7, 42).unwrap();
        assert_eq!(plan.train.len(), 7);
        assert_eq!(plan.test.len(), 3);
    }

    #[test]
    fn multi_stay_patient_is_atomic() {
        let mut stays = single_stay_cohort(9);
        for i in 0..3 {
            stays.push(StayRef {
                stay_id: format!("m{i}"),
                patient_id: "p_multi".into(),
                label: 0,
            });
        }
        let plan = patient_split(&stays, 0.7, 7).unwrap();
        let train: HashSet<&String> = plan.train.iter().collect();
        let on_train: Vec<bool> =
            ["m0", "m1", "m2"].iter().map(|id| train.contains(&id.to_string())).collect();
        assert!(on_train.iter().all(|&b| b) || on_train.iter().all(|&b| !b));
    }

    #[test]
    fn same_seed_same_plan() {
        let stays = single_stay_cohort(50);
        let a = patient_split(&stays, 0.7, 5).unwrap();
        let b = patient_split(&stays, 0.7, 5).unwrap();
        let c = patient_split(&stays, 0.7, 6).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn too_few_patients_rejected() {
        let stays = vec![StayRef { stay_id: "s".into(), patient_id: "p".into(), label: 0 }];
        assert!(matches!(patient_split(&stays, 0.5, 0), Err(Error::TooFewPatients { .. })));
    }

    #[test]
    fn kfold_partitions_evenly() {
        let stays = single_stay_cohort(10);
        let folds = kfold(&stays, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        for fold in &folds {
            assert_eq!(fold.len(), 2);
        }
        let mut all: Vec<String> = folds.concat();
        all.sort();
        let mut expected: Vec<String> = stays.iter().map(|s| s.stay_id.clone()).collect();
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn kfold_folds_are_disjoint_and_patient_atomic() {
        let mut stays = single_stay_cohort(20);
        stays.push(StayRef { stay_id: "x0".into(), patient_id: "p0000".into(), label: 1 });
        let folds = kfold(&stays, 4, 9).unwrap();
        let mut seen: HashSet<String> = HashSet::new();
        for fold in &folds {
            for id in fold {
                assert!(seen.insert(id.clone()), "stay {id} in two folds");
            }
        }
        // p0000 owns s0000 and x0; both must share a fold
        let fold_of = |id: &str| folds.iter().position(|f| f.iter().any(|s| s == id)).unwrap();
        assert_eq!(fold_of("s0000"), fold_of("x0"));
    }

    #[test]
    fn undersample_hits_exact_ratio() {
        let mut labels = vec![1u8; 100];
        labels.extend(vec![0u8; 500]);
        let keep = undersample_indices(&labels, 1.0, 11).unwrap();
        assert_eq!(keep.iter().filter(|&&i| labels[i] == 1).count(), 100);
        assert_eq!(keep.iter().filter(|&&i| labels[i] == 0).count(), 100);

        let keep = undersample_indices(&labels, 3.0, 11).unwrap();
        assert_eq!(keep.iter().filter(|&&i| labels[i] == 0).count(), 300);
    }

    #[test]
    fn undersample_keeps_all_when_negatives_scarce() {
        let mut labels = vec![1u8; 100];
        labels.extend(vec![0u8; 50]);
        let keep = undersample_indices(&labels, 1.0, 11).unwrap();
        assert_eq!(keep.len(), 150);
    }

    #[test]
    fn undersample_never_drops_a_positive_and_sorts() {
        let labels = vec![0, 1, 0, 0, 1, 0, 0, 1, 0, 0];
        let keep = undersample_indices(&labels, 1.0, 2).unwrap();
        for &i in &[1usize, 4, 7] {
            assert!(keep.contains(&i));
        }
        assert!(keep.windows(2).all(|w| w[0] < w[1]));
    }
}
