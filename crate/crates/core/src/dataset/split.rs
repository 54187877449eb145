use rand::seq::SliceRandom;

use super::GestureDataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

fn test_count(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Partitions `dataset` into `(train, test)`.
///
/// With `stratified`, each class contributes `round(n_c · fraction)` samples
/// to the test side, clamped so both sides keep at least one; classes with a
/// single sample are rejected. Both sides keep the input order.
pub fn split(
    dataset: &GestureDataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(GestureDataset, GestureDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = seeded(seed);
    let mut is_test = vec![false; dataset.len()];

    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
        for (i, s) in dataset.samples.iter().enumerate() {
            by_class[s.label].push(i);
        }
        for (class, mut idx) in by_class.into_iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            if idx.len() < 2 {
                return Err(Error::Data(format!(
                    "class {class} has a single sample; stratified split needs two"
                )));
            }
            idx.shuffle(&mut rng);
            let k = test_count(idx.len(), test_fraction).clamp(1, idx.len() - 1);
            for &i in &idx[..k] {
                is_test[i] = true;
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..dataset.len()).collect();
        idx.shuffle(&mut rng);
        let k = test_count(idx.len(), test_fraction);
        for &i in &idx[..k] {
            is_test[i] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, t) in dataset.samples.iter().zip(is_test) {
        if t {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((
        GestureDataset {
            samples: train,
            class_names: dataset.class_names.clone(),
        },
        GestureDataset {
            samples: test,
            class_names: dataset.class_names.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{numbered_classes, GestureSample, FEATURES, FRAMES};
    use proptest::prelude::*;

    fn dataset(counts: &[usize]) -> GestureDataset {
        let mut samples = Vec::new();
        for (label, &n) in counts.iter().enumerate() {
            for k in 0..n {
                let v = vec![(label * 1000 + k) as f64; FRAMES * FEATURES];
                samples.push(GestureSample::from_flat(v, label).unwrap());
            }
        }
        GestureDataset::new(samples, numbered_classes(counts.len())).unwrap()
    }

    fn ids(ds: &GestureDataset) -> Vec<f64> {
        ds.samples.iter().map(|s| s.values()[0]).collect()
    }

    #[test]
    fn balanced_half_split() {
        let ds = dataset(&[20; 6]);
        let (train, test) = split(&ds, 0.5, 7, true).unwrap();
        assert_eq!(train.len(), 60);
        assert_eq!(test.len(), 60);
        assert_eq!(train.class_counts(), vec![10; 6]);
        assert_eq!(test.class_counts(), vec![10; 6]);
    }

    #[test]
    fn same_seed_same_split() {
        let ds = dataset(&[9, 13, 4]);
        let a = split(&ds, 0.3, 11, true).unwrap();
        let b = split(&ds, 0.3, 11, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singleton_class_rejected_when_stratified() {
        let ds = dataset(&[5, 1]);
        assert!(matches!(split(&ds, 0.5, 0, true), Err(Error::Data(_))));
        assert!(split(&ds, 0.5, 0, false).is_ok());
    }

    #[test]
    fn fraction_bounds() {
        let ds = dataset(&[4, 4]);
        assert!(split(&ds, 0.0, 0, true).is_err());
        assert!(split(&ds, 1.0, 0, true).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            counts in prop::collection::vec(2usize..15, 2..6),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
            stratified in any::<bool>(),
        ) {
            let ds = dataset(&counts);
            let (train, test) = split(&ds, fraction, seed, stratified).unwrap();
            let mut all: Vec<f64> = ids(&train).into_iter().chain(ids(&test)).collect();
            all.sort_by(f64::total_cmp);
            let mut expected = ids(&ds);
            expected.sort_by(f64::total_cmp);
            prop_assert_eq!(all, expected);
            if stratified {
                for (c, &n) in counts.iter().enumerate() {
                    let want = n as f64 * fraction;
                    let got = test.class_counts()[c] as f64;
                    prop_assert!((got - want).abs() <= 1.0, "class {} got {} want {}", c, got, want);
                }
            }
        }
    }
}
