use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Cohort, CohortError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    /// Largest-first placement into the set furthest below its target.
    Greedy,
    /// Exact subset search, used when the greedy placement misses the band.
    ExactFallback,
}

/// Hospital-disjoint train/test assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_hospitals: BTreeSet<String>,
    pub test_hospitals: BTreeSet<String>,
    pub train_patients: usize,
    pub test_patients: usize,
    pub train_fraction: f64,
    pub method: SplitMethod,
    pub seed: u64,
    pub warning: Option<String>,
}

impl SplitAssignment {
    pub fn is_train(&self, hospital: &str) -> bool {
        self.train_hospitals.contains(hospital)
    }

    /// (hospital_id, "train" | "test") rows, sorted by hospital id.
    pub fn rows(&self) -> Vec<(String, &'static str)> {
        let mut rows: Vec<(String, &'static str)> = self
            .train_hospitals
            .iter()
            .map(|h| (h.clone(), "train"))
            .chain(self.test_hospitals.iter().map(|h| (h.clone(), "test")))
            .collect();
        rows.sort();
        rows
    }

    /// `hospital_id,assignment,patients` CSV; `sizes` supplies the counts.
    pub fn to_csv(&self, sizes: &[(String, usize)]) -> String {
        let mut out = String::from("hospital_id,assignment,patients\n");
        for (h, set) in self.rows() {
            let n = sizes.iter().find(|s| s.0 == h).map_or(0, |s| s.1);
            out.push_str(&format!("{h},{set},{n}\n"));
        }
        out
    }
}

/// Splits a cohort's hospitals into train and test sets.
pub fn split_hospitals(
    cohort: &Cohort,
    train_target: f64,
    tolerance: f64,
    rng_seed: u64,
) -> Result<SplitAssignment, CohortError> {
    split_by_sizes(&cohort.hospital_sizes(), train_target, tolerance, rng_seed)
}

/// Splits hospitals given (hospital_id, patient count).
///
/// Hospitals are sorted by descending size (ties by id). The largest goes to
/// train and the second to test; every later hospital goes to whichever set
/// is further below its target share of the patients placed so far. If that
/// ends outside `train_target ± tolerance`, an exact search over the
/// remaining hospitals (first two placements kept) picks the assignment
/// closest to the target; a warning is attached when the band is unreachable.
pub fn split_by_sizes(
    sizes: &[(String, usize)],
    train_target: f64,
    tolerance: f64,
    rng_seed: u64,
) -> Result<SplitAssignment, CohortError> {
    let hospitals: Vec<&(String, usize)> = sizes.iter().filter(|(_, n)| *n > 0).collect();
    if hospitals.len() < 2 {
        return Err(CohortError::SingleHospital(hospitals.len()));
    }
    if !(0.0..=1.0).contains(&train_target) || !(0.0..=1.0).contains(&tolerance) {
        return Err(CohortError::InvalidArgument("target and tolerance must be in [0, 1]".into()));
    }
    let mut order = hospitals.clone();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total: usize = order.iter().map(|h| h.1).sum();

    let mut in_train = vec![false; order.len()];
    in_train[0] = true;
    let (mut train, mut test) = (order[0].1, order[1].1);
    for (i, h) in order.iter().enumerate().skip(2) {
        let placed = (train + test) as f64;
        let train_deficit = train_target - train as f64 / placed;
        let test_deficit = (1.0 - train_target) - test as f64 / placed;
        if train_deficit >= test_deficit {
            in_train[i] = true;
            train += h.1;
        } else {
            test += h.1;
        }
    }

    let in_band = |t: usize| ((t as f64 / total as f64) - train_target).abs() <= tolerance + 1e-12;
    let mut method = SplitMethod::Greedy;
    let mut warning = None;
    if !in_band(train) {
        let (best, assignment) = closest_subset(&order, total, train_target);
        let greedy_gap = (train as f64 / total as f64 - train_target).abs();
        let best_gap = (best as f64 / total as f64 - train_target).abs();
        if best_gap < greedy_gap {
            in_train = assignment;
            train = best;
            method = SplitMethod::ExactFallback;
        }
        if !in_band(train) {
            warning = Some(format!(
                "train fraction {:.4} is outside {:.2} ± {:.2}; no hospital assignment reaches the band",
                train as f64 / total as f64,
                train_target,
                tolerance
            ));
        }
    }

    let mut split = SplitAssignment {
        train_hospitals: BTreeSet::new(),
        test_hospitals: BTreeSet::new(),
        train_patients: train,
        test_patients: total - train,
        train_fraction: train as f64 / total as f64,
        method,
        seed: rng_seed,
        warning,
    };
    for (h, &t) in order.iter().zip(&in_train) {
        if t {
            split.train_hospitals.insert(h.0.clone());
        } else {
            split.test_hospitals.insert(h.0.clone());
        }
    }
    Ok(split)
}

/// Train total closest to `target · total` with order[0] in train and
/// order[1] in test, by 0/1 subset-sum over the rest.
fn closest_subset(order: &[&(String, usize)], total: usize, target: f64) -> (usize, Vec<bool>) {
    let rest: usize = order[2..].iter().map(|h| h.1).sum();
    let mut reached_by: Vec<Option<usize>> = vec![None; rest + 1];
    let mut reachable = vec![false; rest + 1];
    reachable[0] = true;
    for (i, h) in order.iter().enumerate().skip(2) {
        for s in (h.1..=rest).rev() {
            if !reachable[s] && reachable[s - h.1] {
                reachable[s] = true;
                reached_by[s] = Some(i);
            }
        }
    }
    let goal = target * total as f64;
    let best = (0..=rest)
        .filter(|&s| reachable[s])
        .min_by(|&a, &b| {
            let da = ((order[0].1 + a) as f64 - goal).abs();
            let db = ((order[0].1 + b) as f64 - goal).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .unwrap_or(0);

    let mut in_train = vec![false; order.len()];
    in_train[0] = true;
    let mut s = best;
    while s > 0 {
        let i = reached_by[s].expect("reachable sum has a predecessor");
        in_train[i] = true;
        s -= order[i].1;
    }
    (order[0].1 + best, in_train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(v: &[usize]) -> Vec<(String, usize)> {
        v.iter().enumerate().map(|(i, &n)| (format!("H{i:02}"), n)).collect()
    }

    #[test]
    fn traced_example() {
        let s = split_by_sizes(&sizes(&[100, 50, 30, 20]), 0.75, 0.05, 1).unwrap();
        assert_eq!(s.train_hospitals, ["H00", "H02", "H03"].map(String::from).into());
        assert_eq!(s.test_hospitals, ["H01"].map(String::from).into());
        assert_eq!(s.train_fraction, 0.75);
        assert_eq!(s.method, SplitMethod::Greedy);
        assert!(s.warning.is_none());
    }

    #[test]
    fn two_hospitals_warns() {
        let s = split_by_sizes(&sizes(&[60, 40]), 0.75, 0.05, 1).unwrap();
        assert_eq!(s.train_fraction, 0.6);
        assert!(s.warning.is_some());
    }

    #[test]
    fn greedy_miss_is_repaired() {
        // greedy gives {34, 4} vs {9, 8} = 0.69; {34, 8} vs {9, 4} = 0.764
        let s = split_by_sizes(&sizes(&[34, 9, 8, 4]), 0.75, 0.05, 1).unwrap();
        assert_eq!(s.method, SplitMethod::ExactFallback);
        assert_eq!(s.train_patients, 42);
        assert!(s.warning.is_none());
        assert!(s.is_train("H00") && !s.is_train("H01"));
    }

    #[test]
    fn single_hospital() {
        assert!(matches!(split_by_sizes(&sizes(&[10]), 0.75, 0.05, 1), Err(CohortError::SingleHospital(1))));
        assert!(matches!(split_by_sizes(&sizes(&[10, 0]), 0.75, 0.05, 1), Err(CohortError::SingleHospital(1))));
    }

    #[test]
    fn equal_hospitals_land_in_band() {
        let s = split_by_sizes(&sizes(&[12; 69]), 0.75, 0.05, 7).unwrap();
        assert!((s.train_fraction - 0.75).abs() <= 0.05);
        assert_eq!(s.train_hospitals.len() + s.test_hospitals.len(), 69);
    }
}
