//! Peakedness scoring and representative selection.
//!
//! Given `N` sampled names for one component, each candidate is scored by
//! how many *other* candidates lie within a length-adaptive edit-distance
//! radius `τ = α · ℓ_max`. The highest-scoring candidate wins; ties go to
//! the candidate closest to the greedy reference name, then to the
//! lexicographically smallest string.

mod distance;

pub use distance::{edit_distance, DistanceMatrix};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PeakednessError {
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(String),
    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(String),
    #[error("{scores} scores for {candidates} candidates")]
    LengthMismatch { candidates: usize, scores: usize },
    #[error("reference name is empty")]
    EmptyReference,
}

/// Similarity radius for one candidate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold<S> {
    pub alpha: S,
    /// Longest candidate, in characters.
    pub max_length: usize,
    /// `alpha × max_length`, unrounded.
    pub tau: S,
}

/// Computes `τ = α · ℓ_max` where `ℓ_max` is the longest candidate in
/// characters. The reference name is not part of `candidates`.
pub fn compute_threshold<S: Scalar, T: AsRef<str>>(
    candidates: &[T],
    alpha: S,
) -> Result<Threshold<S>, PeakednessError> {
    if candidates.is_empty() {
        return Err(PeakednessError::NoCandidates);
    }
    if !(alpha >= S::zero() && alpha <= S::one()) {
        return Err(PeakednessError::AlphaOutOfRange(format!("{alpha:?}")));
    }
    let max_length = candidates
        .iter()
        .map(|c| c.as_ref().chars().count())
        .max()
        .unwrap_or(0);
    Ok(Threshold {
        alpha,
        max_length,
        tau: alpha * S::from_count(max_length),
    })
}

/// `φ(s_i) = |{ j ≠ i : d(s_i, s_j) ≤ τ }|`. Duplicates count individually.
pub fn peakedness_scores<S: Scalar, T: AsRef<str>>(
    candidates: &[T],
    tau: S,
) -> Result<Vec<usize>, PeakednessError> {
    scores_from_matrix(&DistanceMatrix::new(candidates), tau)
}

/// Scores from a precomputed distance matrix, so one matrix can be reused
/// across several thresholds.
pub fn scores_from_matrix<S: Scalar>(
    matrix: &DistanceMatrix,
    tau: S,
) -> Result<Vec<usize>, PeakednessError> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    if !(tau >= S::zero()) {
        return Err(PeakednessError::NegativeThreshold(format!("{tau:?}")));
    }
    let n = matrix.len();
    let within = |d: usize| S::from_count(d) <= tau;
    Ok((0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && within(matrix.get(i, j)))
                .count()
        })
        .collect())
}

/// Outcome of the argmax + tie-break step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// First index holding the selected string.
    pub index: usize,
    pub selected: String,
    /// Indices attaining the maximum score, ascending.
    pub argmax_set: Vec<usize>,
    /// Several distinct strings shared the maximum score and distance to
    /// the reference decided between them.
    pub tie_broken_by_reference: bool,
    /// Several distinct strings were also equidistant to the reference and
    /// the lexicographic order decided.
    pub tie_broken_lexicographically: bool,
}

/// Picks the highest-peakedness candidate; ties go to the smallest edit
/// distance to `reference`, then to the lexicographically smallest string.
pub fn select_representative<T: AsRef<str>>(
    candidates: &[T],
    scores: &[usize],
    reference: &str,
) -> Result<Selection, PeakednessError> {
    let ranked = rank_candidates(candidates, scores, reference)?;
    let best = &ranked[0];
    let argmax_set: Vec<usize> = (0..candidates.len())
        .filter(|&i| scores[i] == best.peakedness)
        .collect();

    let top: Vec<&RankedName> = ranked
        .iter()
        .take_while(|r| r.peakedness == best.peakedness)
        .collect();
    let tie_broken_by_reference = top.len() > 1;
    let tie_broken_lexicographically = top
        .iter()
        .filter(|r| r.reference_distance == best.reference_distance)
        .count()
        > 1;

    Ok(Selection {
        index: best.first_index,
        selected: best.name.clone(),
        argmax_set,
        tie_broken_by_reference,
        tie_broken_lexicographically,
    })
}

/// A distinct candidate string with its selection keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedName {
    pub name: String,
    pub first_index: usize,
    pub occurrences: usize,
    pub peakedness: usize,
    pub reference_distance: usize,
}

/// Distinct candidate strings in selection-preference order: peakedness
/// descending, then distance to the reference ascending, then the string.
/// The first entry is the selected representative; the rest are the
/// fallbacks used when a name is already taken.
pub fn rank_candidates<T: AsRef<str>>(
    candidates: &[T],
    scores: &[usize],
    reference: &str,
) -> Result<Vec<RankedName>, PeakednessError> {
    if candidates.is_empty() {
        return Err(PeakednessError::NoCandidates);
    }
    if scores.len() != candidates.len() {
        return Err(PeakednessError::LengthMismatch {
            candidates: candidates.len(),
            scores: scores.len(),
        });
    }
    if reference.is_empty() {
        return Err(PeakednessError::EmptyReference);
    }
    let mut distinct: Vec<RankedName> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let c = c.as_ref();
        match distinct.iter_mut().find(|r| r.name == c) {
            Some(r) => r.occurrences += 1,
            None => distinct.push(RankedName {
                name: c.to_string(),
                first_index: i,
                occurrences: 1,
                // identical strings always share a score
                peakedness: scores[i],
                reference_distance: edit_distance(c, reference),
            }),
        }
    }
    distinct.sort_by(|a, b| {
        b.peakedness
            .cmp(&a.peakedness)
            .then(a.reference_distance.cmp(&b.reference_distance))
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(distinct)
}

/// Full audit record for one component's selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakednessReport<S> {
    pub alpha: S,
    pub threshold: S,
    pub max_length: usize,
    pub candidates: Vec<String>,
    pub reference: String,
    /// `scores[i]` is `φ` of `candidates[i]`.
    pub scores: Vec<usize>,
    pub argmax_set: Vec<usize>,
    pub selected: String,
    pub selected_index: usize,
    pub tie_broken_by_reference: bool,
    pub tie_broken_lexicographically: bool,
}

impl<S: Scalar> PeakednessReport<S> {
    pub fn selected_peakedness(&self) -> usize {
        self.scores[self.selected_index]
    }

    /// Distinct candidates with their occurrence counts, most frequent
    /// first (ties in first-seen order).
    pub fn frequencies(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for c in &self.candidates {
            match out.iter_mut().find(|(n, _)| n == c) {
                Some((_, k)) => *k += 1,
                None => out.push((c.clone(), 1)),
            }
        }
        out.sort_by_key(|c| std::cmp::Reverse(c.1));
        out
    }

    pub fn ranked(&self) -> Vec<RankedName> {
        rank_candidates(&self.candidates, &self.scores, &self.reference)
            .expect("report invariants hold")
    }

    /// Distinct strings in the argmax set.
    pub fn argmax_names(&self) -> BTreeSet<&str> {
        self.argmax_set
            .iter()
            .map(|&i| self.candidates[i].as_str())
            .collect()
    }
}

/// Threshold, scores and selection in one pass.
pub fn analyze<S: Scalar, T: AsRef<str>>(
    candidates: &[T],
    reference: &str,
    alpha: S,
) -> Result<PeakednessReport<S>, PeakednessError> {
    analyze_with_threads(candidates, reference, alpha, 1)
}

pub fn analyze_with_threads<S: Scalar, T: AsRef<str>>(
    candidates: &[T],
    reference: &str,
    alpha: S,
    threads: usize,
) -> Result<PeakednessReport<S>, PeakednessError> {
    let threshold = compute_threshold(candidates, alpha)?;
    let matrix = DistanceMatrix::with_threads(candidates, threads);
    let scores = scores_from_matrix(&matrix, threshold.tau)?;
    let selection = select_representative(candidates, &scores, reference)?;
    Ok(PeakednessReport {
        alpha,
        threshold: threshold.tau,
        max_length: threshold.max_length,
        candidates: candidates.iter().map(|c| c.as_ref().to_string()).collect(),
        reference: reference.to_string(),
        scores,
        argmax_set: selection.argmax_set,
        selected: selection.selected,
        selected_index: selection.index,
        tie_broken_by_reference: selection.tie_broken_by_reference,
        tie_broken_lexicographically: selection.tie_broken_lexicographically,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn threshold_is_alpha_times_longest() {
        let c = ["abcdefgh", "abcdefghijkl", "abcdefghijklmno"];
        let t = compute_threshold(&c, 0.2_f64).unwrap();
        assert_eq!(t.max_length, 15);
        assert!((t.tau - 3.0).abs() < 1e-12);

        let t = compute_threshold(&c, 0.0_f64).unwrap();
        assert_eq!(t.tau, 0.0);

        let t =
            compute_threshold(&["abcd", "abcdefg", "abcdefghij"], Rational::new(3, 10)).unwrap();
        assert_eq!(t.tau, Rational::from_integer(3));
        assert_eq!(t.max_length, 10);
    }

    #[test]
    fn threshold_counts_characters_not_bytes() {
        let t = compute_threshold(&["日本語"], 1.0_f64).unwrap();
        assert_eq!(t.max_length, 3);
    }

    #[test]
    fn threshold_errors() {
        assert_eq!(
            compute_threshold::<f64, &str>(&[], 0.2),
            Err(PeakednessError::NoCandidates)
        );
        assert!(matches!(
            compute_threshold(&["a"], 1.5_f64),
            Err(PeakednessError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            compute_threshold(&["a"], -0.1_f64),
            Err(PeakednessError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            compute_threshold(&["a"], f64::NAN),
            Err(PeakednessError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn scores_count_other_candidates_within_tau() {
        let c = ["get_user", "get_user", "fetch_data"];
        assert_eq!(peakedness_scores(&c, 1.0_f64).unwrap(), [1, 1, 0]);
        assert_eq!(peakedness_scores(&["x"; 5], 0.0_f64).unwrap(), [4; 5]);
        assert_eq!(peakedness_scores(&["solo"], 2.0_f64).unwrap(), [0]);
        assert!(peakedness_scores(&["a"], -1.0_f64).is_err());
    }

    #[test]
    fn unique_maximum_sets_no_flags() {
        let c = names(&["read_file", "read_file", "read_files", "open"]);
        let s = select_representative(&c, &[3, 3, 1, 0], "open").unwrap();
        assert_eq!(s.selected, "read_file");
        assert_eq!(s.argmax_set, [0, 1]);
        assert!(!s.tie_broken_by_reference && !s.tie_broken_lexicographically);
    }

    #[test]
    fn reference_breaks_ties() {
        // d(save_file, save_data) = 4, d(store_file, save_data) = 7
        assert_eq!(edit_distance("save_file", "save_data"), 4);
        assert_eq!(edit_distance("store_file", "save_data"), 7);
        let c = ["save_file", "store_file"];
        let s = select_representative(&c, &[1, 1], "save_data").unwrap();
        assert_eq!(s.selected, "save_file");
        assert_eq!(s.argmax_set, [0, 1]);
        assert!(s.tie_broken_by_reference);
        assert!(!s.tie_broken_lexicographically);
    }

    #[test]
    fn lexicographic_fallback_after_reference() {
        // both at distance 1 from "ab"
        let c = ["bb", "aa"];
        let s = select_representative(&c, &[0, 0], "ab").unwrap();
        assert_eq!(s.selected, "aa");
        assert_eq!(s.index, 1);
        assert!(s.tie_broken_by_reference && s.tie_broken_lexicographically);
    }

    #[test]
    fn identical_strings_tie_vacuously() {
        let c = ["same", "same"];
        let s = select_representative(&c, &[1, 1], "other").unwrap();
        assert_eq!(s.selected, "same");
        assert_eq!(s.index, 0);
        assert!(!s.tie_broken_by_reference && !s.tie_broken_lexicographically);
    }

    #[test]
    fn selection_preconditions() {
        assert_eq!(
            select_representative::<&str>(&[], &[], "r"),
            Err(PeakednessError::NoCandidates)
        );
        assert!(matches!(
            select_representative(&["a"], &[0, 1], "r"),
            Err(PeakednessError::LengthMismatch { .. })
        ));
        assert_eq!(
            select_representative(&["a"], &[0], ""),
            Err(PeakednessError::EmptyReference)
        );
    }

    #[test]
    fn frequent_name_loses_to_tighter_cluster_tie() {
        // the diet tool example: 5× diet_tracker vs 4× diet_insights plus one
        // close variant; both reach φ = 4 and sit 11 edits from the greedy
        // reference, so the lexicographic rule settles it
        let mut c: Vec<&str> = Vec::new();
        c.extend(["diet_tracker"; 5]);
        c.extend(["diet_insights"; 4]);
        c.push("diets_insights");
        c.extend(["calorie_tracker"; 3]);
        c.extend(["nutri_guide"; 3]);
        c.extend(["eatwise"; 3]);
        c.extend(["nutrify"; 2]);
        c.extend(["nutri_navigator"; 2]);
        c.extend(["diet_planner"; 2]);
        c.extend([
            "meal_mate",
            "calorie_counter",
            "nutrition_helper",
            "diet_assistant",
            "calorie_coach",
            "food_logger",
            "grocery_guide",
        ]);
        assert_eq!(c.len(), 32);
        let report = analyze(&c, "nutri_guide", 0.2_f64).unwrap();
        assert_eq!(report.selected, "diet_insights");
        assert_eq!(report.selected_peakedness(), 4);
        assert_eq!(report.max_length, 16);
        assert_eq!(report.scores[0], 4);
        assert_eq!(report.frequencies()[0], ("diet_tracker".to_string(), 5));
        assert!(report.tie_broken_by_reference && report.tie_broken_lexicographically);
        assert_eq!(
            report.argmax_names().into_iter().collect::<Vec<_>>(),
            ["diet_insights", "diet_tracker", "diets_insights"]
        );
        assert_eq!(report.scores, oracle::naive_peakedness(&c, 0.2));
    }

    #[test]
    fn rational_and_float_thresholds_agree_on_defaults() {
        let c = [
            "get_weather",
            "get_weather_data",
            "weather",
            "fetch_weather",
            "get_forecast",
        ];
        for (num, f) in [(1, 0.1), (2, 0.2), (3, 0.3)] {
            let exact = analyze(&c, "get_weather", Rational::new(num, 10)).unwrap();
            let float = analyze(&c, "get_weather", f).unwrap();
            assert_eq!(exact.scores, float.scores);
            assert_eq!(exact.selected, float.selected);
        }
    }

    proptest! {
        #[test]
        fn scores_match_naive_oracle(
            c in prop::collection::vec("[abc_]{1,10}", 1..40),
            alpha_idx in 0usize..5,
        ) {
            let alpha = [0.0, 0.1, 0.2, 0.3, 1.0][alpha_idx];
            let t = compute_threshold(&c, alpha).unwrap();
            prop_assert_eq!(peakedness_scores(&c, t.tau).unwrap(), oracle::naive_peakedness(&c, alpha));
        }

        #[test]
        fn raising_alpha_never_lowers_scores(c in prop::collection::vec("[abc_]{1,10}", 1..30)) {
            let m = DistanceMatrix::new(&c);
            let mut prev = vec![0; c.len()];
            for alpha in [0.0, 0.1, 0.2, 0.3, 0.5, 1.0] {
                let t = compute_threshold(&c, alpha).unwrap();
                let s = scores_from_matrix(&m, t.tau).unwrap();
                prop_assert!(s.iter().zip(&prev).all(|(a, b)| a >= b));
                prev = s;
            }
        }

        #[test]
        fn selected_string_is_permutation_invariant(
            c in prop::collection::vec("[ab_]{1,6}", 1..20),
            reference in "[ab_]{1,6}",
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let base = analyze(&c, &reference, 0.2_f64).unwrap();
            let mut shuffled = c.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let other = analyze(&shuffled, &reference, 0.2_f64).unwrap();
            prop_assert_eq!(&base.selected, &other.selected);
            prop_assert_eq!(base.tie_broken_by_reference, other.tie_broken_by_reference);
            prop_assert_eq!(base.tie_broken_lexicographically, other.tie_broken_lexicographically);
        }

        #[test]
        fn max_score_is_n_minus_one_iff_all_within_tau(c in prop::collection::vec("[ab]{1,5}", 2..12)) {
            let t = compute_threshold(&c, 0.3_f64).unwrap();
            let s = peakedness_scores(&c, t.tau).unwrap();
            let all_close = c.iter().all(|a| c.iter().all(|b| (edit_distance(a, b) as f64) <= t.tau));
            prop_assert_eq!(s.iter().all(|&x| x == c.len() - 1), all_close);
            prop_assert!(s.iter().all(|&x| x < c.len()));
        }

        #[test]
        fn report_invariants(c in prop::collection::vec("[abc]{1,6}", 1..20), reference in "[abc]{1,4}") {
            let r = analyze(&c, &reference, 0.2_f64).unwrap();
            let max = *r.scores.iter().max().unwrap();
            prop_assert!(!r.argmax_set.is_empty());
            prop_assert!(r.argmax_set.iter().all(|&i| r.scores[i] == max));
            prop_assert_eq!(&r.candidates[r.selected_index], &r.selected);
            prop_assert!(r.argmax_set.contains(&r.selected_index));
            prop_assert_eq!(r.threshold, 0.2 * r.max_length as f64);
        }
    }
}
