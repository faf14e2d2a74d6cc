//! Brute-force reference implementations, kept separate from the fast paths
//! they check. Used by the test suites and by `toolalign verify`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::peakedness::{analyze, compute_threshold, edit_distance, peakedness_scores};

/// Levenshtein distance from the complete `(n+1) × (m+1)` dynamic
/// programming table.
pub fn edit_distance_full_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in table.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in table[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            table[i][j] = (table[i - 1][j] + 1)
                .min(table[i][j - 1] + 1)
                .min(table[i - 1][j - 1] + cost);
        }
    }
    table[a.len()][b.len()]
}

/// Double loop over all ordered pairs, with the threshold recomputed from
/// scratch.
pub fn naive_peakedness<T: AsRef<str>>(candidates: &[T], alpha: f64) -> Vec<usize> {
    let longest = candidates
        .iter()
        .map(|c| c.as_ref().chars().count())
        .max()
        .unwrap_or(0);
    let tau = alpha * longest as f64;
    let mut scores = Vec::with_capacity(candidates.len());
    for i in 0..candidates.len() {
        let mut count = 0;
        for j in 0..candidates.len() {
            if i != j
                && edit_distance_full_table(candidates[i].as_ref(), candidates[j].as_ref()) as f64
                    <= tau
            {
                count += 1;
            }
        }
        scores.push(count);
    }
    scores
}

pub const ORACLE_ALPHABET: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r', 's',
    't', 'u', 'v', 'w', 'x', 'y', 'z', '_',
];

pub fn random_string<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

/// Candidate multiset drawn from a few seed words plus single-character
/// mutations, so clusters actually form.
pub fn random_candidates<R: Rng>(rng: &mut R, max_n: usize) -> Vec<String> {
    let alphabet = ['a', 'b', 'c', '_'];
    let n = rng.random_range(1..=max_n);
    let seeds: Vec<String> = (0..rng.random_range(1..=4))
        .map(|_| {
            let mut s = random_string(rng, &alphabet, 8);
            if s.is_empty() {
                s.push('a');
            }
            s
        })
        .collect();
    (0..n)
        .map(|_| {
            let mut chars: Vec<char> = seeds[rng.random_range(0..seeds.len())].chars().collect();
            for _ in 0..rng.random_range(0..3) {
                let pos = rng.random_range(0..=chars.len());
                match rng.random_range(0..3) {
                    0 => chars.insert(pos, alphabet[rng.random_range(0..alphabet.len())]),
                    1 if pos < chars.len() && chars.len() > 1 => {
                        chars.remove(pos);
                    }
                    _ if pos < chars.len() => {
                        chars[pos] = alphabet[rng.random_range(0..alphabet.len())]
                    }
                    _ => {}
                }
            }
            chars.into_iter().collect()
        })
        .collect()
}

/// Outcome of one oracle family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub mismatches: usize,
    pub first_failure: Option<String>,
}

impl OracleOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            mismatches: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.mismatches += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Perturbation hook for exercising the failure path of the verifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Adds one to every fast-path distance.
    OffByOneDistance,
}

/// Runs the edit-distance oracles on `pair_cases` random string pairs and
/// triples, then the peakedness and permutation oracles on `set_cases`
/// random candidate multisets, all drawn from one stream seeded by `seed`.
pub fn run_all(seed: u64, pair_cases: usize, set_cases: usize, fault: Fault) -> Vec<OracleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fast_distance = |a: &str, b: &str| match fault {
        Fault::None => edit_distance(a, b),
        Fault::OffByOneDistance => edit_distance(a, b) + 1,
    };

    let mut dist = OracleOutcome::new("edit distance vs full DP table");
    let mut metric = OracleOutcome::new("edit distance metric laws");
    for _ in 0..pair_cases {
        let a = random_string(&mut rng, ORACLE_ALPHABET, 24);
        let b = random_string(&mut rng, ORACLE_ALPHABET, 24);
        let c = random_string(&mut rng, ORACLE_ALPHABET, 24);
        let fast = fast_distance(&a, &b);
        let slow = edit_distance_full_table(&a, &b);
        dist.record(fast == slow, || {
            format!("d({a:?}, {b:?}): fast {fast}, oracle {slow}")
        });
        let ab = fast_distance(&a, &b);
        let ok = ab == fast_distance(&b, &a)
            && fast_distance(&a, &a) == 0
            && fast_distance(&a, &c) <= ab + fast_distance(&b, &c);
        metric.record(ok, || {
            format!("metric law violated on ({a:?}, {b:?}, {c:?})")
        });
    }

    let mut peak = OracleOutcome::new("peakedness vs naive double loop");
    let mut mono = OracleOutcome::new("peakedness monotone in alpha");
    let mut perm = OracleOutcome::new("selection permutation invariance");
    for _ in 0..set_cases {
        let candidates = random_candidates(&mut rng, 64);
        let mut previous: Option<Vec<usize>> = None;
        for alpha in [0.0, 0.1, 0.2, 0.3, 1.0] {
            let t = compute_threshold(&candidates, alpha).expect("non-empty candidates");
            let mut fast = peakedness_scores(&candidates, t.tau).expect("non-negative tau");
            if fault != Fault::None {
                fast.iter_mut().for_each(|s| *s += 1);
            }
            let slow = naive_peakedness(&candidates, alpha);
            peak.record(fast == slow, || format!("alpha {alpha} on {candidates:?}"));
            if let Some(prev) = &previous {
                let ok = fast.iter().zip(prev).all(|(now, before)| now >= before);
                mono.record(ok, || {
                    format!("score dropped at alpha {alpha} on {candidates:?}")
                });
            }
            previous = Some(fast);
        }

        let mut reference = random_string(&mut rng, &['a', 'b', 'c', '_'], 8);
        if reference.is_empty() {
            reference.push('a');
        }
        let base = analyze(&candidates, &reference, 0.2_f64).expect("valid instance");
        let mut shuffled = candidates.clone();
        shuffled.shuffle(&mut rng);
        let other = analyze(&shuffled, &reference, 0.2_f64).expect("valid instance");
        perm.record(base.selected == other.selected, || {
            format!(
                "{:?} vs {:?} after shuffling {candidates:?}",
                base.selected, other.selected
            )
        });
    }
    vec![dist, metric, peak, mono, perm]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_table_known_values() {
        assert_eq!(edit_distance_full_table("kitten", "sitting"), 3);
        assert_eq!(edit_distance_full_table("", "abc"), 3);
        assert_eq!(edit_distance_full_table("sunday", "saturday"), 3);
    }

    #[test]
    fn naive_known_values() {
        assert_eq!(
            naive_peakedness(&["get_user", "get_user", "fetch_data"], 0.1),
            [1, 1, 0]
        );
    }

    #[test]
    fn oracles_pass_and_fault_is_caught() {
        assert!(run_all(3, 50, 20, Fault::None)
            .iter()
            .all(OracleOutcome::passed));
        assert!(!run_all(3, 50, 20, Fault::OffByOneDistance)
            .iter()
            .all(OracleOutcome::passed));
    }

    #[test]
    fn same_seed_same_instances() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(random_candidates(&mut a, 64), random_candidates(&mut b, 64));
    }
}
