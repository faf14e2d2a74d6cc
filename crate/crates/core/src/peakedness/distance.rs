/// Levenshtein distance over Unicode scalar values: the minimum number of
/// single-character insertions, deletions and substitutions turning `a`
/// into `b`.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_chars(&a, &b)
}

pub(crate) fn edit_distance_chars(a: &[char], b: &[char]) -> usize {
    // keep the shorter string on the row axis
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitute.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Symmetric matrix of pairwise edit distances between candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    cells: Vec<usize>,
}

impl DistanceMatrix {
    pub fn new<T: AsRef<str>>(candidates: &[T]) -> Self {
        Self::with_threads(candidates, 1)
    }

    /// Computes rows in parallel across `threads` workers. The result does
    /// not depend on the thread count.
    pub fn with_threads<T: AsRef<str>>(candidates: &[T], threads: usize) -> Self {
        let chars: Vec<Vec<char>> = candidates
            .iter()
            .map(|c| c.as_ref().chars().collect())
            .collect();
        let n = chars.len();
        let mut cells = vec![0; n * n];
        let threads = threads.clamp(1, n.max(1));
        if threads == 1 {
            for (i, row) in cells.chunks_mut(n.max(1)).enumerate().take(n) {
                fill_row(&chars, i, row);
            }
        } else {
            let rows_per = n.div_ceil(threads);
            std::thread::scope(|scope| {
                for (chunk_idx, block) in cells.chunks_mut(rows_per * n).enumerate() {
                    let chars = &chars;
                    scope.spawn(move || {
                        for (k, row) in block.chunks_mut(n).enumerate() {
                            fill_row(chars, chunk_idx * rows_per + k, row);
                        }
                    });
                }
            });
        }
        Self { n, cells }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.cells[i * self.n + j]
    }
}

fn fill_row(chars: &[Vec<char>], i: usize, row: &mut [usize]) {
    for (j, cell) in row.iter_mut().enumerate() {
        *cell = if i == j {
            0
        } else {
            edit_distance_chars(&chars[i], &chars[j])
        };
    }
}
