use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignError {
    #[error("cost matrix is not square (row {row} has {len} entries, expected {n})")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("cost matrix entry ({0}, {1}) is not finite")]
    NotFinite(usize, usize),
}

/// Minimum-cost perfect assignment `row -> column`.
///
/// Among all optimal assignments the lexicographically smallest column
/// vector is returned, so ties favour low rows taking low columns.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64), AssignError> {
    let n = cost.len();
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(AssignError::NotSquare { row: i, len: row.len(), n });
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(AssignError::NotFinite(i, j));
        }
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let (mut assign, u, v) = solve(cost);
    let scale = cost.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * (1.0 + scale);
    let tight = |i: usize, j: usize| (cost[i][j] - u[i] - v[j]).abs() <= tol;
    lexicographic_tiebreak(&mut assign, tight);
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((assign, total))
}

/// Shortest-augmenting-path Hungarian method with potentials. Returns the
/// assignment and dual potentials `(u, v)` with `c[i][j] - u[i] - v[j] >= 0`,
/// equality on matched entries.
fn solve(cost: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.len();
    // 1-based internal indices; column 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}

/// With optimal duals fixed, every perfect matching on tight edges is
/// optimal. Walk rows in order and give each the smallest tight column that
/// still admits a completion, found by an alternating-path search over the
/// unfixed rows.
fn lexicographic_tiebreak(assign: &mut [usize], tight: impl Fn(usize, usize) -> bool) {
    let n = assign.len();
    let mut owner = vec![0usize; n];
    for (i, &j) in assign.iter().enumerate() {
        owner[j] = i;
    }
    for i in 0..n {
        let c = assign[i];
        // next[x] = column the owner of x moves to on the way to freeing c.
        let mut next = vec![usize::MAX; n];
        let mut reach = vec![false; n];
        reach[c] = true;
        let mut queue = vec![c];
        while let Some(y) = queue.pop() {
            for r in i + 1..n {
                let x = assign[r];
                if !reach[x] && tight(r, y) {
                    reach[x] = true;
                    next[x] = y;
                    queue.push(x);
                }
            }
        }
        let Some(j) = (0..c).find(|&j| reach[j] && tight(i, j)) else {
            continue;
        };
        let mut x = j;
        let mut mover = owner[j];
        assign[i] = j;
        owner[j] = i;
        while x != c {
            let y = next[x];
            let following = owner[y];
            assign[mover] = y;
            owner[y] = mover;
            mover = following;
            x = y;
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out.sort();
        out
    }

    /// Lexicographically smallest permutation of minimum cost.
    fn brute(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for p in permutations(cost.len()) {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            if best.as_ref().map_or(true, |(_, b)| c < *b) {
                best = Some((p, c));
            }
        }
        best.unwrap()
    }

    #[test]
    fn two_by_two() {
        let (a, c) = hungarian(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(a, vec![0, 1]);
        assert_eq!(c, 2.0);
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let m = vec![vec![0.0; 5]; 5];
        let (a, c) = hungarian(&m).unwrap();
        assert_eq!(a, vec![0, 1, 2, 3, 4]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            hungarian(&[vec![1.0, 2.0], vec![1.0]]),
            Err(AssignError::NotSquare { .. })
        ));
        assert!(matches!(hungarian(&[vec![f64::NAN]]), Err(AssignError::NotFinite(0, 0))));
        assert_eq!(hungarian(&[]).unwrap(), (vec![], 0.0));
    }

    #[test]
    fn matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let n = 1 + trial % 7;
            let hi = if trial % 3 == 0 { 3 } else { 20 };
            let m: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0..hi) as f64).collect())
                .collect();
            let (a, c) = hungarian(&m).unwrap();
            let (ba, bc) = brute(&m);
            assert_eq!(c, bc, "cost, trial {trial}: {m:?}");
            assert_eq!(a, ba, "tie-break, trial {trial}: {m:?}");
        }
    }
}
