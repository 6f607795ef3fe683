use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CircuitGraph, Partition, PartitionConfig, PartitionError};

/// Above this size the embedding is computed by subspace iteration instead
/// of a dense eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 4000;

const LLOYD_ITERS: usize = 100;
const SUBSPACE_ITERS: usize = 500;

/// `I - D^-1/2 A D^-1/2`; isolated vertices get a zero row and column so
/// each one contributes its own zero eigenvalue.
pub fn normalized_laplacian(g: &CircuitGraph) -> DMatrix<f64> {
    let n = g.len();
    let inv_sqrt = inv_sqrt_degrees(g);
    let mut l = DMatrix::zeros(n, n);
    for u in 0..n {
        if g.degree(u) > 0 {
            l[(u, u)] = 1.0;
        }
        for &(v, w) in g.neighbors(u) {
            l[(u, v)] = -(w as f64) * inv_sqrt[u] * inv_sqrt[v];
        }
    }
    l
}

fn inv_sqrt_degrees(g: &CircuitGraph) -> Vec<f64> {
    (0..g.len())
        .map(|v| match g.degree(v) {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect()
}

/// Columns are the `k` eigenvectors of the normalized Laplacian with the
/// smallest eigenvalues, ascending.
pub fn smallest_eigenvectors(g: &CircuitGraph, k: usize) -> DMatrix<f64> {
    if g.len() <= DENSE_EIGEN_LIMIT {
        dense_smallest(g, k)
    } else {
        subspace_smallest(g, k)
    }
}

fn dense_smallest(g: &CircuitGraph, k: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(normalized_laplacian(g));
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut out = DMatrix::zeros(g.len(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

/// Block power iteration on `2I - L`, whose dominant eigenvectors are the
/// smallest of `L` (the spectrum of `L` lies in `[0, 2]`).
fn subspace_smallest(g: &CircuitGraph, k: usize) -> DMatrix<f64> {
    let n = g.len();
    let inv_sqrt = inv_sqrt_degrees(g);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DMatrix::from_fn(n, k, |_, _| rng.gen::<f64>() - 0.5);
    x = x.qr().q();
    let apply = |x: &DMatrix<f64>| {
        let mut y = DMatrix::zeros(n, k);
        for u in 0..n {
            let diag = if g.degree(u) > 0 { 1.0 } else { 2.0 };
            for c in 0..k {
                let mut acc = diag * x[(u, c)];
                for &(v, w) in g.neighbors(u) {
                    acc += w as f64 * inv_sqrt[u] * inv_sqrt[v] * x[(v, c)];
                }
                y[(u, c)] = acc;
            }
        }
        y
    };
    for _ in 0..SUBSPACE_ITERS {
        let y = apply(&x).qr().q();
        let delta = (&y * y.transpose() * &x - &x).norm();
        x = y;
        if delta < 1e-10 {
            break;
        }
    }
    // Rayleigh-Ritz inside the converged subspace to order the vectors.
    let h = x.transpose() * apply(&x);
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let rotated = &x * &eig.eigenvectors;
    let mut out = DMatrix::zeros(n, k);
    for (c, &i) in order.iter().enumerate() {
        out.set_column(c, &rotated.column(i));
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations. Every returned cluster
/// is non-empty provided `points.len() >= k`.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    assert!(k >= 1 && n >= k, "kmeans needs at least k points");
    let mut centers: Vec<Vec<f64>> = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..LLOYD_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = nearest(p, &centers);
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        repair_empty(points, &mut assign, &mut centers);
        recompute_centers(points, &assign, &mut centers);
        if !changed {
            break;
        }
    }
    repair_empty(points, &mut assign, &mut centers);
    assign
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (c, ctr) in centers.iter().enumerate() {
        let d = sq_dist(p, ctr);
        if d < bd {
            bd = d;
            best = c;
        }
    }
    best
}

fn recompute_centers(points: &[Vec<f64>], assign: &[usize], centers: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for c in 0..centers.len() {
        if counts[c] > 0 {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
    }
}

/// Each empty cluster takes the point farthest from its own centre among
/// clusters that can spare one.
fn repair_empty(points: &[Vec<f64>], assign: &mut [usize], centers: &mut [Vec<f64>]) {
    let k = centers.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assign.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        let mut fd = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[assign[i]] > 1 {
                let d = sq_dist(p, &centers[assign[i]]);
                if d > fd {
                    fd = d;
                    far = Some(i);
                }
            }
        }
        let i = far.expect("n >= k guarantees a donor cluster");
        assign[i] = empty;
        centers[empty] = points[i].clone();
    }
}

/// Phase 1: spectral embedding plus k-means, best of several restarts by
/// cut size.
pub fn spectral_coarse(g: &CircuitGraph, cfg: &PartitionConfig) -> Result<Partition, PartitionError> {
    let n = g.len();
    let k = cfg.k;
    if k == 0 {
        return Err(PartitionError::BadConfig("k must be at least 1".into()));
    }
    if n < k {
        return Err(PartitionError::TooFewNodes { nodes: n, k });
    }
    let (lo, hi) = cfg.bounds(n)?;
    if k == 1 {
        return Ok(Partition::from_assignment(g, 1, vec![0; n]));
    }
    let u = smallest_eigenvectors(g, k);
    // Row-normalised embedding: vertices of the same connected component
    // collapse onto a common direction of the null space.
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|c| u[(i, c)]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Partition> = None;
    for _ in 0..cfg.kmeans_restarts.max(1) {
        let mut labels = kmeans(&points, k, &mut rng);
        enforce_size_bounds(g, &mut labels, k, lo, hi);
        let labels = canonical_labels(&labels, k);
        let p = Partition::from_assignment(g, k, labels);
        if best.as_ref().map_or(true, |b| p.cut_size < b.cut_size) {
            best = Some(p);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Move nodes out of oversized (into undersized) blocks, cheapest cut
/// increase first, until every block size lies in `[lo, hi]`.
pub(crate) fn enforce_size_bounds(g: &CircuitGraph, assign: &mut [usize], k: usize, lo: usize, hi: usize) {
    let mut sizes = vec![0usize; k];
    for &b in assign.iter() {
        sizes[b] += 1;
    }
    loop {
        let over = (0..k).find(|&b| sizes[b] > hi);
        let under = (0..k).find(|&b| sizes[b] < lo);
        if over.is_none() && under.is_none() {
            return;
        }
        let mut best: Option<(i64, usize, usize)> = None;
        for v in 0..g.len() {
            let from = assign[v];
            for to in 0..k {
                let legal = to != from
                    && match (over, under) {
                        (Some(o), _) => from == o && sizes[to] < hi,
                        (None, Some(u)) => to == u && sizes[from] > lo,
                        _ => false,
                    };
                if !legal {
                    continue;
                }
                let mut d = 0i64;
                for &(u, w) in g.neighbors(v) {
                    if assign[u] == from {
                        d += w as i64;
                    } else if assign[u] == to {
                        d -= w as i64;
                    }
                }
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, v, to));
                }
            }
        }
        let (_, v, to) = best.expect("feasible bounds always admit a repair move");
        sizes[assign[v]] -= 1;
        sizes[to] += 1;
        assign[v] = to;
    }
}

/// Renumber blocks by first appearance so equivalent clusterings compare
/// equal.
fn canonical_labels(labels: &[usize], k: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}
