//! In-degree normalized ego-graph Laplacians, spectral norms, and the EGI
//! gap: the mean spectral distance between aligned ego-graph Laplacians of
//! two graphs.
//!
//! Two routes compute the same distance. [`ego_distance`] builds dense
//! padded Laplacians and runs power iteration on the dense difference; the
//! gap estimators precompute every ego-graph's Laplacian once as a sparse
//! entry list and evaluate each pair on a sparse difference operator.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ego::{canonical_order, extract_ego, pad_pair, EgoGraph};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub type DenseMatrix = Array2<f64>;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 5000;
const POWER_SEED: u64 = 0x5eed_1a9c;

/// `L = I - D^{-1/2} A D^{-1/2}` over the reversed ego-graph with
/// self-loops on real nodes, where `A[i][j] = 1` for an arc `j -> i` and
/// `D` holds in-degrees. Egos of undirected graphs are their own reversal,
/// so there `A` is symmetric.
///
/// Padding nodes have no edges and no self-loop. Their `D^{-1/2}` entry is
/// taken as zero, which leaves only the identity on their diagonal: every
/// node of a padded frame carries the same `I`, and the difference of two
/// aligned Laplacians is the difference of their normalized adjacencies.
pub fn in_degree_laplacian(ego: &EgoGraph) -> DenseMatrix {
    // adjacency()[[src, dst]]; transpose so rows are destinations
    let adj = ego.reversed_adjacency().reversed_axes();
    let n = adj.nrows();
    let deg: Vec<f64> = (0..n).map(|i| adj.row(i).sum()).collect();
    let mut lap = Array2::eye(n);
    for i in 0..n {
        for j in 0..n {
            let a = adj[[i, j]];
            if a != 0.0 {
                lap[[i, j]] -= a / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    lap
}

/// Operator with `y = M x` and `y = M^T x`.
trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows().into_iter().enumerate() {
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows().into_iter().enumerate() {
            let xi = x[i];
            if xi != 0.0 {
                for (yj, a) in y.iter_mut().zip(row.iter()) {
                    *yj += a * xi;
                }
            }
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Largest singular value by power iteration on `M^T M`.
///
/// The start vector is all-ones with a small seeded perturbation so that
/// symmetric structures cannot trap it in an invariant subspace; if the
/// iterate collapses to zero on a non-zero operator, it restarts from a
/// fresh seeded vector.
fn power_norm<M: LinearOperator>(m: &M) -> f64 {
    let n = m.dim();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v = start_vector(n, &mut rng);
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut lambda_prev = f64::NAN;
    let mut restarts = 0;
    let mut lambda = 0.0_f64;
    for _ in 0..POWER_MAX_ITERS {
        m.apply(&v, &mut w);
        lambda = w.iter().map(|x| x * x).sum::<f64>();
        m.apply_transpose(&w, &mut u);
        let norm = normalize(&mut u);
        if norm == 0.0 {
            if restarts < 3 && lambda_prev.is_nan() {
                restarts += 1;
                v.iter_mut().for_each(|x| *x = rng.gen::<f64>() - 0.5);
                normalize(&mut v);
                continue;
            }
            return lambda.sqrt();
        }
        std::mem::swap(&mut v, &mut u);
        if (lambda - lambda_prev).abs() <= POWER_TOL * lambda {
            break;
        }
        lambda_prev = lambda;
    }
    lambda.sqrt()
}

fn start_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + 0.1 * (rng.gen::<f64>() - 0.5)).collect();
    normalize(&mut v);
    v
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`.
///
/// Newton's method on the characteristic polynomial, started above the
/// spectrum at the Gershgorin bound. All roots are real, so the iterates
/// decrease monotonically onto the largest one. `T - xI` is factored as
/// `LDL^T`, giving `det'/det` as a sum over the pivots.
fn tridiagonal_max_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut x = f64::NEG_INFINITY;
    for i in 0..m {
        let left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < m { beta[i].abs() } else { 0.0 };
        x = x.max(alpha[i] + left + right);
    }
    for _ in 0..200 {
        let mut d = 1.0;
        let mut dd = 0.0;
        let mut log_derivative = 0.0;
        for i in 0..m {
            let (nd, ndd) = if i == 0 {
                (alpha[0] - x, -1.0)
            } else {
                let b2 = beta[i - 1] * beta[i - 1];
                (alpha[i] - x - b2 / d, -1.0 + b2 * dd / (d * d))
            };
            if nd == 0.0 {
                return x;
            }
            d = nd;
            dd = ndd;
            log_derivative += dd / d;
        }
        let step = 1.0 / log_derivative;
        if !step.is_finite() || step.abs() <= 2.0 * f64::EPSILON * x.abs() {
            break;
        }
        x -= step;
    }
    x
}

/// Largest singular value by Lanczos on `M^T M` with full
/// reorthogonalization. Same start vector and stopping rule as
/// [`power_norm`], but the Krylov basis reaches the tolerance in far fewer
/// operator applications on nearly degenerate spectra.
fn lanczos_norm<M: LinearOperator>(m: &M) -> f64 {
    let n = m.dim();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut basis: Vec<Vec<f64>> = vec![start_vector(n, &mut rng)];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut theta_prev = f64::NAN;
    let mut theta = 0.0_f64;
    for j in 0..n.min(POWER_MAX_ITERS) {
        let q = &basis[j];
        m.apply(q, &mut w);
        m.apply_transpose(&w, &mut u);
        let a: f64 = q.iter().zip(&u).map(|(x, y)| x * y).sum();
        alpha.push(a);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = b.iter().zip(&u).map(|(x, y)| x * y).sum();
                u.iter_mut().zip(b).for_each(|(y, x)| *y -= c * x);
            }
        }
        theta = tridiagonal_max_eigenvalue(&alpha, &beta);
        let norm = normalize(&mut u);
        let scale = theta.abs().max(f64::MIN_POSITIVE);
        if norm <= 1e-12 * scale || (theta - theta_prev).abs() <= POWER_TOL * scale {
            break;
        }
        theta_prev = theta;
        beta.push(norm);
        basis.push(u.clone());
    }
    theta.max(0.0).sqrt()
}

/// Largest singular value of a square matrix.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape {
            op: "spectral_norm",
            left: m.dim(),
            right: (m.ncols(), m.nrows()),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(power_norm(m))
}

/// Spectral norm of the difference of the in-degree Laplacians of two
/// canonically ordered, padded ego-graphs (dense route).
pub fn ego_distance(a: &EgoGraph, b: &EgoGraph) -> Result<f64> {
    let (pa, pb) = pad_pair(&canonical_order(a), &canonical_order(b))?;
    let diff = in_degree_laplacian(&pa) - in_degree_laplacian(&pb);
    spectral_norm(&diff)
}

/// Sparse Laplacian of one canonical ego-graph, addressed by
/// `(hop, index)` so it can be placed into any padded frame. Only `L - I`
/// is stored; the identity is shared by every frame and cancels in
/// differences.
#[derive(Debug, Clone)]
pub struct EgoLaplacian {
    hop_sizes: Vec<usize>,
    /// `(row hop, row index, col hop, col index, value)`
    entries: Vec<(u32, u32, u32, u32, f64)>,
}

impl EgoLaplacian {
    pub fn new(ego: &EgoGraph) -> Self {
        let ego = canonical_order(ego);
        let sizes = ego.hop_sizes();
        let n = ego.size();
        let mut place = Vec::with_capacity(n);
        for (p, &s) in sizes.iter().enumerate() {
            for q in 0..s {
                place.push((p as u32, q as u32));
            }
        }
        let arcs = ego.reversed_arcs();
        let mut in_deg = vec![0.0_f64; n];
        for i in 0..n {
            if !ego.is_padding(i) {
                in_deg[i] = 1.0;
            }
        }
        for &(_, dst) in &arcs {
            in_deg[dst] += 1.0;
        }
        let mut entries = Vec::with_capacity(n + arcs.len());
        for i in 0..n {
            if in_deg[i] > 0.0 {
                let (p, q) = place[i];
                entries.push((p, q, p, q, -1.0 / in_deg[i]));
            }
        }
        for &(src, dst) in &arcs {
            let (rp, rq) = place[dst];
            let (cp, cq) = place[src];
            entries.push((rp, rq, cp, cq, -1.0 / (in_deg[dst] * in_deg[src]).sqrt()));
        }
        entries.sort_unstable_by_key(|e| (e.0, e.1, e.2, e.3));
        EgoLaplacian {
            hop_sizes: sizes,
            entries,
        }
    }

    pub fn hop_sizes(&self) -> &[usize] {
        &self.hop_sizes
    }
}

/// `A - B` placed in a common padded frame, in CSR form.
struct SparseDifference {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseDifference {
    fn new(a: &EgoLaplacian, b: &EgoLaplacian) -> Result<Self> {
        if a.hop_sizes.len() != b.hop_sizes.len() {
            return Err(Error::HopMismatch(a.hop_sizes.len() - 1, b.hop_sizes.len() - 1));
        }
        let mut offsets = Vec::with_capacity(a.hop_sizes.len());
        let mut n = 0;
        for (x, y) in a.hop_sizes.iter().zip(&b.hop_sizes) {
            offsets.push(n);
            n += x.max(y);
        }
        let place = |p: u32, q: u32| offsets[p as usize] + q as usize;
        // both entry lists are sorted by (row, col) in their own frames and
        // placement is monotone, so a linear merge yields CSR order
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(a.entries.len() + b.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(cols.capacity());
        let mut push = |r: usize, c: usize, v: f64, last: &mut Option<(usize, usize)>| {
            if *last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                cols.push(c);
                vals.push(v);
                *last = Some((r, c));
            }
        };
        let (mut i, mut j, mut last) = (0, 0, None);
        let key = |e: &(u32, u32, u32, u32, f64)| (place(e.0, e.1), place(e.2, e.3));
        while i < a.entries.len() || j < b.entries.len() {
            let take_a = j == b.entries.len()
                || (i < a.entries.len() && key(&a.entries[i]) <= key(&b.entries[j]));
            if take_a {
                let (r, c) = key(&a.entries[i]);
                push(r, c, a.entries[i].4, &mut last);
                i += 1;
            } else {
                let (r, c) = key(&b.entries[j]);
                push(r, c, -b.entries[j].4, &mut last);
                j += 1;
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseDifference {
            n,
            row_ptr,
            cols,
            vals,
        })
    }
}

impl LinearOperator for SparseDifference {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.cols[range.clone()]
                .iter()
                .zip(&self.vals[range])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += self.vals[k] * xi;
            }
        }
    }
}

/// Distance between two precomputed ego Laplacians (sparse route).
pub fn laplacian_distance(a: &EgoLaplacian, b: &EgoLaplacian) -> Result<f64> {
    let diff = SparseDifference::new(a, b)?;
    if diff.vals.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    Ok(lanczos_norm(&diff))
}

/// Laplacians of the exact k-hop ego-graph of every node.
pub fn ego_laplacians(g: &Graph, k: usize) -> Result<Vec<EgoLaplacian>> {
    (0..g.node_count())
        .into_par_iter()
        .map(|c| extract_ego(g, c, k, None, 0).map(|e| EgoLaplacian::new(&e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub value: f64,
    pub pairs_used: usize,
    /// Standard deviation over repeated sampled runs; 0 for full enumeration.
    pub dispersion: f64,
    pub k: usize,
}

/// Neumaier-compensated sum, evaluated in slice order.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean distance over the given `(center_a, center_b)` pairs.
pub fn mean_distance_over_pairs(
    la: &[EgoLaplacian],
    lb: &[EgoLaplacian],
    pairs: &[(usize, usize)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no ego-graph pairs to average".into()));
    }
    let distances: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| laplacian_distance(&la[i], &lb[j]))
        .collect::<Result<_>>()?;
    Ok(compensated_sum(&distances) / pairs.len() as f64)
}

fn check_nonempty(g: &Graph) -> Result<()> {
    if g.node_count() == 0 {
        return Err(Error::InvalidParameter("gap needs non-empty graphs".into()));
    }
    Ok(())
}

/// Mean over all `n * m` ordered ego pairs.
pub fn egi_gap_full(ga: &Graph, gb: &Graph, k: usize) -> Result<GapEstimate> {
    check_nonempty(ga)?;
    check_nonempty(gb)?;
    let la = ego_laplacians(ga, k)?;
    let lb = ego_laplacians(gb, k)?;
    gap_full_precomputed(&la, &lb, k)
}

pub fn gap_full_precomputed(
    la: &[EgoLaplacian],
    lb: &[EgoLaplacian],
    k: usize,
) -> Result<GapEstimate> {
    let pairs: Vec<_> = (0..la.len())
        .flat_map(|i| (0..lb.len()).map(move |j| (i, j)))
        .collect();
    Ok(GapEstimate {
        value: mean_distance_over_pairs(la, lb, &pairs)?,
        pairs_used: pairs.len(),
        dispersion: 0.0,
        k,
    })
}

/// Uniform center pairs with replacement, deterministic per seed.
pub fn sample_pairs(n: usize, m: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..m)))
        .collect()
}

/// Mean over `pairs` uniformly sampled ego pairs (one run, dispersion 0).
pub fn egi_gap_sampled(
    ga: &Graph,
    gb: &Graph,
    k: usize,
    pairs: usize,
    seed: u64,
) -> Result<GapEstimate> {
    check_nonempty(ga)?;
    check_nonempty(gb)?;
    let la = ego_laplacians(ga, k)?;
    let lb = ego_laplacians(gb, k)?;
    gap_sampled_precomputed(&la, &lb, k, pairs, seed)
}

pub fn gap_sampled_precomputed(
    la: &[EgoLaplacian],
    lb: &[EgoLaplacian],
    k: usize,
    pairs: usize,
    seed: u64,
) -> Result<GapEstimate> {
    if pairs == 0 {
        return Err(Error::InvalidParameter("sampled gap needs at least one pair".into()));
    }
    let sample = sample_pairs(la.len(), lb.len(), pairs, seed);
    Ok(GapEstimate {
        value: mean_distance_over_pairs(la, lb, &sample)?,
        pairs_used: pairs,
        dispersion: 0.0,
        k,
    })
}

/// Repeats the sampled estimate with seeds `seed..seed + repeats` and
/// reports the mean and (population) standard deviation. `pairs == 0`
/// means full enumeration, which is exact and so has zero dispersion.
pub fn egi_gap_repeated(
    la: &[EgoLaplacian],
    lb: &[EgoLaplacian],
    k: usize,
    pairs: usize,
    seed: u64,
    repeats: usize,
) -> Result<GapEstimate> {
    if pairs == 0 {
        return gap_full_precomputed(la, lb, k);
    }
    let repeats = repeats.max(1);
    let values: Vec<f64> = (0..repeats as u64)
        .map(|r| gap_sampled_precomputed(la, lb, k, pairs, seed + r).map(|g| g.value))
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&values);
    Ok(GapEstimate {
        value: mean,
        pairs_used: pairs,
        dispersion: std,
        k,
    })
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(xs) / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    (mean, var.sqrt())
}

/// Gap from every source to one target, best (smallest) source first.
/// Each entry is `(source index, estimate)`; `pairs == 0` enumerates all
/// pairs.
pub fn gap_matrix(
    sources: &[Graph],
    target: &Graph,
    k: usize,
    pairs: usize,
    seed: u64,
) -> Result<Vec<(usize, GapEstimate)>> {
    if sources.is_empty() {
        return Err(Error::InvalidParameter("gap_matrix needs at least one source".into()));
    }
    let lt = ego_laplacians(target, k)?;
    let mut out = sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ls = ego_laplacians(s, k)?;
            let est = if pairs == 0 {
                gap_full_precomputed(&ls, &lt, k)?
            } else {
                gap_sampled_precomputed(&ls, &lt, k, pairs, seed)?
            };
            Ok((i, est))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, GenSpec};
    use ndarray::array;

    /// Cyclic Jacobi eigenvalues of a symmetric matrix.
    fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]] * a[[i, j]])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[[p, k]];
                        let aqk = a[[q, k]];
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[[i, i]]).collect()
    }

    fn jacobi_norm(m: &Array2<f64>) -> f64 {
        let mtm = m.t().dot(m);
        jacobi_eigenvalues(mtm)
            .into_iter()
            .fold(0.0, f64::max)
            .sqrt()
    }

    #[test]
    fn norm_of_zero_and_identity() {
        assert_eq!(spectral_norm(&Array2::zeros((4, 4))).unwrap(), 0.0);
        let i: Array2<f64> = Array2::eye(5);
        assert!((spectral_norm(&i).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_rejects_non_finite_and_non_square() {
        let mut m = Array2::zeros((2, 2));
        m[[0, 1]] = f64::NAN;
        assert!(matches!(spectral_norm(&m), Err(Error::NonFinite)));
        assert!(spectral_norm(&Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn norm_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let m = Array2::from_shape_simple_fn((6, 6), || rng.gen_range(-1.0..1.0));
            let got = spectral_norm(&m).unwrap();
            let want = jacobi_norm(&m);
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn lanczos_matches_jacobi_and_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for n in [1, 2, 6, 15] {
            for _ in 0..20 {
                let m = Array2::from_shape_simple_fn((n, n), || rng.gen_range(-1.0..1.0));
                let want = jacobi_norm(&m);
                assert!((lanczos_norm(&m) - want).abs() < 1e-9);
                assert!((power_norm(&m) - want).abs() < 1e-8);
            }
        }
        // rank one: the Krylov space closes after one step
        let u = Array2::from_shape_fn((8, 1), |(i, _)| i as f64 - 3.5);
        let m = u.dot(&u.t());
        assert!((lanczos_norm(&m) - jacobi_norm(&m)).abs() < 1e-9);
    }

    #[test]
    fn tridiagonal_largest_eigenvalue() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3
        assert!((tridiagonal_max_eigenvalue(&[2.0, 2.0], &[1.0]) - 3.0).abs() < 1e-14);
        assert_eq!(tridiagonal_max_eigenvalue(&[-4.0], &[]), -4.0);
    }

    #[test]
    fn norm_is_absolutely_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Array2::from_shape_simple_fn((5, 5), || rng.gen_range(-1.0..1.0));
        let base = spectral_norm(&m).unwrap();
        for c in [-3.0, 0.5, 2.0] {
            let scaled = spectral_norm(&(&m * c)).unwrap();
            assert!((scaled - c.abs() * base).abs() < 1e-8);
        }
    }

    #[test]
    fn single_node_laplacian_is_zero() {
        let lone = Graph::with_node_count(3, &[(0, 1)], false).unwrap();
        let e = extract_ego(&lone, 2, 1, None, 0).unwrap();
        assert_eq!(in_degree_laplacian(&e), array![[0.0]]);
    }

    #[test]
    fn arc_laplacian_by_hand() {
        // directed c -> l; reversed ego keeps c -> l, D_in = diag(1, 2)
        let g = Graph::from_edge_list(&[(0, 1)], true).unwrap();
        let e = extract_ego(&g, 0, 1, None, 0).unwrap();
        let l = in_degree_laplacian(&e);
        let s = 1.0 / 2f64.sqrt();
        assert_eq!(l[[0, 0]], 0.0);
        assert_eq!(l[[1, 1]], 0.5);
        assert!((l[[1, 0]] + s).abs() < 1e-15);
        assert_eq!(l[[0, 1]], 0.0);
        assert_ne!(l, l.t());
    }

    #[test]
    fn undirected_edge_laplacian_is_symmetric() {
        // both endpoints see the other plus a self-loop: D = diag(2, 2)
        let g = Graph::from_edge_list(&[(0, 1)], false).unwrap();
        let l = in_degree_laplacian(&extract_ego(&g, 0, 1, None, 0).unwrap());
        assert_eq!(l, array![[0.5, -0.5], [-0.5, 0.5]]);
    }

    #[test]
    fn padding_keeps_only_the_identity() {
        let star = Graph::from_edge_list(&[(0, 1), (0, 2), (0, 3)], false).unwrap();
        let edge = Graph::from_edge_list(&[(0, 1)], false).unwrap();
        let a = canonical_order(&extract_ego(&star, 0, 1, None, 0).unwrap());
        let b = canonical_order(&extract_ego(&edge, 0, 1, None, 0).unwrap());
        let (_, pb) = pad_pair(&a, &b).unwrap();
        let small = in_degree_laplacian(&b);
        let padded = in_degree_laplacian(&pb);
        assert_eq!(padded.nrows(), 4);
        assert_eq!(padded.slice(ndarray::s![..2, ..2]), small);
        for i in 2..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(padded[[i, j]], want);
                assert_eq!(padded[[j, i]], want);
            }
        }
    }

    #[test]
    fn triangle_versus_path_by_hand() {
        let tri = Graph::from_edge_list(&[(0, 1), (1, 2), (0, 2)], false).unwrap();
        let path = Graph::from_edge_list(&[(0, 1), (0, 2)], false).unwrap();
        let a = extract_ego(&tri, 0, 1, None, 0).unwrap();
        let b = extract_ego(&path, 0, 1, None, 0).unwrap();
        // triangle: every node has degree 3 with its self-loop
        // path centred on its middle: centre 3, leaves 2
        let t = 1.0 / 3.0;
        let r6 = 1.0 / 6f64.sqrt();
        let la = array![[1.0 - t, -t, -t], [-t, 1.0 - t, -t], [-t, -t, 1.0 - t]];
        let lb = array![[1.0 - t, -r6, -r6], [-r6, 0.5, 0.0], [-r6, 0.0, 0.5]];
        let close = |x: &Array2<f64>, y: &Array2<f64>| (x - y).iter().all(|v| v.abs() < 1e-15);
        assert!(close(&in_degree_laplacian(&canonical_order(&a)), &la));
        assert!(close(&in_degree_laplacian(&canonical_order(&b)), &lb));
        let want = jacobi_norm(&(&la - &lb));
        let got = ego_distance(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        assert!((ego_distance(&b, &a).unwrap() - got).abs() < 1e-12);
    }

    #[test]
    fn sparse_route_matches_dense_route() {
        let ga = generate(&GenSpec::forest_fire(60, 0.4, 0.3, 1)).unwrap();
        let gb = generate(&GenSpec::barabasi(60, 2, 2)).unwrap();
        let la = ego_laplacians(&ga, 2).unwrap();
        let lb = ego_laplacians(&gb, 2).unwrap();
        for (i, j) in sample_pairs(60, 60, 40, 3) {
            let ea = extract_ego(&ga, i, 2, None, 0).unwrap();
            let eb = extract_ego(&gb, j, 2, None, 0).unwrap();
            let dense = ego_distance(&ea, &eb).unwrap();
            let sparse = laplacian_distance(&la[i], &lb[j]).unwrap();
            let (pa, pb) = pad_pair(&canonical_order(&ea), &canonical_order(&eb)).unwrap();
            let exact = jacobi_norm(&(in_degree_laplacian(&pa) - in_degree_laplacian(&pb)));
            assert!((sparse - exact).abs() < 1e-10, "{sparse} vs {exact}");
            assert!((dense - sparse).abs() < 1e-8, "{dense} vs {sparse}");
        }
    }

    #[test]
    fn ego_distance_symmetric_and_triangle_inequality() {
        let g = generate(&GenSpec::forest_fire(100, 0.4, 0.3, 9)).unwrap();
        let h = generate(&GenSpec::barabasi(100, 2, 9)).unwrap();
        let egos: Vec<_> = (0..30)
            .map(|c| extract_ego(if c % 2 == 0 { &g } else { &h }, c * 3, 1, None, 0).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (i, j) = (rng.gen_range(0..30), rng.gen_range(0..30));
            let d1 = ego_distance(&egos[i], &egos[j]).unwrap();
            let d2 = ego_distance(&egos[j], &egos[i]).unwrap();
            assert!((d1 - d2).abs() < 1e-9);
        }
        // on a common frame the distance is an operator norm
        for _ in 0..50 {
            let idx: Vec<usize> = (0..3).map(|_| rng.gen_range(0..30)).collect();
            let canon: Vec<_> = idx.iter().map(|&i| canonical_order(&egos[i])).collect();
            let (a, b) = pad_pair(&canon[0], &canon[1]).unwrap();
            let (a, c) = pad_pair(&a, &canon[2]).unwrap();
            let (b, _) = pad_pair(&b, &c).unwrap();
            let (la, lb, lc) = (
                in_degree_laplacian(&a),
                in_degree_laplacian(&b),
                in_degree_laplacian(&c),
            );
            let ab = spectral_norm(&(&la - &lb)).unwrap();
            let bc = spectral_norm(&(&lb - &lc)).unwrap();
            let ac = spectral_norm(&(&la - &lc)).unwrap();
            assert!(ac <= ab + bc + 1e-9);
        }
    }

    #[test]
    fn gap_of_cycle_with_itself_is_exactly_zero() {
        let pairs: Vec<_> = (0..8).map(|i| (i, (i + 1) % 8)).collect();
        let c8 = Graph::from_edge_list(&pairs, false).unwrap();
        let gap = egi_gap_full(&c8, &c8, 1).unwrap();
        assert_eq!(gap.value, 0.0);
        assert_eq!(gap.pairs_used, 64);
        assert_eq!(gap.dispersion, 0.0);
    }

    #[test]
    fn exhaustive_pairs_equal_full_gap() {
        let ga = generate(&GenSpec::forest_fire(30, 0.4, 0.3, 1)).unwrap();
        let gb = generate(&GenSpec::barabasi(25, 2, 1)).unwrap();
        let full = egi_gap_full(&ga, &gb, 2).unwrap();
        let la = ego_laplacians(&ga, 2).unwrap();
        let lb = ego_laplacians(&gb, 2).unwrap();
        let mut all: Vec<_> = (0..30).flat_map(|i| (0..25).map(move |j| (i, j))).collect();
        all.reverse();
        let mean = mean_distance_over_pairs(&la, &lb, &all).unwrap();
        assert!((mean - full.value).abs() < 1e-12);
    }

    #[test]
    fn sampled_gap_is_deterministic() {
        let ga = generate(&GenSpec::forest_fire(50, 0.4, 0.3, 1)).unwrap();
        let gb = generate(&GenSpec::forest_fire(50, 0.4, 0.3, 2)).unwrap();
        let a = egi_gap_sampled(&ga, &gb, 2, 100, 7).unwrap();
        let b = egi_gap_sampled(&ga, &gb, 2, 100, 7).unwrap();
        assert_eq!(a, b);
        assert!(egi_gap_sampled(&ga, &gb, 2, 0, 7).is_err());
    }

    #[test]
    fn gap_matrix_ranks_sources() {
        let target = generate(&GenSpec::forest_fire(60, 0.4, 0.3, 100)).unwrap();
        let ff = generate(&GenSpec::forest_fire(60, 0.4, 0.3, 101)).unwrap();
        let ba = generate(&GenSpec::barabasi(60, 2, 101)).unwrap();
        let report = gap_matrix(&[ba.clone(), ff.clone()], &target, 2, 0, 0).unwrap();
        assert_eq!(report[0].0, 1, "{report:?}");
        assert!(report[0].1.value < report[1].1.value);

        let single = gap_matrix(&[ff.clone()], &target, 2, 200, 3).unwrap();
        assert_eq!(single.len(), 1);
        let twice = gap_matrix(&[ff.clone(), ff], &target, 2, 200, 3).unwrap();
        assert_eq!(twice[0].1, twice[1].1);
    }
}
