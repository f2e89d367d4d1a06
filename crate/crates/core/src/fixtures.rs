//! Seeded synthetic inputs: random graphs, connectomes and system matrices.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linops::SystemMatrix;
use crate::netmetrics::ConnectivityMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform on `[-scale, scale]`.
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-scale..=scale))
}

/// Random matrix with spectral 1-norm at most `bound`.
pub fn random_bounded<R: Rng>(rng: &mut R, n: usize, bound: f64) -> SystemMatrix {
    let m = random_matrix(rng, n, 1.0);
    let norm = m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    SystemMatrix::new(m * (bound / norm)).expect("finite square matrix")
}

/// Random matrix shifted so its spectral abscissa equals `-margin`.
pub fn random_stable<R: Rng>(rng: &mut R, n: usize, margin: f64) -> SystemMatrix {
    let m = random_matrix(rng, n, 1.0);
    let abscissa = SystemMatrix::new(m.clone()).expect("finite square matrix").spectral_abscissa();
    let shifted = m - DMatrix::identity(n, n) * (abscissa + margin);
    SystemMatrix::new(shifted).expect("finite square matrix")
}

pub fn random_skew<R: Rng>(rng: &mut R, n: usize, scale: f64) -> SystemMatrix {
    let m = random_matrix(rng, n, scale);
    SystemMatrix::new(&m - m.transpose()).expect("finite square matrix")
}

/// Symmetric weights on a random spanning tree plus extra edges with
/// probability `density`; weights uniform on `[0.1, 1]`.
pub fn random_connected_undirected<R: Rng>(rng: &mut R, n: usize, density: f64) -> ConnectivityMatrix {
    let mut w = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 1..n {
        let a = order[k];
        let b = order[rng.gen_range(0..k)];
        let x = rng.gen_range(0.1..=1.0);
        w[(a, b)] = x;
        w[(b, a)] = x;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if w[(i, j)] == 0.0 && rng.gen_bool(density) {
                let x = rng.gen_range(0.1..=1.0);
                w[(i, j)] = x;
                w[(j, i)] = x;
            }
        }
    }
    ConnectivityMatrix::new(w).expect("nonnegative weights")
}

/// Directed connection probabilities: a random Hamiltonian cycle keeps the
/// graph strongly connected, other arcs appear with probability `density`.
pub fn random_connectome<R: Rng>(rng: &mut R, n: usize, density: f64) -> ConnectivityMatrix {
    let mut w = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 0..n {
        let (a, b) = (order[k], order[(k + 1) % n]);
        if a != b {
            w[(a, b)] = rng.gen_range(0.05..=1.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && w[(i, j)] == 0.0 && rng.gen_bool(density) {
                w[(i, j)] = rng.gen_range(0.0..=1.0_f64).powi(2);
            }
        }
    }
    ConnectivityMatrix::new(w).expect("nonnegative weights")
}

/// Random digraph with arc weights drawn from `{0, 1, 2}`.
pub fn random_small_digraph<R: Rng>(rng: &mut R, n: usize) -> ConnectivityMatrix {
    let w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.gen_range(0..3) as f64 });
    ConnectivityMatrix::new(w).expect("nonnegative weights")
}

/// Ten-node undirected tree-like graph with one degree-6 hub (node 4) and
/// leaves 5 and 7 (0-based).
pub fn hub_graph() -> ConnectivityMatrix {
    let edges = [(4, 0), (4, 1), (4, 2), (4, 3), (4, 5), (4, 6), (6, 7), (0, 8), (8, 9), (9, 1), (2, 3)];
    let mut w = DMatrix::zeros(10, 10);
    for (a, b) in edges {
        w[(a, b)] = 1.0;
        w[(b, a)] = 1.0;
    }
    ConnectivityMatrix::new(w).expect("nonnegative weights")
}

/// Degrees of an undirected weight matrix, counting positive entries.
pub fn unweighted_degrees(c: &ConnectivityMatrix) -> Vec<usize> {
    c.weights().row_iter().map(|r| r.iter().filter(|v| **v > 0.0).count()).collect()
}

/// `n` seeded connectomes, one per individual.
pub fn synthetic_cohort(seed: u64, individuals: usize, n: usize, density: f64) -> Result<Vec<ConnectivityMatrix>> {
    let mut r = rng(seed);
    Ok((0..individuals).map(|_| random_connectome(&mut r, n, density)).collect())
}
