#![allow(dead_code)]

use rand::Rng;
use tasep::{SystemParams, TypeSpec};

/// Random valid parameters with `N ≤ max_n` cells and `K ≤ max_k` types.
pub fn random_params<R: Rng>(rng: &mut R, max_n: usize, max_k: usize) -> SystemParams {
    let n = rng.random_range(1..=max_n);
    let k = rng.random_range(1..=max_k);
    params_with(rng, n, k)
}

pub fn params_with<R: Rng>(rng: &mut R, n: usize, k: usize) -> SystemParams {
    let alpha = rng.random_range(0.05..0.95);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    let types = weights
        .into_iter()
        .map(|a| TypeSpec::new(a, rng.random_range(0.1..=1.0), rng.random_range(0.1..=1.0)))
        .collect();
    SystemParams::new(n, alpha, types).unwrap()
}

pub fn table_row1() -> SystemParams {
    SystemParams::new(
        2,
        2.0 / 5.0,
        vec![
            TypeSpec::new(3.0 / 7.0, 3.0 / 5.0, 3.0 / 10.0),
            TypeSpec::new(4.0 / 7.0, 4.0 / 5.0, 2.0 / 5.0),
        ],
    )
    .unwrap()
}

/// Two-type, two-cell kernel written term by term from the inflow
/// coefficients of the nine balance equations. Index `3 x₁ + x₂`.
pub fn two_type_oracle(params: &SystemParams) -> [[f64; 9]; 9] {
    let al = params.alpha();
    let t = params.types();
    let a = [t[0].arrival_weight, t[1].arrival_weight];
    let p = [t[0].hop_prob, t[1].hop_prob];
    let b = [t[0].exit_prob, t[1].exit_prob];
    let at = |x1: usize, x2: usize| 3 * x1 + x2;
    let mut m = [[0.0; 9]; 9];
    // (0,0): arrival or nothing
    m[at(0, 0)][at(0, 0)] = 1.0 - al;
    m[at(0, 0)][at(1, 0)] = al * a[0];
    m[at(0, 0)][at(2, 0)] = al * a[1];
    for k in 1..=2 {
        let bk = b[k - 1];
        // (0,k): independent arrival and exit
        m[at(0, k)][at(0, 0)] = (1.0 - al) * bk;
        m[at(0, k)][at(0, k)] = (1.0 - al) * (1.0 - bk);
        m[at(0, k)][at(1, 0)] = al * a[0] * bk;
        m[at(0, k)][at(2, 0)] = al * a[1] * bk;
        m[at(0, k)][at(1, k)] = al * a[0] * (1.0 - bk);
        m[at(0, k)][at(2, k)] = al * a[1] * (1.0 - bk);
    }
    for j in 1..=2 {
        // (j,0): hop only
        m[at(j, 0)][at(0, j)] = p[j - 1];
        m[at(j, 0)][at(j, 0)] = 1.0 - p[j - 1];
        for k in 1..=2 {
            // (j,k): only the exit is enabled
            m[at(j, k)][at(j, 0)] = b[k - 1];
            m[at(j, k)][at(j, k)] = 1.0 - b[k - 1];
        }
    }
    m
}

/// Single-type two-cell kernel. Index `2 x₁ + x₂`.
pub fn single_type_oracle(alpha: f64, p: f64, beta: f64) -> [[f64; 4]; 4] {
    [
        [1.0 - alpha, 0.0, alpha, 0.0],
        [
            (1.0 - alpha) * beta,
            (1.0 - alpha) * (1.0 - beta),
            alpha * beta,
            alpha * (1.0 - beta),
        ],
        [0.0, p, 1.0 - p, 0.0],
        [0.0, 0.0, beta, 1.0 - beta],
    ]
}
