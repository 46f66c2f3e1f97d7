//! Oracles shared by the integration suites. Nothing here calls the code
//! paths it is used to check, apart from basic matrix construction.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dpp_impute::numerics::{self, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// `B B^T` with `B` of shape `n x rank`.
pub fn random_psd(n: usize, rank: usize, seed: u64) -> Matrix {
    let b = random_matrix(n, rank, seed);
    b.matmul(&b.transpose()).unwrap()
}

/// Orthonormal columns by classical Gram–Schmidt, written out independently
/// of the library.
pub fn random_orthonormal(n: usize, d: usize, seed: u64) -> Matrix {
    let a = random_matrix(n, d, seed);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let mut v = a.column(j);
        for _ in 0..2 {
            for q in &cols {
                let r: f64 = q.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= r * qi);
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        cols.push(v);
    }
    Matrix::from_fn(n, d, |i, j| cols[j][i])
}

/// Determinant by Laplace expansion; only for tiny matrices.
pub fn laplace_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return m[0][0];
    }
    let mut total = 0.0;
    for c in 0..n {
        let minor: Vec<Vec<f64>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect()).collect();
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * m[0][c] * laplace_det(&minor);
    }
    total
}

pub fn minor(m: &Matrix, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|&i| cols.iter().map(|&j| m[(i, j)]).collect()).collect()
}

/// All k-subsets of 0..n, lexicographic.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// k-DPP probabilities by Laplace-expansion minors.
pub fn kdpp_oracle(l: &Matrix, k: usize) -> BTreeMap<Vec<usize>, f64> {
    let mut probs = BTreeMap::new();
    let mut total = 0.0;
    for s in subsets(l.rows(), k) {
        let w = laplace_det(&minor(l, &s, &s)).max(0.0);
        total += w;
        probs.insert(s, w);
    }
    probs.values_mut().for_each(|p| *p /= total);
    probs
}

/// `det(A_S)^2` over all d-row subsets of an orthonormal `n x d` matrix.
pub fn det_squared_oracle(a: &Matrix) -> BTreeMap<Vec<usize>, f64> {
    let cols: Vec<usize> = (0..a.cols()).collect();
    subsets(a.rows(), a.cols())
        .into_iter()
        .map(|s| {
            let d = laplace_det(&minor(a, &s, &cols));
            (s, d * d)
        })
        .collect()
}

pub fn tv(p: &BTreeMap<Vec<usize>, f64>, counts: &BTreeMap<Vec<usize>, usize>) -> f64 {
    let total = counts.values().sum::<usize>() as f64;
    let mut keys: Vec<&Vec<usize>> = p.keys().chain(counts.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|s| (p.get(s).copied().unwrap_or(0.0) - counts.get(s).copied().unwrap_or(0) as f64 / total).abs())
        .sum::<f64>()
}

/// Pearson chi-square p-value. Cells with expected count below 5 are pooled.
pub fn chi_square_p(p: &BTreeMap<Vec<usize>, f64>, counts: &BTreeMap<Vec<usize>, usize>) -> f64 {
    let total = counts.values().sum::<usize>() as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_e, mut pooled_o) = (0.0, 0.0);
    for (s, &prob) in p {
        let e = prob * total;
        let o = counts.get(s).copied().unwrap_or(0) as f64;
        if e < 5.0 {
            pooled_e += e;
            pooled_o += o;
            continue;
        }
        stat += (o - e) * (o - e) / e;
        cells += 1;
    }
    if pooled_e > 0.0 {
        if pooled_e >= 5.0 {
            stat += (pooled_o - pooled_e).powi(2) / pooled_e;
            cells += 1;
        } else if pooled_o > pooled_e + 10.0 {
            return 0.0;
        }
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, piv);
        let p = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                a[r].iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Step-by-step greedy reference: at each step recompute every conditional
/// score from scratch with an explicit inverse of `P_{T,T}`, and take the
/// largest (lowest index within 1e-12). Returns the selection order.
pub fn greedy_oracle(k_matrix: &Matrix, k: usize) -> Vec<usize> {
    let n = k_matrix.rows();
    let eig = numerics::sym_eig(k_matrix).unwrap();
    let v = Matrix::from_fn(n, k, |i, j| eig.eigenvectors[(i, j)]);
    let p = v.matmul(&v.transpose()).unwrap();
    let mut picked: Vec<usize> = Vec::new();
    for _ in 0..k {
        let inv = if picked.is_empty() { vec![] } else { gauss_jordan_inverse(&minor(&p, &picked, &picked)) };
        let score = |j: usize| {
            let mut s = p[(j, j)];
            for a in 0..picked.len() {
                for b in 0..picked.len() {
                    s -= p[(picked[a], j)] * inv[a][b] * p[(picked[b], j)];
                }
            }
            s
        };
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|j| !picked.contains(j)) {
            let s = score(j);
            if best.is_none_or(|(_, bs)| s > bs + 1e-12) {
                best = Some((j, s));
            }
        }
        picked.push(best.unwrap().0);
    }
    picked
}

pub fn count<I: IntoIterator<Item = Vec<usize>>>(samples: I) -> BTreeMap<Vec<usize>, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s).or_insert(0) += 1;
    }
    counts
}
