//! Determinantal point processes over the rows of a data matrix.
//!
//! An [`LEnsemble`] assigns each subset `T` of `{0, .., n-1}` the probability
//! `det(L_T) / det(I + L)`. Conditioning on `|T| = k` gives the k-DPP, which
//! [`sample_kdpp`] draws from exactly with the two-phase spectral sampler.
//! [`det_kdpp`] is the deterministic counterpart: a greedy selection that at
//! each step takes the item with the largest conditional marginal under the
//! projection kernel of the top `k` eigenvectors.
//!
//! The `*_bruteforce` functions enumerate subsets and exist as oracles for
//! small `n`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{self, principal_det, EigenDecomposition, Matrix};
use crate::tolerance;

/// Largest ground set the enumeration oracles accept.
pub const BRUTEFORCE_MAX_N: usize = 22;

/// A DPP kernel `L` (symmetric PSD) with its eigendecomposition cached on
/// first use.
#[derive(Debug)]
pub struct LEnsemble {
    kernel: Matrix,
    source: Option<Matrix>,
    eig: OnceLock<std::result::Result<EigenDecomposition, String>>,
}

impl Clone for LEnsemble {
    fn clone(&self) -> Self {
        let eig = OnceLock::new();
        if let Some(done) = self.eig.get() {
            let _ = eig.set(done.clone());
        }
        LEnsemble { kernel: self.kernel.clone(), source: self.source.clone(), eig }
    }
}

impl LEnsemble {
    /// Wraps an explicit kernel. Positive semidefiniteness is checked when the
    /// spectrum is first needed.
    pub fn from_kernel(kernel: Matrix) -> Result<Self> {
        if !kernel.is_square() || kernel.rows() == 0 {
            return Err(Error::invalid(format!(
                "L-ensemble kernel must be square and non-empty, got {}x{}",
                kernel.rows(),
                kernel.cols()
            )));
        }
        if kernel.asymmetry() > tolerance::SYMMETRY {
            return Err(Error::invalid("L-ensemble kernel is not symmetric"));
        }
        Ok(LEnsemble { kernel, source: None, eig: OnceLock::new() })
    }

    /// `L = A A^T` for an `n x d` feature matrix. The spectrum is then
    /// obtained from the `d x d` dual, and is thin (zero eigenvalues omitted).
    pub fn from_features(a: Matrix) -> Result<Self> {
        let kernel = numerics::gram(&a)?;
        Ok(LEnsemble { kernel, source: Some(a), eig: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.kernel.rows()
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn source(&self) -> Option<&Matrix> {
        self.source.as_ref()
    }

    /// Eigendecomposition with small negative eigenvalues clamped to zero.
    pub fn eig(&self) -> Result<&EigenDecomposition> {
        let cached = self.eig.get_or_init(|| self.compute_eig().map_err(|e| e.to_string()));
        cached.as_ref().map_err(|msg| Error::DegenerateKernel(msg.clone()))
    }

    fn compute_eig(&self) -> Result<EigenDecomposition> {
        let mut eig = match &self.source {
            Some(a) => numerics::gram_eig(a)?,
            None => numerics::sym_eig(&self.kernel)?,
        };
        for v in &mut eig.eigenvalues {
            if *v < -tolerance::EIGEN_CLAMP {
                return Err(Error::degenerate(format!("kernel is indefinite (eigenvalue {v:e})")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(eig)
    }

    /// Number of eigenvalues above `RANK`.
    pub fn rank(&self) -> Result<usize> {
        Ok(self.eig()?.eigenvalues.iter().filter(|&&l| l > tolerance::RANK).count())
    }

    /// `det(I + L)`, from the spectrum.
    pub fn normalizer(&self) -> Result<f64> {
        Ok(self.eig()?.eigenvalues.iter().map(|l| 1.0 + l).product())
    }
}

/// A set of row indices, kept strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct SubsetSample {
    indices: Vec<usize>,
}

impl SubsetSample {
    /// Sorts `indices` and checks that they are distinct and below `n`.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("subset contains a repeated index"));
        }
        if let Some(&bad) = indices.last().filter(|&&i| i >= n) {
            return Err(Error::invalid(format!("index {bad} out of range for n = {n}")));
        }
        Ok(SubsetSample { indices })
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SubsetSample { indices }
    }

    pub fn empty() -> Self {
        SubsetSample { indices: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.indices
    }
}

/// An explicit distribution over subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDistribution {
    probs: BTreeMap<Vec<usize>, f64>,
}

impl SubsetDistribution {
    pub fn prob(&self, subset: &[usize]) -> f64 {
        self.probs.get(subset).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.probs.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total-variation distance to the empirical distribution in `counts`.
    pub fn tv_distance_to_counts(&self, counts: &BTreeMap<Vec<usize>, usize>) -> f64 {
        let total: usize = counts.values().sum();
        let total = total.max(1) as f64;
        let mut tv = 0.0;
        for (s, &p) in &self.probs {
            let q = counts.get(s).copied().unwrap_or(0) as f64 / total;
            tv += (p - q).abs();
        }
        for (s, &c) in counts {
            if !self.probs.contains_key(s) {
                tv += c as f64 / total;
            }
        }
        0.5 * tv
    }

    /// The most probable subset; ties go to the lexicographically smallest.
    pub fn mode(&self) -> Option<(&[usize], f64)> {
        let mut best: Option<(&[usize], f64)> = None;
        for (s, &p) in &self.probs {
            match best {
                Some((_, bp)) if p <= bp + tolerance::ARGMAX_TIE * bp.abs() => {}
                _ => best = Some((s.as_slice(), p)),
            }
        }
        best
    }

    pub(crate) fn from_map(probs: BTreeMap<Vec<usize>, f64>) -> Self {
        SubsetDistribution { probs }
    }
}

/// `K = L (I + L)^{-1}`, evaluated spectrally.
pub fn marginal_kernel(l: &LEnsemble) -> Result<Matrix> {
    Ok(l.eig()?.reconstruct_with(|lambda| lambda / (1.0 + lambda)))
}

/// `P(T) = det(L_T) / det(I + L)`.
pub fn subset_prob(l: &LEnsemble, t: &SubsetSample) -> Result<f64> {
    if let Some(&bad) = t.indices().iter().find(|&&i| i >= l.n()) {
        return Err(Error::invalid(format!("index {bad} out of range for n = {}", l.n())));
    }
    Ok(principal_det(l.kernel(), t.indices()) / l.normalizer()?)
}

/// Calls `f` on every k-subset of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn check_bruteforce(l: &LEnsemble, k: usize) -> Result<()> {
    if l.n() > BRUTEFORCE_MAX_N {
        return Err(Error::Capacity { what: "ground set size", got: l.n(), limit: BRUTEFORCE_MAX_N });
    }
    if k == 0 || k > l.n() {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={}", l.n())));
    }
    let rank = l.rank()?;
    if rank < k {
        return Err(Error::degenerate(format!("kernel rank {rank} is below k = {k}")));
    }
    Ok(())
}

/// The k-DPP by enumeration: `P(T) ∝ det(L_T)` over all `|T| = k`.
pub fn kdpp_distribution_bruteforce(l: &LEnsemble, k: usize) -> Result<SubsetDistribution> {
    check_bruteforce(l, k)?;
    let mut probs = BTreeMap::new();
    let mut total = 0.0;
    for_each_combination(l.n(), k, |s| {
        let w = principal_det(l.kernel(), s).max(0.0);
        total += w;
        probs.insert(s.to_vec(), w);
    });
    if total <= 0.0 {
        return Err(Error::degenerate("every k x k principal minor vanishes"));
    }
    probs.values_mut().for_each(|p| *p /= total);
    Ok(SubsetDistribution::from_map(probs))
}

/// Mode of the k-DPP by enumeration.
pub fn highest_prob_subset_bruteforce(l: &LEnsemble, k: usize) -> Result<SubsetSample> {
    let dist = kdpp_distribution_bruteforce(l, k)?;
    let (s, _) = dist.mode().expect("non-empty distribution");
    Ok(SubsetSample::from_sorted(s.to_vec()))
}

/// Elementary symmetric polynomials `e_l(λ_1..λ_m)` for `l ≤ k`, `m ≤ r`,
/// stored as natural logs (so zero is `-inf`).
fn log_esp_table(lambdas: &[f64], k: usize) -> Vec<Vec<f64>> {
    let r = lambdas.len();
    let log_space = r > tolerance::ESP_LOG_SPACE_ABOVE;
    let mut e = vec![vec![if log_space { f64::NEG_INFINITY } else { 0.0 }; r + 1]; k + 1];
    for m in 0..=r {
        e[0][m] = if log_space { 0.0 } else { 1.0 };
    }
    for l in 1..=k {
        for m in 1..=r {
            if log_space {
                let a = e[l][m - 1];
                let b = lambdas[m - 1].ln() + e[l - 1][m - 1];
                e[l][m] = log_add(a, b);
            } else {
                e[l][m] = e[l][m - 1] + lambdas[m - 1] * e[l - 1][m - 1];
            }
        }
    }
    if !log_space {
        for row in &mut e {
            row.iter_mut().for_each(|v| *v = v.ln());
        }
    }
    e
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Exact k-DPP sample by the spectral method: choose `k` eigenvectors with
/// probability proportional to the product of their eigenvalues, then sample
/// from the projection DPP they span.
pub fn sample_kdpp<R: Rng + ?Sized>(l: &LEnsemble, k: usize, rng: &mut R) -> Result<SubsetSample> {
    let n = l.n();
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds ground set size {n}")));
    }
    if k == 0 {
        return Ok(SubsetSample::empty());
    }
    let eig = l.eig()?;
    let usable: Vec<usize> =
        (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > tolerance::RANK).collect();
    if usable.len() < k {
        return Err(Error::degenerate(format!("kernel rank {} is below k = {k}", usable.len())));
    }
    let lambdas: Vec<f64> = usable.iter().map(|&i| eig.eigenvalues[i]).collect();
    let log_e = log_esp_table(&lambdas, k);

    // Phase 1: pick eigenvector indices, scanning from the last.
    let mut chosen = Vec::with_capacity(k);
    let mut remaining = k;
    for m in (1..=lambdas.len()).rev() {
        if remaining == 0 {
            break;
        }
        let p = if m == remaining {
            1.0
        } else {
            (lambdas[m - 1].ln() + log_e[remaining - 1][m - 1] - log_e[remaining][m]).exp()
        };
        if rng.random::<f64>() < p {
            chosen.push(usable[m - 1]);
            remaining -= 1;
        }
    }
    debug_assert_eq!(chosen.len(), k);

    let basis: Vec<Vec<f64>> = chosen.iter().map(|&c| eig.eigenvectors.column(c)).collect();
    Ok(sample_projection(basis, rng))
}

/// Samples from the projection DPP whose kernel is spanned by the orthonormal
/// vectors in `basis` (each of length n). Returns exactly `basis.len()` items.
pub fn sample_projection<R: Rng + ?Sized>(mut basis: Vec<Vec<f64>>, rng: &mut R) -> SubsetSample {
    let n = basis.first().map_or(0, Vec::len);
    let mut picked = Vec::with_capacity(basis.len());
    let mut taken = vec![false; n];
    while !basis.is_empty() {
        let weights: Vec<f64> = (0..n)
            .map(|i| if taken[i] { 0.0 } else { basis.iter().map(|v| v[i] * v[i]).sum() })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut item = n - 1;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                item = i;
            }
            if u < w {
                break;
            }
            u -= w;
        }
        taken[item] = true;
        picked.push(item);

        // Restrict the span to vectors vanishing at `item`.
        let pivot = (0..basis.len())
            .max_by(|&a, &b| basis[a][item].abs().total_cmp(&basis[b][item].abs()))
            .expect("non-empty basis");
        let pv = basis.swap_remove(pivot);
        for v in &mut basis {
            let f = v[item] / pv[item];
            for (x, p) in v.iter_mut().zip(&pv) {
                *x -= f * p;
            }
        }
        orthonormalize_in_place(&mut basis);
    }
    picked.sort_unstable();
    SubsetSample::from_sorted(picked)
}

fn orthonormalize_in_place(vs: &mut [Vec<f64>]) {
    for j in 0..vs.len() {
        let (done, rest) = vs.split_at_mut(j);
        let v = &mut rest[0];
        for _ in 0..2 {
            for q in done.iter() {
                let r = numerics::dot(q, v);
                for (x, qi) in v.iter_mut().zip(q) {
                    *x -= r * qi;
                }
            }
        }
        let nv = numerics::norm(v);
        if nv > 0.0 {
            v.iter_mut().for_each(|x| *x /= nv);
        }
    }
}

/// Greedy deterministic k-DPP selection on kernel `K`.
///
/// Takes the top `k` eigenvectors `V`, starts from the leverage scores
/// `p0(i) = |V^T e_i|^2`, and repeatedly adds the index with the largest
/// conditional score `p0(j) - P_{T,j}^T P_{T,T}^+ P_{T,j}`, where `P = V V^T`.
/// Scores within `ARGMAX_TIE` of each other go to the lowest index.
pub fn det_kdpp(k_matrix: &Matrix, k: usize) -> Result<SubsetSample> {
    let eig = numerics::sym_eig(k_matrix)?;
    if eig.eigenvalues.iter().any(|&l| l < -tolerance::EIGEN_CLAMP) {
        return Err(Error::degenerate("kernel is indefinite"));
    }
    let order = det_kdpp_from_eig(&eig, k)?;
    let mut sorted = order;
    sorted.sort_unstable();
    Ok(SubsetSample::from_sorted(sorted))
}

/// [`det_kdpp`] on a precomputed spectrum. Returns indices in the order they
/// were selected.
pub fn det_kdpp_from_eig(eig: &EigenDecomposition, k: usize) -> Result<Vec<usize>> {
    let n = eig.dim();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let rank = eig.eigenvalues.iter().filter(|&&l| l > tolerance::RANK).count();
    if rank < k {
        return Err(Error::degenerate(format!("kernel rank {rank} is below k = {k}")));
    }
    // Rows of V, i.e. V^T e_i.
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..k).map(|c| eig.eigenvectors[(i, c)]).collect()).collect();
    let p_entry = |i: usize, j: usize| numerics::dot(&rows[i], &rows[j]);
    let p0: Vec<f64> = rows.iter().map(|r| numerics::dot(r, r)).collect();
    let mut p = p0.clone();
    let mut picked: Vec<usize> = Vec::with_capacity(k);

    while picked.len() < k {
        let mut best: Option<usize> = None;
        for j in 0..n {
            if picked.contains(&j) {
                continue;
            }
            match best {
                Some(b) if p[j] <= p[b] + tolerance::ARGMAX_TIE => {}
                _ => best = Some(j),
            }
        }
        let t = best.expect("k <= n leaves a candidate");
        picked.push(t);

        let ptt = Matrix::from_fn(picked.len(), picked.len(), |a, b| p_entry(picked[a], picked[b]));
        let pinv = numerics::pinv_sym(&ptt)?;
        for j in 0..n {
            let ptj: Vec<f64> = picked.iter().map(|&s| p_entry(s, j)).collect();
            let mut quad = 0.0;
            for a in 0..picked.len() {
                for b in 0..picked.len() {
                    quad += ptj[a] * pinv[(a, b)] * ptj[b];
                }
            }
            p[j] = p0[j] - quad;
        }
    }
    Ok(picked)
}
