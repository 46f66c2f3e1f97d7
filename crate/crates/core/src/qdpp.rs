//! Statevector simulation of determinantal sampling circuits.
//!
//! A Clifford loader `C(x) = Σ x_i γ_i` uses the anticommuting strings
//! `γ_i = Z_0 ⋯ Z_{i-1} X_i`. Applying one loader per column of an
//! orthonormal `n x d` matrix `A` to `|0^n⟩` produces the state
//! `Σ_{|S| = d} det(A_S) |e_S⟩`, and measuring it samples the projection
//! DPP with kernel `A A^T`.
//!
//! Qubit 0 is the most significant bit of a basis index, so the basis state
//! for subset `S` has bit `n - 1 - q` set for every `q ∈ S`.
//!
//! Two backends are provided. [`StateVector::clifford_apply`] applies the
//! Pauli sum directly and is the reference. [`build_loader_circuit`] emits a
//! gate network with the same action, used for resource accounting and
//! topology studies.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpp::SubsetSample;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::tolerance;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 14;

/// Default shot count for sampling-based selection.
pub const DEFAULT_SHOTS: usize = 1000;

/// A real statevector over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<f64>,
}

impl StateVector {
    /// `|0^n⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity { what: "qubits", got: n_qubits, limit: MAX_QUBITS });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} out of range for {n_qubits} qubits")));
        }
        let mut amplitudes = vec![0.0; dim];
        amplitudes[index] = 1.0;
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// `|e_S⟩`.
    pub fn from_subset(n_qubits: usize, subset: &[usize]) -> Result<Self> {
        if let Some(&q) = subset.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::invalid(format!("qubit {q} out of range for {n_qubits} qubits")));
        }
        Self::basis(n_qubits, subset_to_index(n_qubits, subset))
    }

    pub fn from_amplitudes(amplitudes: Vec<f64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::invalid(format!("statevector length {dim} is not a power of two")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity { what: "qubits", got: n_qubits, limit: MAX_QUBITS });
        }
        let state = StateVector { n_qubits, amplitudes };
        if (state.norm() - 1.0).abs() > tolerance::UNIT_NORM {
            return Err(Error::invalid(format!("statevector norm {} is not 1", state.norm())));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, subset: &[usize]) -> f64 {
        self.amplitudes[subset_to_index(self.n_qubits, subset)]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::invalid(format!("qubit {q} out of range for {} qubits", self.n_qubits)));
        }
        Ok(())
    }

    fn check_pair(&self, q1: usize, q2: usize) -> Result<()> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(Error::invalid(format!("two-qubit gate on repeated qubit {q1}")));
        }
        Ok(())
    }

    /// Reconfigurable beam splitter on `(q1, q2)`:
    /// `|01⟩ → cos θ |01⟩ − sin θ |10⟩`, `|10⟩ → sin θ |01⟩ + cos θ |10⟩`.
    pub fn apply_rbs(&mut self, q1: usize, q2: usize, theta: f64) -> Result<()> {
        self.check_pair(q1, q2)?;
        self.rotate(q1, q2, theta, 0);
        Ok(())
    }

    /// RBS whose angle is negated when the qubits strictly between `q1` and
    /// `q2` have odd parity. On neighbouring qubits this is plain RBS.
    pub fn apply_fbs(&mut self, q1: usize, q2: usize, theta: f64) -> Result<()> {
        self.check_pair(q1, q2)?;
        let (lo, hi) = (q1.min(q2), q1.max(q2));
        let between = (lo + 1..hi).fold(0usize, |m, q| m | self.mask(q));
        self.rotate(q1, q2, theta, between);
        Ok(())
    }

    fn rotate(&mut self, q1: usize, q2: usize, theta: f64, parity_mask: usize) {
        let (m1, m2) = (self.mask(q1), self.mask(q2));
        let (c, s) = (theta.cos(), theta.sin());
        for i in 0..self.amplitudes.len() {
            // i is |01⟩ on (q1, q2); its partner is |10⟩.
            if i & m1 != 0 || i & m2 == 0 {
                continue;
            }
            let j = (i | m1) & !m2;
            let s = if (i & parity_mask).count_ones() % 2 == 1 { -s } else { s };
            let (a01, a10) = (self.amplitudes[i], self.amplitudes[j]);
            self.amplitudes[i] = c * a01 + s * a10;
            self.amplitudes[j] = -s * a01 + c * a10;
        }
    }

    pub fn apply_x(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let m = self.mask(q);
        for i in 0..self.amplitudes.len() {
            if i & m == 0 {
                self.amplitudes.swap(i, i | m);
            }
        }
        Ok(())
    }

    pub fn apply_z(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let m = self.mask(q);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & m != 0 {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn apply_cz(&mut self, q1: usize, q2: usize) -> Result<()> {
        self.check_pair(q1, q2)?;
        let m = self.mask(q1) | self.mask(q2);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & m == m {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Applies `C(x) = Σ_i x_i Z_0 ⋯ Z_{i-1} X_i` directly.
    pub fn clifford_apply(&mut self, x: &[f64]) -> Result<()> {
        check_unit(x, self.n_qubits)?;
        let n = self.n_qubits;
        let mut out = vec![0.0; self.amplitudes.len()];
        for (idx, &a) in self.amplitudes.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (q, &xq) in x.iter().enumerate() {
                // Qubits 0..q occupy the top q bits of the index.
                let above = idx >> (n - q);
                let sign = if above.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                out[idx ^ (1 << (n - 1 - q))] += sign * xq * a;
            }
        }
        self.amplitudes = out;
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let q = &gate.qubits;
        let arity = match gate.kind {
            GateKind::X | GateKind::Z => 1,
            _ => 2,
        };
        if q.len() != arity {
            return Err(Error::invalid(format!("{:?} gate needs {arity} qubits, got {}", gate.kind, q.len())));
        }
        match gate.kind {
            GateKind::Rbs { theta } => self.apply_rbs(q[0], q[1], theta),
            GateKind::Fbs { theta } => self.apply_fbs(q[0], q[1], theta),
            GateKind::X => self.apply_x(q[0]),
            GateKind::Z => self.apply_z(q[0]),
            GateKind::Cz => self.apply_cz(q[0], q[1]),
        }
    }

    pub fn apply_circuit(&mut self, circuit: &CircuitSpec) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::invalid(format!(
                "circuit on {} qubits applied to a {}-qubit state",
                circuit.n_qubits, self.n_qubits
            )));
        }
        circuit.gates.iter().try_for_each(|g| self.apply_gate(g))
    }

    /// Outcome probabilities `amplitude^2`, keyed by subset.
    pub fn distribution(&self) -> BTreeMap<Vec<usize>, f64> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(i, a)| (index_to_subset(self.n_qubits, i), a * a))
            .collect()
    }
}

pub fn subset_to_index(n_qubits: usize, subset: &[usize]) -> usize {
    subset.iter().fold(0, |acc, &q| acc | 1 << (n_qubits - 1 - q))
}

pub fn index_to_subset(n_qubits: usize, index: usize) -> Vec<usize> {
    (0..n_qubits).filter(|&q| index & (1 << (n_qubits - 1 - q)) != 0).collect()
}

fn check_unit(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::invalid(format!("loader vector has length {}, expected {n}", x.len())));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > tolerance::UNIT_NORM {
        return Err(Error::invalid(format!("loader vector has norm {norm}, expected 1")));
    }
    Ok(())
}

/// Gate kinds. `Fbs` is the parity-corrected beam splitter needed for
/// non-neighbouring pairs; [`CircuitSpec::lowered`] rewrites it with `Cz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateKind {
    Rbs { theta: f64 },
    Fbs { theta: f64 },
    X,
    Z,
    Cz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    #[serde(flatten)]
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn rbs(q1: usize, q2: usize, theta: f64) -> Self {
        Gate { kind: GateKind::Rbs { theta }, qubits: vec![q1, q2] }
    }

    pub fn fbs(q1: usize, q2: usize, theta: f64) -> Self {
        if q1.abs_diff(q2) == 1 {
            return Gate::rbs(q1, q2, theta);
        }
        Gate { kind: GateKind::Fbs { theta }, qubits: vec![q1, q2] }
    }

    pub fn x(q: usize) -> Self {
        Gate { kind: GateKind::X, qubits: vec![q] }
    }

    pub fn z(q: usize) -> Self {
        Gate { kind: GateKind::Z, qubits: vec![q] }
    }

    pub fn cz(q1: usize, q2: usize) -> Self {
        Gate { kind: GateKind::Cz, qubits: vec![q1, q2] }
    }

    pub fn inverse(&self) -> Gate {
        let kind = match self.kind {
            GateKind::Rbs { theta } => GateKind::Rbs { theta: -theta },
            GateKind::Fbs { theta } => GateKind::Fbs { theta: -theta },
            k => k,
        };
        Gate { kind, qubits: self.qubits.clone() }
    }

    /// Qubits the gate occupies for scheduling. An FBS reads the parity of
    /// every qubit between its endpoints, so it blocks that whole interval.
    fn footprint(&self) -> Vec<usize> {
        match self.kind {
            GateKind::Fbs { .. } => {
                let (lo, hi) = (self.qubits[0].min(self.qubits[1]), self.qubits[0].max(self.qubits[1]));
                (lo..=hi).collect()
            }
            _ => self.qubits.clone(),
        }
    }
}

/// An ordered gate list with an as-soon-as-possible layering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    /// Gate indices per layer; gates in one layer have disjoint footprints.
    pub layers: Vec<Vec<usize>>,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= n_qubits) {
                return Err(Error::invalid(format!("gate qubit {q} out of range for {n_qubits} qubits")));
            }
        }
        let mut free_at = vec![0usize; n_qubits];
        let mut layers: Vec<Vec<usize>> = Vec::new();
        for (i, g) in gates.iter().enumerate() {
            let footprint = g.footprint();
            let layer = footprint.iter().map(|&q| free_at[q]).max().unwrap_or(0);
            if layer == layers.len() {
                layers.push(Vec::new());
            }
            layers[layer].push(i);
            footprint.iter().for_each(|&q| free_at[q] = layer + 1);
        }
        Ok(CircuitSpec { n_qubits, gates, layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn inverse(&self) -> CircuitSpec {
        let gates = self.gates.iter().rev().map(Gate::inverse).collect();
        CircuitSpec::new(self.n_qubits, gates).expect("same qubits")
    }

    /// Sequential composition: `self` first, then `next`.
    pub fn then(&self, next: &CircuitSpec) -> Result<CircuitSpec> {
        if self.n_qubits != next.n_qubits {
            return Err(Error::invalid("composing circuits of different widths"));
        }
        CircuitSpec::new(self.n_qubits, self.gates.iter().chain(&next.gates).cloned().collect())
    }

    /// Rewrites every FBS as `CZ`-ladder · RBS · `CZ`-ladder, leaving only
    /// RBS, X, Z and CZ. The ladders apply `Z` on the first qubit controlled
    /// by the parity of the qubits in between, which negates the angle.
    pub fn lowered(&self) -> CircuitSpec {
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            match g.kind {
                GateKind::Fbs { theta } => {
                    let (a, b) = (g.qubits[0], g.qubits[1]);
                    let ladder: Vec<Gate> = (a.min(b) + 1..a.max(b)).map(|k| Gate::cz(k, a)).collect();
                    gates.extend(ladder.iter().cloned());
                    gates.push(Gate::rbs(a, b, theta));
                    gates.extend(ladder);
                }
                _ => gates.push(g.clone()),
            }
        }
        CircuitSpec::new(self.n_qubits, gates).expect("same qubits")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.gates)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoaderTopology {
    /// Nearest-neighbour cascade from qubit 0.
    Diagonal,
    /// Nearest-neighbour cascades spreading out from the middle qubit.
    SemiDiagonal,
    /// Binary tree of beam splitters, logarithmic depth.
    Parallel,
}

impl std::str::FromStr for LoaderTopology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(LoaderTopology::Diagonal),
            "semi_diagonal" | "semi-diagonal" => Ok(LoaderTopology::SemiDiagonal),
            "parallel" => Ok(LoaderTopology::Parallel),
            other => Err(Error::invalid(format!("unknown loader topology {other:?}"))),
        }
    }
}

/// A beam splitter moving part of the amplitude held on `hold` to `to`,
/// leaving `keep` on `hold` and `send` on `to`. The amplitude on `hold`
/// must be `sqrt(keep² + send²)`.
fn split(hold: usize, to: usize, keep: f64, send: f64) -> Gate {
    if hold < to {
        Gate::fbs(hold, to, send.atan2(keep))
    } else {
        Gate::fbs(to, hold, (-send).atan2(keep))
    }
}

/// Signed value for a single qubit, norm for a range: only singleton ranges
/// receive their final amplitude.
fn mass(x: &[f64], lo: usize, hi: usize) -> f64 {
    if hi - lo == 1 {
        x[lo]
    } else {
        x[lo..hi].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Gates of a network `V` with `V |e_start⟩ = Σ x_i |e_i⟩`.
fn unary_network(x: &[f64], topology: LoaderTopology) -> (usize, Vec<Gate>) {
    let n = x.len();
    let mut gates = Vec::new();
    match topology {
        LoaderTopology::Diagonal => {
            for q in 0..n - 1 {
                gates.push(split(q, q + 1, x[q], mass(x, q + 1, n)));
            }
            (0, gates)
        }
        LoaderTopology::SemiDiagonal => {
            let m = n / 2;
            // First hand the left part to qubit m - 1, then run both chains.
            let mut left = Vec::new();
            let mut right = Vec::new();
            if m > 0 {
                gates.push(split(m, m - 1, mass(x, m, n), mass(x, 0, m)));
                for q in (1..m).rev() {
                    left.push(split(q, q - 1, x[q], mass(x, 0, q)));
                }
            }
            for q in m..n - 1 {
                right.push(split(q, q + 1, x[q], mass(x, q + 1, n)));
            }
            // Interleave so the two independent chains share layers.
            for i in 0..left.len().max(right.len()) {
                gates.extend(left.get(i).cloned());
                gates.extend(right.get(i).cloned());
            }
            (m, gates)
        }
        LoaderTopology::Parallel => {
            let mut level = vec![(0usize, n)];
            while !level.is_empty() {
                let mut next = Vec::new();
                for (lo, hi) in level {
                    if hi - lo < 2 {
                        continue;
                    }
                    let mid = lo + (hi - lo).div_ceil(2);
                    gates.push(split(lo, mid, mass(x, lo, mid), mass(x, mid, hi)));
                    next.push((lo, mid));
                    next.push((mid, hi));
                }
                level = next;
            }
            (0, gates)
        }
    }
}

/// A gate network whose action equals `C(x)` on every basis state.
///
/// Built as `V γ_s V^†`, where `V` is a beam-splitter network in the chosen
/// topology sending `|e_s⟩` to `Σ x_i |e_i⟩`, and `γ_s = Z_0 ⋯ Z_{s-1} X_s`.
/// Beam splitters rotate the `γ_i` among themselves exactly as they rotate
/// one-hot states, so the conjugation yields `Σ x_i γ_i`.
pub fn build_loader_circuit(x: &[f64], topology: LoaderTopology) -> Result<CircuitSpec> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid(format!("loader circuits need at least 2 qubits, got {n}")));
    }
    check_unit(x, n)?;
    let (start, v) = unary_network(x, topology);
    let mut gates: Vec<Gate> = v.iter().rev().map(Gate::inverse).collect();
    gates.extend((0..start).map(Gate::z));
    gates.push(Gate::x(start));
    gates.extend(v);
    CircuitSpec::new(n, gates)
}

/// One loader per column of `a`, first column first. The result equals the
/// reference simulation up to the global sign `(-1)^{d(d-1)/2}`.
pub fn build_qdpp_circuit(a: &Matrix, topology: LoaderTopology) -> Result<CircuitSpec> {
    let mut gates = Vec::new();
    for j in 0..a.cols() {
        gates.extend(build_loader_circuit(&a.column(j), topology)?.gates);
    }
    CircuitSpec::new(a.rows(), gates)
}

fn check_orthonormal(a: &Matrix) -> Result<()> {
    let (n, d) = a.shape();
    if d == 0 || d > n {
        return Err(Error::invalid(format!("need 1 <= d <= n, got a {n}x{d} matrix")));
    }
    if n > MAX_QUBITS {
        return Err(Error::Capacity { what: "qubits", got: n, limit: MAX_QUBITS });
    }
    let dev = a.transpose().matmul(a)?.max_abs_diff(&Matrix::identity(d));
    if dev > tolerance::ORTHONORMAL {
        return Err(Error::invalid(format!("columns are not orthonormal (max |A^T A - I| = {dev:.3e})")));
    }
    Ok(())
}

/// `C(a^d) ⋯ C(a^1) |0^n⟩` with the global sign chosen so the amplitude on
/// `|e_S⟩` is `det(A_S)` (rows of `S` in increasing order).
pub fn simulate_qdpp(a: &Matrix) -> Result<StateVector> {
    check_orthonormal(a)?;
    let (n, d) = a.shape();
    let mut state = StateVector::zero(n)?;
    for j in 0..d {
        state.clifford_apply(&a.column(j))?;
    }
    // Reordering γ_{i_d} ⋯ γ_{i_1} into increasing order costs d(d-1)/2
    // transpositions; undo that sign globally.
    if (d * (d - 1) / 2) % 2 == 1 {
        state.amplitudes.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(state)
}

/// Draws `shots` outcomes with probability `amplitude^2`.
pub fn measure<R: Rng + ?Sized>(state: &StateVector, shots: usize, rng: &mut R) -> Result<Vec<SubsetSample>> {
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    let weights: Vec<f64> = state.amplitudes.iter().map(|a| a * a).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::invalid(format!("unmeasurable state: {e}")))?;
    Ok((0..shots)
        .map(|_| SubsetSample::from_sorted(index_to_subset(state.n_qubits, dist.sample(rng))))
        .collect())
}

/// Measures the loader state of `a` and returns the most frequent subset
/// (lexicographically smallest among ties).
pub fn most_frequent_outcome<R: Rng + ?Sized>(a: &Matrix, shots: usize, rng: &mut R) -> Result<SubsetSample> {
    let state = simulate_qdpp(a)?;
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for s in measure(&state, shots, rng)? {
        *counts.entry(s.into_indices()).or_insert(0) += 1;
    }
    let best = counts.values().copied().max().expect("shots >= 1");
    let subset = counts.into_iter().find(|&(_, c)| c == best).expect("max exists").0;
    Ok(SubsetSample::from_sorted(subset))
}

/// The infinite-shot limit of [`most_frequent_outcome`]: the subset with the
/// largest probability, lexicographically smallest among exact ties.
pub fn exact_mode(a: &Matrix) -> Result<SubsetSample> {
    let state = simulate_qdpp(a)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (i, amp) in state.amplitudes.iter().enumerate() {
        let p = amp * amp;
        let s = index_to_subset(state.n_qubits, i);
        best = match best {
            Some((bs, bp)) if bp > p || (bp == p && bs <= s) => Some((bs, bp)),
            _ => Some((s, p)),
        };
    }
    Ok(SubsetSample::from_sorted(best.expect("non-empty state").0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Resources {
    pub depth: usize,
    /// Beam splitters of either flavour.
    pub rbs_count: usize,
    /// The subset of `rbs_count` that are parity-corrected.
    pub fbs_count: usize,
    pub total_gates: usize,
}

pub fn resources(circuit: &CircuitSpec) -> Resources {
    let rbs = circuit.gates.iter().filter(|g| matches!(g.kind, GateKind::Rbs { .. } | GateKind::Fbs { .. })).count();
    let fbs = circuit.gates.iter().filter(|g| matches!(g.kind, GateKind::Fbs { .. })).count();
    Resources { depth: circuit.depth(), rbs_count: rbs, fbs_count: fbs, total_gates: circuit.gates.len() }
}

/// `4 d log2 n`, the reference depth for a `d`-loader parallel circuit.
pub fn reference_parallel_depth(n: usize, d: usize) -> f64 {
    4.0 * d as f64 * (n as f64).log2()
}
