//! Finite inhomogeneous chains: Lax operators, monodromy elements, transfer
//! matrix, reference state, vacuum weights and the total-spin operator.
//!
//! The quantum basis orders site 1 slowest: the basis index of local states
//! `(k_1, …, k_L)` (0-based) is `Σ_j k_j N^{L-j}`. Local state `k` carries
//! `S^z = s - k` with `s = (N-1)/2`, so the particle number of a basis vector
//! is the digit sum `Σ_j k_j`. The monodromy matrix is `L_L(λ) ⋯ L_1(λ)` with
//! site 1 acting first on the auxiliary space.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{BetheError, Result};
use crate::linalg::{C64, ONE, ZERO};
use crate::weights::{ModelSpec, WeightMatrix};

/// Largest Hilbert-space dimension for which dense operators are built.
pub const DENSE_LIMIT: usize = 4096;

/// A model on a chain of `L` sites with inhomogeneities `μ_1 … μ_L`.
#[derive(Debug, Clone)]
pub struct ChainContext {
    model: ModelSpec,
    length: usize,
    mus: Vec<C64>,
}

/// A vector of the chain Hilbert space with an optional particle-number label.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    /// Amplitudes in the site-1-slowest basis.
    pub amplitudes: DVector<C64>,
    /// Particle number `n` when all support lies in the sector with `S^z = Ls - n`.
    pub sector: Option<usize>,
}

impl StateVector {
    /// Dimension of the Hilbert space.
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Largest amplitude magnitude.
    pub fn max_abs(&self) -> f64 {
        self.amplitudes.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Representation of a [`ChainOperator`].
#[derive(Clone)]
pub enum OperatorRepr {
    /// Dense `dim × dim` matrix.
    Dense(DMatrix<C64>),
    /// Matrix-free applier.
    MatrixFree(Arc<dyn Fn(&DVector<C64>) -> DVector<C64> + Send + Sync>),
}

/// A linear operator on the chain Hilbert space with its particle-number shift.
#[derive(Clone)]
pub struct ChainOperator {
    /// Hilbert-space dimension `N^L`.
    pub dim: usize,
    /// Change of the particle number `n` produced by the operator.
    pub sector_shift: i64,
    /// Dense or matrix-free representation.
    pub repr: OperatorRepr,
}

impl std::fmt::Debug for ChainOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.repr {
            OperatorRepr::Dense(_) => "dense",
            OperatorRepr::MatrixFree(_) => "matrix-free",
        };
        f.debug_struct("ChainOperator")
            .field("dim", &self.dim)
            .field("sector_shift", &self.sector_shift)
            .field("repr", &kind)
            .finish()
    }
}

impl ChainOperator {
    /// Applies the operator to a vector.
    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        match &self.repr {
            OperatorRepr::Dense(m) => m * v,
            OperatorRepr::MatrixFree(f) => f(v),
        }
    }

    /// Dense matrix, built column by column for matrix-free operators.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        match &self.repr {
            OperatorRepr::Dense(m) => Ok(m.clone()),
            OperatorRepr::MatrixFree(f) => {
                if self.dim > DENSE_LIMIT {
                    return Err(BetheError::DimensionTooLarge { dim: self.dim, limit: DENSE_LIMIT });
                }
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for j in 0..self.dim {
                    let mut e = DVector::zeros(self.dim);
                    e[j] = ONE;
                    m.set_column(j, &f(&e));
                }
                Ok(m)
            }
        }
    }
}

/// Lax operator at site parameter `μ`: the N²×N² matrix `Σ R(λ,μ)_{a,b}^{c,d} e_{a,c} ⊗ e_{b,d}`.
///
/// Rows are `(a-1)N + (b-1)` with `a` the auxiliary index, which coincides with
/// the dense layout of the weight matrix.
pub fn lax(model: &ModelSpec, lambda: C64, mu: C64) -> Result<DMatrix<C64>> {
    Ok(model.eval_r(lambda, mu)?.to_dense())
}

/// Reference state `|0⟩`: every site in local state 1.
pub fn reference_state(n: usize, length: usize) -> StateVector {
    let dim = n.pow(length as u32);
    let mut amplitudes = DVector::zeros(dim);
    amplitudes[0] = ONE;
    StateVector { amplitudes, sector: Some(0) }
}

/// Particle number of a basis index (digit sum in base N).
pub fn particle_number(mut index: usize, n: usize, length: usize) -> usize {
    let mut total = 0;
    for _ in 0..length {
        total += index % n;
        index /= n;
    }
    total
}

/// Total spin `Σ_i S^z_i` as a dense diagonal operator.
pub fn spin_z_total(n: usize, length: usize) -> ChainOperator {
    let dim = n.pow(length as u32);
    let top = (n as f64 - 1.0) / 2.0 * length as f64;
    let diag = DVector::from_fn(dim, |i, _| C64::new(top - particle_number(i, n, length) as f64, 0.0));
    ChainOperator { dim, sector_shift: 0, repr: OperatorRepr::Dense(DMatrix::from_diagonal(&diag)) }
}

/// Particle number of a vector, or `None` when its support spans several sectors or is empty.
pub fn sector_of(v: &DVector<C64>, n: usize, length: usize) -> Option<usize> {
    let mut found = None;
    for (i, z) in v.iter().enumerate() {
        if *z != ZERO {
            let k = particle_number(i, n, length);
            match found {
                None => found = Some(k),
                Some(f) if f != k => return None,
                _ => {}
            }
        }
    }
    found
}

/// Evaluated Lax chain at one spectral parameter, applied without forming dense matrices.
#[derive(Debug, Clone)]
pub struct Monodromy {
    n: usize,
    length: usize,
    sites: Vec<WeightMatrix>,
}

impl Monodromy {
    /// Number of local states.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Weights `R(λ, μ_j)` of site `j` (1-based).
    pub fn site(&self, j: usize) -> &WeightMatrix {
        &self.sites[j - 1]
    }

    fn dim(&self) -> usize {
        self.n.pow(self.length as u32)
    }

    /// Applies the site operator `L_j[a, c]` (1-based labels) to `v`, accumulating into `out`.
    fn site_apply(&self, j: usize, a: usize, c: usize, v: &[C64], out: &mut [C64]) {
        let n = self.n;
        let w = &self.sites[j];
        let stride = n.pow((self.length - 1 - j) as u32);
        let block = stride * n;
        let mut coeff = vec![ZERO; n];
        let mut target = vec![usize::MAX; n];
        for d in 1..=n {
            let b = c as i64 + d as i64 - a as i64;
            if b >= 1 && b <= n as i64 {
                let val = w.get(a as i64, b, c as i64, d as i64);
                if val != ZERO {
                    coeff[d - 1] = val;
                    target[d - 1] = b as usize - 1;
                }
            }
        }
        for base in (0..v.len()).step_by(block) {
            for d in 0..n {
                if target[d] == usize::MAX {
                    continue;
                }
                let src = base + d * stride;
                let dst = base + target[d] * stride;
                let k = coeff[d];
                for off in 0..stride {
                    let x = v[src + off];
                    if x != ZERO {
                        out[dst + off] += k * x;
                    }
                }
            }
        }
    }

    /// Applies the whole column `T_{·,c}` to `v`, returning `T_{a,c} v` for `a = 1..N`.
    pub fn apply_column(&self, c: usize, v: &DVector<C64>) -> Vec<DVector<C64>> {
        let n = self.n;
        let dim = self.dim();
        let mut cur: Vec<Vec<C64>> = (1..=n)
            .map(|k| {
                let mut out = vec![ZERO; dim];
                self.site_apply(0, k, c, v.as_slice(), &mut out);
                out
            })
            .collect();
        for j in 1..self.length {
            let mut next = vec![vec![ZERO; dim]; n];
            for (kp, slot) in next.iter_mut().enumerate() {
                for (k, u) in cur.iter().enumerate() {
                    if u.iter().all(|z| *z == ZERO) {
                        continue;
                    }
                    self.site_apply(j, kp + 1, k + 1, u, slot);
                }
            }
            cur = next;
        }
        cur.into_iter().map(DVector::from_vec).collect()
    }

    /// Applies `T_{a,c}(λ)` to `v`.
    pub fn apply(&self, a: usize, c: usize, v: &DVector<C64>) -> DVector<C64> {
        self.apply_column(c, v).swap_remove(a - 1)
    }

    /// Applies the transfer matrix `Σ_a T_{a,a}(λ)` to `v`.
    pub fn apply_transfer(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(v.len());
        for a in 1..=self.n {
            out += self.apply(a, a, v);
        }
        out
    }

    fn dense_paths(&self, a_filter: Option<(usize, usize)>) -> DMatrix<C64> {
        let n = self.n;
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut digits = vec![0usize; self.length];
        for col in 0..dim {
            let mut rem = col;
            for j in (0..self.length).rev() {
                digits[j] = rem % n;
                rem /= n;
            }
            let starts: Vec<usize> = match a_filter {
                Some((_, c)) => vec![c],
                None => (1..=n).collect(),
            };
            for c in starts {
                let end = match a_filter {
                    Some((a, _)) => Some(a),
                    None => Some(c),
                };
                self.walk(0, c, ONE, 0, &digits, end, col, &mut m);
            }
        }
        m
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        j: usize,
        aux_in: usize,
        amp: C64,
        row: usize,
        digits: &[usize],
        end: Option<usize>,
        col: usize,
        m: &mut DMatrix<C64>,
    ) {
        let n = self.n;
        if j == self.length {
            if end.map_or(true, |e| e == aux_in) {
                m[(row, col)] += amp;
            }
            return;
        }
        let d = digits[j] + 1;
        for aux_out in 1..=n {
            let b = aux_in as i64 + d as i64 - aux_out as i64;
            if b < 1 || b > n as i64 {
                continue;
            }
            let w = self.sites[j].get(aux_out as i64, b, aux_in as i64, d as i64);
            if w == ZERO {
                continue;
            }
            self.walk(j + 1, aux_out, amp * w, row * n + (b as usize - 1), digits, end, col, m);
        }
    }

    /// Dense matrix of `T_{a,c}(λ)`.
    pub fn dense_element(&self, a: usize, c: usize) -> Result<DMatrix<C64>> {
        let dim = self.dim();
        if dim > DENSE_LIMIT {
            return Err(BetheError::DimensionTooLarge { dim, limit: DENSE_LIMIT });
        }
        Ok(self.dense_paths(Some((a, c))))
    }

    /// Dense transfer matrix `Σ_a T_{a,a}(λ)`.
    pub fn dense_transfer(&self) -> Result<DMatrix<C64>> {
        let dim = self.dim();
        if dim > DENSE_LIMIT {
            return Err(BetheError::DimensionTooLarge { dim, limit: DENSE_LIMIT });
        }
        Ok(self.dense_paths(None))
    }
}

impl ChainContext {
    /// Chain of `length` sites; `inhomogeneities` defaults to the model's regular point on every site.
    pub fn new(model: ModelSpec, length: usize, inhomogeneities: Option<Vec<C64>>) -> Result<Self> {
        if length == 0 {
            return Err(BetheError::InvalidOption("chain length must be at least 1".into()));
        }
        let mus = match inhomogeneities {
            Some(m) => {
                if m.len() != length {
                    return Err(BetheError::InvalidOption(format!(
                        "{} inhomogeneities given for L = {length}",
                        m.len()
                    )));
                }
                if m.iter().any(|z| !z.is_finite()) {
                    return Err(BetheError::ParameterDomain("non-finite inhomogeneity".into()));
                }
                m
            }
            None => vec![model.regular_point(); length],
        };
        Ok(ChainContext { model, length, mus })
    }

    /// The weight model.
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Number of local states N.
    pub fn n(&self) -> usize {
        self.model.n()
    }

    /// Chain length L.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Hilbert-space dimension N^L.
    pub fn dim(&self) -> usize {
        self.n().pow(self.length as u32)
    }

    /// Inhomogeneities μ_1 … μ_L.
    pub fn inhomogeneities(&self) -> &[C64] {
        &self.mus
    }

    /// Largest particle number with a nonempty sector, `(N-1)L`.
    pub fn max_particles(&self) -> usize {
        (self.n() - 1) * self.length
    }

    /// Evaluates every site weight at spectral parameter λ.
    pub fn monodromy(&self, lambda: C64) -> Result<Monodromy> {
        let sites = self.mus.iter().map(|&mu| self.model.eval_r(lambda, mu)).collect::<Result<_>>()?;
        Ok(Monodromy { n: self.n(), length: self.length, sites })
    }

    /// Monodromy element `T_{a,b}(λ)`, dense up to [`DENSE_LIMIT`] and matrix-free above.
    pub fn monodromy_element(&self, lambda: C64, a: usize, b: usize) -> Result<ChainOperator> {
        let n = self.n();
        if a < 1 || b < 1 || a > n || b > n {
            return Err(BetheError::IndexOutOfRange(format!("T_({a},{b}) with N = {n}")));
        }
        let mono = self.monodromy(lambda)?;
        let dim = self.dim();
        let sector_shift = b as i64 - a as i64;
        let repr = if dim <= DENSE_LIMIT {
            OperatorRepr::Dense(mono.dense_element(a, b)?)
        } else {
            OperatorRepr::MatrixFree(Arc::new(move |v| mono.apply(a, b, v)))
        };
        Ok(ChainOperator { dim, sector_shift, repr })
    }

    /// Transfer matrix `T(λ) = Σ_a T_{a,a}(λ)`.
    pub fn transfer_matrix(&self, lambda: C64) -> Result<ChainOperator> {
        let mono = self.monodromy(lambda)?;
        let dim = self.dim();
        let repr = if dim <= DENSE_LIMIT {
            OperatorRepr::Dense(mono.dense_transfer()?)
        } else {
            OperatorRepr::MatrixFree(Arc::new(move |v| mono.apply_transfer(v)))
        };
        Ok(ChainOperator { dim, sector_shift: 0, repr })
    }

    /// Vacuum weight `w_a(λ) = Π_i R(λ, μ_i)_{a,1}^{a,1}`.
    pub fn vacuum_weight(&self, lambda: C64, a: usize) -> Result<C64> {
        let n = self.n();
        if a < 1 || a > n {
            return Err(BetheError::IndexOutOfRange(format!("w_{a} with N = {n}")));
        }
        let mut w = ONE;
        for &mu in &self.mus {
            w *= self.model.eval_r(lambda, mu)?.get(a as i64, 1, a as i64, 1);
        }
        Ok(w)
    }

    /// Reference state of this chain.
    pub fn reference_state(&self) -> StateVector {
        reference_state(self.n(), self.length)
    }

    /// Total spin operator of this chain.
    pub fn spin_z_total(&self) -> ChainOperator {
        spin_z_total(self.n(), self.length)
    }

    /// Basis indices of sector `n` in increasing order.
    pub fn sector_indices(&self, particles: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| particle_number(i, self.n(), self.length) == particles).collect()
    }

    /// Particle number of a vector, if it lies in a single sector.
    pub fn sector_of(&self, v: &DVector<C64>) -> Option<usize> {
        sector_of(v, self.n(), self.length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::ModelSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ctx(n: usize, l: usize) -> ChainContext {
        let model = if n == 2 {
            ModelSpec::six_vertex(c(0.6, 0.2)).unwrap()
        } else {
            ModelSpec::higher_spin_xxz(n, c(0.6, 0.2)).unwrap()
        };
        let mus = (0..l).map(|i| c(0.1 * i as f64, -0.05 * i as f64)).collect();
        ChainContext::new(model, l, Some(mus)).unwrap()
    }

    #[test]
    fn reference_state_small() {
        let v = reference_state(2, 2);
        assert_eq!(v.amplitudes.as_slice(), &[ONE, ZERO, ZERO, ZERO]);
    }

    #[test]
    fn spin_z_single_site() {
        let s = spin_z_total(2, 1).to_dense().unwrap();
        assert_eq!(s[(0, 0)], c(0.5, 0.0));
        assert_eq!(s[(1, 1)], c(-0.5, 0.0));
    }

    #[test]
    fn single_site_element_reads_weights() {
        let cx = ctx(3, 1);
        let lam = c(0.4, 0.1);
        let w = cx.model().eval_r(lam, cx.inhomogeneities()[0]).unwrap();
        for a in 1..=3 {
            for cc in 1..=3 {
                let t = cx.monodromy_element(lam, a, cc).unwrap().to_dense().unwrap();
                for b in 1..=3 {
                    for d in 1..=3 {
                        assert_eq!(t[(b - 1, d - 1)], w.get(a as i64, b as i64, cc as i64, d as i64));
                    }
                }
            }
        }
    }

    #[test]
    fn dense_and_matrix_free_agree() {
        let cx = ctx(3, 3);
        let lam = c(0.3, -0.2);
        let mono = cx.monodromy(lam).unwrap();
        let v = DVector::from_fn(cx.dim(), |i, _| c((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
        for a in 1..=3 {
            for b in 1..=3 {
                let d = mono.dense_element(a, b).unwrap();
                assert!((&d * &v - mono.apply(a, b, &v)).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn lower_triangular_elements_kill_vacuum() {
        let cx = ctx(3, 3);
        let v = cx.reference_state().amplitudes;
        let mono = cx.monodromy(c(0.2, 0.3)).unwrap();
        for a in 1..=3 {
            for b in 1..a {
                assert!(mono.apply(a, b, &v).iter().all(|z| *z == ZERO));
            }
            let w = cx.vacuum_weight(c(0.2, 0.3), a).unwrap();
            assert!((mono.apply(a, a, &v)[0] - w).norm() < 1e-13);
        }
    }

    #[test]
    fn sector_shift_matches_spin_commutator() {
        let cx = ctx(3, 2);
        let s = cx.spin_z_total().to_dense().unwrap();
        for a in 1..=3 {
            for b in 1..=3 {
                let t = cx.monodromy_element(c(0.3, 0.1), a, b).unwrap();
                let m = t.to_dense().unwrap();
                let comm = &m * &s - &s * &m;
                let expect = &m * C64::new((b as f64) - (a as f64), 0.0);
                assert!((comm - expect).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn transfer_matrices_commute() {
        let cx = ctx(3, 3);
        let t1 = cx.transfer_matrix(c(0.3, 0.1)).unwrap().to_dense().unwrap();
        let t2 = cx.transfer_matrix(c(-0.5, 0.4)).unwrap().to_dense().unwrap();
        let comm = &t1 * &t2 - &t2 * &t1;
        assert!(comm.camax() < 1e-10 * t1.camax() * t2.camax());
    }

    #[test]
    fn lax_at_coincidence_is_permutation() {
        let m = ModelSpec::six_vertex(c(0.6, 0.0)).unwrap();
        let l = lax(&m, c(0.2, 0.1), c(0.2, 0.1)).unwrap();
        assert!((l - crate::weights::permutation_matrix(2)).camax() < 1e-12);
    }
}
