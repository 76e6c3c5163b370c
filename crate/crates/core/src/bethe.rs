//! Bethe vectors, Bethe equations, root finding, eigenvalues and the
//! off-shell action of the diagonal monodromy elements.
//!
//! Roots are identified by their position in the input slice; that label
//! orders the θ_< factors of the recurrences.

use std::collections::HashMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::amplitudes::{check_distinct, Amplitudes};
use crate::chain::{ChainContext, Monodromy, StateVector};
use crate::error::{BetheError, Result};
use crate::linalg::{max_abs_slice, C64, ONE, ZERO};

/// How the trailing T₁₁(λ_j) factors of the vector recurrence are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrailingMode {
    /// Multiply by the vacuum weight w₁(λ_j), valid because the factors act on |0⟩.
    #[default]
    Scalar,
    /// Apply T₁₁(λ_j) as a chain operator.
    Operator,
}

/// A Bethe vector together with its roots and particle number.
#[derive(Debug, Clone, PartialEq)]
pub struct BetheState {
    pub roots: Vec<C64>,
    pub vector: StateVector,
    pub sector: usize,
}

/// One unwanted term of the off-shell action of T_{a,a}(λ).
#[derive(Debug, Clone, PartialEq)]
pub struct OffshellTerm {
    /// Diagonal index `a` of the acting operator.
    pub diag: usize,
    /// Spin `t` carried away from the state.
    pub t: usize,
    /// Number of roots taken with a w₂ weight.
    pub p: usize,
    /// Index pair `(a-p, a+t-p)` of the operator T(λ) in the term.
    pub operator: (usize, usize),
    /// Root labels carrying a w₁ factor.
    pub first_group: Vec<usize>,
    /// Root labels carrying a w₂ factor.
    pub second_group: Vec<usize>,
    /// Root labels of the remaining vector φ_{n-t}.
    pub remaining: Vec<usize>,
    /// Scalar coefficient, including the overall minus sign.
    pub coefficient: C64,
    /// `coefficient · T_{a-p,a+t-p}(λ) φ_{n-t}(remaining)|0⟩`.
    pub contribution: DVector<C64>,
}

/// Wanted part and unwanted terms of a diagonal action on |Φ_n⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct OffshellExpansion {
    /// Wanted vector (Λ-proportional part).
    pub wanted: DVector<C64>,
    /// Unwanted terms in enumeration order.
    pub unwanted: Vec<OffshellTerm>,
}

impl OffshellExpansion {
    /// Sum of all unwanted contributions.
    pub fn unwanted_sum(&self) -> DVector<C64> {
        let dim = self.wanted.len();
        self.unwanted.iter().fold(DVector::zeros(dim), |acc, t| acc + &t.contribution)
    }

    /// Wanted part plus all unwanted contributions.
    pub fn total(&self) -> DVector<C64> {
        &self.wanted + self.unwanted_sum()
    }
}

/// Newton solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Required max-abs residual of the Bethe equations.
    pub tol: f64,
    /// Newton iterations per seed.
    pub max_iter: usize,
    /// Number of generated seeds when none are supplied.
    pub seeds: usize,
    /// Seed of the ChaCha generator used for seeding.
    pub rng_seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-12, max_iter: 100, seeds: 50, rng_seed: 42 }
    }
}

/// Converged solution of the Bethe equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSet {
    /// Roots in canonical order, each as `(re, im)`.
    #[serde(serialize_with = "serialize_points")]
    pub roots: Vec<C64>,
    /// Max-abs Bethe-equation residual at the roots.
    pub residual: f64,
}

fn serialize_points<S: serde::Serializer>(pts: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(pts.len()))?;
    for z in pts {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

struct VectorBuilder<'a, 'm> {
    ctx: &'a ChainContext,
    amp: &'a Amplitudes<'m>,
    roots: &'a [C64],
    monodromies: Vec<Monodromy>,
    w1: Vec<C64>,
    memo: HashMap<Vec<usize>, DVector<C64>>,
}

impl<'a, 'm> VectorBuilder<'a, 'm> {
    fn new(ctx: &'a ChainContext, amp: &'a Amplitudes<'m>, roots: &'a [C64]) -> Result<Self> {
        let monodromies = roots.iter().map(|&x| ctx.monodromy(x)).collect::<Result<Vec<_>>>()?;
        let w1 = roots.iter().map(|&x| ctx.vacuum_weight(x, 1)).collect::<Result<Vec<_>>>()?;
        Ok(VectorBuilder { ctx, amp, roots, monodromies, w1, memo: HashMap::new() })
    }

    /// Coefficient of the ē-th branch with head `l1`, chosen labels `j` and remaining labels `k`.
    fn branch_coefficient(&self, l1: usize, j: &[usize], k: &[usize]) -> Result<C64> {
        let chosen: Vec<(usize, C64)> = j.iter().map(|&i| (i, self.roots[i])).collect();
        let mut coef = self.amp.f_indexed(j.len(), j.len(), 2, self.roots[l1], &chosen)?;
        for &k1 in j {
            for &k2 in k {
                let (x1, x2) = (self.roots[k1], self.roots[k2]);
                coef *= self.amp.ratio11(x2, x1)? * self.amp.theta_less(x2, x1, k2, k1)?;
            }
        }
        Ok(coef)
    }

    fn branches(&self, labels: &[usize]) -> Vec<(usize, Vec<usize>, Vec<usize>)> {
        let n = labels.len();
        let rest = &labels[1..];
        let mut out = Vec::new();
        for e in 1..=n.min(self.ctx.n() - 1) {
            for j in rest.iter().copied().combinations(e - 1) {
                let k: Vec<usize> = rest.iter().copied().filter(|x| !j.contains(x)).collect();
                out.push((e, j, k));
            }
        }
        out
    }

    /// φ(labels) applied to |0⟩ with scalar trailing factors, memoized per label list.
    fn on_vacuum(&mut self, labels: &[usize]) -> Result<DVector<C64>> {
        if labels.is_empty() {
            return Ok(self.ctx.reference_state().amplitudes);
        }
        if let Some(v) = self.memo.get(labels) {
            return Ok(v.clone());
        }
        let l1 = labels[0];
        let mut out = DVector::zeros(self.ctx.dim());
        for (e, j, k) in self.branches(labels) {
            let mut coef = self.branch_coefficient(l1, &j, &k)?;
            for &i in &j {
                coef *= self.w1[i];
            }
            let inner = self.on_vacuum(&k)?;
            out += self.monodromies[l1].apply(1, 1 + e, &inner) * coef;
        }
        self.memo.insert(labels.to_vec(), out.clone());
        Ok(out)
    }

    /// φ(labels) applied to `v` with the trailing factors applied as operators.
    fn with_operators(&self, labels: &[usize], v: &DVector<C64>) -> Result<DVector<C64>> {
        if labels.is_empty() {
            return Ok(v.clone());
        }
        let l1 = labels[0];
        let mut out = DVector::zeros(v.len());
        for (e, j, k) in self.branches(labels) {
            let coef = self.branch_coefficient(l1, &j, &k)?;
            let mut w = v.clone();
            for &i in &j {
                w = self.monodromies[i].apply(1, 1, &w);
            }
            let inner = self.with_operators(&k, &w)?;
            out += self.monodromies[l1].apply(1, 1 + e, &inner) * coef;
        }
        Ok(out)
    }
}

fn check_sector(ctx: &ChainContext, n: usize) -> Result<()> {
    if n > ctx.max_particles() {
        return Err(BetheError::EmptySector { n, states: ctx.n(), length: ctx.length() });
    }
    Ok(())
}

/// Builds the unnormalized Bethe vector φ_n(λ₁,…,λ_n)|0⟩.
pub fn build_bethe_vector(ctx: &ChainContext, amp: &Amplitudes<'_>, roots: &[C64]) -> Result<BetheState> {
    build_bethe_vector_with(ctx, amp, roots, TrailingMode::Scalar)
}

/// Builds the Bethe vector with an explicit choice of trailing-factor evaluation.
pub fn build_bethe_vector_with(
    ctx: &ChainContext,
    amp: &Amplitudes<'_>,
    roots: &[C64],
    mode: TrailingMode,
) -> Result<BetheState> {
    check_sector(ctx, roots.len())?;
    check_distinct(roots)?;
    let labels: Vec<usize> = (0..roots.len()).collect();
    let mut builder = VectorBuilder::new(ctx, amp, roots)?;
    let amplitudes = match mode {
        TrailingMode::Scalar => builder.on_vacuum(&labels)?,
        TrailingMode::Operator => builder.with_operators(&labels, &ctx.reference_state().amplitudes)?,
    };
    let n = roots.len();
    Ok(BetheState { roots: roots.to_vec(), vector: StateVector { amplitudes, sector: Some(n) }, sector: n })
}

/// Residual of the j-th Bethe equation (1-based `j`).
pub fn bae_residual(ctx: &ChainContext, amp: &Amplitudes<'_>, roots: &[C64], j: usize) -> Result<C64> {
    if j == 0 || j > roots.len() {
        return Err(BetheError::IndexOutOfRange(format!("equation {j} of {}", roots.len())));
    }
    let xj = roots[j - 1];
    let mut lhs = crate::linalg::div(ctx.vacuum_weight(xj, 1)?, ctx.vacuum_weight(xj, 2)?, "w1/w2")?;
    for (i, &xi) in roots.iter().enumerate() {
        if i + 1 == j {
            continue;
        }
        let factor = amp.theta(xj, xi)? * amp.ratio11(xj, xi)? / amp.ratio11(xi, xj)?;
        lhs = crate::linalg::div(lhs, factor, "Bethe equation")?;
    }
    Ok(lhs - ONE)
}

/// Residuals of all Bethe equations.
pub fn bae_residuals(ctx: &ChainContext, amp: &Amplitudes<'_>, roots: &[C64]) -> Result<Vec<C64>> {
    (1..=roots.len()).map(|j| bae_residual(ctx, amp, roots, j)).collect()
}

/// Transfer-matrix eigenvalue Λ_n(λ) = Σ_a w_a(λ) Π_i P_a(λ, λ_i).
pub fn eigenvalue(ctx: &ChainContext, amp: &Amplitudes<'_>, lambda: C64, roots: &[C64]) -> Result<C64> {
    let mut total = ZERO;
    for a in 1..=ctx.n() {
        let mut term = ctx.vacuum_weight(lambda, a)?;
        for &x in roots {
            term *= amp.p(a, lambda, x)?;
        }
        total += term;
    }
    Ok(total)
}

/// Predicted decomposition of T_{a,a}(λ)|Φ_n⟩ into its wanted part and unwanted terms.
pub fn offshell_expansion_diag(
    ctx: &ChainContext,
    amp: &Amplitudes<'_>,
    a: usize,
    lambda: C64,
    roots: &[C64],
) -> Result<OffshellExpansion> {
    let nstates = ctx.n();
    if a == 0 || a > nstates {
        return Err(BetheError::IndexOutOfRange(format!("diagonal index {a} with N = {nstates}")));
    }
    check_sector(ctx, roots.len())?;
    check_distinct(roots)?;
    let n = roots.len();
    let mut builder = VectorBuilder::new(ctx, amp, roots)?;
    let all: Vec<usize> = (0..n).collect();
    let phi = builder.on_vacuum(&all)?;
    let mut factor = ctx.vacuum_weight(lambda, a)?;
    for &x in roots {
        factor *= amp.p(a, lambda, x)?;
    }
    let wanted = &phi * factor;
    let w2: Vec<C64> = roots.iter().map(|&x| ctx.vacuum_weight(x, 2)).collect::<Result<_>>()?;
    let mono = ctx.monodromy(lambda)?;
    let mut unwanted = Vec::new();
    for t in 1..=n {
        let p_lo = (a + t).saturating_sub(nstates);
        let p_hi = (a - 1).min(t);
        for p in p_lo..=p_hi {
            for g1 in all.iter().copied().combinations(t - p) {
                let pool: Vec<usize> = all.iter().copied().filter(|k| !g1.contains(k)).collect();
                for g2 in pool.iter().copied().combinations(p) {
                    let rest: Vec<usize> = pool.iter().copied().filter(|k| !g2.contains(k)).collect();
                    let js: Vec<(usize, C64)> = g1.iter().chain(g2.iter()).map(|&k| (k, roots[k])).collect();
                    let mut coef = amp.f_indexed(t - p, t, a - p, lambda, &js)?;
                    for &k in &g1 {
                        coef *= builder.w1[k];
                        for &i in &rest {
                            coef *= amp.ratio11(roots[i], roots[k])? * amp.theta_less(roots[i], roots[k], i, k)?;
                        }
                    }
                    for &k in &g2 {
                        coef *= w2[k];
                        for &i in &rest {
                            coef *= amp.ratio11(roots[k], roots[i])? * amp.theta_less(roots[k], roots[i], k, i)?;
                        }
                    }
                    for &k in &g1 {
                        for &l in &g2 {
                            coef *= amp.theta_less(roots[l], roots[k], l, k)?;
                        }
                    }
                    let coefficient = -coef;
                    let inner = builder.on_vacuum(&rest)?;
                    let op = (a - p, a + t - p);
                    let contribution = mono.apply(op.0, op.1, &inner) * coefficient;
                    unwanted.push(OffshellTerm {
                        diag: a,
                        t,
                        p,
                        operator: op,
                        first_group: g1.clone(),
                        second_group: g2,
                        remaining: rest,
                        coefficient,
                        contribution,
                    });
                }
            }
        }
    }
    Ok(OffshellExpansion { wanted, unwanted })
}

/// Predicted decomposition of T(λ)|Φ_n⟩: wanted part Λ_n(λ)|Φ_n⟩ and the unwanted
/// terms of every diagonal index, ordered by `a` and then by `(t, p, groups)`.
pub fn offshell_expansion(
    ctx: &ChainContext,
    amp: &Amplitudes<'_>,
    lambda: C64,
    roots: &[C64],
) -> Result<OffshellExpansion> {
    let mut wanted = DVector::zeros(ctx.dim());
    let mut unwanted = Vec::new();
    for a in 1..=ctx.n() {
        let part = offshell_expansion_diag(ctx, amp, a, lambda, roots)?;
        wanted += part.wanted;
        unwanted.extend(part.unwanted);
    }
    Ok(OffshellExpansion { wanted, unwanted })
}

/// Solves the Bethe equations for `n` roots by damped Newton iteration from
/// many seeds; converged sets are deduplicated and sorted canonically.
pub fn solve_bae(
    ctx: &ChainContext,
    n: usize,
    seeds: Option<&[Vec<C64>]>,
    opts: &SolveOptions,
) -> Result<Vec<RootSet>> {
    if !(opts.tol > 0.0) {
        return Err(BetheError::InvalidOption(format!("tolerance {} must be positive", opts.tol)));
    }
    check_sector(ctx, n)?;
    if n == 0 {
        return Ok(vec![RootSet { roots: vec![], residual: 0.0 }]);
    }
    let generated;
    let seed_list: &[Vec<C64>] = match seeds {
        Some(s) => {
            if let Some(bad) = s.iter().find(|r| r.len() != n) {
                return Err(BetheError::InvalidOption(format!("seed with {} roots for n = {n}", bad.len())));
            }
            s
        }
        None => {
            generated = generate_seeds(ctx, n, opts.seeds, opts.rng_seed);
            &generated
        }
    };
    let outcomes: Vec<std::result::Result<RootSet, NewtonFailure>> =
        seed_list.par_iter().map(|seed| newton(ctx, seed, opts)).collect();
    let mut found: Vec<RootSet> = Vec::new();
    let mut best = f64::INFINITY;
    let mut all_singular = true;
    for outcome in outcomes {
        match outcome {
            Ok(set) => {
                all_singular = false;
                if !found.iter().any(|f| same_set(&f.roots, &set.roots)) {
                    found.push(set);
                }
            }
            Err(NewtonFailure::Singular) => {}
            Err(NewtonFailure::Stalled(r)) => {
                all_singular = false;
                best = best.min(r);
            }
        }
    }
    if found.is_empty() {
        if all_singular {
            return Err(BetheError::SingularJacobian);
        }
        return Err(BetheError::NoConvergence { best_residual: best });
    }
    found.sort_by(|x, y| compare_sets(&x.roots, &y.roots));
    Ok(found)
}

/// Relative size below which a Bethe vector counts as vanishing.
pub const VANISHING_VECTOR: f64 = 1e-10;

/// Relative size of R(λ_i,λ_j)[2,1;2,1] below which two roots count as equivalent.
pub const EQUIVALENT_ROOTS: f64 = 1e-8;

/// True when no two roots sit at a regular point of the R-matrix and the
/// Bethe vector does not vanish relative to the product of the one-particle
/// vectors T_{1,2}(λ_i)|0⟩.
pub fn is_physical(ctx: &ChainContext, amp: &Amplitudes<'_>, roots: &[C64]) -> Result<bool> {
    for &x in roots {
        if at_singular_point(ctx, x) {
            return Ok(false);
        }
    }
    for (i, &x) in roots.iter().enumerate() {
        for &y in &roots[i + 1..] {
            for (p, q) in [(x, y), (y, x)] {
                let w = amp.weights(p, q)?;
                if w.get(2, 1, 2, 1).norm() < EQUIVALENT_ROOTS * w.max_abs() {
                    return Ok(false);
                }
            }
        }
    }
    let state = match build_bethe_vector(ctx, amp, roots) {
        Ok(s) => s,
        Err(BetheError::Singularity(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    let vac = ctx.reference_state().amplitudes;
    let mut scale = 1.0;
    for &x in roots {
        scale *= ctx.monodromy(x)?.apply(1, 2, &vac).camax();
    }
    Ok(state.vector.max_abs() > VANISHING_VECTOR * scale)
}

/// True when some vacuum weight at `x` is undefined or changes by more than
/// 10% under a shift of relative size 1e-6, which marks a root sitting within
/// about 1e-5 of a pole or zero of that weight.
fn at_singular_point(ctx: &ChainContext, x: C64) -> bool {
    let h = 1e-6 * x.norm().max(1.0);
    (1..=ctx.n()).any(|a| match (ctx.vacuum_weight(x, a), ctx.vacuum_weight(x + h, a)) {
        (Ok(w0), Ok(w1)) if w0.is_finite() && w1.is_finite() => {
            let m = w0.norm().max(w1.norm());
            m > 0.0 && (w1 - w0).norm() > 0.1 * m
        }
        _ => true,
    })
}

/// Keeps the root sets whose Bethe vectors are genuine eigenvectors.
pub fn physical_solutions(ctx: &ChainContext, sets: Vec<RootSet>) -> Result<Vec<RootSet>> {
    let amp = Amplitudes::new(ctx.model());
    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        if is_physical(ctx, &amp, &set.roots)? {
            out.push(set);
        }
        amp.clear_cache();
    }
    Ok(out)
}

/// Modulus bound on the vacuum weights at a regular probe point.
pub const PROBE_WEIGHT_BOUND: f64 = 1e3;

/// `count` spectral parameters drawn uniformly from Re ∈ [−1, 1], Im ∈ [−0.5, 0.5],
/// keeping only points where every vacuum weight is finite and below
/// [`PROBE_WEIGHT_BOUND`] in modulus, so that the points stay clear of weight poles.
pub fn regular_spectral_points(ctx: &ChainContext, count: usize, rng_seed: u64) -> Result<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(count);
    let mut drawn = 0usize;
    while out.len() < count {
        if drawn >= 100 * count.max(1) {
            return Err(BetheError::DegenerateParameters { skipped: drawn - out.len(), total: drawn });
        }
        drawn += 1;
        let x = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
        let regular = (1..=ctx.n()).all(|a| {
            ctx.vacuum_weight(x, a).map_or(false, |w| w.is_finite() && w.norm() < PROBE_WEIGHT_BOUND)
        });
        if regular {
            out.push(x);
        }
    }
    Ok(out)
}

/// Seeds drawn uniformly from the model's root window.
pub fn generate_seeds(ctx: &ChainContext, n: usize, count: usize, rng_seed: u64) -> Vec<Vec<C64>> {
    let (center, half_re, half_im) = ctx.model().seed_window();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ ((n as u64) << 32));
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| center + C64::new(rng.gen_range(-half_re..half_re), rng.gen_range(-half_im..half_im)))
                .collect()
        })
        .collect()
}

enum NewtonFailure {
    Singular,
    Stalled(f64),
}

fn residual_vector(ctx: &ChainContext, amp: &Amplitudes<'_>, x: &[C64]) -> Option<DVector<C64>> {
    if check_distinct(x).is_err() || x.iter().any(|z| !z.is_finite()) {
        return None;
    }
    let r = bae_residuals(ctx, amp, x).ok()?;
    if r.iter().all(|z| z.is_finite()) {
        Some(DVector::from_vec(r))
    } else {
        None
    }
}

fn newton(ctx: &ChainContext, seed: &[C64], opts: &SolveOptions) -> std::result::Result<RootSet, NewtonFailure> {
    let amp = Amplitudes::new(ctx.model());
    let n = seed.len();
    let mut x = seed.to_vec();
    let mut f = residual_vector(ctx, &amp, &x).ok_or(NewtonFailure::Stalled(f64::INFINITY))?;
    let mut fnorm = f.camax();
    for _ in 0..opts.max_iter {
        if fnorm < opts.tol {
            break;
        }
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-7 * x[k].norm().max(1.0);
            let mut xp = x.clone();
            xp[k] += h;
            let fp = residual_vector(ctx, &amp, &xp).ok_or(NewtonFailure::Singular)?;
            jac.set_column(k, &((fp - &f) / C64::new(h, 0.0)));
        }
        let step = crate::linalg::solve(&jac, &(-&f)).map_err(|_| NewtonFailure::Singular)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<C64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + si * alpha).collect();
            if let Some(ft) = residual_vector(ctx, &amp, &trial) {
                let tn = ft.camax();
                if tn < fnorm {
                    x = trial;
                    f = ft;
                    fnorm = tn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if fnorm < opts.tol && x.iter().all(|z| z.norm() < 1e6) {
        x.sort_by(|a, b| compare_points(*a, *b));
        Ok(RootSet { roots: x, residual: fnorm })
    } else {
        Err(NewtonFailure::Stalled(fnorm))
    }
}

fn compare_points(a: C64, b: C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn compare_sets(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = compare_points(*x, *y);
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

fn same_set(a: &[C64], b: &[C64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-6)
}

/// ‖T(λ)v − Λ_n(λ)v‖_max / ‖v‖_max for the Bethe vector of `roots`.
pub fn eigenstate_residual(ctx: &ChainContext, amp: &Amplitudes<'_>, lambda: C64, roots: &[C64]) -> Result<f64> {
    let state = build_bethe_vector(ctx, amp, roots)?;
    let v = &state.vector.amplitudes;
    let scale = max_abs_slice(v.as_slice());
    if scale == 0.0 {
        return Err(BetheError::Singularity("Bethe vector vanishes".into()));
    }
    let lam = eigenvalue(ctx, amp, lambda, roots)?;
    let tv = ctx.monodromy(lambda)?.apply_transfer(v);
    Ok((tv - v * lam).camax() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::ModelSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn spin1_chain(length: usize) -> ChainContext {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        ChainContext::new(model, length, Some(vec![c(0.05, 0.02), c(-0.1, 0.03), c(0.12, -0.04)][..length].to_vec()))
            .unwrap()
    }

    #[test]
    fn low_particle_vectors() {
        let ctx = spin1_chain(3);
        let amp = Amplitudes::new(ctx.model());
        let s0 = build_bethe_vector(&ctx, &amp, &[]).unwrap();
        assert_eq!(s0.vector.amplitudes, ctx.reference_state().amplitudes);
        let l = [c(0.2, 0.1), c(-0.3, 0.2)];
        let vac = ctx.reference_state().amplitudes;
        let m1 = ctx.monodromy(l[0]).unwrap();
        let m2 = ctx.monodromy(l[1]).unwrap();
        let s1 = build_bethe_vector(&ctx, &amp, &l[..1]).unwrap();
        assert!((s1.vector.amplitudes.clone() - m1.apply(1, 2, &vac)).camax() < 1e-14);
        let s2 = build_bethe_vector(&ctx, &amp, &l).unwrap();
        let f = amp.f(1, 1, 2, l[0], &l[1..]).unwrap();
        let expect = m1.apply(1, 2, &m2.apply(1, 2, &vac)) + m1.apply(1, 3, &vac) * (f * ctx.vacuum_weight(l[1], 1).unwrap());
        assert!((s2.vector.amplitudes - expect).camax() < 1e-12);
    }

    #[test]
    fn trailing_modes_agree() {
        let ctx = spin1_chain(3);
        let amp = Amplitudes::new(ctx.model());
        let l = [c(0.2, 0.1), c(-0.3, 0.2), c(0.5, -0.1)];
        let a = build_bethe_vector_with(&ctx, &amp, &l, TrailingMode::Scalar).unwrap();
        let b = build_bethe_vector_with(&ctx, &amp, &l, TrailingMode::Operator).unwrap();
        let scale = a.vector.max_abs();
        assert!((a.vector.amplitudes - b.vector.amplitudes).camax() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn vectors_live_in_their_sector() {
        let ctx = spin1_chain(3);
        let amp = Amplitudes::new(ctx.model());
        let l = [c(0.2, 0.1), c(-0.3, 0.2), c(0.5, -0.1)];
        let s = build_bethe_vector(&ctx, &amp, &l).unwrap();
        assert_eq!(ctx.sector_of(&s.vector.amplitudes), Some(3));
    }

    #[test]
    fn offshell_reproduces_each_diagonal_action() {
        let ctx = spin1_chain(3);
        let amp = Amplitudes::new(ctx.model());
        let l = [c(0.2, 0.1), c(-0.3, 0.2), c(0.5, -0.1)];
        let lambda = c(0.35, -0.15);
        let mono = ctx.monodromy(lambda).unwrap();
        for n in 1..=3 {
            let phi = build_bethe_vector(&ctx, &amp, &l[..n]).unwrap().vector.amplitudes;
            for a in 1..=3 {
                let exp = offshell_expansion_diag(&ctx, &amp, a, lambda, &l[..n]).unwrap();
                let direct = mono.apply(a, a, &phi);
                let err = (direct.clone() - exp.total()).camax() / direct.camax();
                assert!(err < 1e-8, "n={n} a={a}: {err}");
            }
        }
    }

    #[test]
    fn one_particle_residual_form() {
        let ctx = spin1_chain(2);
        let amp = Amplitudes::new(ctx.model());
        let x = c(0.3, 0.2);
        let r = bae_residual(&ctx, &amp, &[x], 1).unwrap();
        let expect = ctx.vacuum_weight(x, 1).unwrap() / ctx.vacuum_weight(x, 2).unwrap() - ONE;
        assert!((r - expect).norm() < 1e-14);
    }

    #[test]
    fn empty_root_problem() {
        let ctx = spin1_chain(2);
        let sets = solve_bae(&ctx, 0, None, &SolveOptions::default()).unwrap();
        assert_eq!(sets.len(), 1);
        assert!(sets[0].roots.is_empty());
    }

    #[test]
    fn duplicate_seeds_dedup() {
        let model = ModelSpec::six_vertex(c(0.6, 0.0)).unwrap();
        let ctx = ChainContext::new(model, 2, None).unwrap();
        let first = solve_bae(&ctx, 1, None, &SolveOptions::default()).unwrap();
        let seed = vec![first[0].roots.clone(), first[0].roots.clone()];
        let again = solve_bae(&ctx, 1, Some(&seed), &SolveOptions::default()).unwrap();
        assert_eq!(again.len(), 1);
    }
}
