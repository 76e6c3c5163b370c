//! Scalar amplitudes of the algebraic Bethe ansatz.
//!
//! Every function is a rational expression in the weights `R(x,y)_{a,b}^{c,d}`,
//! written here as `R(x,y)[a,b;c,d]` with the lower indices first. All
//! evaluations go through an [`Amplitudes`] handle, which memoizes weight
//! matrices per evaluation pair and off-shell amplitudes per [`AmplitudeKey`].
//! Cache keys use the exact bit patterns of the spectral parameters, so a
//! cache hit reproduces a recomputation bit for bit.
//!
//! The handle uses interior mutability and is not `Sync`; parallel callers
//! create one handle per task.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::error::{BetheError, Result};
use crate::linalg::{det, div, C64, ONE, ZERO};
use crate::weights::{ModelSpec, WeightMatrix};

/// Smallest admissible distance between two Bethe roots.
pub const MIN_ROOT_DISTANCE: f64 = 1e-8;

/// Family of a cached amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AmplitudeKind {
    F,
    H,
    P,
    Pbar,
    Theta,
    D2,
    D3,
    D4,
    D5,
    G,
}

/// Exact cache key: family, integer indices and bitwise spectral arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AmplitudeKey {
    pub kind: AmplitudeKind,
    pub indices: Vec<i64>,
    pub args: Vec<(u64, u64)>,
}

impl AmplitudeKey {
    /// Builds a key, normalizing negative zero so that `0.0` and `-0.0` coincide.
    pub fn new(kind: AmplitudeKind, indices: Vec<i64>, args: &[C64]) -> Self {
        AmplitudeKey { kind, indices, args: args.iter().map(|&z| point_bits(z)).collect() }
    }
}

fn point_bits(z: C64) -> (u64, u64) {
    ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits())
}

/// Discrete projector `1 - Σ_k δ(i, j_k)`: 0 when `i` is excluded, 1 otherwise.
pub fn projector_delta(i: usize, excluded: &[usize]) -> u8 {
    u8::from(!excluded.contains(&i))
}

/// Rejects root sets containing two roots closer than [`MIN_ROOT_DISTANCE`].
pub fn check_distinct(roots: &[C64]) -> Result<()> {
    for (i, j) in (0..roots.len()).tuple_combinations() {
        if (roots[i] - roots[j]).norm() < MIN_ROOT_DISTANCE {
            return Err(BetheError::Singularity(format!(
                "roots {i} and {j} coincide within {MIN_ROOT_DISTANCE:e}"
            )));
        }
    }
    Ok(())
}

fn out_of_range(what: &str, detail: String) -> BetheError {
    BetheError::IndexOutOfRange(format!("{what}: {detail}"))
}

/// Memoizing evaluator of amplitudes for one model.
pub struct Amplitudes<'m> {
    model: &'m ModelSpec,
    weights: RefCell<HashMap<((u64, u64), (u64, u64)), Rc<WeightMatrix>>>,
    values: RefCell<HashMap<AmplitudeKey, C64>>,
}

impl<'m> Amplitudes<'m> {
    /// Creates an evaluator with empty caches.
    pub fn new(model: &'m ModelSpec) -> Self {
        Amplitudes { model, weights: RefCell::new(HashMap::new()), values: RefCell::new(HashMap::new()) }
    }

    /// Model whose weights are used.
    pub fn model(&self) -> &'m ModelSpec {
        self.model
    }

    /// Number of states per site.
    pub fn n(&self) -> usize {
        self.model.n()
    }

    /// Number of memoized amplitudes.
    pub fn cache_len(&self) -> usize {
        self.values.borrow().len()
    }

    /// Drops all memoized values.
    pub fn clear_cache(&self) {
        self.values.borrow_mut().clear();
        self.weights.borrow_mut().clear();
    }

    /// Cached weight matrix R(x, y).
    pub fn weights(&self, x: C64, y: C64) -> Result<Rc<WeightMatrix>> {
        let key = (point_bits(x), point_bits(y));
        if let Some(w) = self.weights.borrow().get(&key) {
            return Ok(Rc::clone(w));
        }
        let w = Rc::new(self.model.eval_r(x, y)?);
        self.weights.borrow_mut().insert(key, Rc::clone(&w));
        Ok(w)
    }

    /// Single weight `R(x,y)[a,b;c,d]`; zero outside the index range or off the ice rule.
    pub fn r(&self, x: C64, y: C64, a: i64, b: i64, c: i64, d: i64) -> Result<C64> {
        Ok(self.weights(x, y)?.get(a, b, c, d))
    }

    /// Ratio `R(x,y)[1,1;1,1] / R(x,y)[2,1;2,1]`.
    pub fn ratio11(&self, x: C64, y: C64) -> Result<C64> {
        let w = self.weights(x, y)?;
        div(w.get(1, 1, 1, 1), w.get(2, 1, 2, 1), "R11/R21 ratio")
    }

    fn memo(&self, key: AmplitudeKey, f: impl FnOnce() -> Result<C64>) -> Result<C64> {
        if let Some(v) = self.values.borrow().get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        self.values.borrow_mut().insert(key, v);
        Ok(v)
    }

    /// Exchange function θ(x, y).
    pub fn theta(&self, x: C64, y: C64) -> Result<C64> {
        self.memo(AmplitudeKey::new(AmplitudeKind::Theta, vec![], &[x, y]), || {
            let w = self.weights(x, y)?;
            if self.n() == 2 {
                return div(w.get(2, 2, 2, 2), w.get(1, 1, 1, 1), "theta");
            }
            let num = w.get(2, 2, 2, 2) * w.get(3, 1, 3, 1) - w.get(2, 2, 3, 1) * w.get(3, 1, 2, 2);
            div(num, w.get(1, 1, 1, 1) * w.get(3, 1, 3, 1), "theta")
        })
    }

    /// Ordered exchange factor: θ(x_i, x_j) when `i < j`, otherwise 1.
    pub fn theta_less(&self, xi: C64, xj: C64, i: usize, j: usize) -> Result<C64> {
        if i < j {
            self.theta(xi, xj)
        } else {
            Ok(ONE)
        }
    }

    /// Determinant ratio D₂^{(a,e)}(λ, μ), `2 ≤ a ≤ N-1`, `0 ≤ e ≤ a-1`.
    pub fn d2(&self, a: usize, e: usize, lambda: C64, mu: C64) -> Result<C64> {
        let n = self.n();
        if a < 2 || a + 1 > n || e + 1 > a {
            return Err(out_of_range("D2", format!("(a, e) = ({a}, {e}) with N = {n}")));
        }
        self.memo(AmplitudeKey::new(AmplitudeKind::D2, vec![a as i64, e as i64], &[lambda, mu]), || {
            let w = self.weights(lambda, mu)?;
            let (a, e) = (a as i64, e as i64);
            let num = w.get(a + 1, 1, a, 2) * w.get(a - e, e + 2, a + 1, 1)
                - w.get(a - e, e + 2, a, 2) * w.get(a + 1, 1, a + 1, 1);
            div(-num, w.get(a, 1, a, 1) * w.get(a + 1, 1, a + 1, 1), "D2")
        })
    }

    /// Determinant ratio D₃^{(a,e)}(λ, μ), `2 ≤ a ≤ N-2`, `0 ≤ e ≤ a-1`.
    pub fn d3(&self, a: usize, e: usize, lambda: C64, mu: C64) -> Result<C64> {
        let n = self.n();
        if a < 2 || a + 2 > n || e + 1 > a {
            return Err(out_of_range("D3", format!("(a, e) = ({a}, {e}) with N = {n}")));
        }
        self.memo(AmplitudeKey::new(AmplitudeKind::D3, vec![a as i64, e as i64], &[lambda, mu]), || {
            let w = self.weights(lambda, mu)?;
            let (a, e) = (a as i64, e as i64);
            let uppers = [(a, 3), (a + 1, 2), (a + 2, 1)];
            let lowers = [(a + 2, 1), (a + 1, 2), (a - e, 3 + e)];
            let m3 = DMatrix::from_fn(3, 3, |r, s| w.get(lowers[s].0, lowers[s].1, uppers[r].0, uppers[r].1));
            let m2 = DMatrix::from_row_slice(
                2,
                2,
                &[
                    w.get(a + 2, 1, a + 1, 2),
                    w.get(a + 1, 2, a + 1, 2),
                    w.get(a + 2, 1, a + 2, 1),
                    w.get(a + 1, 2, a + 2, 1),
                ],
            );
            div(crate::linalg::det_rows(&rows_of(&m3)), w.get(a, 1, a, 1) * det2(&m2), "D3")
        })
    }

    /// Determinant D₄^{(i,b)}(λ, μ) built from R(μ, λ), of size `i-b+1`.
    pub fn d4(&self, i: usize, b: usize, lambda: C64, mu: C64) -> Result<C64> {
        let n = self.n();
        if i > n || b == 0 || b > i + 1 {
            return Err(out_of_range("D4", format!("(i, b) = ({i}, {b}) with N = {n}")));
        }
        self.memo(AmplitudeKey::new(AmplitudeKind::D4, vec![i as i64, b as i64], &[lambda, mu]), || {
            let w = self.weights(mu, lambda)?;
            let size = i + 1 - b;
            let (i, b) = (i as i64, b as i64);
            let m = DMatrix::from_fn(size, size, |r, s| {
                let (r, s) = (r as i64, s as i64);
                w.get(i - r, 1 + r, b + s, i + 1 - b - s)
            });
            Ok(plain_det(&m))
        })
    }

    /// Determinant D₅^{(i+2,2)}(λ, μ) built from R(μ, λ), of size `i`, `i+2 ≤ N`.
    pub fn d5(&self, i2: usize, lambda: C64, mu: C64) -> Result<C64> {
        let n = self.n();
        if i2 < 3 || i2 > n {
            return Err(out_of_range("D5", format!("i+2 = {i2} with N = {n}")));
        }
        self.memo(AmplitudeKey::new(AmplitudeKind::D5, vec![i2 as i64], &[lambda, mu]), || {
            let w = self.weights(mu, lambda)?;
            let size = i2 - 2;
            let i = size as i64;
            let m = DMatrix::from_fn(size, size, |r, s| {
                let r = r as i64;
                let (c, d) = if s == 0 { (2, i + 1) } else { (s as i64 + 3, i - s as i64) };
                w.get(i + 2 - r, 1 + r, c, d)
            });
            Ok(plain_det(&m))
        })
    }

    /// Continuation D₄^{(N+1,b)}(λ, λ₁) entering the `a = N-1` identities.
    ///
    /// Size `N-b+1` over R(λ₁, λ); a size-zero determinant equals 1.
    pub fn d4_cont(&self, b: usize, lambda: C64, lambda1: C64) -> Result<C64> {
        let n = self.n();
        if b < 2 || b > n + 1 {
            return Err(out_of_range("D4 continuation", format!("b = {b} with N = {n}")));
        }
        self.memo(
            AmplitudeKey::new(AmplitudeKind::D4, vec![n as i64 + 1, b as i64, 1], &[lambda, lambda1]),
            || {
                let w = self.weights(lambda1, lambda)?;
                let size = n + 1 - b;
                let (nn, b) = (n as i64, b as i64);
                let m = DMatrix::from_fn(size, size, |r, s| {
                    let (r, s) = (r as i64, s as i64);
                    w.get(nn - r, 2 + r, b + s, nn + 2 - b - s)
                });
                let sign = if size % 2 == 0 { ONE } else { -ONE };
                Ok(sign * plain_det(&m))
            },
        )
    }

    /// Continuation D₅^{(N+1,2)}(λ, λ₁): size `N-2` over R(λ₁, λ).
    pub fn d5_cont(&self, lambda: C64, lambda1: C64) -> Result<C64> {
        let n = self.n();
        if n < 3 {
            return Err(out_of_range("D5 continuation", format!("N = {n}")));
        }
        self.memo(AmplitudeKey::new(AmplitudeKind::D5, vec![n as i64 + 1, 1], &[lambda, lambda1]), || {
            let w = self.weights(lambda1, lambda)?;
            let size = n - 2;
            let nn = n as i64;
            let m = DMatrix::from_fn(size, size, |r, s| {
                let r = r as i64;
                let (c, d) = if s == 0 { (2, nn) } else { (s as i64 + 3, nn - 1 - s as i64) };
                w.get(nn - r, 2 + r, c, d)
            });
            let sign = if n % 2 == 0 { ONE } else { -ONE };
            Ok(sign * plain_det(&m))
        })
    }

    /// Eigenvalue factor P_a(λ, μ), `1 ≤ a ≤ N`.
    pub fn p(&self, a: usize, lambda: C64, mu: C64) -> Result<C64> {
        let n = self.n();
        if a == 0 || a > n {
            return Err(out_of_range("P", format!("a = {a} with N = {n}")));
        }
        self.memo(AmplitudeKey::new(AmplitudeKind::P, vec![a as i64], &[lambda, mu]), || {
            if a == 1 {
                self.ratio11(mu, lambda)
            } else if a == n {
                let w = self.weights(lambda, mu)?;
                let nn = n as i64;
                div(w.get(nn, 2, nn, 2), w.get(nn, 1, nn, 1), "P_N")
            } else {
                self.d2(a, 0, lambda, mu)
            }
        })
    }

    /// Two-particle wanted-term factor P̄_a(λ, λ₁, λ₂) from its closed forms (N ≥ 3).
    pub fn pbar(&self, a: usize, lambda: C64, l1: C64, l2: C64) -> Result<C64> {
        let n = self.n();
        if n < 3 || a == 0 || a > n {
            return Err(out_of_range("Pbar", format!("a = {a} with N = {n}")));
        }
        self.memo(AmplitudeKey::new(AmplitudeKind::Pbar, vec![a as i64], &[lambda, l1, l2]), || {
            let x = self.x12(l1, l2)?;
            let nn = n as i64;
            let inner = if a == 1 {
                let w2l = self.weights(l2, lambda)?;
                let w1l = self.weights(l1, lambda)?;
                div(w2l.get(1, 2, 2, 1), w2l.get(2, 1, 2, 1), "Pbar_1")?
                    * div(w1l.get(3, 1, 2, 2), w1l.get(3, 1, 3, 1), "Pbar_1")?
                    + x * div(w1l.get(2, 1, 2, 1), w1l.get(3, 1, 3, 1), "Pbar_1")?
            } else if a == n {
                let wl1 = self.weights(lambda, l1)?;
                let wl2 = self.weights(lambda, l2)?;
                x * div(wl1.get(nn, 3, nn, 3), wl1.get(nn, 2, nn, 2), "Pbar_N")?
                    - div(wl1.get(nn - 1, 3, nn, 2), wl1.get(nn, 2, nn, 2), "Pbar_N")?
                        * div(wl2.get(nn, 1, nn - 1, 2), wl2.get(nn, 1, nn, 1), "Pbar_N")?
            } else if a == n - 1 {
                let wl1 = self.weights(lambda, l1)?;
                let wl2 = self.weights(lambda, l2)?;
                let top = det2_rows(
                    wl1.get(nn, 2, nn - 1, 3),
                    wl1.get(nn, 2, nn, 2),
                    wl1.get(nn - 1, 3, nn - 1, 3),
                    wl1.get(nn - 1, 3, nn, 2),
                );
                let bottom = det2_rows(
                    wl1.get(nn, 1, nn - 1, 2),
                    wl1.get(nn, 1, nn, 1),
                    wl1.get(nn - 1, 2, nn - 1, 2),
                    wl1.get(nn - 1, 2, nn, 1),
                );
                div(wl2.get(nn, 1, nn - 1, 2), wl2.get(nn, 1, nn, 1), "Pbar_{N-1}")?
                    * div(wl1.get(nn - 1, 3, nn, 2), wl1.get(nn, 2, nn, 2), "Pbar_{N-1}")?
                    + x * div(wl1.get(nn, 1, nn, 1), wl1.get(nn, 2, nn, 2), "Pbar_{N-1}")?
                        * div(top, bottom, "Pbar_{N-1}")?
                    - div(self.d2(n - 1, 1, lambda, l1)?, self.d2(n - 1, 0, lambda, l1)?, "Pbar_{N-1}")?
                        * div(wl2.get(nn - 1, 1, nn - 2, 2), wl2.get(nn - 1, 1, nn - 1, 1), "Pbar_{N-1}")?
            } else {
                let wl2 = self.weights(lambda, l2)?;
                let ai = a as i64;
                div(wl2.get(ai + 1, 1, ai, 2), wl2.get(ai + 1, 1, ai + 1, 1), "Pbar_a")?
                    * div(self.d2(a + 1, 1, lambda, l1)?, self.d2(a + 1, 0, lambda, l1)?, "Pbar_a")?
                    + x * div(self.d3(a, 0, lambda, l1)?, self.d2(a, 0, lambda, l1)?, "Pbar_a")?
                    - div(self.d2(a, 1, lambda, l1)?, self.d2(a, 0, lambda, l1)?, "Pbar_a")?
                        * div(wl2.get(ai, 1, ai - 1, 2), wl2.get(ai, 1, ai, 1), "Pbar_a")?
            };
            div(inner, x, "Pbar")
        })
    }

    /// Ratio `X(λ₁,λ₂) = R(λ₁,λ₂)[3,1;2,2] / R(λ₁,λ₂)[3,1;3,1]`.
    pub fn x12(&self, l1: C64, l2: C64) -> Result<C64> {
        let w = self.weights(l1, l2)?;
        div(w.get(3, 1, 2, 2), w.get(3, 1, 3, 1), "X ratio")
    }

    /// Off-shell amplitude ₍c₎F_b^{(a)}(λ; roots) with roots labelled 0, 1, ….
    pub fn f(&self, c: usize, b: usize, a: usize, lambda: C64, roots: &[C64]) -> Result<C64> {
        check_distinct(roots)?;
        let labelled: Vec<(usize, C64)> = roots.iter().copied().enumerate().collect();
        self.f_indexed(c, b, a, lambda, &labelled)
    }

    /// Off-shell amplitude with explicit root labels, which order the θ_< factors.
    pub fn f_indexed(&self, c: usize, b: usize, a: usize, lambda: C64, roots: &[(usize, C64)]) -> Result<C64> {
        let n = self.n();
        if b == 0 {
            return Ok(ONE);
        }
        if b + 1 > n || a == 0 || a + b > n || c > b || roots.len() != b {
            return Err(out_of_range(
                "F",
                format!("(c, b, a) = ({c}, {b}, {a}) with N = {n} and {} roots", roots.len()),
            ));
        }
        let mut indices = vec![c as i64, b as i64, a as i64];
        indices.extend(roots.iter().map(|&(i, _)| i as i64));
        let mut args = vec![lambda];
        args.extend(roots.iter().map(|&(_, x)| x));
        let key = AmplitudeKey::new(AmplitudeKind::F, indices, &args);
        if let Some(v) = self.values.borrow().get(&key) {
            return Ok(*v);
        }
        let v = self.f_compute(c, b, a, lambda, roots)?;
        self.values.borrow_mut().insert(key, v);
        Ok(v)
    }

    fn f_compute(&self, c: usize, b: usize, a: usize, lambda: C64, roots: &[(usize, C64)]) -> Result<C64> {
        let ai = a as i64;
        if b == 1 {
            let w = self.weights(lambda, roots[0].1)?;
            let v = div(w.get(ai + 1, 1, ai, 2), w.get(ai + 1, 1, ai + 1, 1), "F base")?;
            return Ok(if c == 0 { v } else { -v });
        }
        if c > 0 && c < b {
            let mut v = self.f_indexed(0, b - c, a, lambda, &roots[c..])?
                * self.f_indexed(c, c, a + b - c, lambda, &roots[..c])?;
            for i in c..b {
                for j in 0..c {
                    v *= self.ratio11(roots[i].1, roots[j].1)?;
                }
            }
            return Ok(v);
        }
        if c == 0 {
            let l1 = roots[0].1;
            let w = self.weights(lambda, l1)?;
            let rest: Vec<usize> = (1..b).collect();
            let mut total = ZERO;
            for e in 1..=b {
                let ei = e as i64;
                let pre = div(w.get(ai + ei, 1, ai, 1 + ei), w.get(ai + b as i64, 1, ai + b as i64, 1), "F recursion")?;
                if pre == ZERO {
                    continue;
                }
                for j2 in rest.iter().copied().combinations(e - 1) {
                    let j1: Vec<usize> = rest.iter().copied().filter(|k| !j2.contains(k)).collect();
                    let r1: Vec<(usize, C64)> = j1.iter().map(|&k| roots[k]).collect();
                    let r2: Vec<(usize, C64)> = j2.iter().map(|&k| roots[k]).collect();
                    let mut v = self.f_indexed(0, b - e, a + e, lambda, &r1)?;
                    v *= self.f_indexed(e - 1, e - 1, 2, l1, &r2)?;
                    for &(i1, x1) in &r1 {
                        for &(i2, x2) in &r2 {
                            v *= self.ratio11(x1, x2)? * self.theta_less(x1, x2, i1, i2)?;
                        }
                    }
                    total += pre * v;
                }
            }
            return Ok(total);
        }
        let mut total = ZERO;
        for f in 0..b {
            for ls in (0..b).combinations(b - f) {
                let others: Vec<usize> = (0..b).filter(|k| !ls.contains(k)).collect();
                let order: Vec<(usize, C64)> = others.iter().chain(ls.iter()).map(|&k| roots[k]).collect();
                let mut v = self.f_indexed(f, b, a, lambda, &order)?;
                for &s in &ls {
                    for &i in &others {
                        let (is, xs) = roots[s];
                        let (ii, xi) = roots[i];
                        v *= self.theta_less(xi, xs, ii, is)? * self.ratio11(xi, xs)? / self.ratio11(xs, xi)?;
                    }
                }
                total += v;
            }
        }
        Ok(-total)
    }

    /// Two-root amplitudes from their closed forms: ₀F₂ for `1 ≤ a ≤ N-2`,
    /// ₁F₂ in factorized form, ₂F₂ for `a = 1` and `2 ≤ a ≤ N-2`.
    pub fn f2_closed(&self, c: usize, a: usize, lambda: C64, l1: C64, l2: C64) -> Result<C64> {
        let n = self.n();
        if n < 3 || a == 0 || a + 2 > n || c > 2 {
            return Err(out_of_range("closed F2", format!("(c, a) = ({c}, {a}) with N = {n}")));
        }
        check_distinct(&[l1, l2])?;
        let ai = a as i64;
        let wl1 = self.weights(lambda, l1)?;
        let wl2 = self.weights(lambda, l2)?;
        match c {
            0 => {
                let t1 = div(wl1.get(ai + 1, 1, ai, 2), wl1.get(ai + 2, 1, ai + 2, 1), "F20")?
                    * div(wl2.get(ai + 2, 1, ai + 1, 2), wl2.get(ai + 2, 1, ai + 2, 1), "F20")?;
                let t2 = div(wl1.get(ai + 2, 1, ai, 3), wl1.get(ai + 2, 1, ai + 2, 1), "F20")? * self.x12(l1, l2)?;
                Ok(t1 - t2)
            }
            1 => Ok(self.f(0, 1, a, lambda, &[l2])? * self.f(1, 1, a + 1, lambda, &[l1])? * self.ratio11(l2, l1)?),
            _ if a == 1 => {
                let w2l = self.weights(l2, lambda)?;
                let w1l = self.weights(l1, lambda)?;
                Ok(div(w2l.get(1, 2, 2, 1), w2l.get(2, 1, 2, 1), "F22")? * self.d2(2, 1, l1, lambda)?
                    - div(w1l.get(1, 3, 3, 1), w1l.get(3, 1, 3, 1), "F22")? * self.x12(l1, l2)?)
            }
            _ => {
                let top = det2_rows(
                    wl1.get(ai + 2, 1, ai, 3),
                    wl1.get(ai + 1, 2, ai, 3),
                    wl1.get(ai + 2, 1, ai + 1, 2),
                    wl1.get(ai + 1, 2, ai + 1, 2),
                );
                let bottom = self.det_a2(&wl1, ai);
                let first = self.x12(l1, l2)? * div(top, bottom, "F22")?;
                let second = div(self.d2(a, 0, lambda, l1)?, self.d2(a + 1, 0, lambda, l1)?, "F22")?
                    * div(wl2.get(ai + 1, 1, ai, 2), wl2.get(ai + 1, 1, ai + 1, 1), "F22")?
                    * div(wl1.get(ai, 1, ai, 1), wl1.get(ai + 1, 1, ai + 1, 1), "F22")?
                    * div(wl1.get(ai + 2, 1, ai + 1, 2), wl1.get(ai + 2, 1, ai + 2, 1), "F22")?;
                Ok(-(first - second))
            }
        }
    }

    /// `det[[R[a+2,1;a+1,2], R[a+1,2;a+1,2]], [R[a+2,1;a+2,1], R[a+1,2;a+2,1]]]`.
    fn det_a2(&self, w: &WeightMatrix, a: i64) -> C64 {
        det2_rows(w.get(a + 2, 1, a + 1, 2), w.get(a + 1, 2, a + 1, 2), w.get(a + 2, 1, a + 2, 1), w.get(a + 1, 2, a + 2, 1))
    }

    /// Unwanted-term function ₍c₎H_b^{(a)}(λ, λ₁, λ₂ | tag) for `(c, b)` in
    /// `{(1,1), (0,1), (1,2)}`; tag 2 follows from tag 1 by root exchange.
    pub fn h(&self, c: usize, b: usize, a: usize, lambda: C64, l1: C64, l2: C64, tag: u8) -> Result<C64> {
        let n = self.n();
        let valid = match (c, b) {
            (1, 1) | (0, 1) => a >= 1 && a < n,
            (1, 2) => n >= 3 && a >= 1 && a + 2 <= n,
            _ => false,
        };
        if !valid || !(tag == 1 || tag == 2) {
            return Err(out_of_range("H", format!("(c, b, a, tag) = ({c}, {b}, {a}, {tag}) with N = {n}")));
        }
        check_distinct(&[l1, l2])?;
        self.memo(
            AmplitudeKey::new(AmplitudeKind::H, vec![c as i64, b as i64, a as i64, tag as i64], &[lambda, l1, l2]),
            || {
                if tag == 2 {
                    return Ok(self.theta(l1, l2)? * self.h(c, b, a, lambda, l2, l1, 1)?);
                }
                match (c, b) {
                    (1, 1) => Ok(self.ratio11(l2, l1)? * self.f(1, 1, a, lambda, &[l1])?),
                    (0, 1) => Ok(self.p(2, l1, l2)? * self.f(0, 1, a, lambda, &[l1])?),
                    _ => Ok(self.f(1, 1, a + 1, lambda, &[l1])? * self.h(0, 1, a, lambda, l1, l2, 2)?),
                }
            },
        )
    }

    /// Explicit closed forms of the tag-2 functions ₁H₁^{(a)}(…|2), `1 ≤ a ≤ N-2`,
    /// and ₀H₁^{(a)}(…|2), `1 ≤ a ≤ N-1`.
    pub fn h_tag2_closed(&self, c: usize, a: usize, lambda: C64, l1: C64, l2: C64) -> Result<C64> {
        let n = self.n();
        let ai = a as i64;
        match c {
            1 if n >= 3 && a == 1 => {
                let w2l = self.weights(l2, lambda)?;
                let w1l = self.weights(l1, lambda)?;
                let w21 = self.weights(l2, l1)?;
                Ok(div(w2l.get(1, 2, 2, 1), w2l.get(2, 1, 2, 1), "H111|2")? * self.p(2, l1, lambda)?
                    - div(w1l.get(1, 2, 2, 1), w1l.get(2, 1, 2, 1), "H111|2")?
                        * div(w21.get(1, 2, 2, 1), w21.get(2, 1, 2, 1), "H111|2")?
                    - self.x12(l1, l2)? * div(w1l.get(2, 2, 3, 1), w1l.get(3, 1, 3, 1), "H111|2")?)
            }
            1 if a >= 2 && a + 2 <= n => {
                let wl1 = self.weights(lambda, l1)?;
                let wl2 = self.weights(lambda, l2)?;
                let w21 = self.weights(l2, l1)?;
                let top = det2_rows(
                    wl1.get(ai + 2, 1, ai, 3),
                    wl1.get(ai + 1, 2, ai, 3),
                    wl1.get(ai + 2, 1, ai + 2, 1),
                    wl1.get(ai + 1, 2, ai + 2, 1),
                );
                let bracket = div(self.d2(a, 0, lambda, l1)?, self.d2(a + 1, 0, lambda, l1)?, "H11|2")?
                    * div(wl2.get(ai + 1, 1, ai, 2), wl2.get(ai + 1, 1, ai + 1, 1), "H11|2")?
                    * div(wl1.get(ai, 1, ai, 1), wl1.get(ai + 1, 1, ai + 1, 1), "H11|2")?
                    - div(wl1.get(ai + 1, 1, ai, 2), wl1.get(ai + 1, 1, ai + 1, 1), "H11|2")?
                        * div(w21.get(1, 2, 2, 1), w21.get(2, 1, 2, 1), "H11|2")?
                    - self.x12(l1, l2)? * div(top, self.det_a2(&wl1, ai), "H11|2")?;
                Ok(-bracket)
            }
            0 if a >= 1 && a < n => {
                let wl1 = self.weights(lambda, l1)?;
                let wl2 = self.weights(lambda, l2)?;
                let w12 = self.weights(l1, l2)?;
                Ok(div(wl2.get(ai + 1, 1, ai, 2), wl2.get(ai + 1, 1, ai + 1, 1), "H01|2")?
                    * div(wl1.get(ai, 1, ai, 1), wl1.get(ai + 1, 1, ai + 1, 1), "H01|2")?
                    - div(wl1.get(ai + 1, 1, ai, 2), wl1.get(ai + 1, 1, ai + 1, 1), "H01|2")?
                        * div(w12.get(2, 1, 1, 2), w12.get(2, 1, 2, 1), "H01|2")?)
            }
            _ => Err(out_of_range("closed H|2", format!("(c, a) = ({c}, {a}) with N = {n}"))),
        }
    }

    /// Vector coefficient g_ē^{(j₂,…,j_ē)}(λ₁,…,λ_n).
    ///
    /// `j_indices` holds the 1-based labels `j₂ < … < j_ē` drawn from `2..=n`.
    pub fn g_coefficient(&self, ebar: usize, j_indices: &[usize], roots: &[C64]) -> Result<C64> {
        let n = roots.len();
        let ok = ebar >= 1
            && ebar <= n.min(self.n() - 1)
            && j_indices.len() + 1 == ebar
            && j_indices.windows(2).all(|p| p[0] < p[1])
            && j_indices.iter().all(|&j| j >= 2 && j <= n);
        if !ok {
            return Err(out_of_range("g", format!("ebar = {ebar}, j = {j_indices:?}, n = {n}")));
        }
        check_distinct(roots)?;
        let mut idx = vec![ebar as i64];
        idx.extend(j_indices.iter().map(|&j| j as i64));
        self.memo(AmplitudeKey::new(AmplitudeKind::G, idx, roots), || {
            let chosen: Vec<(usize, C64)> = j_indices.iter().map(|&j| (j - 1, roots[j - 1])).collect();
            let mut v = self.f_indexed(ebar - 1, ebar - 1, 2, roots[0], &chosen)?;
            for &(jk, xj) in &chosen {
                for k2 in 2..=n {
                    if j_indices.contains(&k2) {
                        continue;
                    }
                    let xk = roots[k2 - 1];
                    v *= self.ratio11(xk, xj)? * self.theta_less(xk, xj, k2 - 1, jk)?;
                }
            }
            Ok(v)
        })
    }
}

fn det2(m: &DMatrix<C64>) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// `det[[a, b], [c, d]]`.
pub fn det2_rows(a: C64, b: C64, c: C64, d: C64) -> C64 {
    a * d - b * c
}

fn rows_of(m: &DMatrix<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Determinant without a pivot check: closed-form determinants may vanish
/// legitimately, and vanishing denominators are caught at the division.
fn plain_det(m: &DMatrix<C64>) -> C64 {
    if m.nrows() == 0 {
        return ONE;
    }
    det(m).unwrap_or_else(|_| crate::linalg::det_rows(&rows_of(m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn point(rng: &mut ChaCha8Rng) -> C64 {
        c(rng.gen_range(-0.8..0.8), rng.gen_range(-0.5..0.5))
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / a.norm().max(b.norm()).max(1.0)
    }

    #[test]
    fn projector_examples() {
        assert_eq!(projector_delta(1, &[1]), 0);
        assert_eq!(projector_delta(2, &[1, 3]), 1);
        assert_eq!(projector_delta(3, &[2, 3]), 0);
    }

    #[test]
    fn theta_inverse_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [ModelSpec::six_vertex(c(0.6, 0.0)).unwrap(), ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap()] {
            let amp = Amplitudes::new(&model);
            for _ in 0..50 {
                let (x, y) = (point(&mut rng), point(&mut rng));
                let t = amp.theta(x, y).unwrap() * amp.theta(y, x).unwrap();
                assert!((t - ONE).norm() < 1e-12, "{t}");
            }
        }
    }

    #[test]
    fn theta_less_branches() {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let amp = Amplitudes::new(&model);
        let (x, y) = (c(0.2, 0.1), c(-0.3, 0.05));
        assert_eq!(amp.theta_less(x, y, 2, 1).unwrap(), ONE);
        assert_eq!(amp.theta_less(x, y, 1, 2).unwrap(), amp.theta(x, y).unwrap());
        let prod = amp.theta_less(x, y, 1, 2).unwrap() * amp.theta_less(y, x, 2, 1).unwrap();
        assert!((prod - amp.theta(x, y).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn f_base_pair_cancels() {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let amp = Amplitudes::new(&model);
        for a in 1..=2 {
            let s = amp.f(0, 1, a, c(0.1, 0.2), &[c(-0.4, 0.1)]).unwrap() + amp.f(1, 1, a, c(0.1, 0.2), &[c(-0.4, 0.1)]).unwrap();
            assert_eq!(s, ZERO);
        }
    }

    #[test]
    fn recursive_f2_matches_closed_forms_spin1() {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let amp = Amplitudes::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (l, l1, l2) = (point(&mut rng), point(&mut rng), point(&mut rng));
            for cc in 0..=2 {
                let r = amp.f(cc, 2, 1, l, &[l1, l2]).unwrap();
                let cf = amp.f2_closed(cc, 1, l, l1, l2).unwrap();
                assert!(rel(r, cf) < 1e-10, "c={cc}: {r} vs {cf}");
            }
        }
    }

    #[test]
    fn recursive_f2_matches_closed_forms_n4() {
        let model = ModelSpec::higher_spin_xxz(4, c(0.7, 0.3)).unwrap();
        let amp = Amplitudes::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (l, l1, l2) = (point(&mut rng), point(&mut rng), point(&mut rng));
            for a in 1..=2 {
                for cc in 0..=2 {
                    let r = amp.f(cc, 2, a, l, &[l1, l2]).unwrap();
                    let cf = amp.f2_closed(cc, a, l, l1, l2).unwrap();
                    assert!(rel(r, cf) < 1e-10, "a={a} c={cc}: {r} vs {cf}");
                }
            }
        }
    }

    #[test]
    fn pbar_equals_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 3..=4 {
            let model = ModelSpec::higher_spin_xxz(n, c(0.6, 0.2)).unwrap();
            let amp = Amplitudes::new(&model);
            for _ in 0..20 {
                let (l, l1, l2) = (point(&mut rng), point(&mut rng), point(&mut rng));
                for a in 1..=n {
                    let pb = amp.pbar(a, l, l1, l2).unwrap();
                    let p = amp.p(a, l, l2).unwrap();
                    assert!(rel(pb, p) < 1e-10, "N={n} a={a}: {pb} vs {p}");
                }
            }
        }
    }

    #[test]
    fn h_symmetry_and_identification() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 3..=4 {
            let model = ModelSpec::higher_spin_xxz(n, c(0.6, 0.1)).unwrap();
            let amp = Amplitudes::new(&model);
            for _ in 0..10 {
                let (l, l1, l2) = (point(&mut rng), point(&mut rng), point(&mut rng));
                for a in 1..n {
                    let sym = amp.h(0, 1, a, l, l1, l2, 2).unwrap();
                    let closed = amp.h_tag2_closed(0, a, l, l1, l2).unwrap();
                    assert!(rel(sym, closed) < 1e-10, "H01|2 a={a}");
                }
                for a in 1..=n - 2 {
                    let sym = amp.h(1, 1, a, l, l1, l2, 2).unwrap();
                    let closed = amp.h_tag2_closed(1, a, l, l1, l2).unwrap();
                    assert!(rel(sym, closed) < 1e-10, "H11|2 a={a}: {sym} vs {closed}");
                    let h12 = amp.h(1, 2, a, l, l1, l2, 1).unwrap();
                    let f12 = amp.f(1, 2, a, l, &[l1, l2]).unwrap();
                    assert!(rel(h12, f12) < 1e-10, "H12 = F12 a={a}");
                }
            }
        }
    }

    #[test]
    fn g_examples() {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let amp = Amplitudes::new(&model);
        let r = [c(0.1, 0.2), c(-0.3, 0.1), c(0.4, -0.2)];
        let g2 = amp.g_coefficient(2, &[2], &r[..2]).unwrap();
        assert!(rel(g2, amp.f(1, 1, 2, r[0], &[r[1]]).unwrap()) < 1e-14);
        let g3 = amp.g_coefficient(2, &[2], &r).unwrap();
        let expect = amp.ratio11(r[2], r[1]).unwrap() * amp.f(1, 1, 2, r[0], &[r[1]]).unwrap();
        assert!(rel(g3, expect) < 1e-14);
        let g3b = amp.g_coefficient(2, &[3], &r).unwrap();
        let swapped = [r[0], r[2], r[1]];
        let expect = amp.theta(r[1], r[2]).unwrap() * amp.g_coefficient(2, &[2], &swapped).unwrap();
        assert!(rel(g3b, expect) < 1e-12);
    }

    #[test]
    fn d4_degenerate_sizes() {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let amp = Amplitudes::new(&model);
        let (l, m) = (c(0.2, 0.1), c(-0.1, 0.3));
        let w = model.eval_r(m, l).unwrap();
        for i in 1..=3 {
            assert_eq!(amp.d4(i, i, l, m).unwrap(), w.get(i as i64, 1, i as i64, 1));
        }
        assert_eq!(amp.d4_cont(4, l, m).unwrap(), ONE);
    }

    #[test]
    fn coincident_roots_rejected() {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let amp = Amplitudes::new(&model);
        let x = c(0.1, 0.1);
        assert!(matches!(amp.f(0, 2, 1, c(0.3, 0.0), &[x, x]), Err(BetheError::Singularity(_))));
    }

    #[test]
    fn cache_hits_are_bitwise() {
        let model = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let amp = Amplitudes::new(&model);
        let args = (c(0.1, 0.2), [c(-0.3, 0.1), c(0.4, -0.2)]);
        let first = amp.f(2, 2, 1, args.0, &args.1).unwrap();
        let len = amp.cache_len();
        let second = amp.f(2, 2, 1, args.0, &args.1).unwrap();
        assert_eq!(first.re.to_bits(), second.re.to_bits());
        assert_eq!(amp.cache_len(), len);
        let fresh = Amplitudes::new(&model).f(2, 2, 1, args.0, &args.1).unwrap();
        assert_eq!(first, fresh);
    }

    #[test]
    fn d2_simple_pole_and_exchange() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 3..=4 {
            let model = ModelSpec::higher_spin_xxz(n, c(0.6, 0.0)).unwrap();
            let amp = Amplitudes::new(&model);
            for _ in 0..10 {
                let (l, m) = (point(&mut rng), point(&mut rng));
                let residue = |eps: f64| amp.d2(2, 0, l, l + c(eps, 0.0)).unwrap() * eps;
                let (r1, r2) = (residue(1e-7), residue(2e-7));
                assert!(r1.norm() > 1e-3, "N={n}: residue {r1}");
                assert!((r1 - r2).norm() < 1e-5 * r1.norm(), "N={n}: {r1} vs {r2}");
                let w = amp.weights(l, m).unwrap();
                let v = amp.weights(m, l).unwrap();
                let product = amp.d2(2, 0, l, m).unwrap() * amp.d2(2, 0, m, l).unwrap();
                let ratios = w.get(1, 1, 1, 1) / w.get(2, 1, 2, 1) * (v.get(1, 1, 1, 1) / v.get(2, 1, 2, 1));
                assert!(rel(product, ratios) < 1e-10, "N={n}: {product} vs {ratios}");
                let e1 = amp.d2(2, 1, l, m).unwrap();
                let expected = -(v.get(3, 1, 2, 2) / v.get(3, 1, 3, 1)) * amp.d2(2, 0, l, m).unwrap();
                assert!(rel(e1, expected) < 1e-10, "N={n}: {e1} vs {expected}");
                amp.clear_cache();
            }
        }
    }
}
