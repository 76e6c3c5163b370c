//! Weight identities implied by unitarity and the Yang–Baxter equation,
//! checked at random spectral parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::amplitudes::{det2_rows, Amplitudes};
use crate::error::{BetheError, Result};
use crate::linalg::{det, div, C64, ONE, ZERO};
use crate::weights::ModelSpec;

/// Default pass threshold of the identity suite.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Samples whose sides exceed this magnitude are treated as singular.
const MAGNITUDE_CAP: f64 = 1e6;

/// Minimal pairwise distance between sampled spectral parameters.
const MIN_SEPARATION: f64 = 0.05;

/// Outcome of one identity over many parameter samples.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub id: String,
    pub description: String,
    /// Accepted parameter samples, each a list of `[re, im]` points.
    pub samples: Vec<Vec<[f64; 2]>>,
    /// Per-sample residual, maximised over every index choice of the identity.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Samples rejected as singular before enough were accepted.
    pub skipped: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Sampling configuration of the suite.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOptions {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions { samples: 100, tol: IDENTITY_TOL, seed: 42 }
    }
}

type Pairs = Vec<(C64, C64)>;
type Evaluator = fn(&Amplitudes, &[C64]) -> Result<Pairs>;

/// One identity: how many spectral parameters it takes and on which N it is defined.
pub struct Identity {
    pub id: &'static str,
    pub description: &'static str,
    pub arity: usize,
    pub min_n: usize,
    eval: Evaluator,
}

impl Identity {
    /// True when the identity has at least one valid index choice at this N.
    pub fn applies(&self, n: usize) -> bool {
        n >= self.min_n
    }

    /// Left and right sides for every index choice at the given points.
    pub fn evaluate(&self, amp: &Amplitudes, points: &[C64]) -> Result<Pairs> {
        (self.eval)(amp, points)
    }
}

/// Residual scale shared by every identity check.
pub fn relative_residual(lhs: C64, rhs: C64) -> f64 {
    (lhs - rhs).norm() / 1f64.max(lhs.norm()).max(rhs.norm())
}

/// All identities of the suite.
pub fn catalogue() -> Vec<Identity> {
    vec![
        Identity { id: "unitarity_blocks", description: "unitarity charge blocks U[b,c]_j^q", arity: 2, min_n: 2, eval: unitarity_blocks },
        Identity { id: "charge2_ratio", description: "charge-2 unitarity ratio", arity: 2, min_n: 2, eval: charge2_ratio },
        Identity { id: "d2_20_exchange", description: "D2(2,0) exchange product", arity: 2, min_n: 3, eval: d2_20_exchange },
        Identity { id: "d2_21_reduction", description: "D2(2,1) through D2(2,0)", arity: 2, min_n: 3, eval: d2_21_reduction },
        Identity { id: "d2_31_exchange", description: "D2(3,1)/D2(3,0) exchange", arity: 2, min_n: 4, eval: d2_31_exchange },
        Identity { id: "d2_32_exchange", description: "D2(3,2)/D2(3,0) exchange", arity: 2, min_n: 4, eval: d2_32_exchange },
        Identity { id: "unitarity_det3", description: "3x3 unitarity determinant ratio, j = 1, 2", arity: 2, min_n: 3, eval: unitarity_det3 },
        Identity { id: "d3_ratio", description: "D3/D2 through D4 ratios", arity: 2, min_n: 4, eval: d3_ratio },
        Identity { id: "d3_ratio_continuation", description: "D3/D2 continuation at i = N-1", arity: 2, min_n: 3, eval: d3_ratio_continuation },
        Identity { id: "d5_ratio", description: "D2(i+1,1)/D2(i+1,0) through D5/D4", arity: 2, min_n: 3, eval: d5_ratio },
        Identity { id: "d5_ratio_continuation", description: "D5/D4 continuation at i = N-1", arity: 2, min_n: 3, eval: d5_ratio_continuation },
        Identity { id: "factor_bottom", description: "two-term factorisation at the bottom charge", arity: 3, min_n: 3, eval: factor_bottom },
        Identity { id: "factor_top", description: "two-term factorisation at the top charge", arity: 3, min_n: 3, eval: factor_top },
        Identity { id: "factor_three_term", description: "three-term factorisation, 2 <= a <= N-1", arity: 3, min_n: 3, eval: factor_three_term },
        Identity { id: "unitarity_u13", description: "U[1,3] unitarity component", arity: 2, min_n: 3, eval: unitarity_u13 },
    ]
}

/// Runs every identity that applies to the model's N.
pub fn identity_suite(model: &ModelSpec, opts: &IdentityOptions) -> Result<Vec<IdentityReport>> {
    if opts.samples == 0 {
        return Err(BetheError::InvalidOption("identity samples must be positive".into()));
    }
    let n = model.n();
    let list: Vec<Identity> = catalogue().into_iter().filter(|i| i.applies(n)).collect();
    list.par_iter().enumerate().map(|(k, id)| run_identity(model, id, opts, k as u64)).collect()
}

/// Runs one identity, resampling singular points up to ten times the request.
pub fn run_identity(model: &ModelSpec, identity: &Identity, opts: &IdentityOptions, stream: u64) -> Result<IdentityReport> {
    if opts.samples == 0 {
        return Err(BetheError::InvalidOption("identity samples must be positive".into()));
    }
    let amp = Amplitudes::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (stream << 40));
    let (mut samples, mut residuals, mut skipped) = (Vec::new(), Vec::new(), 0usize);
    let mut attempts = 0;
    while residuals.len() < opts.samples && attempts < 10 * opts.samples {
        attempts += 1;
        let points = sample_points(&mut rng, identity.arity);
        match score(&amp, identity, &points) {
            Some(r) => {
                samples.push(points.iter().map(|z| [z.re, z.im]).collect());
                residuals.push(r);
            }
            None => skipped += 1,
        }
        amp.clear_cache();
    }
    if residuals.len() < opts.samples || 5 * skipped > attempts {
        return Err(BetheError::DegenerateParameters { skipped, total: attempts });
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(IdentityReport {
        id: identity.id.to_string(),
        description: identity.description.to_string(),
        samples,
        residuals,
        max_residual,
        skipped,
        tolerance: opts.tol,
        pass: max_residual < opts.tol,
    })
}

fn sample_points(rng: &mut ChaCha8Rng, k: usize) -> Vec<C64> {
    loop {
        let pts: Vec<C64> = (0..k).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5))).collect();
        let separated = (0..k).all(|i| (i + 1..k).all(|j| (pts[i] - pts[j]).norm() > MIN_SEPARATION));
        if separated {
            return pts;
        }
    }
}

fn score(amp: &Amplitudes, identity: &Identity, points: &[C64]) -> Option<f64> {
    let pairs = identity.evaluate(amp, points).ok()?;
    let mut worst = 0.0_f64;
    for (l, r) in pairs {
        if !(l.is_finite() && r.is_finite()) || l.norm().max(r.norm()) > MAGNITUDE_CAP {
            return None;
        }
        worst = worst.max(relative_residual(l, r));
    }
    Some(worst)
}

/// R(x,y) entry with lower indices `(a, b)` and upper `(c, d)`.
fn rr(amp: &Amplitudes, x: C64, y: C64, a: usize, b: usize, c: usize, d: usize) -> Result<C64> {
    amp.r(x, y, a as i64, b as i64, c as i64, d as i64)
}

fn ratio(amp: &Amplitudes, x: C64, y: C64, num: [usize; 4], den: [usize; 4]) -> Result<C64> {
    let [a, b, c, d] = num;
    let [e, f, g, h] = den;
    div(rr(amp, x, y, a, b, c, d)?, rr(amp, x, y, e, f, g, h)?, "weight ratio")
}

/// Charge-block weight a^{j,q1}_{b,c} at `(x, y)`.
fn block(amp: &Amplitudes, x: C64, y: C64, j: usize, q1: usize, b: usize, c: usize) -> Result<C64> {
    let n = amp.n();
    if j == 1 {
        rr(amp, x, y, q1 + 1 - b, b, c, q1 + 1 - c)
    } else {
        rr(amp, x, y, n + 1 - b, n - q1 + b, n - q1 + c, n + 1 - c)
    }
}

fn block_det(
    amp: &Amplitudes,
    x: C64,
    y: C64,
    j: usize,
    q1: usize,
    rows: &[usize],
    cols: &[usize],
) -> Result<C64> {
    if rows.is_empty() {
        return Ok(ONE);
    }
    let mut m = nalgebra::DMatrix::<C64>::zeros(rows.len(), cols.len());
    for (r, &b) in rows.iter().enumerate() {
        for (s, &c) in cols.iter().enumerate() {
            m[(r, s)] = block(amp, x, y, j, q1, b, c)?;
        }
    }
    det(&m)
}

fn unitarity_blocks(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let n = amp.n();
    let mut out = Vec::new();
    for j in 1..=2 {
        for q1 in 1..=n {
            for b in 1..=q1 {
                for c in 1..=q1 {
                    let mut s = ZERO;
                    for k in 1..=q1 {
                        s += block(amp, l, m, j, q1, b, k)? * block(amp, m, l, j, q1, k, c)?;
                    }
                    out.push((s, if b == c { ONE } else { ZERO }));
                }
            }
        }
    }
    Ok(out)
}

fn charge2_ratio(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let lhs = ratio(amp, l, m, [2, 1, 1, 2], [2, 1, 2, 1])?;
    let rhs = -ratio(amp, m, l, [1, 2, 2, 1], [2, 1, 2, 1])?;
    Ok(vec![(lhs, rhs)])
}

fn d2_20_exchange(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let lhs = amp.d2(2, 0, l, m)? * amp.d2(2, 0, m, l)?;
    let rhs = ratio(amp, l, m, [1, 1, 1, 1], [2, 1, 2, 1])? * ratio(amp, m, l, [1, 1, 1, 1], [2, 1, 2, 1])?;
    Ok(vec![(lhs, rhs)])
}

fn d2_21_reduction(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let lhs = amp.d2(2, 1, l, m)?;
    let rhs = -ratio(amp, m, l, [3, 1, 2, 2], [3, 1, 3, 1])? * amp.d2(2, 0, l, m)?;
    Ok(vec![(lhs, rhs)])
}

/// 2×2 determinant of entries `R(x,y)_{cols[s]}^{rows[r]}`.
fn det_r2(amp: &Amplitudes, x: C64, y: C64, rows: [[usize; 2]; 2], cols: [[usize; 2]; 2]) -> Result<C64> {
    let e = |r: usize, s: usize| rr(amp, x, y, cols[s][0], cols[s][1], rows[r][0], rows[r][1]);
    Ok(det2_rows(e(0, 0)?, e(0, 1)?, e(1, 0)?, e(1, 1)?))
}

fn d2_31_exchange(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, l1) = (p[0], p[1]);
    let lhs = div(amp.d2(3, 1, l1, l)?, amp.d2(3, 0, l1, l)?, "D2 ratio")?;
    let den_a = det_r2(amp, l1, l, [[3, 2], [4, 1]], [[4, 1], [3, 2]])?;
    let mid = div(det_r2(amp, l1, l, [[3, 2], [4, 1]], [[4, 1], [2, 3]])?, den_a, "D2(3,1)")?;
    let den_b = det_r2(amp, l, l1, [[3, 2], [4, 1]], [[4, 1], [3, 2]])?;
    let rhs = -div(det_r2(amp, l, l1, [[2, 3], [4, 1]], [[4, 1], [3, 2]])?, den_b, "D2(3,1)")?;
    Ok(vec![(lhs, mid), (lhs, rhs)])
}

fn d2_32_exchange(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, l1) = (p[0], p[1]);
    let lhs = div(amp.d2(3, 2, l1, l)?, amp.d2(3, 0, l1, l)?, "D2 ratio")?;
    let den_a = det_r2(amp, l1, l, [[3, 2], [4, 1]], [[4, 1], [3, 2]])?;
    let mid = div(det_r2(amp, l1, l, [[3, 2], [4, 1]], [[4, 1], [1, 4]])?, den_a, "D2(3,2)")?;
    let den_b = det_r2(amp, l, l1, [[3, 2], [4, 1]], [[4, 1], [3, 2]])?;
    let rhs = div(det_r2(amp, l, l1, [[2, 3], [3, 2]], [[4, 1], [3, 2]])?, den_b, "D2(3,2)")?;
    Ok(vec![(lhs, mid), (lhs, rhs)])
}

fn unitarity_det3(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let n = amp.n();
    let mut out = Vec::new();
    for j in 1..=2 {
        for i in 1..=n - 2 {
            let (q, q1) = (i + 2, i + 1);
            let a3 = block_det(amp, l, m, j, q, &[1, 2, 3], &[i, i + 1, i + 2])?;
            let a2 = block_det(amp, l, m, j, q1, &[1, 2], &[i, i + 1])?;
            let b2 = block_det(amp, l, m, j, q, &[1, 2], &[i + 1, i + 2])?;
            let lhs = div(a3 * block(amp, l, m, j, q1, 1, i + 1)?, a2 * b2, "unitarity_det3")?;
            let rows_i: Vec<usize> = (1..=i).collect();
            let rows_im1: Vec<usize> = (1..i).collect();
            let f1 = div(
                block_det(amp, m, l, j, q1, &rows_i, &(2..=i + 1).collect::<Vec<_>>())?,
                block_det(amp, m, l, j, q1, &rows_im1, &(3..=i + 1).collect::<Vec<_>>())?,
                "unitarity_det3",
            )?;
            let f2 = div(
                block_det(amp, m, l, j, q, &rows_im1, &(4..=i + 2).rev().collect::<Vec<_>>())?,
                block_det(amp, m, l, j, q, &rows_i, &(3..=i + 2).rev().collect::<Vec<_>>())?,
                "unitarity_det3",
            )?;
            let sign = if i % 2 == 0 { ONE } else { -ONE };
            out.push((lhs, sign * f1 * f2));
        }
    }
    Ok(out)
}

fn d3_ratio(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let n = amp.n();
    let mut out = Vec::new();
    for i in 2..=n - 2 {
        let lhs = div(amp.d3(i, 0, l, m)?, amp.d2(i, 0, l, m)?, "d3_ratio")?;
        let rhs = div(amp.d4(i + 1, 2, l, m)?, amp.d4(i + 1, 3, l, m)?, "d3_ratio")?
            * div(amp.d4(i + 2, 4, l, m)?, amp.d4(i + 2, 3, l, m)?, "d3_ratio")?;
        out.push((lhs, rhs));
    }
    Ok(out)
}

fn d3_ratio_continuation(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, l1) = (p[0], p[1]);
    let n = amp.n();
    let top = det_r2(amp, l, l1, [[n - 1, 3], [n, 2]], [[n, 2], [n - 1, 3]])? * rr(amp, l, l1, n, 1, n, 1)?;
    let bottom = det_r2(amp, l, l1, [[n - 1, 2], [n, 1]], [[n, 1], [n - 1, 2]])? * rr(amp, l, l1, n, 2, n, 2)?;
    let lhs = div(top, bottom, "d3_ratio_continuation")?;
    let rhs = div(amp.d4(n, 2, l, l1)?, amp.d4(n, 3, l, l1)?, "d3_ratio_continuation")?
        * div(amp.d4_cont(4, l, l1)?, amp.d4_cont(3, l, l1)?, "d3_ratio_continuation")?;
    Ok(vec![(lhs, rhs)])
}

fn d5_ratio(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let n = amp.n();
    let mut out = Vec::new();
    for i in 1..=n - 2 {
        let lhs = div(amp.d2(i + 1, 1, l, m)?, amp.d2(i + 1, 0, l, m)?, "d5_ratio")?;
        let rhs = -div(amp.d5(i + 2, l, m)?, amp.d4(i + 2, 3, l, m)?, "d5_ratio")?;
        out.push((lhs, rhs));
    }
    Ok(out)
}

fn d5_ratio_continuation(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, l1) = (p[0], p[1]);
    let n = amp.n();
    let lhs = ratio(amp, l, l1, [n - 1, 3, n, 2], [n, 2, n, 2])?;
    let rhs = -div(amp.d5_cont(l, l1)?, amp.d4_cont(3, l, l1)?, "d5_ratio_continuation")?;
    Ok(vec![(lhs, rhs)])
}

fn factor_bottom(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l1, l2, l) = (p[0], p[1], p[2]);
    let x = amp.x12(l1, l2)?;
    let lhs = ratio(amp, l2, l, [1, 1, 1, 1], [2, 1, 2, 1])? * x;
    let rhs = ratio(amp, l2, l, [1, 2, 2, 1], [2, 1, 2, 1])? * ratio(amp, l1, l, [3, 1, 2, 2], [3, 1, 3, 1])?
        + x * ratio(amp, l1, l, [2, 1, 2, 1], [3, 1, 3, 1])?;
    Ok(vec![(lhs, rhs)])
}

fn factor_top(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l1, l2, l) = (p[0], p[1], p[2]);
    let n = amp.n();
    let x = amp.x12(l1, l2)?;
    let lhs = ratio(amp, l, l2, [n, 2, n, 2], [n, 1, n, 1])? * x;
    let rhs = x * ratio(amp, l, l1, [n, 3, n, 3], [n, 2, n, 2])?
        - ratio(amp, l, l1, [n - 1, 3, n, 2], [n, 2, n, 2])? * ratio(amp, l, l2, [n, 1, n - 1, 2], [n, 1, n, 1])?;
    Ok(vec![(lhs, rhs)])
}

fn factor_three_term(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l1, l2, l) = (p[0], p[1], p[2]);
    let n = amp.n();
    let x = amp.x12(l1, l2)?;
    let mut out = Vec::new();
    for a in 2..=n - 1 {
        // D5^{(a+2,2)}/D4^{(a+2,3)} and D4^{(a+2,4)}/D4^{(a+2,3)}, continued at a = N-1.
        let (d5_top, d4_top_4, d4_top_3) = if a + 2 <= n {
            (amp.d5(a + 2, l, l1)?, amp.d4(a + 2, 4, l, l1)?, amp.d4(a + 2, 3, l, l1)?)
        } else {
            (amp.d5_cont(l, l1)?, amp.d4_cont(4, l, l1)?, amp.d4_cont(3, l, l1)?)
        };
        let lhs = amp.d2(a, 0, l, l2)? * x;
        let d4_mid_3 = amp.d4(a + 1, 3, l, l1)?;
        let rhs = -ratio(amp, l, l2, [a + 1, 1, a, 2], [a + 1, 1, a + 1, 1])? * div(d5_top, d4_top_3, "factor_three_term")?
            + div(amp.d5(a + 1, l, l1)?, d4_mid_3, "factor_three_term")? * ratio(amp, l, l2, [a, 1, a - 1, 2], [a, 1, a, 1])?
            + x * div(amp.d4(a + 1, 2, l, l1)?, d4_mid_3, "factor_three_term")? * div(d4_top_4, d4_top_3, "factor_three_term")?;
        out.push((lhs, rhs));
    }
    Ok(out)
}

fn unitarity_u13(amp: &Amplitudes, p: &[C64]) -> Result<Pairs> {
    let (l, m) = (p[0], p[1]);
    let lhs = rr(amp, l, m, 3, 1, 1, 3)? * rr(amp, m, l, 3, 1, 3, 1)?
        + rr(amp, l, m, 3, 1, 2, 2)? * rr(amp, m, l, 2, 2, 3, 1)?
        + rr(amp, l, m, 3, 1, 3, 1)? * rr(amp, m, l, 1, 3, 3, 1)?;
    Ok(vec![(lhs, ZERO)])
}
