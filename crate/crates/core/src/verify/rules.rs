//! Numerical commutation rules between monodromy elements.
//!
//! Every rule is a linear combination of the quadratic Yang–Baxter relations
//!
//! ```text
//! Σ_e R(x,y)[b̄,ā; e,ā+b̄-e] T_{e,c̄}(x) T_{ā+b̄-e,d̄}(y)
//!     = Σ_e T_{ā,e}(y) T_{b̄,c̄+d̄-e}(x) R(x,y)[c̄+d̄-e,e; c̄,d̄]
//! ```
//!
//! evaluated at a fixed pair (λ, μ). A family fixes which relations enter,
//! which operator products must cancel and which product is isolated; the
//! combination weights come from one square linear solve.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::ChainContext;
use crate::error::{BetheError, Result};
use crate::linalg::{solve, C64, ONE, ZERO};
use crate::weights::{ModelSpec, WeightMatrix};

/// Spectral argument of a monodromy element inside a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Arg {
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "mu")]
    Mu,
}

/// Monodromy element `T_{row,col}(arg)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OpRef {
    pub row: usize,
    pub col: usize,
    pub arg: Arg,
}

/// Ordered product `left · right` of two monodromy elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Product {
    pub left: OpRef,
    pub right: OpRef,
}

fn op(row: usize, col: usize, arg: Arg) -> OpRef {
    OpRef { row, col, arg }
}

fn prod(left: OpRef, right: OpRef) -> Product {
    Product { left, right }
}

/// Rule families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFamily {
    DiagCreation,
    CreationCreation,
    AnnihilationCreation,
}

/// One term `coefficient · left · right` of a rule's right side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleTerm {
    pub product: Product,
    #[serde(serialize_with = "crate::verify::serialize_point")]
    pub coefficient: C64,
}

/// A commutation rule `target = Σ terms` at a fixed evaluation pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleCoefficients {
    pub family: RuleFamily,
    /// Fixed indices: `(a, b)`, `(a1, b1, d1)` or `(a1, d1, b)`.
    pub indices: Vec<usize>,
    #[serde(serialize_with = "crate::verify::serialize_point")]
    pub lambda: C64,
    #[serde(serialize_with = "crate::verify::serialize_point")]
    pub mu: C64,
    /// Linear system the rule comes from (`"direct"`, `"A1"`, …).
    pub system: String,
    /// Number of combined relations.
    pub system_size: usize,
    /// True when a single relation suffices.
    pub direct: bool,
    pub target: Product,
    pub terms: Vec<RuleTerm>,
}

impl RuleCoefficients {
    /// Coefficient of `product` on the right side (zero when absent).
    pub fn coefficient(&self, product: &Product) -> C64 {
        self.terms.iter().find(|t| &t.product == product).map_or(ZERO, |t| t.coefficient)
    }
}

type Relation = BTreeMap<Product, C64>;

struct Weights {
    lm: WeightMatrix,
    ml: WeightMatrix,
}

impl Weights {
    fn new(model: &ModelSpec, lambda: C64, mu: C64) -> Result<Self> {
        Ok(Weights { lm: model.eval_r(lambda, mu)?, ml: model.eval_r(mu, lambda)? })
    }

    fn at(&self, x: Arg) -> &WeightMatrix {
        match x {
            Arg::Lambda => &self.lm,
            Arg::Mu => &self.ml,
        }
    }
}

fn other(x: Arg) -> Arg {
    match x {
        Arg::Lambda => Arg::Mu,
        Arg::Mu => Arg::Lambda,
    }
}

/// Relation with indices (ā, b̄, c̄, d̄) at `(x, y)`, stored as left minus right side.
fn fundrel(w: &Weights, n: usize, x: Arg, ab: usize, bb: usize, cb: usize, db: usize) -> Relation {
    let y = other(x);
    let r = w.at(x);
    let mut rel = Relation::new();
    let (s1, s2) = (ab + bb, cb + db);
    for e in s1.saturating_sub(n).max(1)..=(s1 - 1).min(n) {
        let c = r.get(bb as i64, ab as i64, e as i64, (s1 - e) as i64);
        if c != ZERO {
            *rel.entry(prod(op(e, cb, x), op(s1 - e, db, y))).or_insert(ZERO) += c;
        }
    }
    for e in s2.saturating_sub(n).max(1)..=(s2 - 1).min(n) {
        let c = r.get((s2 - e) as i64, e as i64, cb as i64, db as i64);
        if c != ZERO {
            *rel.entry(prod(op(ab, e, y), op(bb, s2 - e, x))).or_insert(ZERO) -= c;
        }
    }
    rel
}

/// Combines `relations` so that every product in `eliminate` cancels and the
/// coefficient of `target` is one, then solves for `target`.
fn combine(relations: &[Relation], eliminate: &[Product], target: Product) -> Result<Vec<RuleTerm>> {
    let m = relations.len();
    if eliminate.len() + 1 != m {
        return Err(BetheError::Singularity(format!(
            "{} relations for {} constraints",
            m,
            eliminate.len() + 1
        )));
    }
    let mut mat = DMatrix::<C64>::zeros(m, m);
    for (k, rel) in relations.iter().enumerate() {
        for (i, p) in eliminate.iter().chain(std::iter::once(&target)).enumerate() {
            mat[(i, k)] = rel.get(p).copied().unwrap_or(ZERO);
        }
    }
    let mut rhs = DVector::<C64>::zeros(m);
    rhs[m - 1] = ONE;
    let y = solve(&mat, &rhs)?;
    let mut total = Relation::new();
    for (k, rel) in relations.iter().enumerate() {
        for (p, c) in rel {
            *total.entry(*p).or_insert(ZERO) += y[k] * c;
        }
    }
    Ok(total
        .into_iter()
        .filter(|(p, c)| *p != target && !eliminate.contains(p) && *c != ZERO)
        .map(|(product, c)| RuleTerm { product, coefficient: -c })
        .collect())
}

fn finish(
    family: RuleFamily,
    indices: Vec<usize>,
    lambda: C64,
    mu: C64,
    system: &str,
    relations: &[Relation],
    eliminate: &[Product],
    target: Product,
) -> Result<RuleCoefficients> {
    let terms = combine(relations, eliminate, target)?;
    Ok(RuleCoefficients {
        family,
        indices,
        lambda,
        mu,
        system: system.to_string(),
        system_size: relations.len(),
        direct: relations.len() == 1,
        target,
        terms,
    })
}

/// Rule for T_{a,a}(λ) T_{1,b}(μ), `1 ≤ a ≤ N`, `2 ≤ b ≤ N`.
pub fn generate_diag_creation_rule(model: &ModelSpec, a: usize, b: usize, lambda: C64, mu: C64) -> Result<RuleCoefficients> {
    let n = model.n();
    if a < 1 || a > n || b < 2 || b > n {
        return Err(BetheError::IndexOutOfRange(format!("diagonal-creation (a, b) = ({a}, {b}) with N = {n}")));
    }
    let w = Weights::new(model, lambda, mu)?;
    let target = prod(op(a, a, Arg::Lambda), op(1, b, Arg::Mu));
    let idx = vec![a, b];
    let fam = RuleFamily::DiagCreation;
    if a == 1 {
        let rel = fundrel(&w, n, Arg::Mu, 1, 1, b, 1);
        return finish(fam, idx, lambda, mu, "direct", &[rel], &[], target);
    }
    if a == n {
        let rel = fundrel(&w, n, Arg::Lambda, 1, n, n, b);
        return finish(fam, idx, lambda, mu, "direct", &[rel], &[], target);
    }
    let (c_hi, k_lo, system) = if a + b <= n + 1 { (b - 1, 1, "A1") } else { (n - a, a + b - n, "A2") };
    let relations: Vec<Relation> = (0..=c_hi).map(|c| fundrel(&w, n, Arg::Lambda, 1, a, a + c, b - c)).collect();
    let eliminate: Vec<Product> = (k_lo..b).map(|k| prod(op(1, k, Arg::Mu), op(a, a + b - k, Arg::Lambda))).collect();
    finish(fam, idx, lambda, mu, system, &relations, &eliminate, target)
}

/// Index window of creation-creation rules.
pub fn creation_creation_window(n: usize, a1: usize, b1: usize, d1: usize) -> bool {
    (2..=n).contains(&a1) && d1 + a1 <= n && b1 >= d1 + 2 && b1 - d1 <= n
}

/// Rule ordering T_{a1-1,a1+d1}(λ) T_{1,b1-d1}(μ) (for `a1 = 2`: T_{1,b1-d1}(λ) T_{1,2+d1}(μ)).
pub fn generate_creation_creation_rule(
    model: &ModelSpec,
    a1: usize,
    b1: usize,
    d1: usize,
    lambda: C64,
    mu: C64,
) -> Result<RuleCoefficients> {
    let n = model.n();
    if !creation_creation_window(n, a1, b1, d1) {
        return Err(BetheError::IndexOutOfRange(format!(
            "creation-creation (a1, b1, d1) = ({a1}, {b1}, {d1}) with N = {n}"
        )));
    }
    let w = Weights::new(model, lambda, mu)?;
    let idx = vec![a1, b1, d1];
    let fam = RuleFamily::CreationCreation;
    let base = |c: usize| fundrel(&w, n, Arg::Lambda, 1, a1 - 1, a1 + c, b1 - c);
    if a1 == 2 {
        let target = prod(op(1, b1 - d1, Arg::Lambda), op(1, 2 + d1, Arg::Mu));
        let first = base(b1 - d1 - 2);
        if b1 >= n {
            return finish(fam, idx, lambda, mu, "direct", &[first], &[], target);
        }
        let relations = vec![first, base(b1 - 1)];
        let eliminate = vec![prod(op(1, 1, Arg::Mu), op(1, b1 + 1, Arg::Lambda))];
        return finish(fam, idx, lambda, mu, "A3", &relations, &eliminate, target);
    }
    let (c_lo, c_hi, k_lo, k_hi, system) = creation_system(n, a1, b1);
    let keep = b1 - d1;
    let relations: Vec<Relation> = (c_lo..=c_hi).map(base).collect();
    let unknown = |k: usize| prod(op(1, k, Arg::Mu), op(a1 - 1, a1 + b1 - k, Arg::Lambda));
    let eliminate: Vec<Product> = (k_lo..=k_hi).filter(|&k| k != keep).map(unknown).collect();
    let system = if relations.len() == 1 { "direct" } else { system };
    finish(fam, idx, lambda, mu, system, &relations, &eliminate, unknown(keep))
}

/// Linear-system family ("A1", "A2" or "A4") of a creation-creation rule with `a1 ≥ 3`.
pub fn creation_family(n: usize, a1: usize, b1: usize) -> &'static str {
    creation_system(n, a1, b1).4
}

/// Closed-form rule counts per `(family, b1)` for `a1 ≥ 3`; zero entries are omitted.
pub fn closed_creation_counts(n: usize) -> BTreeMap<(String, usize), usize> {
    let mut out = BTreeMap::new();
    for b1 in 2..=2 * n {
        let a1_count = if b1 + 2 <= n { (n - b1 - 1) * (b1 - 1) } else { 0 };
        let a2_count = if b1 < n { (b1 - 1) * b1 / 2 } else { 0 };
        let a4_count = if (n..=2 * n - 2).contains(&b1) { (2 * n - b1 - 1) * (2 * n - b1 - 2) / 2 } else { 0 };
        for (name, count) in [("A1", a1_count), ("A2", a2_count), ("A4", a4_count)] {
            if count > 0 {
                out.insert((name.to_string(), b1), count);
            }
        }
    }
    out
}

/// `(c_lo, c_hi, k_lo, k_hi, name)` of the creation-creation system for `a1 ≥ 3`.
fn creation_system(n: usize, a1: usize, b1: usize) -> (usize, usize, usize, usize, &'static str) {
    if b1 >= n {
        (b1 - n, n - a1, a1 + b1 - n, n, "A4")
    } else if a1 + b1 <= n + 1 {
        (0, b1 - 1, 1, b1, "A1")
    } else {
        (0, n - a1, a1 + b1 - n, b1, "A2")
    }
}

/// Counts of generated creation-creation rules with `a1 ≥ 3`, keyed by `(system, b1)`.
pub fn creation_rule_counts(n: usize) -> BTreeMap<(String, usize), usize> {
    let mut out = BTreeMap::new();
    for a1 in 3..=n {
        for b1 in 2..=2 * n {
            for d1 in 0..=n {
                if creation_creation_window(n, a1, b1, d1) {
                    let name = creation_system(n, a1, b1).4.to_string();
                    *out.entry((name, b1)).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

/// Index window of annihilation-creation rules.
pub fn annihilation_creation_window(n: usize, a1: usize, d1: usize, b: usize) -> bool {
    (2..=n).contains(&a1) && a1 + d1 <= n && (2..=n).contains(&b)
}

struct AnnihilationBlocks {
    stage1: (Vec<Relation>, Vec<Product>),
    stage2: Vec<(usize, Vec<Relation>, Vec<Product>)>,
    target: Product,
}

fn annihilation_blocks(w: &Weights, n: usize, a1: usize, d1: usize, b: usize) -> AnnihilationBlocks {
    let f1 = a1 + d1;
    let rel = |c1: usize, c2: usize| fundrel(w, n, Arg::Lambda, c1 + 1, f1 - c1, a1 + c2 - 1, b - c2);
    let target = prod(op(f1, a1 - 1, Arg::Lambda), op(1, b, Arg::Mu));
    let c1_hi = if b <= d1 + 2 { b - 2 } else { d1 + 1 };
    let e_lo = f1 - c1_hi;
    let stage1_rel: Vec<Relation> = (0..=c1_hi).map(|c1| rel(c1, 0)).collect();
    let stage1_elim: Vec<Product> =
        (e_lo..f1).map(|e| prod(op(e, a1 - 1, Arg::Lambda), op(f1 + 1 - e, b, Arg::Mu))).collect();
    let mut stage2 = Vec::new();
    for c1 in 0..=c1_hi {
        let top = (b + c1) as i64 - d1 as i64 - 2;
        if top <= 0 {
            continue;
        }
        let top = top as usize;
        let c2_lo = d1 + 2 - c1;
        let c2_hi = (b - 1).min(n + 1 - a1);
        let relations: Vec<Relation> = (c2_lo..=c2_hi).map(|c2| rel(c1, c2)).collect();
        let e_lo = (a1 + b).saturating_sub(n + 1).max(1);
        let unknowns: Vec<Product> =
            (e_lo..=top).map(|e| prod(op(c1 + 1, e, Arg::Mu), op(f1 - c1, a1 + b - 1 - e, Arg::Lambda))).collect();
        stage2.push((c1, relations, unknowns));
    }
    AnnihilationBlocks { stage1: (stage1_rel, stage1_elim), stage2, target }
}

/// Rule for T_{a1+d1,a1-1}(λ) T_{1,b}(μ); wrong-order creation products are
/// eliminated together with the first-stage unknowns in one square system.
pub fn generate_annihilation_creation_rule(
    model: &ModelSpec,
    a1: usize,
    d1: usize,
    b: usize,
    lambda: C64,
    mu: C64,
) -> Result<RuleCoefficients> {
    let n = model.n();
    if !annihilation_creation_window(n, a1, d1, b) {
        return Err(BetheError::IndexOutOfRange(format!(
            "annihilation-creation (a1, d1, b) = ({a1}, {d1}, {b}) with N = {n}"
        )));
    }
    let w = Weights::new(model, lambda, mu)?;
    let blocks = annihilation_blocks(&w, n, a1, d1, b);
    let (mut relations, mut eliminate) = blocks.stage1;
    let has_stage2 = !blocks.stage2.is_empty();
    for (_, rels, unknowns) in blocks.stage2 {
        relations.extend(rels);
        eliminate.extend(unknowns);
    }
    let system = match (relations.len(), has_stage2) {
        (1, _) => "direct",
        (_, false) => "stage1",
        _ => "stage1+stage2",
    };
    finish(RuleFamily::AnnihilationCreation, vec![a1, d1, b], lambda, mu, system, &relations, &eliminate, blocks.target)
}

/// Second-stage rules expressing each wrong-order product through allowed ones.
pub fn generate_annihilation_auxiliary_rules(
    model: &ModelSpec,
    a1: usize,
    d1: usize,
    b: usize,
    lambda: C64,
    mu: C64,
) -> Result<Vec<RuleCoefficients>> {
    let n = model.n();
    if !annihilation_creation_window(n, a1, d1, b) {
        return Err(BetheError::IndexOutOfRange(format!(
            "annihilation-creation (a1, d1, b) = ({a1}, {d1}, {b}) with N = {n}"
        )));
    }
    let w = Weights::new(model, lambda, mu)?;
    let blocks = annihilation_blocks(&w, n, a1, d1, b);
    let mut out = Vec::new();
    for (c1, relations, unknowns) in blocks.stage2 {
        for (i, &target) in unknowns.iter().enumerate() {
            let eliminate: Vec<Product> =
                unknowns.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
            out.push(finish(
                RuleFamily::AnnihilationCreation,
                vec![a1, d1, b],
                lambda,
                mu,
                &format!("stage2 c1={c1}"),
                &relations,
                &eliminate,
                target,
            )?);
        }
    }
    Ok(out)
}

/// Every rule of the three families for an N-state model at one evaluation pair.
pub fn all_rules(model: &ModelSpec, lambda: C64, mu: C64) -> Result<Vec<RuleCoefficients>> {
    let n = model.n();
    let mut out = Vec::new();
    for a in 1..=n {
        for b in 2..=n {
            out.push(generate_diag_creation_rule(model, a, b, lambda, mu)?);
        }
    }
    for a1 in 2..=n {
        for b1 in 2..=2 * n {
            for d1 in 0..=n - a1 {
                if creation_creation_window(n, a1, b1, d1) {
                    out.push(generate_creation_creation_rule(model, a1, b1, d1, lambda, mu)?);
                }
            }
        }
    }
    for a1 in 2..=n {
        for d1 in 0..=n - a1 {
            for b in 2..=n {
                out.push(generate_annihilation_creation_rule(model, a1, d1, b, lambda, mu)?);
                out.extend(generate_annihilation_auxiliary_rules(model, a1, d1, b, lambda, mu)?);
            }
        }
    }
    Ok(out)
}

/// Dense monodromy elements at λ and μ for lattice checks.
pub struct OperatorTable {
    lambda: Vec<DMatrix<C64>>,
    mu: Vec<DMatrix<C64>>,
    n: usize,
}

impl OperatorTable {
    /// Builds all N² elements at both arguments.
    pub fn new(ctx: &ChainContext, lambda: C64, mu: C64) -> Result<Self> {
        let n = ctx.n();
        let build = |x: C64| -> Result<Vec<DMatrix<C64>>> {
            let mono = ctx.monodromy(x)?;
            let mut v = Vec::with_capacity(n * n);
            for i in 1..=n {
                for j in 1..=n {
                    v.push(mono.dense_element(i, j)?);
                }
            }
            Ok(v)
        };
        Ok(OperatorTable { lambda: build(lambda)?, mu: build(mu)?, n })
    }

    fn get(&self, o: &OpRef) -> &DMatrix<C64> {
        let k = (o.row - 1) * self.n + (o.col - 1);
        match o.arg {
            Arg::Lambda => &self.lambda[k],
            Arg::Mu => &self.mu[k],
        }
    }

    fn apply(&self, p: &Product, v: &DVector<C64>) -> DVector<C64> {
        self.get(&p.left) * (self.get(&p.right) * v)
    }
}

/// Applies both sides of `rule` to random vectors on the chain and returns the
/// largest residual relative to the largest single piece of the rule.
pub fn check_rule_on_lattice(ctx: &ChainContext, rule: &RuleCoefficients, trials: usize, seed: u64) -> Result<f64> {
    let ops = OperatorTable::new(ctx, rule.lambda, rule.mu)?;
    Ok(check_rule_with(&ops, ctx.dim(), rule, trials, seed))
}

/// Lattice check reusing prebuilt operators.
pub fn check_rule_with(ops: &OperatorTable, dim: usize, rule: &RuleCoefficients, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials.max(1) {
        let v = DVector::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let lhs = ops.apply(&rule.target, &v);
        let mut scale = lhs.camax();
        let mut rhs = DVector::zeros(dim);
        for t in &rule.terms {
            let piece = ops.apply(&t.product, &v) * t.coefficient;
            scale = scale.max(piece.camax());
            rhs += piece;
        }
        let res = (lhs - rhs).camax() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(res);
    }
    worst
}

/// Copy of `rule` with its largest-magnitude coefficient set to zero.
pub fn zero_largest_coefficient(rule: &RuleCoefficients) -> RuleCoefficients {
    let mut broken = rule.clone();
    if let Some(t) = broken.terms.iter_mut().max_by(|x, y| x.coefficient.norm().total_cmp(&y.coefficient.norm())) {
        t.coefficient = ZERO;
    }
    broken
}
