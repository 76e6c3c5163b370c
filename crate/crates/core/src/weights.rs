//! R-matrix models, charge-block weight storage and the defining-relation checks.
//!
//! Index convention: the N²×N² matrix of an R-matrix has row `(a-1)N + (b-1)`
//! and column `(c-1)N + (d-1)` for the weight `R_{a,b}^{c,d}`. The ice rule
//! `a+b = c+d` splits the matrix into charge blocks `q = a+b-1`, `q = 1..2N-1`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{BetheError, Result};
use crate::linalg::{max_abs, C64, ONE, ZERO};

/// Built-in and user-supplied model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Trigonometric six-vertex model, N = 2.
    SixVertex,
    /// Trigonometric spin-s model with N = 2s+1 states (nineteen-vertex at N = 3).
    HigherSpinXxz,
    /// Weights read from a table of evaluation points.
    Table,
    /// Weights produced by a user callback.
    Custom,
}

impl ModelKind {
    /// Canonical lowercase name used in configs and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SixVertex => "six_vertex",
            ModelKind::HigherSpinXxz => "higher_spin_xxz",
            ModelKind::Table => "table",
            ModelKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = BetheError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "six_vertex" => Ok(ModelKind::SixVertex),
            "higher_spin_xxz" => Ok(ModelKind::HigherSpinXxz),
            "table" => Ok(ModelKind::Table),
            "custom" => Ok(ModelKind::Custom),
            other => Err(BetheError::InvalidOption(format!("unknown model '{other}'"))),
        }
    }
}

/// Lower and upper admissible first index of charge block `q` (1-based, inclusive).
pub fn block_range(n: usize, q: usize) -> (usize, usize) {
    let lo = if q + 1 > n { q + 1 - n } else { 1 };
    (lo.max(1), q.min(n))
}

/// One evaluated R-matrix stored by charge block.
///
/// Block `q` holds the entries `R_{a,q+1-a}^{c,q+1-c}` with row `a` and column
/// `c` shifted by the lower end of [`block_range`]. Entries violating the ice
/// rule have no storage and read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl WeightMatrix {
    /// All-zero weights for `n` local states.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "N must be positive");
        let blocks = (1..=2 * n - 1)
            .map(|q| {
                let (lo, hi) = block_range(n, q);
                let d = hi + 1 - lo;
                DMatrix::zeros(d, d)
            })
            .collect();
        WeightMatrix { n, blocks }
    }

    /// The permutation operator `R_{a,b}^{c,d} = δ_{a,d} δ_{b,c}`.
    pub fn permutation(n: usize) -> Self {
        let mut w = Self::zeros(n);
        for a in 1..=n {
            for b in 1..=n {
                w.set(a, b, b, a, ONE).expect("permutation respects the ice rule");
            }
        }
        w
    }

    /// Number of local states N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Charge block `q` (1-based).
    pub fn block(&self, q: usize) -> &DMatrix<C64> {
        &self.blocks[q - 1]
    }

    fn slot(&self, a: i64, b: i64, c: i64, d: i64) -> Option<(usize, usize, usize)> {
        let n = self.n as i64;
        if a < 1 || b < 1 || c < 1 || d < 1 || a > n || b > n || c > n || d > n {
            return None;
        }
        if a + b != c + d {
            return None;
        }
        let q = (a + b - 1) as usize;
        let (lo, _) = block_range(self.n, q);
        Some((q - 1, a as usize - lo, c as usize - lo))
    }

    /// Weight `R_{a,b}^{c,d}`; zero when an index is outside `1..=N` or the ice rule fails.
    pub fn get(&self, a: i64, b: i64, c: i64, d: i64) -> C64 {
        match self.slot(a, b, c, d) {
            Some((q, r, s)) => self.blocks[q][(r, s)],
            None => ZERO,
        }
    }

    /// Sets `R_{a,b}^{c,d}`; entries outside the ice rule cannot be stored.
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, value: C64) -> Result<()> {
        match self.slot(a as i64, b as i64, c as i64, d as i64) {
            Some((q, r, s)) => {
                self.blocks[q][(r, s)] = value;
                Ok(())
            }
            None if a + b != c + d => Err(BetheError::IceRuleViolation { a, b, c, d }),
            None => Err(BetheError::IndexOutOfRange(format!("({a},{b},{c},{d}) with N = {}", self.n))),
        }
    }

    /// Iterates over all stored entries as `((a,b,c,d), value)`.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), C64)> + '_ {
        let n = self.n;
        self.blocks.iter().enumerate().flat_map(move |(qi, blk)| {
            let q = qi + 1;
            let (lo, _) = block_range(n, q);
            (0..blk.nrows()).flat_map(move |r| {
                (0..blk.ncols()).map(move |s| {
                    let a = lo + r;
                    let c = lo + s;
                    ((a, q + 1 - a, c, q + 1 - c), blk[(r, s)])
                })
            })
        })
    }

    /// Dense N²×N² representation.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n * n, n * n);
        for ((a, b, c, d), v) in self.entries() {
            m[((a - 1) * n + b - 1, (c - 1) * n + d - 1)] = v;
        }
        m
    }

    /// Builds block storage from a dense matrix, rejecting nonzero non-ice entries.
    pub fn from_dense(n: usize, m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != n * n || m.ncols() != n * n {
            return Err(BetheError::IndexOutOfRange(format!(
                "dense weights must be {0}x{0}, got {1}x{2}",
                n * n,
                m.nrows(),
                m.ncols()
            )));
        }
        let report = check_ice_rule(m);
        if let Some((a, b, c, d)) = report.first_violation {
            return Err(BetheError::IceRuleViolation { a, b, c, d });
        }
        let mut w = Self::zeros(n);
        for blk_q in 1..=2 * n - 1 {
            let (lo, hi) = block_range(n, blk_q);
            for a in lo..=hi {
                for c in lo..=hi {
                    let b = blk_q + 1 - a;
                    let d = blk_q + 1 - c;
                    w.set(a, b, c, d, m[((a - 1) * n + b - 1, (c - 1) * n + d - 1)])?;
                }
            }
        }
        Ok(w)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(max_abs).fold(0.0, f64::max)
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|z| z.is_finite()))
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&mut self, s: C64) {
        for b in &mut self.blocks {
            *b *= s;
        }
    }
}

/// Outcome of an ice-rule scan.
#[derive(Debug, Clone, PartialEq)]
pub struct IceReport {
    /// True when no nonzero entry violates a+b = c+d.
    pub pass: bool,
    /// Number of violating entries.
    pub violations: usize,
    /// First violating index `(a,b,c,d)` in row-major order.
    pub first_violation: Option<(usize, usize, usize, usize)>,
}

/// Scans a dense N²×N² weight array for nonzero entries with a+b ≠ c+d.
pub fn check_ice_rule(m: &DMatrix<C64>) -> IceReport {
    let n = (m.nrows() as f64).sqrt().round() as usize;
    let mut violations = 0;
    let mut first = None;
    for a in 1..=n {
        for b in 1..=n {
            for c in 1..=n {
                for d in 1..=n {
                    if a + b != c + d && m[((a - 1) * n + b - 1, (c - 1) * n + d - 1)] != ZERO {
                        violations += 1;
                        if first.is_none() {
                            first = Some((a, b, c, d));
                        }
                    }
                }
            }
        }
    }
    IceReport { pass: violations == 0, violations, first_violation: first }
}

/// Evaluation callback of a `custom` model: returns the dense N²×N² weights at (λ, μ).
pub type WeightFn = dyn Fn(C64, C64) -> Result<DMatrix<C64>> + Send + Sync;

/// Stored records of a `table` model keyed by the bit patterns of (λ, μ).
#[derive(Debug, Clone, Default)]
pub struct WeightTable {
    records: HashMap<[u64; 4], DMatrix<C64>>,
    order: Vec<[u64; 4]>,
}

fn bits(z: C64) -> [u64; 2] {
    [(z.re + 0.0).to_bits(), (z.im + 0.0).to_bits()]
}

fn key(l: C64, m: C64) -> [u64; 4] {
    let [a, b] = bits(l);
    let [c, d] = bits(m);
    [a, b, c, d]
}

impl WeightTable {
    /// Stores the dense weights at (λ, μ), replacing any previous record.
    pub fn insert(&mut self, lambda: C64, mu: C64, dense: DMatrix<C64>) {
        let k = key(lambda, mu);
        if self.records.insert(k, dense).is_none() {
            self.order.push(k);
        }
    }

    /// Dense weights stored at (λ, μ).
    pub fn get(&self, lambda: C64, mu: C64) -> Option<&DMatrix<C64>> {
        self.records.get(&key(lambda, mu))
    }

    /// Stored evaluation points in insertion order.
    pub fn points(&self) -> Vec<(C64, C64)> {
        self.order
            .iter()
            .map(|k| {
                (
                    C64::new(f64::from_bits(k[0]), f64::from_bits(k[1])),
                    C64::new(f64::from_bits(k[2]), f64::from_bits(k[3])),
                )
            })
            .collect()
    }

    /// Dense records in insertion order.
    pub fn records(&self) -> impl Iterator<Item = (C64, C64, &DMatrix<C64>)> + '_ {
        self.points()
            .into_iter()
            .zip(self.order.iter())
            .map(move |((l, m), k)| (l, m, &self.records[k]))
    }

    /// Parses a table file with lines `lambda_re lambda_im mu_re mu_im a b c d w_re w_im`.
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let mut table = WeightTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| BetheError::Config { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 10 {
                return Err(err(format!("expected 10 fields, found {}", fields.len())));
            }
            let f = |k: usize| -> Result<f64> {
                fields[k].parse::<f64>().map_err(|e| err(format!("field {}: {e}", k + 1)))
            };
            let idx = |k: usize| -> Result<usize> {
                let v = fields[k].parse::<usize>().map_err(|e| err(format!("field {}: {e}", k + 1)))?;
                if v < 1 || v > n {
                    return Err(err(format!("index {v} outside 1..={n}")));
                }
                Ok(v)
            };
            let lambda = C64::new(f(0)?, f(1)?);
            let mu = C64::new(f(2)?, f(3)?);
            let (a, b, c, d) = (idx(4)?, idx(5)?, idx(6)?, idx(7)?);
            let w = C64::new(f(8)?, f(9)?);
            let k = key(lambda, mu);
            if !table.records.contains_key(&k) {
                table.order.push(k);
            }
            let m = table.records.entry(k).or_insert_with(|| DMatrix::zeros(n * n, n * n));
            m[((a - 1) * n + b - 1, (c - 1) * n + d - 1)] = w;
        }
        Ok(table)
    }

    /// Serializes the table in the file format read by [`WeightTable::parse`].
    pub fn to_text(&self, n: usize) -> String {
        let mut out = String::new();
        for (l, m, dense) in self.records() {
            for a in 1..=n {
                for b in 1..=n {
                    for c in 1..=n {
                        for d in 1..=n {
                            let w = dense[((a - 1) * n + b - 1, (c - 1) * n + d - 1)];
                            if w != ZERO {
                                out.push_str(&format!(
                                    "{:.17e} {:.17e} {:.17e} {:.17e} {a} {b} {c} {d} {:.17e} {:.17e}\n",
                                    l.re, l.im, m.re, m.im, w.re, w.im
                                ));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Per-charge-block spectral projectors of the spin-s two-site representation.
#[derive(Debug, Clone)]
struct SpinProjectors {
    /// For each block q (index q-1): list of (spin j, projector restricted to the block),
    /// with rows and columns labelled by the first-site state.
    blocks: Vec<Vec<(usize, DMatrix<C64>)>>,
}

fn qnum(x: f64, eta: C64) -> C64 {
    (eta * x).sinh() / eta.sinh()
}

impl SpinProjectors {
    fn new(n: usize, eta: C64) -> Result<Self> {
        let s = (n as f64 - 1.0) / 2.0;
        let m: Vec<f64> = (0..n).map(|k| s - k as f64).collect();
        let mut e = DMatrix::<C64>::zeros(n, n);
        for k in 1..n {
            let mm = m[k];
            e[(k - 1, k)] = (qnum(s - mm, eta) * qnum(s + mm + 1.0, eta)).sqrt();
        }
        let f = e.transpose();
        let k_op = DMatrix::from_fn(n, n, |i, j| if i == j { (eta * m[i]).exp() } else { ZERO });
        let k_inv = DMatrix::from_fn(n, n, |i, j| if i == j { (-eta * m[i]).exp() } else { ZERO });
        let de = e.kronecker(&k_op) + k_inv.kronecker(&e);
        let df = f.kronecker(&k_op) + k_inv.kronecker(&f);
        let mut cas = &df * &de;
        for a in 0..n {
            for b in 0..n {
                let i = a * n + b;
                let v = qnum(m[a] + m[b] + 0.5, eta);
                cas[(i, i)] += v * v;
            }
        }
        let cval = |j: usize| {
            let v = qnum(j as f64 + 0.5, eta);
            v * v
        };
        let mut blocks = Vec::with_capacity(2 * n - 1);
        for q in 1..=2 * n - 1 {
            let (lo, hi) = block_range(n, q);
            let dim = hi + 1 - lo;
            let idx = |a: usize| (a - 1) * n + (q + 1 - a) - 1;
            let cb = DMatrix::from_fn(dim, dim, |r, c| cas[(idx(lo + r), idx(lo + c))]);
            let mtot = (n as i64 - q as i64).unsigned_abs() as usize;
            let spins: Vec<usize> = (mtot..n).collect();
            let mut projs = Vec::with_capacity(spins.len());
            for &j in &spins {
                let mut p = DMatrix::<C64>::identity(dim, dim);
                for &k in &spins {
                    if k != j {
                        let den = cval(j) - cval(k);
                        if den.norm() < 1e-300 {
                            return Err(BetheError::ParameterDomain(format!(
                                "anisotropy {eta} makes Casimir eigenvalues degenerate"
                            )));
                        }
                        let shifted = &cb - DMatrix::<C64>::identity(dim, dim) * cval(k);
                        p = (&p * shifted) / den;
                    }
                }
                // McWeeny purification P <- 3P^2 - 2P^3.
                for _ in 0..3 {
                    let p2 = &p * &p;
                    p = &p2 * C64::new(3.0, 0.0) - &p2 * &p * C64::new(2.0, 0.0);
                }
                projs.push((j, p));
            }
            blocks.push(projs);
        }
        Ok(SpinProjectors { blocks })
    }
}

/// A weight model: family, number of states, named parameters and evaluation data.
#[derive(Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    n: usize,
    params: BTreeMap<String, C64>,
    label: String,
    table: Option<Arc<WeightTable>>,
    custom: Option<Arc<WeightFn>>,
    projectors: Option<Arc<SpinProjectors>>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .field("params", &self.params)
            .field("label", &self.label)
            .finish()
    }
}

/// Default anisotropy of the built-in trigonometric models.
pub const DEFAULT_ETA: f64 = 0.6;

impl ModelSpec {
    /// Six-vertex model with anisotropy `eta`, normalized so that unitarity holds exactly.
    pub fn six_vertex(eta: C64) -> Result<Self> {
        check_eta(eta)?;
        let mut params = BTreeMap::new();
        params.insert("eta".to_string(), eta);
        Ok(ModelSpec {
            kind: ModelKind::SixVertex,
            n: 2,
            params,
            label: "six_vertex".into(),
            table: None,
            custom: None,
            projectors: None,
        })
    }

    /// Spin-s trigonometric model on `n = 2s+1` states with anisotropy `eta`.
    pub fn higher_spin_xxz(n: usize, eta: C64) -> Result<Self> {
        if n < 2 {
            return Err(BetheError::InvalidOption(format!("N must be at least 2, got {n}")));
        }
        check_eta(eta)?;
        let projectors = SpinProjectors::new(n, eta)?;
        let mut params = BTreeMap::new();
        params.insert("eta".to_string(), eta);
        Ok(ModelSpec {
            kind: ModelKind::HigherSpinXxz,
            n,
            params,
            label: "higher_spin_xxz".into(),
            table: None,
            custom: None,
            projectors: Some(Arc::new(projectors)),
        })
    }

    /// Model backed by stored weight records; supports the checkers only.
    pub fn table(n: usize, table: WeightTable) -> Result<Self> {
        if n < 2 {
            return Err(BetheError::InvalidOption(format!("N must be at least 2, got {n}")));
        }
        Ok(ModelSpec {
            kind: ModelKind::Table,
            n,
            params: BTreeMap::new(),
            label: "table".into(),
            table: Some(Arc::new(table)),
            custom: None,
            projectors: None,
        })
    }

    /// Model evaluated by a user callback returning dense N²×N² weights.
    pub fn custom(n: usize, label: &str, f: Arc<WeightFn>) -> Result<Self> {
        if n < 2 {
            return Err(BetheError::InvalidOption(format!("N must be at least 2, got {n}")));
        }
        Ok(ModelSpec {
            kind: ModelKind::Custom,
            n,
            params: BTreeMap::new(),
            label: label.to_string(),
            table: None,
            custom: Some(f),
            projectors: None,
        })
    }

    /// Custom model whose R-matrix is the permutation operator at every argument.
    pub fn permutation(n: usize) -> Result<Self> {
        let dense = WeightMatrix::permutation(n).to_dense();
        Self::custom(n, "permutation", Arc::new(move |_, _| Ok(dense.clone())))
    }

    /// Model family.
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of local states N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Named parameters.
    pub fn params(&self) -> &BTreeMap<String, C64> {
        &self.params
    }

    /// Display label (family name or the custom label).
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Stored table, for `table` models.
    pub fn weight_table(&self) -> Option<&WeightTable> {
        self.table.as_deref()
    }

    /// True when the model can be evaluated at arbitrary rapidities.
    pub fn supports_arbitrary_arguments(&self) -> bool {
        self.kind != ModelKind::Table
    }

    /// Anisotropy parameter, if the model has one.
    pub fn eta(&self) -> Option<C64> {
        self.params.get("eta").copied()
    }

    /// Rapidity at which the built-in models are regular (R ∝ P).
    pub fn regular_point(&self) -> C64 {
        ZERO
    }

    /// Window `(center, half_width_re, half_width_im)` used to seed Bethe-root searches.
    pub fn seed_window(&self) -> (C64, f64, f64) {
        let eta = self.eta().unwrap_or(C64::new(DEFAULT_ETA, 0.0));
        let center = -eta * ((self.n as f64 - 1.0) / 2.0);
        (center, 1.5, std::f64::consts::FRAC_PI_2)
    }

    /// Evaluates R(λ, μ) in charge-block form.
    pub fn eval_r(&self, lambda: C64, mu: C64) -> Result<WeightMatrix> {
        if !lambda.is_finite() || !mu.is_finite() {
            return Err(BetheError::ParameterDomain("non-finite spectral parameter".into()));
        }
        let w = match self.kind {
            ModelKind::SixVertex => six_vertex_weights(self.eta().expect("eta"), lambda - mu)?,
            ModelKind::HigherSpinXxz => higher_spin_weights(
                self.n,
                self.eta().expect("eta"),
                self.projectors.as_ref().expect("projectors"),
                lambda - mu,
            )?,
            ModelKind::Table => {
                let table = self.table.as_ref().expect("table data");
                let dense = table.get(lambda, mu).ok_or_else(|| BetheError::UnknownGridPoint {
                    lambda: format!("{lambda}"),
                    mu: format!("{mu}"),
                })?;
                WeightMatrix::from_dense(self.n, dense)?
            }
            ModelKind::Custom => {
                let f = self.custom.as_ref().expect("callback");
                let dense = f(lambda, mu)?;
                WeightMatrix::from_dense(self.n, &dense)?
            }
        };
        if !w.is_finite() {
            return Err(BetheError::ParameterDomain(format!(
                "non-finite weights at (lambda, mu) = ({lambda}, {mu})"
            )));
        }
        Ok(w)
    }

    /// Dense weights at (λ, μ) including non-ice entries a table or callback may carry.
    pub fn eval_dense_raw(&self, lambda: C64, mu: C64) -> Result<DMatrix<C64>> {
        match self.kind {
            ModelKind::Table => {
                let table = self.table.as_ref().expect("table data");
                table.get(lambda, mu).cloned().ok_or_else(|| BetheError::UnknownGridPoint {
                    lambda: format!("{lambda}"),
                    mu: format!("{mu}"),
                })
            }
            ModelKind::Custom => (self.custom.as_ref().expect("callback"))(lambda, mu),
            _ => Ok(self.eval_r(lambda, mu)?.to_dense()),
        }
    }
}

fn check_eta(eta: C64) -> Result<()> {
    if !eta.is_finite() || eta.sinh().norm() < 1e-12 {
        return Err(BetheError::ParameterDomain(format!("anisotropy {eta} is degenerate")));
    }
    Ok(())
}

fn six_vertex_weights(eta: C64, u: C64) -> Result<WeightMatrix> {
    let rho = (eta - u).sinh();
    if rho.norm() < 1e-300 {
        return Err(BetheError::ParameterDomain(format!("pole of the six-vertex weights at u = {u}")));
    }
    let a = (u + eta).sinh() / rho;
    let b = u.sinh() / rho;
    let c = eta.sinh() / rho;
    let mut w = WeightMatrix::zeros(2);
    w.set(1, 1, 1, 1, a)?;
    w.set(2, 2, 2, 2, a)?;
    w.set(1, 2, 1, 2, b)?;
    w.set(2, 1, 2, 1, b)?;
    w.set(1, 2, 2, 1, c)?;
    w.set(2, 1, 1, 2, c)?;
    Ok(w)
}

fn higher_spin_weights(n: usize, eta: C64, proj: &SpinProjectors, u: C64) -> Result<WeightMatrix> {
    let pole = |z: C64, what: &str| -> Result<C64> {
        if z.norm() < 1e-300 {
            Err(BetheError::ParameterDomain(format!("pole of the spin-s weights ({what}) at u = {u}")))
        } else {
            Ok(z)
        }
    };
    let mut rho = vec![ONE; n];
    for (j, r) in rho.iter_mut().enumerate() {
        for k in (j + 1)..n {
            let kf = k as f64;
            *r *= (eta * kf - u).sinh() / pole((eta * kf + u).sinh(), "eigenvalue ratio")?;
        }
    }
    let mut norm = ONE;
    for k in 1..n {
        let kf = k as f64;
        norm *= (eta * kf + u).sinh() / pole((eta * kf - u).sinh(), "normalization")?;
    }
    let mut w = WeightMatrix::zeros(n);
    for q in 1..=2 * n - 1 {
        let (lo, hi) = block_range(n, q);
        let dim = hi + 1 - lo;
        let mut check = DMatrix::<C64>::zeros(dim, dim);
        for (j, p) in &proj.blocks[q - 1] {
            check += p * rho[*j];
        }
        for a in lo..=hi {
            let b = q + 1 - a;
            for c in lo..=hi {
                let d = q + 1 - c;
                let gauge = (u * (a as f64 - c as f64)).exp();
                let v = check[(b - lo, c - lo)] * gauge * norm;
                w.set(a, b, c, d, v)?;
            }
        }
    }
    Ok(w)
}

/// Dense permutation operator on C^N ⊗ C^N.
pub fn permutation_matrix(n: usize) -> DMatrix<C64> {
    WeightMatrix::permutation(n).to_dense()
}

/// Max-abs residual of a check with the 1-based location of the worst entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// Max-abs residual (normalized as documented by each check).
    pub residual: f64,
    /// 1-based indices of the worst entry; empty when the residual is zero.
    pub worst: Vec<usize>,
}

fn worst_entry(m: &DMatrix<C64>) -> (f64, usize, usize) {
    let mut best = (0.0, 0, 0);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)].norm();
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    best
}

fn digits(mut idx: usize, n: usize, count: usize) -> Vec<usize> {
    let mut out = vec![0; count];
    for k in (0..count).rev() {
        out[k] = idx % n + 1;
        idx /= n;
    }
    out
}

/// Yang–Baxter residual `R12(λ1,λ2) R13(λ1,λ3) R23(λ2,λ3) − R23 R13 R12`.
///
/// The max-abs entry of the difference is divided by the largest weight
/// magnitude among the three evaluations. The worst entry is reported as
/// `(a1,a2,a3,c1,c2,c3)`.
pub fn check_yang_baxter(model: &ModelSpec, l1: C64, l2: C64, l3: C64) -> Result<CheckResult> {
    let n = model.n();
    let r12 = model.eval_dense_raw(l1, l2)?;
    let r13 = model.eval_dense_raw(l1, l3)?;
    let r23 = model.eval_dense_raw(l2, l3)?;
    let scale = max_abs(&r12).max(max_abs(&r13)).max(max_abs(&r23));
    let id = DMatrix::<C64>::identity(n, n);
    let p23 = id.kronecker(&permutation_matrix(n));
    let a12 = r12.kronecker(&id);
    let a13 = &p23 * r13.kronecker(&id) * &p23;
    let a23 = id.kronecker(&r23);
    let diff = &a12 * &a13 * &a23 - &a23 * &a13 * &a12;
    let (v, i, j) = worst_entry(&diff);
    let residual = if scale > 0.0 { v / scale } else { v };
    let worst = if v > 0.0 {
        let mut w = digits(i, n, 3);
        w.extend(digits(j, n, 3));
        w
    } else {
        Vec::new()
    };
    Ok(CheckResult { residual, worst })
}

/// Unitarity residual `‖P R(λ,μ) P R(μ,λ) − I‖_max` with the worst entry `(a,b,c,d)`.
pub fn check_unitarity(model: &ModelSpec, lambda: C64, mu: C64) -> Result<CheckResult> {
    let n = model.n();
    let p = permutation_matrix(n);
    let r1 = model.eval_dense_raw(lambda, mu)?;
    let r2 = model.eval_dense_raw(mu, lambda)?;
    let diff = &p * r1 * &p * r2 - DMatrix::<C64>::identity(n * n, n * n);
    let (v, i, j) = worst_entry(&diff);
    let worst = if v > 0.0 {
        let mut w = digits(i, n, 2);
        w.extend(digits(j, n, 2));
        w
    } else {
        Vec::new()
    };
    Ok(CheckResult { residual: v, worst })
}

/// Regularity residual `‖R(λ,λ) − ρ P‖_max` with `ρ = R(λ,λ)_{1,1}^{1,1}`; returns `(result, ρ)`.
pub fn check_regularity(model: &ModelSpec, lambda: C64) -> Result<(CheckResult, C64)> {
    let n = model.n();
    let r = model.eval_dense_raw(lambda, lambda)?;
    let rho = r[(0, 0)];
    let diff = r - permutation_matrix(n) * rho;
    let (v, i, j) = worst_entry(&diff);
    let worst = if v > 0.0 {
        let mut w = digits(i, n, 2);
        w.extend(digits(j, n, 2));
        w
    } else {
        Vec::new()
    };
    Ok((CheckResult { residual: v, worst }, rho))
}

/// Independent-weight block `a^{j,q1}` of a weight matrix.
///
/// `j = 1` reads `R_{q1+1-b,b}^{c,q1+1-c}` and `j = 2` reads
/// `R_{N+1-b,N-q1+b}^{N-q1+c,N+1-c}` for `b, c = 1..q1`.
pub fn charge_block(w: &WeightMatrix, j: usize, q1: usize) -> Result<DMatrix<C64>> {
    let n = w.n();
    if q1 < 1 || q1 > n || !(j == 1 || j == 2) {
        return Err(BetheError::IndexOutOfRange(format!("charge block j = {j}, q1 = {q1}, N = {n}")));
    }
    let (q, nn) = (q1 as i64, n as i64);
    Ok(DMatrix::from_fn(q1, q1, |r, s| {
        let (b, c) = (r as i64 + 1, s as i64 + 1);
        if j == 1 {
            w.get(q + 1 - b, b, c, q + 1 - c)
        } else {
            w.get(nn + 1 - b, nn - q + b, nn - q + c, nn + 1 - c)
        }
    }))
}

/// Reads a table model from a file.
pub fn load_table(n: usize, path: &Path) -> Result<WeightTable> {
    let text = std::fs::read_to_string(path)?;
    WeightTable::parse(n, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn block_ranges_cover_all_pairs() {
        for n in 2..=5 {
            let total: usize = (1..=2 * n - 1)
                .map(|q| {
                    let (lo, hi) = block_range(n, q);
                    let d = hi + 1 - lo;
                    d * d
                })
                .sum();
            let ice: usize = (1..=n)
                .flat_map(|a| (1..=n).flat_map(move |b| (1..=n).map(move |c| (a, b, c))))
                .filter(|&(a, b, c)| a + b > c && a + b - c <= n)
                .count();
            assert_eq!(total, ice);
        }
    }

    #[test]
    fn dense_round_trip() {
        let m = ModelSpec::higher_spin_xxz(3, c(0.6, 0.2)).unwrap();
        let w = m.eval_r(c(0.3, 0.1), c(-0.2, 0.05)).unwrap();
        let back = WeightMatrix::from_dense(3, &w.to_dense()).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn ice_rule_structural() {
        let m = ModelSpec::six_vertex(c(0.6, 0.0)).unwrap();
        let w = m.eval_r(c(0.4, 0.2), c(0.1, 0.0)).unwrap();
        assert_ne!(w.get(1, 2, 2, 1), ZERO);
        assert_eq!(w.get(1, 1, 1, 2), ZERO);
        assert!(w.entries().all(|((a, b, cc, d), _)| a + b == cc + d));
    }

    #[test]
    fn injected_violation_is_reported() {
        let mut dense = permutation_matrix(2);
        dense[(0, 1)] = c(1e-3, 0.0);
        let rep = check_ice_rule(&dense);
        assert!(!rep.pass);
        assert_eq!(rep.first_violation, Some((1, 1, 1, 2)));
        assert!(WeightMatrix::from_dense(2, &dense).is_err());
    }

    #[test]
    fn permutation_passes_every_check() {
        let m = ModelSpec::permutation(3).unwrap();
        assert!(check_ice_rule(&permutation_matrix(3)).pass);
        assert_eq!(check_yang_baxter(&m, c(0.1, 0.0), c(0.2, 0.0), c(0.3, 0.0)).unwrap().residual, 0.0);
        assert_eq!(check_unitarity(&m, c(0.1, 0.0), c(0.2, 0.0)).unwrap().residual, 0.0);
        let (res, rho) = check_regularity(&m, c(0.1, 0.0)).unwrap();
        assert_eq!(res.residual, 0.0);
        assert_eq!(rho, ONE);
    }

    #[test]
    fn six_vertex_is_regular_at_coincident_points() {
        let m = ModelSpec::six_vertex(c(0.6, 0.3)).unwrap();
        let (res, rho) = check_regularity(&m, c(0.25, -0.1)).unwrap();
        assert!(res.residual < 1e-12);
        assert!((rho - ONE).norm() < 1e-12);
    }

    #[test]
    fn table_round_trip_is_exact() {
        let m = ModelSpec::six_vertex(c(0.6, 0.0)).unwrap();
        let w = m.eval_r(c(0.3, 0.0), c(0.1, 0.0)).unwrap();
        let mut t = WeightTable::default();
        t.insert(c(0.3, 0.0), c(0.1, 0.0), w.to_dense());
        let tm = ModelSpec::table(2, t).unwrap();
        assert_eq!(tm.eval_r(c(0.3, 0.0), c(0.1, 0.0)).unwrap(), w);
        assert!(matches!(
            tm.eval_r(c(0.3, 0.0), c(0.2, 0.0)),
            Err(BetheError::UnknownGridPoint { .. })
        ));
        assert!(matches!(check_regularity(&tm, c(0.3, 0.0)), Err(BetheError::UnknownGridPoint { .. })));
    }

    #[test]
    fn table_text_round_trip() {
        let m = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let w = m.eval_r(c(0.3, 0.2), c(0.1, -0.4)).unwrap();
        let mut t = WeightTable::default();
        t.insert(c(0.3, 0.2), c(0.1, -0.4), w.to_dense());
        let text = t.to_text(3);
        let parsed = WeightTable::parse(3, &text).unwrap();
        let back = ModelSpec::table(3, parsed).unwrap().eval_r(c(0.3, 0.2), c(0.1, -0.4)).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn charge_block_first_block_is_scalar() {
        let m = ModelSpec::higher_spin_xxz(3, c(0.6, 0.0)).unwrap();
        let w = m.eval_r(c(0.3, 0.1), c(0.0, 0.0)).unwrap();
        let b = charge_block(&w, 1, 1).unwrap();
        assert_eq!(b.shape(), (1, 1));
        assert_eq!(b[(0, 0)], w.get(1, 1, 1, 1));
        assert_eq!(charge_block(&w, 2, 3).unwrap(), charge_block(&w, 1, 3).unwrap());
        assert!(charge_block(&w, 1, 4).is_err());
    }

    #[test]
    fn charge_blocks_reassemble_all_entries() {
        let n = 4;
        let m = ModelSpec::higher_spin_xxz(n, c(0.5, 0.1)).unwrap();
        let w = m.eval_r(c(0.3, 0.1), c(-0.1, 0.2)).unwrap();
        let mut rebuilt = WeightMatrix::zeros(n);
        for q1 in 1..=n {
            let blk = charge_block(&w, 1, q1).unwrap();
            for b in 1..=q1 {
                for cc in 1..=q1 {
                    rebuilt.set(q1 + 1 - b, b, cc, q1 + 1 - cc, blk[(b - 1, cc - 1)]).unwrap();
                }
            }
        }
        for q1 in 1..n {
            let blk = charge_block(&w, 2, q1).unwrap();
            for b in 1..=q1 {
                for cc in 1..=q1 {
                    rebuilt
                        .set(n + 1 - b, n - q1 + b, n - q1 + cc, n + 1 - cc, blk[(b - 1, cc - 1)])
                        .unwrap();
                }
            }
        }
        assert_eq!(rebuilt, w);
    }
}
