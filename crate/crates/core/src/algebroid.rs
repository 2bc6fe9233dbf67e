//! Lie affgebroids in local coordinates.
//!
//! A model is described in the adapted basis `(e_0, e_1, .., e_n)` of its
//! bidual: anchor components `rho0^i`, `rho^i_alpha` and structure functions
//! `C^gamma_{0 alpha}`, `C^gamma_{alpha beta}`. Affine points carry only
//! `y^1..y^n`; the coordinate `y^0 = 1` is implicit.

use std::collections::BTreeMap;

use crate::error::{check_len, Error, Result};
use crate::field::ScalarField;
use crate::linalg::{Mat, Vector};

/// A point `(x^i, y^alpha)` of the affine bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    /// Concatenated coordinates `(x, y)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v
    }

    pub fn from_coords(m: usize, v: &[f64]) -> Self {
        Self::new(v[..m].to_vec(), v[m..].to_vec())
    }
}

/// Dense `n x n x n` array indexed `[gamma][alpha][beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, g: usize, a: usize, b: usize) -> f64 {
        self.data[(g * self.n + a) * self.n + b]
    }

    #[inline]
    pub fn set(&mut self, g: usize, a: usize, b: usize, v: f64) {
        self.data[(g * self.n + a) * self.n + b] = v;
    }
}

/// Anchor and structure functions evaluated at one base point.
#[derive(Debug, Clone)]
pub struct StructureAt {
    /// `rho0^i`, length m.
    pub rho0: Vector,
    /// `rho^i_alpha`, m x n.
    pub rho: Mat,
    /// `C^gamma_{0 alpha}` as `c0[(gamma, alpha)]`.
    pub c0: Mat,
    /// `C^gamma_{alpha beta}`.
    pub c: Tensor3,
}

impl StructureAt {
    /// `C^gamma_{0 alpha} + C^gamma_{beta alpha} y^beta` as a matrix indexed `(gamma, alpha)`.
    pub fn twisted(&self, y: &[f64]) -> Mat {
        let n = self.c0.nrows();
        let mut k = self.c0.clone();
        for g in 0..n {
            for a in 0..n {
                let mut s = 0.0;
                for b in 0..n {
                    s += self.c.get(g, b, a) * y[b];
                }
                k[(g, a)] += s;
            }
        }
        k
    }

    /// `rho0 + rho y`, the base velocity of an admissible curve.
    pub fn base_velocity(&self, y: &[f64]) -> Vector {
        &self.rho0 + &self.rho * Vector::from_column_slice(y)
    }
}

/// Local description of a Lie affgebroid over an `m`-dimensional chart with fibre rank `n`.
#[derive(Debug, Clone)]
pub struct AffgebroidModel {
    m: usize,
    n: usize,
    rho0: Vec<ScalarField>,
    rho: Vec<Vec<ScalarField>>,
    c0: Vec<Vec<ScalarField>>,
    /// Upper-triangle brackets `(gamma, alpha, beta, field)` with `alpha < beta`.
    c: Vec<(usize, usize, usize, ScalarField)>,
    base_names: Vec<String>,
    fiber_names: Vec<String>,
}

/// Incremental constructor for [`AffgebroidModel`]; indices are zero-based.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    base_names: Vec<String>,
    fiber_names: Vec<String>,
    rho0: Vec<ScalarField>,
    rho: Vec<Vec<ScalarField>>,
    c0: Vec<Vec<ScalarField>>,
    c: BTreeMap<(usize, usize, usize), ScalarField>,
    error: Option<Error>,
}

impl ModelBuilder {
    fn fail(&mut self, e: Error) {
        if self.error.is_none() {
            self.error = Some(e);
        }
    }

    fn check_field(&mut self, f: &ScalarField, what: &str) -> bool {
        let m = self.base_names.len();
        if f.arity() != m {
            self.fail(Error::Dimension {
                context: format!("arity of {what}"),
                expected: m,
                got: f.arity(),
            });
            return false;
        }
        true
    }

    /// Sets `rho^i_0`.
    pub fn rho0(mut self, i: usize, f: ScalarField) -> Self {
        if i >= self.base_names.len() {
            self.fail(Error::Model(format!("rho0 index {i} out of range")));
        } else if self.check_field(&f, "rho0") {
            self.rho0[i] = f;
        }
        self
    }

    /// Sets `rho^i_alpha`.
    pub fn rho(mut self, i: usize, alpha: usize, f: ScalarField) -> Self {
        if i >= self.base_names.len() || alpha >= self.fiber_names.len() {
            self.fail(Error::Model(format!("rho index ({i}, {alpha}) out of range")));
        } else if self.check_field(&f, "rho") {
            self.rho[i][alpha] = f;
        }
        self
    }

    /// Sets `C^gamma_{0 alpha}`.
    pub fn c0(mut self, gamma: usize, alpha: usize, f: ScalarField) -> Self {
        let n = self.fiber_names.len();
        if gamma >= n || alpha >= n {
            self.fail(Error::Model(format!("c0 index ({gamma}, {alpha}) out of range")));
        } else if self.check_field(&f, "c0") {
            self.c0[gamma][alpha] = f;
        }
        self
    }

    /// Sets `C^gamma_{alpha beta}`; the partner `C^gamma_{beta alpha}` follows by antisymmetry.
    pub fn bracket(mut self, gamma: usize, alpha: usize, beta: usize, f: ScalarField) -> Self {
        let n = self.fiber_names.len();
        if gamma >= n || alpha >= n || beta >= n {
            self.fail(Error::Model(format!(
                "bracket index ({gamma}, {alpha}, {beta}) out of range"
            )));
        } else if alpha == beta {
            self.fail(Error::Model(format!(
                "C^{gamma}_{{{alpha}{alpha}}} must vanish by antisymmetry"
            )));
        } else if self.check_field(&f, "bracket") {
            let (key, f) = if alpha < beta {
                ((gamma, alpha, beta), f)
            } else {
                ((gamma, beta, alpha), f.scale(-1.0))
            };
            self.c.insert(key, f);
        }
        self
    }

    pub fn build(self) -> Result<AffgebroidModel> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let (m, n) = (self.base_names.len(), self.fiber_names.len());
        if m == 0 {
            return Err(Error::Model("base dimension must be positive".into()));
        }
        if n == 0 {
            return Err(Error::Model("fibre rank must be positive".into()));
        }
        let c = self
            .c
            .into_iter()
            .filter(|(_, f)| !f.is_zero())
            .map(|((g, a, b), f)| (g, a, b, f))
            .collect();
        Ok(AffgebroidModel {
            m,
            n,
            rho0: self.rho0,
            rho: self.rho,
            c0: self.c0,
            c,
            base_names: self.base_names,
            fiber_names: self.fiber_names,
        })
    }
}

/// Residuals of the two structure relations over a set of base points.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Per point: (anchor-bracket residual, cyclic residual).
    pub per_point: Vec<(f64, f64)>,
    pub max_anchor_residual: f64,
    pub max_cyclic_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.max_anchor_residual.max(self.max_cyclic_residual)
    }
}

impl AffgebroidModel {
    /// Starts a model with all anchor and structure functions zero.
    pub fn builder<S: AsRef<str>>(base_names: &[S], fiber_names: &[S]) -> ModelBuilder {
        let base_names: Vec<String> = base_names.iter().map(|s| s.as_ref().to_string()).collect();
        let fiber_names: Vec<String> = fiber_names.iter().map(|s| s.as_ref().to_string()).collect();
        let (m, n) = (base_names.len(), fiber_names.len());
        ModelBuilder {
            rho0: vec![ScalarField::zero(m); m],
            rho: vec![vec![ScalarField::zero(m); n]; m],
            c0: vec![vec![ScalarField::zero(m); n]; n],
            c: BTreeMap::new(),
            base_names,
            fiber_names,
            error: None,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn fiber_names(&self) -> &[String] {
        &self.fiber_names
    }

    pub fn rho0_fields(&self) -> &[ScalarField] {
        &self.rho0
    }

    pub fn rho_field(&self, i: usize, alpha: usize) -> &ScalarField {
        &self.rho[i][alpha]
    }

    pub fn c0_field(&self, gamma: usize, alpha: usize) -> &ScalarField {
        &self.c0[gamma][alpha]
    }

    /// Nonzero upper-triangle brackets `(gamma, alpha, beta, C^gamma_{alpha beta})`, `alpha < beta`.
    pub fn bracket_fields(&self) -> &[(usize, usize, usize, ScalarField)] {
        &self.c
    }

    /// True when `rho0` and every `C^gamma_{0 alpha}` vanish identically.
    pub fn has_inert_affine_part(&self) -> bool {
        self.rho0.iter().all(ScalarField::is_zero)
            && self.c0.iter().flatten().all(ScalarField::is_zero)
    }

    /// Anchor components `(rho0, rho)` at `x`.
    pub fn eval_anchor(&self, x: &[f64]) -> Result<(Vector, Mat)> {
        check_len("base point", self.m, x.len())?;
        let rho0 = Vector::from_iterator(self.m, self.rho0.iter().map(|f| f.value(x)));
        let rho = Mat::from_fn(self.m, self.n, |i, a| self.rho[i][a].value(x));
        Ok((rho0, rho))
    }

    /// Structure functions `(C^gamma_{0 alpha}, C^gamma_{alpha beta})` at `x`.
    pub fn eval_structure(&self, x: &[f64]) -> Result<(Mat, Tensor3)> {
        check_len("base point", self.m, x.len())?;
        let c0 = Mat::from_fn(self.n, self.n, |g, a| self.c0[g][a].value(x));
        let mut c = Tensor3::zeros(self.n);
        for (g, a, b, f) in &self.c {
            let v = f.value(x);
            c.set(*g, *a, *b, v);
            c.set(*g, *b, *a, -v);
        }
        Ok((c0, c))
    }

    /// Anchor and structure together.
    pub fn structure_at(&self, x: &[f64]) -> Result<StructureAt> {
        let (rho0, rho) = self.eval_anchor(x)?;
        let (c0, c) = self.eval_structure(x)?;
        Ok(StructureAt { rho0, rho, c0, c })
    }

    /// Residuals `xdot_k - rho0(x_k) - rho(x_k) y_k`.
    pub fn admissibility_residual(
        &self,
        samples: &[(f64, PhasePoint)],
        xdot: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        check_len("admissibility samples", samples.len(), xdot.len())?;
        samples
            .iter()
            .zip(xdot)
            .map(|((_, p), xd)| {
                check_len("xdot", self.m, xd.len())?;
                check_len("fibre point", self.n, p.y.len())?;
                let s = self.structure_at(&p.x)?;
                let v = s.base_velocity(&p.y);
                Ok(xd.iter().zip(v.iter()).map(|(a, b)| a - b).collect())
            })
            .collect()
    }

    /// Evaluates the anchor/bracket compatibility and the cyclic identity with
    /// indices over `{0, 1, .., n}` and `C^0 = 0`.
    pub fn check_structure_identities(&self, points: &[Vec<f64>], tol: f64) -> Result<IdentityReport> {
        if points.is_empty() {
            return Err(Error::Evaluation("no sample points supplied".into()));
        }
        let mut per_point = Vec::with_capacity(points.len());
        for x in points {
            check_len("base point", self.m, x.len())?;
            per_point.push(self.identity_residuals(x)?);
        }
        let max_anchor_residual = per_point.iter().map(|r| r.0).fold(0.0, f64::max);
        let max_cyclic_residual = per_point.iter().map(|r| r.1).fold(0.0, f64::max);
        Ok(IdentityReport {
            passed: max_anchor_residual <= tol && max_cyclic_residual <= tol,
            per_point,
            max_anchor_residual,
            max_cyclic_residual,
            tol,
        })
    }

    fn identity_residuals(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (m, n) = (self.m, self.n);
        let nn = n + 1;
        let check = |v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation("non-finite structure derivative".into()))
            }
        };
        // Extended anchor rho^i_A and its gradient.
        let mut r = vec![vec![0.0; nn]; m];
        let mut dr = vec![vec![vec![0.0; m]; nn]; m];
        for i in 0..m {
            for a in 0..nn {
                let f = if a == 0 { &self.rho0[i] } else { &self.rho[i][a - 1] };
                let (v, g) = f.value_grad(x);
                r[i][a] = check(v)?;
                dr[i][a] = g;
            }
        }
        // Extended structure C^nu_{AB}, nu in 1..n (stored 0-based), with gradients.
        let mut c = vec![0.0; n * nn * nn];
        let mut dc = vec![vec![0.0; m]; n * nn * nn];
        let at = |g: usize, a: usize, b: usize| (g * nn + a) * nn + b;
        for g in 0..n {
            for a in 0..n {
                let (v, gr) = self.c0[g][a].value_grad(x);
                let v = check(v)?;
                c[at(g, 0, a + 1)] = v;
                c[at(g, a + 1, 0)] = -v;
                dc[at(g, a + 1, 0)] = gr.iter().map(|d| -d).collect();
                dc[at(g, 0, a + 1)] = gr;
            }
        }
        for (g, a, b, f) in &self.c {
            let (v, gr) = f.value_grad(x);
            let v = check(v)?;
            c[at(*g, a + 1, b + 1)] = v;
            c[at(*g, b + 1, a + 1)] = -v;
            dc[at(*g, b + 1, a + 1)] = gr.iter().map(|d| -d).collect();
            dc[at(*g, a + 1, b + 1)] = gr;
        }

        let mut anchor_res: f64 = 0.0;
        for a in 0..nn {
            for b in (a + 1)..nn {
                for i in 0..m {
                    let mut s = 0.0;
                    for j in 0..m {
                        s += r[j][a] * dr[i][b][j] - r[j][b] * dr[i][a][j];
                    }
                    for g in 0..n {
                        s -= r[i][g + 1] * c[at(g, a, b)];
                    }
                    anchor_res = anchor_res.max(s.abs());
                }
            }
        }

        let mut cyclic_res: f64 = 0.0;
        for a in 0..nn {
            for b in (a + 1)..nn {
                for g in (b + 1)..nn {
                    for nu in 0..n {
                        let mut s = 0.0;
                        for (p, q, w) in [(a, b, g), (b, g, a), (g, a, b)] {
                            for i in 0..m {
                                s += r[i][p] * dc[at(nu, q, w)][i];
                            }
                            for mu in 0..n {
                                s += c[at(mu, q, w)] * c[at(nu, p, mu + 1)];
                            }
                        }
                        cyclic_res = cyclic_res.max(s.abs());
                    }
                }
            }
        }
        Ok((anchor_res, cyclic_res))
    }
}
