//! Affine nonholonomic constraints `Psi^a = mu^a_0 + mu^a_alpha y^alpha`.
//!
//! Provides the compatibility matrix, reaction sections, Lagrange-d'Alembert
//! multipliers, the three projectors onto the constrained dynamics and the
//! constrained Poincaré-Cartan 2-section. All quantities are evaluated at
//! arbitrary points; only values on the constraint subbundle are canonical.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebroid::{AffgebroidModel, PhasePoint};
use crate::error::{check_len, Error, Result};
use crate::field::ScalarField;
use crate::lagrangian::{stack, Frame, FreeOperators, Lagrangian, LagrangianSystem};
use crate::linalg::{best_conditioned_columns, inverse_with_condition, null_space, rank, solve, Mat, Vector, COND_TOL};
use crate::prolong::{outer, vertical_endomorphism_matrix, ProlongCovector, ProlongVector};

/// Relative singular-value threshold for the constraint rank test.
const RANK_TOL: f64 = 1e-10;

/// Constraint coefficients as functions on the base.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    m: usize,
    n: usize,
    mu0: Vec<ScalarField>,
    mu: Vec<Vec<ScalarField>>,
}

impl ConstraintSet {
    /// Validates dimensions and full row rank of `(mu^a_alpha)` at deterministic sample points of `[-1, 1]^m`.
    pub fn new(m: usize, n: usize, mu0: Vec<ScalarField>, mu: Vec<Vec<ScalarField>>) -> Result<Self> {
        let r = mu.len();
        check_len("number of mu0 entries", r, mu0.len())?;
        if r == 0 {
            return Err(Error::Rank("at least one constraint is required".into()));
        }
        if r > n {
            return Err(Error::Rank(format!("{r} constraints exceed fibre rank {n}")));
        }
        for (a, row) in mu.iter().enumerate() {
            check_len(&format!("mu row {a}"), n, row.len())?;
            for f in row.iter().chain(std::iter::once(&mu0[a])) {
                check_len("constraint field arity", m, f.arity())?;
            }
        }
        let set = Self { m, n, mu0, mu };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut points = vec![vec![0.0; m]];
        points.extend((0..8).map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()));
        for x in &points {
            let (_, mu) = set.eval(x);
            let k = rank(&mu, RANK_TOL);
            if k < r {
                return Err(Error::Rank(format!(
                    "constraint matrix has rank {k} < {r} at base point {x:?}"
                )));
            }
        }
        Ok(set)
    }

    pub fn r(&self) -> usize {
        self.mu.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mu0_field(&self, a: usize) -> &ScalarField {
        &self.mu0[a]
    }

    pub fn mu_field(&self, a: usize, alpha: usize) -> &ScalarField {
        &self.mu[a][alpha]
    }

    /// True when every `mu^a_0` vanishes identically.
    pub fn is_linear(&self) -> bool {
        self.mu0.iter().all(ScalarField::is_zero)
    }

    /// `(mu0, mu)` at `x`.
    pub fn eval(&self, x: &[f64]) -> (Vector, Mat) {
        let mu0 = Vector::from_iterator(self.r(), self.mu0.iter().map(|f| f.value(x)));
        let mu = Mat::from_fn(self.r(), self.n, |a, b| self.mu[a][b].value(x));
        (mu0, mu)
    }

    /// `Psi^a(x, y)`.
    pub fn values(&self, p: &PhasePoint) -> Vector {
        let (mu0, mu) = self.eval(&p.x);
        mu0 + mu * Vector::from_column_slice(&p.y)
    }

    /// Values, `mu`, and the base gradient `dPsi^a/dx^i` as an r x m matrix.
    pub fn jet(&self, p: &PhasePoint) -> (Vector, Mat, Mat) {
        let (r, m) = (self.r(), self.m);
        let mut psi = Vector::zeros(r);
        let mut mu = Mat::zeros(r, self.n);
        let mut gx = Mat::zeros(r, m);
        for a in 0..r {
            let (v0, g0) = self.mu0[a].value_grad(&p.x);
            psi[a] = v0;
            for i in 0..m {
                gx[(a, i)] = g0[i];
            }
            for b in 0..self.n {
                let f = &self.mu[a][b];
                if let Some(c) = f.constant_value() {
                    mu[(a, b)] = c;
                    psi[a] += c * p.y[b];
                    continue;
                }
                let (v, g) = f.value_grad(&p.x);
                mu[(a, b)] = v;
                psi[a] += v * p.y[b];
                for i in 0..m {
                    gx[(a, i)] += g[i] * p.y[b];
                }
            }
        }
        (psi, mu, gx)
    }
}

/// Tolerances of a constrained system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub cond_tol: f64,
    pub on_constraint_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cond_tol: COND_TOL,
            on_constraint_tol: 1e-8,
        }
    }
}

/// A Lagrangian system subject to affine constraints.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub free: LagrangianSystem,
    pub constraints: ConstraintSet,
    pub tolerances: Tolerances,
}

/// Compatibility matrix with its inverse when regular.
#[derive(Debug, Clone)]
pub struct Compatibility {
    pub c: Mat,
    pub c_inv: Option<Mat>,
    pub condition: f64,
    pub regular: bool,
}

/// Output of the Lagrange-d'Alembert solve.
#[derive(Debug, Clone)]
pub struct ConstrainedDynamics {
    pub lambda: Vector,
    pub r_nh: ProlongVector,
    /// `(rho0 + rho y, v)`, the base-and-fibre velocity.
    pub field: Vector,
    pub on_constraint: bool,
}

/// All constrained data at one point.
#[derive(Debug, Clone)]
pub struct NhFrame {
    pub free: Frame,
    pub ops: FreeOperators,
    pub psi: Vector,
    pub mu: Mat,
    /// Flattened `dPsi^a`.
    pub dpsi: Vec<Vector>,
    /// Flattened `Z_a`.
    pub z: Vec<Vector>,
    pub c: Mat,
    pub c_inv: Mat,
    pub c_condition: f64,
}

impl ConstrainedSystem {
    pub fn new(free: LagrangianSystem, constraints: ConstraintSet) -> Result<Self> {
        check_len("constraint base dimension", free.model.m(), constraints.m())?;
        check_len("constraint fibre dimension", free.model.n(), constraints.n())?;
        let tolerances = Tolerances {
            cond_tol: free.cond_tol,
            ..Tolerances::default()
        };
        Ok(Self {
            free,
            constraints,
            tolerances,
        })
    }

    /// Builds from parts.
    pub fn from_parts(model: AffgebroidModel, l: Lagrangian, constraints: ConstraintSet) -> Result<Self> {
        Self::new(LagrangianSystem::new(model, l)?, constraints)
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self.free.cond_tol = tolerances.cond_tol;
        self
    }

    pub fn model(&self) -> &AffgebroidModel {
        &self.free.model
    }

    pub fn lagrangian(&self) -> &Lagrangian {
        &self.free.lagrangian
    }

    pub fn m(&self) -> usize {
        self.free.model.m()
    }

    pub fn n(&self) -> usize {
        self.free.model.n()
    }

    pub fn r(&self) -> usize {
        self.constraints.r()
    }

    pub fn constraint_values(&self, p: &PhasePoint) -> Result<Vector> {
        self.free.check_point(p)?;
        Ok(self.constraints.values(p))
    }

    pub fn on_constraint(&self, p: &PhasePoint) -> Result<bool> {
        Ok(self.constraint_values(p)?.amax() <= self.tolerances.on_constraint_tol)
    }

    fn differentials(&self, f: &Frame) -> (Vector, Mat, Vec<Vector>) {
        let (psi, mu, gx) = self.constraints.jet(&f.point);
        let dpsi = (0..self.r())
            .map(|a| {
                let fx = gx.row(a).transpose();
                let fy = mu.row(a).transpose();
                f.differential(&fx, &fy)
            })
            .collect();
        (psi, mu, dpsi)
    }

    /// `dPsi^a` in the dual basis `(phi_0, T^alpha, V^alpha)`.
    pub fn constraint_differential(&self, p: &PhasePoint) -> Result<Vec<ProlongCovector>> {
        self.free.check_point(p)?;
        let s = self.model().structure_at(&p.x)?;
        let (_, mu, gx) = self.constraints.jet(p);
        Ok((0..self.r())
            .map(|a| {
                let g = gx.row(a).transpose();
                ProlongCovector::new(
                    s.rho0.dot(&g),
                    (s.rho.transpose() * &g).iter().cloned().collect(),
                    mu.row(a).iter().cloned().collect(),
                )
            })
            .collect())
    }

    fn reactions(frame: &Frame, mu: &Mat) -> Vec<Vector> {
        let n = frame.n();
        (0..mu.nrows())
            .map(|a| {
                let v = -(&frame.w_inv * mu.row(a).transpose());
                let mut z = Vector::zeros(2 * n + 1);
                z.rows_mut(1 + n, n).copy_from(&v);
                z
            })
            .collect()
    }

    /// `Z_a = -W^{alpha beta} mu^a_beta V_alpha`.
    pub fn reaction_basis(&self, p: &PhasePoint) -> Result<Vec<ProlongVector>> {
        let f = self.free.frame(p)?;
        let (_, mu) = self.constraints.eval(&p.x);
        Ok(Self::reactions(&f, &mu).iter().map(ProlongVector::from_vector).collect())
    }

    /// `C^{ab} = -W^{alpha beta} mu^b_beta mu^a_alpha`.
    pub fn compatibility_matrix(&self, p: &PhasePoint) -> Result<Compatibility> {
        let f = self.free.frame(p)?;
        let (_, mu) = self.constraints.eval(&p.x);
        let c = -(&mu * &f.w_inv * mu.transpose());
        let (c_inv, condition) = match inverse_with_condition(&c) {
            Some((inv, k)) => (Some(inv), k),
            None => (None, f64::INFINITY),
        };
        let regular = condition <= self.tolerances.cond_tol;
        Ok(Compatibility {
            c,
            c_inv: if regular { c_inv } else { None },
            condition,
            regular,
        })
    }

    /// Evaluates every constrained ingredient at `p`; fails when `W`, `flat_L` or `C` is singular.
    pub fn nh_frame(&self, p: &PhasePoint) -> Result<NhFrame> {
        let free = self.free.frame(p)?;
        let ops = free.operators(self.tolerances.cond_tol)?;
        let (psi, mu, dpsi) = self.differentials(&free);
        let z = Self::reactions(&free, &mu);
        let c = -(&mu * &free.w_inv * mu.transpose());
        let (c_inv, c_condition) = crate::linalg::regular_inverse(&c, self.tolerances.cond_tol, "compatibility matrix")?;
        Ok(NhFrame {
            free,
            ops,
            psi,
            mu,
            dpsi,
            z,
            c,
            c_inv,
            c_condition,
        })
    }

    /// Multipliers and the constrained SODE `R_nh = R_L + lambda_a Z_a`.
    pub fn constrained_dynamics(&self, p: &PhasePoint) -> Result<ConstrainedDynamics> {
        let free = self.free.frame(p)?;
        let (psi, mu) = {
            let (mu0, mu) = self.constraints.eval(&p.x);
            (mu0 + &mu * Vector::from_column_slice(&p.y), mu)
        };
        let on_constraint = psi.amax() <= self.tolerances.on_constraint_tol;
        if !on_constraint {
            log::warn!("constrained dynamics evaluated off the constraint set (|Psi| = {:e})", psi.amax());
        }
        let (_, _, dpsi) = self.differentials(&free);
        let r_l = free.r_l();
        let rhs = Vector::from_iterator(self.r(), dpsi.iter().map(|d| -d.dot(&r_l)));
        let c = -(&mu * &free.w_inv * mu.transpose());
        let lambda = solve(&c, &rhs, self.tolerances.cond_tol, "compatibility matrix")?;
        let mut r_nh = r_l;
        for (a, z) in Self::reactions(&free, &mu).iter().enumerate() {
            r_nh += z * lambda[a];
        }
        let n = self.n();
        let v = r_nh.rows(1 + n, n).into_owned();
        Ok(ConstrainedDynamics {
            lambda,
            field: stack(&free.velocity, &v),
            r_nh: ProlongVector::from_vector(&r_nh),
            on_constraint,
        })
    }

    /// Base-and-fibre velocity of the constrained dynamics, for integration.
    pub fn constrained_field(&self, state: &[f64]) -> Result<Vector> {
        let p = PhasePoint::from_coords(self.m(), state);
        Ok(self.constrained_dynamics(&p)?.field)
    }

    /// Base-and-fibre velocity of the free Euler-Lagrange section.
    pub fn free_field(&self, state: &[f64]) -> Result<Vector> {
        let p = PhasePoint::from_coords(self.m(), state);
        Ok(self.free.euler_lagrange_section(&p)?.1)
    }

    /// `P = Id - C_{ac} Z_c (x) dPsi^a` and `Q = Id - P`.
    pub fn projector_affine(&self, p: &PhasePoint) -> Result<(Mat, Mat)> {
        Ok(self.nh_frame(p)?.projector_affine())
    }

    pub fn projector_cosymplectic(&self, p: &PhasePoint) -> Result<Mat> {
        Ok(self.nh_frame(p)?.projector_cosymplectic())
    }

    pub fn projector_poisson(&self, p: &PhasePoint) -> Result<Mat> {
        Ok(self.nh_frame(p)?.projector_poisson())
    }

    pub fn constrained_two_section(&self, p: &PhasePoint) -> Result<Mat> {
        Ok(self.nh_frame(p)?.constrained_two_section())
    }

    /// `{f, g}_L` for functions of `(x, y)` given as fields over `m + n` coordinates.
    /// Returns both `-dg(X_f)` and `Omega_L(X_f, X_g)`.
    pub fn bracket_l(&self, p: &PhasePoint, f: &ScalarField, g: &ScalarField) -> Result<(f64, f64)> {
        let frame = self.free.frame(p)?;
        let ops = frame.operators(self.tolerances.cond_tol)?;
        let coords = p.coords();
        let m = self.m();
        let d = |h: &ScalarField| -> Result<Vector> {
            let (_, grad) = h.try_value_grad(&coords)?;
            let fx = Vector::from_column_slice(&grad[..m]);
            let fy = Vector::from_column_slice(&grad[m..]);
            Ok(frame.differential(&fx, &fy))
        };
        let (df, dg) = (d(f)?, d(g)?);
        Ok(bracket_from_differentials(&ops, &df, &dg))
    }

    /// Random point on the constraint set with base in `[-xr, xr]^m` and free fibre entries in `[-yr, yr]`.
    /// Dependent fibre coordinates use the best-conditioned square minor of `mu`.
    pub fn sample_on_constraint<R: Rng>(&self, rng: &mut R, xr: f64, yr: f64) -> Result<PhasePoint> {
        let x: Vec<f64> = (0..self.m()).map(|_| rng.gen_range(-xr..=xr)).collect();
        let y: Vec<f64> = (0..self.n()).map(|_| rng.gen_range(-yr..=yr)).collect();
        self.complete_on_constraint(x, y)
    }

    /// Overwrites the dependent fibre coordinates of `(x, y)` so that all constraints hold.
    pub fn complete_on_constraint(&self, x: Vec<f64>, mut y: Vec<f64>) -> Result<PhasePoint> {
        let (mu0, mu) = self.constraints.eval(&x);
        let cols = best_conditioned_columns(&mu)?;
        let free_cols: Vec<usize> = (0..self.n()).filter(|k| !cols.contains(k)).collect();
        let mut rhs = -mu0;
        for &k in &free_cols {
            rhs -= mu.column(k) * y[k];
        }
        let dep = solve(&mu.select_columns(&cols), &rhs, f64::INFINITY, "constraint minor")?;
        for (i, &k) in cols.iter().enumerate() {
            y[k] = dep[i];
        }
        Ok(PhasePoint::new(x, y))
    }

    /// Dimension of `ker(dPsi) ∩ span{Z_a}` computed from a null-space basis,
    /// independently of the compatibility matrix.
    pub fn tangent_reaction_intersection_dim(&self, p: &PhasePoint) -> Result<usize> {
        let free = self.free.frame(p)?;
        let (_, mu, dpsi) = self.differentials(&free);
        let z = Self::reactions(&free, &mu);
        let d = Mat::from_rows(&dpsi.iter().map(|v| v.transpose()).collect::<Vec<_>>());
        let kernel = null_space(&d, 1e-12);
        let zm = Mat::from_columns(&z);
        let mut joint = Mat::zeros(kernel.nrows(), kernel.ncols() + zm.ncols());
        joint.view_mut((0, 0), (kernel.nrows(), kernel.ncols())).copy_from(&kernel);
        joint.view_mut((0, kernel.ncols()), (zm.nrows(), zm.ncols())).copy_from(&zm);
        let sum_dim = rank(&joint, 1e-10);
        let z_dim = rank(&zm, 1e-10);
        Ok(kernel.ncols() + z_dim - sum_dim)
    }
}

/// `(-dg(X_f), Omega(X_f, X_g))` with `X_h = -sharp(dh)`.
pub fn bracket_from_differentials(ops: &FreeOperators, df: &Vector, dg: &Vector) -> (f64, f64) {
    let xf = ops.hamiltonian_vector(df);
    let xg = ops.hamiltonian_vector(dg);
    (-dg.dot(&xf), xf.dot(&(&ops.omega * &xg)))
}

impl NhFrame {
    pub fn r(&self) -> usize {
        self.z.len()
    }

    pub fn dim(&self) -> usize {
        self.ops.omega.nrows()
    }

    /// `dPsi^a(R_L)`.
    pub fn rate_along_free(&self) -> Vector {
        Vector::from_iterator(self.r(), self.dpsi.iter().map(|d| d.dot(&self.ops.r_l)))
    }

    /// `S* dPsi^a` flattened.
    pub fn s_star_dpsi(&self) -> Vec<Vector> {
        let s = vertical_endomorphism_matrix(&self.free.point.y);
        self.dpsi.iter().map(|d| s.transpose() * d).collect()
    }

    /// `X^Lambda_{Psi^a}`.
    pub fn hamiltonian_vectors(&self) -> Vec<Vector> {
        self.dpsi.iter().map(|d| self.ops.hamiltonian_vector(d)).collect()
    }

    /// `grad Psi^a = flat^{-1}(dPsi^a)`.
    pub fn gradients(&self) -> Vec<Vector> {
        self.dpsi.iter().map(|d| self.ops.gradient(d)).collect()
    }

    /// Matrix of `{Psi^a, Psi^b}_L`.
    pub fn constraint_brackets(&self) -> Mat {
        let xs = self.hamiltonian_vectors();
        Mat::from_fn(self.r(), self.r(), |a, b| -self.dpsi[b].dot(&xs[a]))
    }

    pub fn projector_affine(&self) -> (Mat, Mat) {
        let dim = self.dim();
        let mut q = Mat::zeros(dim, dim);
        for a in 0..self.r() {
            for c in 0..self.r() {
                q += outer(&self.z[c], &self.dpsi[a]) * self.c_inv[(a, c)];
            }
        }
        (Mat::identity(dim, dim) - &q, q)
    }

    pub fn projector_cosymplectic(&self) -> Mat {
        let r = self.r();
        let ci = &self.c_inv;
        let rates = self.rate_along_free();
        let brackets = self.constraint_brackets();
        let sdp = self.s_star_dpsi();
        let grads = self.gradients();
        let mut p = Mat::identity(self.dim(), self.dim());
        for a in 0..r {
            for b in 0..r {
                for c in 0..r {
                    for d in 0..r {
                        let k = ci[(a, b)] * ci[(c, d)] * (brackets[(b, d)] + rates[b] * rates[d]);
                        p -= outer(&self.z[a], &sdp[c]) * k;
                    }
                }
                p += outer(&grads[a], &sdp[b]) * ci[(a, b)];
                p -= outer(&self.z[a], &self.dpsi[b]) * ci[(a, b)];
            }
        }
        p
    }

    pub fn projector_poisson(&self) -> Mat {
        let r = self.r();
        let ci = &self.c_inv;
        let brackets = self.constraint_brackets();
        let sdp = self.s_star_dpsi();
        let xs = self.hamiltonian_vectors();
        let mut p = Mat::identity(self.dim(), self.dim());
        for a in 0..r {
            for b in 0..r {
                for c in 0..r {
                    for d in 0..r {
                        let k = ci[(a, b)] * ci[(c, d)] * brackets[(b, d)];
                        p -= outer(&self.z[a], &sdp[c]) * k;
                    }
                }
                p += outer(&xs[a], &sdp[b]) * ci[(a, b)];
                p -= outer(&self.z[a], &self.dpsi[b]) * ci[(a, b)];
            }
        }
        p
    }

    /// `omega = Omega_L - (i_{Q(R_L)} Omega_L) ^ phi_0`.
    pub fn constrained_two_section(&self) -> Mat {
        let (_, q) = self.projector_affine();
        let c = self.ops.contract(&(q * &self.ops.r_l));
        let mut phi0 = Vector::zeros(self.dim());
        phi0[0] = 1.0;
        &self.ops.omega - crate::prolong::wedge(&c, &phi0)
    }
}
