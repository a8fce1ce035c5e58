//! Fixed-step integrators for `dY/dt = A(t, Y) Y`.
//!
//! Five families share one driver:
//!
//! * classical explicit RK on `f(t, y) = A(t, y) y`,
//! * Williamson 2N-storage classical RK,
//! * the 2N-storage commutator-free Lie group method,
//! * Runge-Kutta-Munthe-Kaas with truncated `dexpinv`,
//! * a general commutator-free executor (Crouch-Grossman and friends).

mod cf;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use cf::{CfCoefficients, CONSISTENCY_TOLERANCE};

use crate::smallmat::{commutator, expm, mat_mul, Matrix, MatrixError, Scalar};
use crate::tableau::{Scheme, Tableau, TableauError, TwoNScheme};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("integration diverged at t = {t}")]
    Divergence { t: f64 },
    #[error("right-hand side returned a {got:?} matrix, expected {expected}x{expected}")]
    RhsShape { got: (usize, usize), expected: usize },
    #[error("initial state is {got:?}, problem expects {expected:?}")]
    StateShape {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("dexpinv truncation {0} unsupported (1..={max})", max = MAX_DEXPINV_TERMS)]
    Truncation(usize),
    #[error("inconsistent commutator-free coefficients: {what} off by {residual:e}")]
    Consistency { what: String, residual: f64 },
    #[error("invalid configuration: {0}")]
    Configuration(String),
    #[error("invalid interval: t0 = {t0}, t1 = {t1}, h = {h}")]
    Interval { t0: f64, t1: f64, h: f64 },
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type RhsFn<T> = dyn Fn(f64, &Matrix<T>) -> Matrix<T> + Send + Sync;
pub type DriftFn<T> = dyn Fn(&Matrix<T>) -> f64 + Send + Sync;

/// A manifold ODE `dY/dt = A(t, Y) Y`.
#[derive(Clone)]
pub struct Problem<T: Scalar> {
    name: String,
    state_rows: usize,
    state_cols: usize,
    rhs: Arc<RhsFn<T>>,
    invariant: Option<Arc<DriftFn<T>>>,
}

impl<T: Scalar> fmt::Debug for Problem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("state_rows", &self.state_rows)
            .field("state_cols", &self.state_cols)
            .field("has_invariant", &self.invariant.is_some())
            .finish()
    }
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        name: impl Into<String>,
        state_rows: usize,
        state_cols: usize,
        rhs: impl Fn(f64, &Matrix<T>) -> Matrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            state_rows,
            state_cols,
            rhs: Arc::new(rhs),
            invariant: None,
        }
    }

    /// Attaches a drift measure that is zero along exact solutions.
    pub fn with_invariant(
        mut self,
        drift: impl Fn(&Matrix<T>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.invariant = Some(Arc::new(drift));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_shape(&self) -> (usize, usize) {
        (self.state_rows, self.state_cols)
    }

    /// The algebra element `A(t, Y)`.
    pub fn generator(&self, t: f64, y: &Matrix<T>) -> Result<Matrix<T>, IntegrationError> {
        let a = (self.rhs)(t, y);
        if a.shape() != (self.state_rows, self.state_rows) {
            return Err(IntegrationError::RhsShape {
                got: a.shape(),
                expected: self.state_rows,
            });
        }
        Ok(a)
    }

    /// The classical right-hand side `A(t, y) y`.
    pub fn vector_field(&self, t: f64, y: &Matrix<T>) -> Result<Matrix<T>, IntegrationError> {
        Ok(mat_mul(&self.generator(t, y)?, y)?)
    }

    pub fn invariant_drift(&self, y: &Matrix<T>) -> Option<f64> {
        self.invariant.as_ref().map(|f| f(y))
    }

    fn check_state(&self, y: &Matrix<T>) -> Result<(), IntegrationError> {
        if y.shape() != self.state_shape() {
            return Err(IntegrationError::StateShape {
                got: y.shape(),
                expected: self.state_shape(),
            });
        }
        Ok(())
    }
}

/// Right-hand-side evaluations and matrix exponentials performed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Work {
    pub rhs_evals: usize,
    pub exponentials: usize,
    pub steps: usize,
}

struct Counted<'a, T: Scalar> {
    problem: &'a Problem<T>,
    work: &'a mut Work,
}

impl<T: Scalar> Counted<'_, T> {
    fn generator(&mut self, t: f64, y: &Matrix<T>) -> Result<Matrix<T>, IntegrationError> {
        self.work.rhs_evals += 1;
        self.problem.generator(t, y)
    }

    fn vector_field(&mut self, t: f64, y: &Matrix<T>) -> Result<Matrix<T>, IntegrationError> {
        self.work.rhs_evals += 1;
        self.problem.vector_field(t, y)
    }

    /// `exp(x) y`.
    fn exp_act(&mut self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>, IntegrationError> {
        self.work.exponentials += 1;
        Ok(mat_mul(&expm(x)?, y)?)
    }
}

/// Integrator family selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    ClassicalRk,
    Classical2N,
    LieCf2N,
    Rkmk,
    GenericCf,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::ClassicalRk => "classical",
            Family::Classical2N => "classical2n",
            Family::LieCf2N => "liecf",
            Family::Rkmk => "rkmk",
            Family::GenericCf => "cf",
        }
    }

    pub fn is_lie(self) -> bool {
        matches!(self, Family::LieCf2N | Family::Rkmk | Family::GenericCf)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = IntegrationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "classical" | "rk" => Ok(Family::ClassicalRk),
            "classical2n" | "2n" => Ok(Family::Classical2N),
            "liecf" | "lie" => Ok(Family::LieCf2N),
            "rkmk" => Ok(Family::Rkmk),
            "cf" | "generic_cf" | "genericcf" => Ok(Family::GenericCf),
            other => Err(IntegrationError::Configuration(format!(
                "unknown family {other:?}"
            ))),
        }
    }
}

/// A fully specified one-step method.
#[derive(Debug, Clone, PartialEq)]
pub enum StepperConfig {
    ClassicalRk(Tableau),
    Classical2N(TwoNScheme),
    LieCf2N(TwoNScheme),
    Rkmk { tableau: Tableau, truncation: usize },
    GenericCf(CfCoefficients),
}

impl StepperConfig {
    /// Pairs a scheme with a family, converting between coefficient forms as
    /// needed. 2N families require a 2N-representable scheme; `GenericCf`
    /// uses the low-storage exponential layout of the scheme's tableau.
    pub fn new(scheme: &Scheme, family: Family) -> Result<Self, IntegrationError> {
        Ok(match family {
            Family::ClassicalRk => StepperConfig::ClassicalRk(scheme.tableau()),
            Family::Classical2N => StepperConfig::Classical2N(scheme.two_n()?),
            Family::LieCf2N => StepperConfig::LieCf2N(scheme.two_n()?),
            Family::Rkmk => {
                let tableau = scheme.tableau();
                let truncation = tableau.declared_order() as usize;
                StepperConfig::rkmk(tableau, truncation)?
            }
            Family::GenericCf => {
                StepperConfig::GenericCf(CfCoefficients::low_storage(&scheme.tableau()))
            }
        })
    }

    pub fn rkmk(tableau: Tableau, truncation: usize) -> Result<Self, IntegrationError> {
        if !(1..=MAX_DEXPINV_TERMS).contains(&truncation) {
            return Err(IntegrationError::Truncation(truncation));
        }
        Ok(StepperConfig::Rkmk {
            tableau,
            truncation,
        })
    }

    pub fn family(&self) -> Family {
        match self {
            StepperConfig::ClassicalRk(_) => Family::ClassicalRk,
            StepperConfig::Classical2N(_) => Family::Classical2N,
            StepperConfig::LieCf2N(_) => Family::LieCf2N,
            StepperConfig::Rkmk { .. } => Family::Rkmk,
            StepperConfig::GenericCf(_) => Family::GenericCf,
        }
    }

    pub fn scheme_name(&self) -> &str {
        match self {
            StepperConfig::ClassicalRk(t) | StepperConfig::Rkmk { tableau: t, .. } => t.name(),
            StepperConfig::Classical2N(s) | StepperConfig::LieCf2N(s) => s.name(),
            StepperConfig::GenericCf(cf) => cf.tableau().name(),
        }
    }

    pub fn declared_order(&self) -> u32 {
        match self {
            StepperConfig::ClassicalRk(t) | StepperConfig::Rkmk { tableau: t, .. } => {
                t.declared_order()
            }
            StepperConfig::Classical2N(s) | StepperConfig::LieCf2N(s) => s.declared_order(),
            StepperConfig::GenericCf(cf) => cf.tableau().declared_order(),
        }
    }

    pub fn stages(&self) -> usize {
        match self {
            StepperConfig::ClassicalRk(t) | StepperConfig::Rkmk { tableau: t, .. } => t.stages(),
            StepperConfig::Classical2N(s) | StepperConfig::LieCf2N(s) => s.stages(),
            StepperConfig::GenericCf(cf) => cf.tableau().stages(),
        }
    }

    /// One step from `(t0, y)` to `t0 + h`.
    pub fn step<T: Scalar>(
        &self,
        problem: &Problem<T>,
        t0: f64,
        h: f64,
        y: &Matrix<T>,
    ) -> Result<Matrix<T>, IntegrationError> {
        self.step_counted(problem, t0, h, y, &mut Work::default())
    }

    /// As [`StepperConfig::step`], accumulating work counters.
    pub fn step_counted<T: Scalar>(
        &self,
        problem: &Problem<T>,
        t0: f64,
        h: f64,
        y: &Matrix<T>,
        work: &mut Work,
    ) -> Result<Matrix<T>, IntegrationError> {
        problem.check_state(y)?;
        let mut ctx = Counted { problem, work };
        let out = match self {
            StepperConfig::ClassicalRk(t) => classical_rk(t, &mut ctx, t0, h, y),
            StepperConfig::Classical2N(s) => classical_2n(s, &mut ctx, t0, h, y),
            StepperConfig::LieCf2N(s) => lie_cf_2n(s, &mut ctx, t0, h, y),
            StepperConfig::Rkmk {
                tableau,
                truncation,
            } => rkmk(tableau, *truncation, &mut ctx, t0, h, y),
            StepperConfig::GenericCf(cf) => generic_cf(cf, &mut ctx, t0, h, y),
        };
        ctx.work.steps += 1;
        out
    }
}

/// Classical explicit RK applied to `f(t, y) = A(t, y) y`.
pub fn step_classical_rk<T: Scalar>(
    t: &Tableau,
    prob: &Problem<T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    StepperConfig::ClassicalRk(t.clone()).step(prob, t0, h, y)
}

/// Williamson 2N update `dy <- A_k dy + h f; y <- y + B_k dy`.
pub fn step_classical_2n<T: Scalar>(
    s: &TwoNScheme,
    prob: &Problem<T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    StepperConfig::Classical2N(s.clone()).step(prob, t0, h, y)
}

/// Low-storage commutator-free Lie group step
/// `dY <- A_k dY + h A(t0 + C_k h, Y); Y <- exp(B_k dY) Y`.
pub fn step_lie_cf_2n<T: Scalar>(
    s: &TwoNScheme,
    prob: &Problem<T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    StepperConfig::LieCf2N(s.clone()).step(prob, t0, h, y)
}

/// Runge-Kutta-Munthe-Kaas step with `dexpinv` truncated to `trunc` terms.
pub fn step_rkmk<T: Scalar>(
    t: &Tableau,
    trunc: usize,
    prob: &Problem<T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    StepperConfig::rkmk(t.clone(), trunc)?.step(prob, t0, h, y)
}

/// General commutator-free step; re-validates the coefficient sums.
pub fn step_generic_cf<T: Scalar>(
    cf: &CfCoefficients,
    prob: &Problem<T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    cf.validate()?;
    StepperConfig::GenericCf(cf.clone()).step(prob, t0, h, y)
}

fn classical_rk<T: Scalar>(
    t: &Tableau,
    ctx: &mut Counted<'_, T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    let s = t.stages();
    let mut k: Vec<Matrix<T>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut yi = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let aij = t.a(i, j);
            if aij != 0.0 {
                yi.axpy(T::from_real(h * aij), kj);
            }
        }
        k.push(ctx.vector_field(t0 + t.c()[i] * h, &yi)?);
    }
    let mut out = y.clone();
    for (bi, ki) in t.b().iter().zip(&k) {
        if *bi != 0.0 {
            out.axpy(T::from_real(h * bi), ki);
        }
    }
    Ok(out)
}

fn classical_2n<T: Scalar>(
    s: &TwoNScheme,
    ctx: &mut Counted<'_, T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    let mut y = y.clone();
    let mut dy = Matrix::zeros(y.rows(), y.cols());
    for k in 0..s.stages() {
        let f = ctx.vector_field(t0 + s.c()[k] * h, &y)?;
        dy = dy.scale_real(s.a()[k]);
        dy.axpy(T::from_real(h), &f);
        y.axpy(T::from_real(s.b()[k]), &dy);
    }
    Ok(y)
}

fn lie_cf_2n<T: Scalar>(
    s: &TwoNScheme,
    ctx: &mut Counted<'_, T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    let n = y.rows();
    let mut y = y.clone();
    let mut dy = Matrix::zeros(n, n);
    for k in 0..s.stages() {
        let a = ctx.generator(t0 + s.c()[k] * h, &y)?;
        dy = dy.scale_real(s.a()[k]);
        dy.axpy(T::from_real(h), &a);
        y = ctx.exp_act(&dy.scale_real(s.b()[k]), &y)?;
    }
    Ok(y)
}

/// Highest supported number of `dexpinv` terms (Bernoulli numbers up to `B_8`).
pub const MAX_DEXPINV_TERMS: usize = 9;

const BERNOULLI: [(f64, f64); MAX_DEXPINV_TERMS] = [
    (1.0, 1.0),
    (-1.0, 2.0),
    (1.0, 6.0),
    (0.0, 1.0),
    (-1.0, 30.0),
    (0.0, 1.0),
    (1.0, 42.0),
    (0.0, 1.0),
    (-1.0, 30.0),
];

/// `sum_{k=0}^{p-1} B_k / k! ad_U^k(V)`.
pub fn dexpinv<T: Scalar>(
    u: &Matrix<T>,
    v: &Matrix<T>,
    p: usize,
) -> Result<Matrix<T>, IntegrationError> {
    if !(1..=MAX_DEXPINV_TERMS).contains(&p) {
        return Err(IntegrationError::Truncation(p));
    }
    let mut out = v.clone();
    let mut ad = v.clone();
    let mut factorial = 1.0;
    for (k, &(num, den)) in BERNOULLI.iter().enumerate().take(p).skip(1) {
        ad = commutator(u, &ad)?;
        factorial *= k as f64;
        if num != 0.0 {
            out.axpy(T::from_real(num / (den * factorial)), &ad);
        }
    }
    Ok(out)
}

fn rkmk<T: Scalar>(
    t: &Tableau,
    trunc: usize,
    ctx: &mut Counted<'_, T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    let s = t.stages();
    let n = y.rows();
    let mut k_tilde: Vec<Matrix<T>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut u = Matrix::zeros(n, n);
        for (j, kj) in k_tilde.iter().enumerate() {
            let aij = t.a(i, j);
            if aij != 0.0 {
                u.axpy(T::from_real(h * aij), kj);
            }
        }
        let yi = if i == 0 {
            y.clone()
        } else {
            ctx.exp_act(&u, y)?
        };
        let ki = ctx.generator(t0 + t.c()[i] * h, &yi)?;
        k_tilde.push(dexpinv(&u, &ki, trunc)?);
    }
    let mut v = Matrix::zeros(n, n);
    for (bi, ki) in t.b().iter().zip(&k_tilde) {
        if *bi != 0.0 {
            v.axpy(T::from_real(h * bi), ki);
        }
    }
    ctx.exp_act(&v, y)
}

fn generic_cf<T: Scalar>(
    cf: &CfCoefficients,
    ctx: &mut Counted<'_, T>,
    t0: f64,
    h: f64,
    y: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    let n = y.rows();
    let c = cf.tableau().c();
    let mut k: Vec<Matrix<T>> = Vec::with_capacity(c.len());

    fn apply<T: Scalar>(
        ctx: &mut Counted<'_, T>,
        exponents: &[Vec<f64>],
        k: &[Matrix<T>],
        h: f64,
        n: usize,
        y: &Matrix<T>,
    ) -> Result<Matrix<T>, IntegrationError> {
        let mut out = y.clone();
        for coeffs in exponents {
            let mut x = Matrix::zeros(n, n);
            let mut nonzero = false;
            for (alpha, kj) in coeffs.iter().zip(k) {
                if *alpha != 0.0 {
                    x.axpy(T::from_real(h * alpha), kj);
                    nonzero = true;
                }
            }
            if nonzero {
                out = ctx.exp_act(&x, &out)?;
            }
        }
        Ok(out)
    }

    for (i, exponents) in cf.stage_exponents().iter().enumerate() {
        let yi = apply(ctx, exponents, &k, h, n, y)?;
        k.push(ctx.generator(t0 + c[i] * h, &yi)?);
    }
    apply(ctx, cf.output_exponents(), &k, h, n, y)
}

/// Step sizes used to cover `[t0, t1]` with nominal step `h`; the last step
/// is shortened to land exactly on `t1`.
pub fn step_schedule(t0: f64, t1: f64, h: f64) -> Result<Vec<(f64, f64)>, IntegrationError> {
    if !(t1 > t0 && h > 0.0 && h.is_finite() && t0.is_finite() && t1.is_finite()) {
        return Err(IntegrationError::Interval { t0, t1, h });
    }
    let ratio = (t1 - t0) / h;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest.max(1.0) as usize
    } else {
        ratio.ceil() as usize
    };
    Ok((0..n)
        .map(|k| {
            let t = t0 + k as f64 * h;
            let dt = if k + 1 == n { t1 - t } else { h };
            (t, dt)
        })
        .collect())
}

/// Integrates from `t0` to `t1` and returns `Y(t1)`.
pub fn integrate<T: Scalar>(
    stepper: &StepperConfig,
    prob: &Problem<T>,
    t0: f64,
    t1: f64,
    h: f64,
    y0: &Matrix<T>,
) -> Result<Matrix<T>, IntegrationError> {
    integrate_observed(stepper, prob, t0, t1, h, y0, |_, _| {}).map(|(y, _)| y)
}

/// As [`integrate`], calling `observer` with `(t, Y)` at `t0` and after
/// every step, and returning the accumulated work.
pub fn integrate_observed<T: Scalar>(
    stepper: &StepperConfig,
    prob: &Problem<T>,
    t0: f64,
    t1: f64,
    h: f64,
    y0: &Matrix<T>,
    mut observer: impl FnMut(f64, &Matrix<T>),
) -> Result<(Matrix<T>, Work), IntegrationError> {
    prob.check_state(y0)?;
    let mut work = Work::default();
    let mut y = y0.clone();
    observer(t0, &y);
    for (t, dt) in step_schedule(t0, t1, h)? {
        let t_next = t + dt;
        y = match stepper.step_counted(prob, t, dt, &y, &mut work) {
            Ok(y) => y,
            Err(IntegrationError::Matrix(MatrixError::NonFinite { .. })) => {
                return Err(IntegrationError::Divergence { t: t_next })
            }
            Err(e) => return Err(e),
        };
        if !y.is_finite() {
            return Err(IntegrationError::Divergence { t: t_next });
        }
        observer(t_next, &y);
    }
    Ok((y, work))
}
