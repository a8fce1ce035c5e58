//! Benchmark systems with their initial data, invariants and references.
//!
//! | case    | group   | state         | reference                     |
//! |---------|---------|---------------|-------------------------------|
//! | `rigid` | SO(3)   | 3-vector      | elliptic closed form          |
//! | `so5`   | SO(5)   | 5x5 real      | RKMK order 5, h = 1/1024      |
//! | `su3`   | SU(3)   | 3x3 complex   | RKMK order 5, h = 1/512       |
//! | `vdp`   | GL(2)   | 2-vector      | RKMK order 5, h = 1/8192      |
//! | `so3t`  | SO(3)   | 3x3 real      | RKMK order 5, h = 1/1024      |

use std::sync::{Arc, OnceLock};

use crate::elliptic::jacobi_sn_cn_dn;
use crate::integrators::{integrate, integrate_observed, IntegrationError, Problem, StepperConfig, Work};
use crate::smallmat::{
    gram_schmidt_orthonormalize, hat, mat_mul, norm2, ComplexMatrix, Matrix, RealMatrix, Scalar,
};
use crate::tableau::registry_lookup;
use crate::Complex64;

/// Principal moments of inertia of the rigid body.
pub const INERTIA: [f64; 3] = [7.0 / 8.0, 5.0 / 8.0, 1.0 / 4.0];

/// Van der Pol stiffness parameter.
pub const VDP_MU: f64 = 60.0;

/// Scheme used for self-references, run as RKMK with this many `dexpinv` terms.
pub const REFERENCE_SCHEME: &str = "BUTCHER65";
pub const REFERENCE_TRUNCATION: usize = 5;

/// Distances below this are indistinguishable from accumulated roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-14;

/// All case names, in canonical order.
pub const CASE_NAMES: [&str; 5] = ["rigid", "so5", "su3", "vdp", "so3t"];

/// How a distance between two states is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    /// Euclidean norm of the difference (vector states).
    Euclidean,
    /// Largest singular value of the difference (matrix states).
    Spectral,
}

impl Distance {
    pub fn measure<T: Scalar>(self, a: &Matrix<T>, b: &Matrix<T>) -> f64 {
        let diff = a - b;
        match self {
            Distance::Euclidean => diff.norm_fro(),
            Distance::Spectral => norm2(&diff),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    ClosedForm,
    /// RKMK with [`REFERENCE_SCHEME`] at step `h`.
    SelfReference { h: f64 },
}

type ExactFn<T> = dyn Fn(f64) -> Matrix<T> + Send + Sync;

/// A problem together with everything needed to measure `d(h)`.
#[derive(Clone)]
pub struct BenchmarkCase<T: Scalar> {
    problem: Problem<T>,
    y0: Matrix<T>,
    t0: f64,
    t1: f64,
    reference: Reference,
    distance: Distance,
    exact: Option<Arc<ExactFn<T>>>,
    cache: Arc<OnceLock<Result<Matrix<T>, IntegrationError>>>,
    floor: Arc<OnceLock<Result<f64, IntegrationError>>>,
}

impl<T: Scalar> std::fmt::Debug for BenchmarkCase<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkCase")
            .field("problem", &self.problem)
            .field("t0", &self.t0)
            .field("t1", &self.t1)
            .field("reference", &self.reference)
            .field("distance", &self.distance)
            .finish()
    }
}

impl<T: Scalar> BenchmarkCase<T> {
    pub fn new(
        problem: Problem<T>,
        y0: Matrix<T>,
        t0: f64,
        t1: f64,
        reference: Reference,
        distance: Distance,
    ) -> Self {
        Self {
            problem,
            y0,
            t0,
            t1,
            reference,
            distance,
            exact: None,
            cache: Arc::default(),
            floor: Arc::default(),
        }
    }

    /// Attaches a closed-form solution `t -> Y(t)`; used when the reference
    /// is [`Reference::ClosedForm`].
    pub fn with_exact(mut self, exact: impl Fn(f64) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn problem(&self) -> &Problem<T> {
        &self.problem
    }

    pub fn y0(&self) -> &Matrix<T> {
        &self.y0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn reference_kind(&self) -> Reference {
        self.reference
    }

    pub fn distance(&self, a: &Matrix<T>, b: &Matrix<T>) -> f64 {
        self.distance.measure(a, b)
    }

    pub fn exact(&self, t: f64) -> Option<Matrix<T>> {
        self.exact.as_ref().map(|f| f(t))
    }

    fn reference_stepper() -> StepperConfig {
        let scheme = registry_lookup(REFERENCE_SCHEME).expect("reference scheme is built in");
        StepperConfig::rkmk(scheme.tableau(), REFERENCE_TRUNCATION)
            .expect("reference truncation is supported")
    }

    /// Self-reference solution at `t1` computed with step `h`.
    pub fn self_reference_at(&self, h: f64) -> Result<Matrix<T>, IntegrationError> {
        integrate(&Self::reference_stepper(), &self.problem, self.t0, self.t1, h, &self.y0)
    }

    /// `Y_ref(t1)`, computed on first use and shared by all clones.
    pub fn reference_solution(&self) -> Result<&Matrix<T>, IntegrationError> {
        self.cache
            .get_or_init(|| match self.reference {
                Reference::ClosedForm => self.exact(self.t1).ok_or_else(|| {
                    IntegrationError::Configuration("closed-form reference missing".into())
                }),
                Reference::SelfReference { h } => self.self_reference_at(h),
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Error level of the reference itself: roundoff for a closed form, the
    /// gap between `h_ref` and `h_ref / 2` for a self-reference.
    pub fn reference_floor(&self) -> Result<f64, IntegrationError> {
        self.floor
            .get_or_init(|| match self.reference {
                Reference::ClosedForm => Ok(ROUNDOFF_FLOOR),
                Reference::SelfReference { h } => {
                    let coarse = self.reference_solution()?;
                    let fine = self.self_reference_at(h / 2.0)?;
                    Ok(self.distance(coarse, &fine).max(ROUNDOFF_FLOOR))
                }
            })
            .clone()
    }
}

/// Result of integrating a case once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// `d(h)` at `t1`.
    pub distance: f64,
    /// Largest invariant drift seen along the trajectory, if the problem has one.
    pub max_drift: Option<f64>,
    pub work: Work,
}

/// Scalar-type-erased view of a [`BenchmarkCase`].
pub trait Case: Send + Sync {
    fn name(&self) -> &str;
    fn interval(&self) -> (f64, f64);
    fn reference_floor(&self) -> Result<f64, IntegrationError>;
    /// Column labels for a flattened state, row-major, complex entries as
    /// `_re`, `_im` pairs.
    fn state_labels(&self) -> Vec<String>;
    /// Integrates `t0 -> t1` with step `h` and measures `d(h)`.
    fn evaluate(&self, stepper: &StepperConfig, h: f64) -> Result<Evaluation, IntegrationError>;
    /// Integrates `t0 -> t_end`, reporting each `(t, flattened state)`.
    fn trajectory(
        &self,
        stepper: &StepperConfig,
        h: f64,
        t_end: f64,
        observer: &mut dyn FnMut(f64, &[f64]),
    ) -> Result<(), IntegrationError>;
}

fn flatten<T: Scalar>(y: &Matrix<T>) -> Vec<f64> {
    if T::IS_COMPLEX {
        y.as_slice().iter().flat_map(|z| [z.re(), z.im()]).collect()
    } else {
        y.as_slice().iter().map(|x| x.re()).collect()
    }
}

impl<T: Scalar> Case for BenchmarkCase<T> {
    fn name(&self) -> &str {
        self.problem.name()
    }

    fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    fn reference_floor(&self) -> Result<f64, IntegrationError> {
        BenchmarkCase::reference_floor(self)
    }

    fn state_labels(&self) -> Vec<String> {
        let (rows, cols) = self.problem.state_shape();
        let mut out = Vec::new();
        for i in 1..=rows {
            for j in 1..=cols {
                let base = if cols == 1 { format!("y{i}") } else { format!("y{i}{j}") };
                if T::IS_COMPLEX {
                    out.push(format!("{base}_re"));
                    out.push(format!("{base}_im"));
                } else {
                    out.push(base);
                }
            }
        }
        out
    }

    fn evaluate(&self, stepper: &StepperConfig, h: f64) -> Result<Evaluation, IntegrationError> {
        let reference = self.reference_solution()?;
        let mut max_drift: Option<f64> = None;
        let (y, work) =
            integrate_observed(stepper, &self.problem, self.t0, self.t1, h, &self.y0, |_, y| {
                if let Some(d) = self.problem.invariant_drift(y) {
                    max_drift = Some(max_drift.map_or(d, |m| m.max(d)));
                }
            })?;
        Ok(Evaluation {
            distance: self.distance(&y, reference),
            max_drift,
            work,
        })
    }

    fn trajectory(
        &self,
        stepper: &StepperConfig,
        h: f64,
        t_end: f64,
        observer: &mut dyn FnMut(f64, &[f64]),
    ) -> Result<(), IntegrationError> {
        integrate_observed(stepper, &self.problem, self.t0, t_end, h, &self.y0, |t, y| {
            observer(t, &flatten(y))
        })
        .map(|_| ())
    }
}

/// A benchmark case over either scalar field.
#[derive(Debug, Clone)]
pub enum AnyCase {
    Real(BenchmarkCase<f64>),
    Complex(BenchmarkCase<Complex64>),
}

impl AnyCase {
    pub fn as_case(&self) -> &dyn Case {
        match self {
            AnyCase::Real(c) => c,
            AnyCase::Complex(c) => c,
        }
    }
}

/// Looks a case up by its short name (`rigid`, `so5`, `su3`, `vdp`, `so3t`).
pub fn case_by_name(name: &str) -> Option<AnyCase> {
    Some(match name.to_ascii_lowercase().as_str() {
        "rigid" => AnyCase::Real(rigid_body_problem()),
        "so5" => AnyCase::Real(so5_problem()),
        "su3" => AnyCase::Complex(su3_flow_problem()),
        "vdp" => AnyCase::Real(vdp_problem()),
        "so3t" => AnyCase::Real(so3_nonautonomous_problem()),
        _ => return None,
    })
}

/// All five cases in canonical order.
pub fn all_cases() -> Vec<AnyCase> {
    CASE_NAMES
        .iter()
        .map(|n| case_by_name(n).expect("canonical names resolve"))
        .collect()
}

fn orthogonality_defect(y: &RealMatrix) -> f64 {
    let yty = mat_mul(&y.transpose(), y).expect("square state");
    (&yty - &RealMatrix::identity(y.rows())).max_abs()
}

/// Initial angular momentum of the rigid body.
pub fn rigid_body_y0() -> RealMatrix {
    RealMatrix::column(&[-(8.0f64).sqrt() / 3.0, 0.0, 1.0 / 3.0])
}

/// `A(Y) = -hat(I^{-1} Y)`.
pub fn rigid_body_generator(y: &RealMatrix) -> RealMatrix {
    -&hat([
        y[(0, 0)] / INERTIA[0],
        y[(1, 0)] / INERTIA[1],
        y[(2, 0)] / INERTIA[2],
    ])
}

/// Kinetic energy `Y^T I^{-1} Y / 2`.
pub fn rigid_body_energy(y: &RealMatrix) -> f64 {
    0.5 * (0..3).map(|i| y[(i, 0)] * y[(i, 0)] / INERTIA[i]).sum::<f64>()
}

struct RigidBodyParameters {
    alpha: f64,
    mu: f64,
    m: f64,
    delta: f64,
    gamma: f64,
}

fn rigid_body_parameters() -> &'static RigidBodyParameters {
    static PARAMS: OnceLock<RigidBodyParameters> = OnceLock::new();
    PARAMS.get_or_init(|| {
        let [i1, i2, i3] = INERTIA;
        let y0 = rigid_body_y0();
        let h = rigid_body_energy(&y0);
        let y02 = y0.norm_fro().powi(2);
        let a = y02 / (2.0 * h);
        let b = 2.0 * h / y02.sqrt();
        RigidBodyParameters {
            alpha: (a * i2 * (a - i3) / (i2 - i3)).sqrt() * b,
            mu: (a * (i1 - a) * (i2 - i3) / (i1 * i2 * i3)).sqrt() * b,
            m: (i1 - i2) * (a - i3) / (i1 - a) / (i2 - i3),
            delta: (i3 * (i1 - a) * a / (i1 - i3)).sqrt() * b,
            gamma: (i1 * (a - i3) * a / (i1 - i3)).sqrt() * b,
        }
    })
}

/// `(sn, cn, dn)(u | m)` for any `m >= 0`; `m > 1` goes through the
/// reciprocal-modulus transformation.
fn jacobi_any(u: f64, m: f64) -> (f64, f64, f64) {
    if m < 1.0 {
        let v = jacobi_sn_cn_dn(u, m).expect("finite argument, m in [0, 1)");
        (v.sn, v.cn, v.dn)
    } else {
        let k = m.sqrt();
        let v = jacobi_sn_cn_dn(k * u, 1.0 / m).expect("finite argument, 1/m in (0, 1)");
        (v.sn / k, v.dn, v.cn)
    }
}

/// Closed-form rigid-body solution
/// `(-gamma cn, alpha sn, delta dn)(mu t | k^2)`.
pub fn rigid_body_exact(t: f64) -> RealMatrix {
    let p = rigid_body_parameters();
    let (sn, cn, dn) = jacobi_any(p.mu * t, p.m);
    RealMatrix::column(&[-p.gamma * cn, p.alpha * sn, p.delta * dn])
}

/// Free rigid body on the unit sphere, `t in [0, 3]`.
pub fn rigid_body_problem() -> BenchmarkCase<f64> {
    let norm0 = rigid_body_y0().norm_fro();
    let problem = Problem::new("rigid", 3, 1, |_, y: &RealMatrix| rigid_body_generator(y))
        .with_invariant(move |y| (y.norm_fro() - norm0).abs());
    BenchmarkCase::new(
        problem,
        rigid_body_y0(),
        0.0,
        3.0,
        Reference::ClosedForm,
        Distance::Euclidean,
    )
    .with_exact(rigid_body_exact)
}

/// `A(Y)`: first superdiagonal of `Y` minus its transpose.
pub fn so5_generator(y: &RealMatrix) -> RealMatrix {
    let n = y.rows();
    let mut a = RealMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = y[(i, i + 1)];
        a[(i + 1, i)] = -y[(i, i + 1)];
    }
    a
}

/// Orthonormalized `M_ij = sin(i + 5 j) + delta_ij`, 1-based. The sine
/// part alone has rank two.
pub fn so5_y0() -> RealMatrix {
    let rows: Vec<Vec<f64>> = (1..=5)
        .map(|i| {
            (1..=5)
                .map(|j| ((i + 5 * j) as f64).sin() + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    gram_schmidt_orthonormalize(&RealMatrix::from_rows(&rows)).expect("seed matrix has full rank")
}

pub fn so5_problem() -> BenchmarkCase<f64> {
    let problem = Problem::new("so5", 5, 5, |_, y: &RealMatrix| so5_generator(y))
        .with_invariant(orthogonality_defect);
    BenchmarkCase::new(
        problem,
        so5_y0(),
        0.0,
        5.0,
        Reference::SelfReference { h: 1.0 / 1024.0 },
        Distance::Spectral,
    )
}

/// Fixed background `H_jk = sin(j + 3k) + i cos(2j - k)`, 1-based.
pub fn su3_background() -> ComplexMatrix {
    let rows: Vec<Vec<Complex64>> = (1..=3)
        .map(|j| {
            (1..=3)
                .map(|k| {
                    Complex64::new(((j + 3 * k) as f64).sin(), ((2 * j - k) as f64).cos())
                })
                .collect()
        })
        .collect();
    ComplexMatrix::from_rows(&rows)
}

/// Traceless anti-Hermitian part `(M - M^+)/2 - Tr(M - M^+)/6 I`.
pub fn su3_project(m: &ComplexMatrix) -> ComplexMatrix {
    let anti = m - &m.adjoint();
    let tr = anti.trace();
    let mut p = anti.scale_real(0.5);
    for i in 0..m.rows() {
        p[(i, i)] -= tr / Complex64::from(6.0);
    }
    p
}

pub fn su3_y0() -> ComplexMatrix {
    let e = |x: f64| Complex64::from_polar(1.0, x);
    ComplexMatrix::diag(&[e(1.0), e(1.0), e(-2.0)])
}

/// Unitarity defect plus `|det Y - 1|`.
pub fn su3_defect(y: &ComplexMatrix) -> f64 {
    let yy = mat_mul(&y.adjoint(), y).expect("square state");
    let unitary = (&yy - &ComplexMatrix::identity(3)).max_abs();
    let det = y.det().expect("square state");
    unitary + (det - Complex64::from(1.0)).norm()
}

pub fn su3_flow_problem() -> BenchmarkCase<Complex64> {
    let h = su3_background();
    let problem = Problem::new("su3", 3, 3, move |_, y: &ComplexMatrix| {
        -&su3_project(&mat_mul(&h, y).expect("3x3 operands"))
    })
    .with_invariant(su3_defect);
    BenchmarkCase::new(
        problem,
        su3_y0(),
        0.0,
        10.0,
        Reference::SelfReference { h: 1.0 / 512.0 },
        Distance::Spectral,
    )
}

/// `A(Y) = [[0, 1], [-1, mu (1 - x^2)]]` for `Y = (x, x')`.
pub fn vdp_generator(y: &RealMatrix) -> RealMatrix {
    // Built entrywise: a blown-up state must reach the divergence check
    // instead of tripping the finiteness guard of `from_rows`.
    let x = y[(0, 0)];
    let mut a = RealMatrix::zeros(2, 2);
    a[(0, 1)] = 1.0;
    a[(1, 0)] = -1.0;
    a[(1, 1)] = VDP_MU * (1.0 - x * x);
    a
}

pub fn vdp_problem() -> BenchmarkCase<f64> {
    let problem = Problem::new("vdp", 2, 1, |_, y: &RealMatrix| vdp_generator(y));
    BenchmarkCase::new(
        problem,
        RealMatrix::column(&[1.0, 1.0]),
        0.0,
        2.0,
        Reference::SelfReference { h: 1.0 / 8192.0 },
        Distance::Euclidean,
    )
}

/// `A(t) = [[0, t, 1], [-t, 0, -t^2], [-1, t^2, 0]]`.
pub fn so3t_generator(t: f64) -> RealMatrix {
    let t2 = t * t;
    RealMatrix::from_rows(&[[0.0, t, 1.0], [-t, 0.0, -t2], [-1.0, t2, 0.0]])
}

pub fn so3_nonautonomous_problem() -> BenchmarkCase<f64> {
    let problem = Problem::new("so3t", 3, 3, |t, _: &RealMatrix| so3t_generator(t))
        .with_invariant(orthogonality_defect);
    BenchmarkCase::new(
        problem,
        RealMatrix::identity(3),
        0.0,
        1.0,
        Reference::SelfReference { h: 1.0 / 1024.0 },
        Distance::Spectral,
    )
}
