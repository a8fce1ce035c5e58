//! Runge-Kutta coefficient schemes.
//!
//! A [`Tableau`] holds classical Butcher coefficients; a [`TwoNScheme`] holds
//! the Williamson two-register form `dY <- A_k dY + h f; Y <- Y + B_k dY`.
//! The two are related by
//!
//! ```text
//! a_{i,i-1} = B_{i-1},   a_{ij} = A_{j+1} a_{i,j+1} + B_j   (j < i-1)
//! b_s       = B_s,       b_i    = A_{i+1} b_{i+1}   + B_i   (i < s)
//! ```

mod file;
mod registry;
mod trees;

pub use file::{parse_scheme, serialize_scheme, SchemeFileError};
pub use registry::{load_file, registry_lookup, Registry, RegistryError};
pub use trees::{rooted_trees, RootedTree};

use thiserror::Error;

/// Residual tolerance below which an order condition counts as satisfied.
pub const ORDER_TOLERANCE: f64 = 1e-10;

/// Inconsistency threshold for recovering a 2N form from a Butcher tableau.
pub const TWO_N_TOLERANCE: f64 = 1e-10;

const NODE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableauError {
    #[error("scheme {name}: {what} has length {got}, expected {expected}")]
    Length {
        name: String,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("scheme {name}: coefficient a[{row}][{col}] must be zero for an explicit method")]
    NotExplicit { name: String, row: usize, col: usize },
    #[error("scheme {name}: node c[{index}] = {node} differs from row sum {row_sum}")]
    NodeMismatch {
        name: String,
        index: usize,
        node: f64,
        row_sum: f64,
    },
    #[error("scheme {name}: first 2N coefficient A_1 must be 0, got {value}")]
    NonZeroA1 { name: String, value: f64 },
    #[error("scheme {name} has no 2N-storage form (residual {residual:e} at A_{index})")]
    NotTwoNRepresentable {
        name: String,
        index: usize,
        residual: f64,
    },
    #[error("{what} requires {expected} stages, scheme has {got}")]
    StageCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("scheme {name}: empty scheme")]
    Empty { name: String },
    #[error("non-finite coefficient in scheme {name}")]
    NonFinite { name: String },
}

/// Explicit Butcher tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    name: String,
    /// Full `s x s` strictly lower-triangular matrix, row-major by stage.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    declared_order: u32,
}

impl Tableau {
    /// Builds a tableau with nodes taken from the row sums of `a`.
    ///
    /// `a` may be given either as full square rows or as ragged
    /// lower-triangular rows (row `i` holding `i` entries, zero-based).
    pub fn new(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        declared_order: u32,
    ) -> Result<Self, TableauError> {
        let name = name.into();
        let a = normalize_lower(&name, a, b.len())?;
        let c = a.iter().map(|row| row.iter().sum()).collect();
        Self::validated(name, a, b, c, declared_order)
    }

    /// Builds a tableau with explicit nodes, which must equal the row sums.
    pub fn with_nodes(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        declared_order: u32,
    ) -> Result<Self, TableauError> {
        let name = name.into();
        let a = normalize_lower(&name, a, b.len())?;
        Self::validated(name, a, b, c, declared_order)
    }

    fn validated(
        name: String,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        declared_order: u32,
    ) -> Result<Self, TableauError> {
        let s = b.len();
        if s == 0 {
            return Err(TableauError::Empty { name });
        }
        if c.len() != s {
            return Err(TableauError::Length {
                name,
                what: "c",
                got: c.len(),
                expected: s,
            });
        }
        let finite = a.iter().flatten().chain(&b).chain(&c).all(|x| x.is_finite());
        if !finite {
            return Err(TableauError::NonFinite { name });
        }
        for (i, row) in a.iter().enumerate() {
            let row_sum: f64 = row.iter().sum();
            if (row_sum - c[i]).abs() > NODE_TOLERANCE * (1.0 + row.iter().map(|x| x.abs()).sum::<f64>()) {
                return Err(TableauError::NodeMismatch {
                    name,
                    index: i,
                    node: c[i],
                    row_sum,
                });
            }
        }
        Ok(Self {
            name,
            a,
            b,
            c,
            declared_order,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `a[i][j]` with zero-based stage indices; zero for `j >= i`.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn a_rows(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn declared_order(&self) -> u32 {
        self.declared_order
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn normalize_lower(name: &str, a: Vec<Vec<f64>>, s: usize) -> Result<Vec<Vec<f64>>, TableauError> {
    if a.len() != s {
        return Err(TableauError::Length {
            name: name.to_string(),
            what: "a",
            got: a.len(),
            expected: s,
        });
    }
    let mut full = vec![vec![0.0; s]; s];
    for (i, row) in a.into_iter().enumerate() {
        if row.len() != i && row.len() != s {
            return Err(TableauError::Length {
                name: name.to_string(),
                what: "a row",
                got: row.len(),
                expected: i,
            });
        }
        for (j, x) in row.into_iter().enumerate() {
            if j >= i {
                if x != 0.0 {
                    return Err(TableauError::NotExplicit {
                        name: name.to_string(),
                        row: i,
                        col: j,
                    });
                }
                continue;
            }
            full[i][j] = x;
        }
    }
    Ok(full)
}

/// Williamson 2N-storage scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoNScheme {
    name: String,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    declared_order: u32,
}

impl TwoNScheme {
    pub fn new(
        name: impl Into<String>,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
        declared_order: u32,
    ) -> Result<Self, TableauError> {
        let name = name.into();
        let s = b.len();
        if s == 0 {
            return Err(TableauError::Empty { name });
        }
        for (what, len) in [("A", a.len()), ("C", c.len())] {
            if len != s {
                return Err(TableauError::Length {
                    name,
                    what,
                    got: len,
                    expected: s,
                });
            }
        }
        if !a.iter().chain(&b).chain(&c).all(|x| x.is_finite()) {
            return Err(TableauError::NonFinite { name });
        }
        if a[0] != 0.0 {
            return Err(TableauError::NonZeroA1 { name, value: a[0] });
        }
        Ok(Self {
            name,
            a,
            b,
            c,
            declared_order,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Register-decay coefficients `A_k` (`A_1 = 0`).
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Update coefficients `B_k`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Stage times `C_k`.
    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn declared_order(&self) -> u32 {
        self.declared_order
    }
}

/// Expands a 2N scheme into its classical Butcher tableau.
pub fn to_butcher(scheme: &TwoNScheme) -> Tableau {
    let s = scheme.stages();
    let (big_a, big_b) = (scheme.a(), scheme.b());
    let mut a = vec![vec![0.0; s]; s];
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i - 1] = big_b[i - 1];
        for j in (0..i - 1).rev() {
            row[j] = big_a[j + 1] * row[j + 1] + big_b[j];
        }
    }
    let mut b = vec![0.0; s];
    b[s - 1] = big_b[s - 1];
    for i in (0..s - 1).rev() {
        b[i] = big_a[i + 1] * b[i + 1] + big_b[i];
    }
    let c = a.iter().map(|row| row.iter().sum()).collect();
    Tableau {
        name: scheme.name.clone(),
        a,
        b,
        c,
        declared_order: scheme.declared_order,
    }
}

/// Recovers the 2N form of a Butcher tableau, if it has one.
///
/// `B` follows directly from the subdiagonal and `b_s`. Each `A_k` then
/// appears in one equation per later row of `a` plus one from `b`:
/// `x A_k = y` with `x in {a_{i,k}, b_k}`, `y in {a_{i,k-1} - B_{k-1}, b_{k-1} - B_{k-1}}`.
/// `A_k` is the least-squares solution; any remaining residual above
/// [`TWO_N_TOLERANCE`] means the tableau is not 2N-representable.
pub fn from_butcher(t: &Tableau) -> Result<TwoNScheme, TableauError> {
    let s = t.stages();
    let mut big_b = vec![0.0; s];
    for (j, bj) in big_b.iter_mut().enumerate().take(s - 1) {
        *bj = t.a[j + 1][j];
    }
    big_b[s - 1] = t.b[s - 1];

    let mut big_a = vec![0.0; s];
    for k in 1..s {
        // Equations for A_k (zero-based k, pairing column k-1 with column k).
        let mut eqs: Vec<(f64, f64)> = (k + 1..s)
            .map(|i| (t.a[i][k], t.a[i][k - 1] - big_b[k - 1]))
            .collect();
        eqs.push((t.b[k], t.b[k - 1] - big_b[k - 1]));
        let sxx: f64 = eqs.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = eqs.iter().map(|(x, y)| x * y).sum();
        let ak = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let residual = eqs
            .iter()
            .map(|(x, y)| (x * ak - y).abs())
            .fold(0.0, f64::max);
        if residual > TWO_N_TOLERANCE {
            return Err(TableauError::NotTwoNRepresentable {
                name: t.name.clone(),
                index: k + 1,
                residual,
            });
        }
        big_a[k] = ak;
    }
    TwoNScheme::new(t.name.clone(), big_a, big_b, t.c.clone(), t.declared_order)
}

/// Residual of one classical order condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResidual {
    /// Canonical level sequence of the rooted tree, e.g. `"0121"`.
    pub label: String,
    pub order: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub residuals: Vec<ConditionResidual>,
    /// Largest `p` such that every condition of order `<= p` is satisfied.
    pub satisfied_order: usize,
}

impl OrderReport {
    pub fn residual(&self, label: &str) -> Option<f64> {
        self.residuals
            .iter()
            .find(|r| r.label == label)
            .map(|r| r.residual)
    }

    pub fn max_residual_up_to(&self, order: usize) -> f64 {
        self.residuals
            .iter()
            .filter(|r| r.order <= order)
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }
}

/// Maximum supported order for [`classical_order_residuals`].
pub const MAX_CONDITION_ORDER: usize = 5;

/// `|Phi(tree) - 1/gamma(tree)|` for every rooted tree up to `up_to` nodes.
pub fn classical_order_residuals(t: &Tableau, up_to: usize) -> OrderReport {
    let up_to = up_to.min(MAX_CONDITION_ORDER);
    let mut residuals = Vec::new();
    let mut satisfied_order = 0;
    let mut all_ok = true;
    for order in 1..=up_to {
        let mut order_ok = true;
        for tree in rooted_trees(order) {
            let residual = (tree.elementary_weight(t) - 1.0 / tree.density() as f64).abs();
            order_ok &= residual <= ORDER_TOLERANCE;
            residuals.push(ConditionResidual {
                label: tree.level_sequence(),
                order,
                residual,
            });
        }
        all_ok &= order_ok;
        if all_ok {
            satisfied_order = order;
        }
    }
    OrderReport {
        residuals,
        satisfied_order,
    }
}

/// Williamson's 3-stage 2N constraint between the nodes `c2` and `c3`.
pub fn williamson_constraint_residual(c2: f64, c3: f64) -> f64 {
    (c3 * c3 * (1.0 - c2) + c3 * (c2 * c2 + 0.5 * c2 - 1.0) + (1.0 / 3.0 - 0.5 * c2)).abs()
}

/// Extra third-order condition of the 3-stage commutator-free Lie format:
/// `a32 c2 (1 - c2) = (3 c3 - 1) / 6`.
pub fn lie_cf3_condition_residual(t: &Tableau) -> Result<f64, TableauError> {
    if t.stages() != 3 {
        return Err(TableauError::StageCount {
            what: "Lie-CF3 condition",
            expected: 3,
            got: t.stages(),
        });
    }
    let (c2, c3, a32) = (t.c[1], t.c[2], t.a[2][1]);
    Ok((a32 * c2 * (1.0 - c2) - (3.0 * c3 - 1.0) / 6.0).abs())
}

/// Crouch-Grossman third-order condition
/// `sum_i b_i^2 c_i + 2 sum_{i<j} b_i c_i b_j = 1/3`.
pub fn crouch_grossman_oc3_residual(t: &Tableau) -> f64 {
    let (b, c) = (&t.b, &t.c);
    let s = b.len();
    let mut lhs = 0.0;
    for i in 0..s {
        lhs += b[i] * b[i] * c[i];
        for j in i + 1..s {
            lhs += 2.0 * b[i] * c[i] * b[j];
        }
    }
    (lhs - 1.0 / 3.0).abs()
}

/// Either coefficient form.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    TwoN(TwoNScheme),
    Butcher(Tableau),
}

impl Scheme {
    pub fn name(&self) -> &str {
        match self {
            Scheme::TwoN(s) => s.name(),
            Scheme::Butcher(t) => t.name(),
        }
    }

    pub fn stages(&self) -> usize {
        match self {
            Scheme::TwoN(s) => s.stages(),
            Scheme::Butcher(t) => t.stages(),
        }
    }

    pub fn declared_order(&self) -> u32 {
        match self {
            Scheme::TwoN(s) => s.declared_order(),
            Scheme::Butcher(t) => t.declared_order(),
        }
    }

    pub fn format_name(&self) -> &'static str {
        match self {
            Scheme::TwoN(_) => "2N",
            Scheme::Butcher(_) => "butcher",
        }
    }

    /// Butcher form (expanding a 2N scheme).
    pub fn tableau(&self) -> Tableau {
        match self {
            Scheme::TwoN(s) => to_butcher(s),
            Scheme::Butcher(t) => t.clone(),
        }
    }

    /// 2N form, recovering it from a tableau when possible.
    pub fn two_n(&self) -> Result<TwoNScheme, TableauError> {
        match self {
            Scheme::TwoN(s) => Ok(s.clone()),
            Scheme::Butcher(t) => from_butcher(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luscher() -> Tableau {
        Tableau::new(
            "LUSCHER33",
            vec![vec![], vec![0.25], vec![-2.0 / 9.0, 8.0 / 9.0]],
            vec![0.25, 0.0, 0.75],
            3,
        )
        .unwrap()
    }

    fn ralston3() -> Tableau {
        Tableau::new(
            "RALSTON3",
            vec![vec![], vec![0.5], vec![0.0, 0.75]],
            vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0],
            3,
        )
        .unwrap()
    }

    #[test]
    fn zero_a_accumulates_b() {
        // With A = 0 each register restarts, so stage i sees every earlier
        // increment: a_ij = B_j for all j < i and b_i = B_i.
        let s = TwoNScheme::new("z", vec![0.0; 3], vec![0.2, 0.3, 0.5], vec![0.0, 0.2, 0.5], 1)
            .unwrap();
        let t = to_butcher(&s);
        assert_eq!(t.a_rows()[1], vec![0.2, 0.0, 0.0]);
        assert_eq!(t.a_rows()[2], vec![0.2, 0.3, 0.0]);
        assert_eq!(t.b(), &[0.2, 0.3, 0.5]);
    }

    #[test]
    fn luscher_has_2n_form() {
        let s = from_butcher(&luscher()).unwrap();
        // Hand elimination: A_2 = (a31 - a21)/a32 = -17/32, A_3 = (b2 - a32)/b3 = -32/27.
        assert!((s.a()[1] + 17.0 / 32.0).abs() < 1e-15);
        assert!((s.a()[2] + 32.0 / 27.0).abs() < 1e-15);
        assert_eq!(s.b(), &[0.25, 8.0 / 9.0, 0.75]);
        let back = to_butcher(&s);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back.a(i, j) - luscher().a(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ralston3_is_not_2n() {
        assert!(matches!(
            from_butcher(&ralston3()),
            Err(TableauError::NotTwoNRepresentable { index: 2, .. })
        ));
    }

    #[test]
    fn williamson_constraint_values() {
        assert!(williamson_constraint_residual(0.25, 2.0 / 3.0) < 1e-16);
        // 9/32 - 3/8 + 1/12 = -1/96.
        assert!((williamson_constraint_residual(0.5, 0.75) - 1.0 / 96.0).abs() < 1e-15);
        assert!(williamson_constraint_residual(0.457379997569388, 0.792620002430607) <= 1e-14);
    }

    #[test]
    fn lie_cf3_values() {
        assert!(lie_cf3_condition_residual(&luscher()).unwrap() < 1e-16);
        // 3/4 * 1/2 * 1/2 = 3/16 against (9/4 - 1)/6 = 5/24.
        let r = lie_cf3_condition_residual(&ralston3()).unwrap();
        assert!((r - 1.0 / 48.0).abs() < 1e-15);
        let rk4 = Tableau::new(
            "RK4",
            vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            4,
        )
        .unwrap();
        assert!(matches!(
            lie_cf3_condition_residual(&rk4),
            Err(TableauError::StageCount { .. })
        ));
    }

    #[test]
    fn crouch_grossman_values() {
        assert!((crouch_grossman_oc3_residual(&luscher()) - 1.0 / 24.0).abs() < 1e-16);
        let zero_b = Tableau::new("zb", vec![vec![], vec![0.5]], vec![0.0, 0.0], 1).unwrap();
        assert_eq!(crouch_grossman_oc3_residual(&zero_b), 1.0 / 3.0);
    }

    #[test]
    fn luscher_third_order_exactly() {
        let report = classical_order_residuals(&luscher(), 3);
        assert_eq!(report.residuals.len(), 4);
        assert!(report.max_residual_up_to(3) < 1e-16);
        assert_eq!(report.satisfied_order, 3);
    }

    #[test]
    fn rejects_implicit_entries() {
        let r = Tableau::new("x", vec![vec![1.0, 0.0], vec![0.5, 0.0]], vec![0.5, 0.5], 1);
        assert!(matches!(r, Err(TableauError::NotExplicit { row: 0, col: 0, .. })));
    }

    #[test]
    fn rejects_bad_nodes() {
        let r = Tableau::with_nodes("x", vec![vec![], vec![0.5]], vec![0.5, 0.5], vec![0.0, 0.6], 1);
        assert!(matches!(r, Err(TableauError::NodeMismatch { index: 1, .. })));
    }

    #[test]
    fn rejects_nonzero_a1() {
        let r = TwoNScheme::new("x", vec![0.1, 0.0], vec![0.5, 0.5], vec![0.0, 0.5], 1);
        assert!(matches!(r, Err(TableauError::NonZeroA1 { .. })));
    }
}
