//! Exact linear programming over rationals.
//!
//! A dense two-phase primal simplex with Bland's pivoting rule. Everything
//! is `BigRational`, so optima, duals and certificates are exact and the
//! consumers can test identities like "optimum == v(N)" with `==`.
//!
//! Variables are free by default; optional per-variable bounds are
//! supported. Rows may be `<=`, `==` or `>=`. The solver reports one of
//! three statuses, each with its witness:
//!
//! * `Optimal`: primal vertex, exact objective value, and dual multipliers
//!   for the rows. Sign convention: for a minimisation, `>=` rows get
//!   nonnegative multipliers and `<=` rows nonpositive ones (mirrored for
//!   maximisation); equality rows are unconstrained. With `d = c - A'y`,
//!   strong duality holds exactly: `value = y'b + d'x*`.
//! * `Infeasible`: a Farkas vector `y` over the rows (same sign
//!   convention) with `sup { y'Ax : x within bounds } < y'b`.
//! * `Unbounded`: a feasible improving ray.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::num::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One linear constraint `coeffs . x  rel  rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinRow {
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    pub rhs: Rational,
}

impl LinRow {
    pub fn new(coeffs: Vec<Rational>, rel: Relation, rhs: Rational) -> Self {
        LinRow { coeffs, rel, rhs }
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        dot(&self.coeffs, x)
    }

    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        let lhs = self.eval(x);
        match self.rel {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
            Relation::Ge => lhs >= self.rhs,
        }
    }
}

/// Per-variable bounds; `None` means unbounded on that side.
pub type Bounds = (Option<Rational>, Option<Rational>);

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub rows: Vec<LinRow>,
    /// Either empty (all variables free) or one entry per variable.
    pub bounds: Vec<Bounds>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<Rational>, rows: Vec<LinRow>) -> Self {
        LinearProgram {
            sense,
            objective,
            rows,
            bounds: Vec::new(),
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<Bounds>) -> Self {
        self.bounds = bounds;
        self
    }

    fn nvars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        if self.nvars() == 0 {
            return Err(Error::MalformedProgram("no variables".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != self.nvars() {
                return Err(Error::MalformedProgram(format!(
                    "row {i} has {} coefficients, expected {}",
                    row.coeffs.len(),
                    self.nvars()
                )));
            }
        }
        if !self.bounds.is_empty() {
            if self.bounds.len() != self.nvars() {
                return Err(Error::MalformedProgram(format!(
                    "{} bound pairs for {} variables",
                    self.bounds.len(),
                    self.nvars()
                )));
            }
            for (j, (lo, hi)) in self.bounds.iter().enumerate() {
                if let (Some(l), Some(h)) = (lo, hi) {
                    if l > h {
                        return Err(Error::MalformedProgram(format!(
                            "variable {j} has crossing bounds"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn bound(&self, j: usize) -> Bounds {
        if self.bounds.is_empty() {
            (None, None)
        } else {
            self.bounds[j].clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpSolution {
    Optimal {
        primal: Vec<Rational>,
        value: Rational,
        dual: Vec<Rational>,
    },
    Infeasible {
        farkas: Vec<Rational>,
    },
    Unbounded {
        ray: Vec<Rational>,
    },
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpSolution::Optimal { .. })
    }

    /// The optimal vertex and value, or an internal error for callers that
    /// have already established feasibility and boundedness.
    pub fn expect_optimal(self, what: &str) -> Result<(Vec<Rational>, Rational, Vec<Rational>)> {
        match self {
            LpSolution::Optimal { primal, value, dual } => Ok((primal, value, dual)),
            other => Err(Error::Internal(format!(
                "{what}: expected an optimal LP solution, got {}",
                match other {
                    LpSolution::Infeasible { .. } => "infeasible",
                    LpSolution::Unbounded { .. } => "unbounded",
                    LpSolution::Optimal { .. } => unreachable!(),
                }
            ))),
        }
    }
}

/// Minimise or maximise `direction . x` over the polyhedron given by `rows`
/// (all variables free). Convenience wrapper used by the polytope probes.
pub fn optimize_direction(
    rows: &[LinRow],
    direction: &[Rational],
    sense: Sense,
) -> Result<LpSolution> {
    solve(&LinearProgram::new(
        sense,
        direction.to_vec(),
        rows.to_vec(),
    ))
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Rational::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

/// How each original variable maps into the nonnegative standard form.
#[derive(Clone, Debug)]
enum VarMap {
    /// `x = u+ - u-` (two columns).
    Free(usize, usize),
    /// `x = lo + u`.
    Shifted(usize, Rational),
    /// `x = hi - u` (upper bound only).
    Flipped(usize, Rational),
}

struct Standard {
    /// Rows of the equality system `T u = b`, `b >= 0`, in column-major
    /// sparse-free dense form; one artificial per row forms the start basis.
    tableau: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    n_cols: usize,
    art_start: usize,
    /// -1 where a row was negated to make the rhs nonnegative.
    flip: Vec<i8>,
    var_map: Vec<VarMap>,
    obj_const: Rational,
    /// Internal (minimisation) objective over the standard-form columns.
    obj: Vec<Rational>,
    m_orig: usize,
}

fn build_standard(lp: &LinearProgram) -> Standard {
    let n = lp.nvars();
    let internal_obj: Vec<Rational> = match lp.sense {
        Sense::Min => lp.objective.clone(),
        Sense::Max => lp.objective.iter().map(|c| -c).collect(),
    };

    // Assign columns to variables and collect extra rows for two-sided
    // bounds (`u <= hi - lo` after the lower-bound shift).
    let mut var_map = Vec::with_capacity(n);
    let mut n_struct = 0usize;
    let mut bound_rows: Vec<(usize, Rational)> = Vec::new(); // (column, width)
    for j in 0..n {
        match lp.bound(j) {
            (None, None) => {
                var_map.push(VarMap::Free(n_struct, n_struct + 1));
                n_struct += 2;
            }
            (Some(lo), None) => {
                var_map.push(VarMap::Shifted(n_struct, lo));
                n_struct += 1;
            }
            (None, Some(hi)) => {
                var_map.push(VarMap::Flipped(n_struct, hi));
                n_struct += 1;
            }
            (Some(lo), Some(hi)) => {
                bound_rows.push((n_struct, &hi - &lo));
                var_map.push(VarMap::Shifted(n_struct, lo));
                n_struct += 1;
            }
        }
    }

    let m = lp.rows.len() + bound_rows.len();
    let n_slack = lp
        .rows
        .iter()
        .filter(|r| r.rel != Relation::Eq)
        .count()
        + bound_rows.len();
    let n_cols = n_struct + n_slack + m;
    let art_start = n_struct + n_slack;

    let mut tableau = vec![vec![Rational::zero(); n_cols]; m];
    let mut rhs = vec![Rational::zero(); m];
    let mut flip = vec![1i8; m];
    let mut obj = vec![Rational::zero(); n_cols];
    let mut obj_const = Rational::zero();

    // Structural coefficients and the transformed objective.
    let fill_cols = |dense: &mut Vec<Rational>, coeffs: &dyn Fn(usize) -> Rational| {
        for (j, vm) in var_map.iter().enumerate() {
            let c = coeffs(j);
            if c.is_zero() {
                continue;
            }
            match vm {
                VarMap::Free(p, q) => {
                    dense[*p] = c.clone();
                    dense[*q] = -c;
                }
                VarMap::Shifted(p, _) => dense[*p] = c,
                VarMap::Flipped(p, _) => dense[*p] = -c,
            }
        }
    };

    fill_cols(&mut obj, &|j| internal_obj[j].clone());
    for (j, vm) in var_map.iter().enumerate() {
        match vm {
            VarMap::Shifted(_, lo) => obj_const += &internal_obj[j] * lo,
            VarMap::Flipped(_, hi) => obj_const += &internal_obj[j] * hi,
            VarMap::Free(..) => {}
        }
    }

    let mut slack = art_start - n_slack; // first slack column
    for (i, row) in lp.rows.iter().enumerate() {
        fill_cols(&mut tableau[i], &|j| row.coeffs[j].clone());
        let mut b = row.rhs.clone();
        for (j, vm) in var_map.iter().enumerate() {
            match vm {
                VarMap::Shifted(_, lo) => b -= &row.coeffs[j] * lo,
                VarMap::Flipped(_, hi) => b -= &row.coeffs[j] * hi,
                VarMap::Free(..) => {}
            }
        }
        rhs[i] = b;
        match row.rel {
            Relation::Le => {
                tableau[i][slack] = Rational::one();
                slack += 1;
            }
            Relation::Ge => {
                tableau[i][slack] = -Rational::one();
                slack += 1;
            }
            Relation::Eq => {}
        }
    }
    for (k, (col, width)) in bound_rows.iter().enumerate() {
        let i = lp.rows.len() + k;
        tableau[i][*col] = Rational::one();
        tableau[i][slack] = Rational::one();
        slack += 1;
        rhs[i] = width.clone();
    }

    // Nonnegative rhs, then one artificial per row as the initial basis.
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        if rhs[i].is_negative() {
            for v in tableau[i].iter_mut() {
                if !v.is_zero() {
                    *v = -v.clone();
                }
            }
            rhs[i] = -rhs[i].clone();
            flip[i] = -1;
        }
        tableau[i][art_start + i] = Rational::one();
        basis.push(art_start + i);
    }

    Standard {
        tableau,
        rhs,
        basis,
        n_cols,
        art_start,
        flip,
        var_map,
        obj_const,
        obj,
        m_orig: lp.rows.len(),
    }
}

enum Step {
    Optimal,
    Unbounded { entering: usize },
}

/// Run Bland-rule simplex on the tableau for the given cost vector.
///
/// `pin_artificials` is set in phase two: artificial variables must stay at
/// zero, so whenever the entering column touches a basic artificial's row
/// we pivot the artificial out instead of running the ratio test (the pivot
/// is degenerate, hence still feasible, and it strictly reduces the number
/// of basic artificials, so it cannot cycle).
fn simplex(std: &mut Standard, cost: &[Rational], pin_artificials: bool) -> Result<Step> {
    let m = std.tableau.len();
    // Reduced costs maintained incrementally: z_j = cost_j - cost_B' B^-1 A_j.
    let mut red = cost.to_vec();
    for r in 0..m {
        let cb = &cost[std.basis[r]];
        if cb.is_zero() {
            continue;
        }
        for j in 0..std.n_cols {
            if !std.tableau[r][j].is_zero() {
                let delta = cb * &std.tableau[r][j];
                red[j] -= delta;
            }
        }
    }

    let pivot_cap = 50_000 + 200 * (m + std.n_cols);
    for _ in 0..pivot_cap {
        // Bland: smallest eligible column index. Artificials never enter.
        let mut entering = None;
        for j in 0..std.art_start {
            if red[j].is_negative() {
                entering = Some(j);
                break;
            }
        }
        let Some(e) = entering else {
            return Ok(Step::Optimal);
        };

        let mut leaving: Option<usize> = None;
        if pin_artificials {
            // Degenerate artificial rows block the ray; clear them first.
            for r in 0..m {
                if std.basis[r] >= std.art_start
                    && !std.tableau[r][e].is_zero()
                    && std.rhs[r].is_zero()
                {
                    leaving = Some(r);
                    break;
                }
            }
        }
        if leaving.is_none() {
            let mut best: Option<(Rational, usize)> = None;
            for r in 0..m {
                if std.tableau[r][e].is_positive() {
                    let ratio = &std.rhs[r] / &std.tableau[r][e];
                    let better = match &best {
                        None => true,
                        Some((b, br)) => {
                            ratio < *b || (ratio == *b && std.basis[r] < std.basis[*br])
                        }
                    };
                    if better {
                        best = Some((ratio, r));
                    }
                }
            }
            leaving = best.map(|(_, r)| r);
        }
        let Some(r) = leaving else {
            return Ok(Step::Unbounded { entering: e });
        };

        pivot(std, &mut red, r, e);
    }
    Err(Error::Internal("simplex pivot cap exceeded".into()))
}

fn pivot(std: &mut Standard, red: &mut [Rational], r: usize, e: usize) {
    let p = std.tableau[r][e].clone();
    if !p.is_one() {
        for v in std.tableau[r].iter_mut() {
            if !v.is_zero() {
                *v /= &p;
            }
        }
        std.rhs[r] /= &p;
    }
    let pivot_row = std.tableau[r].clone();
    let pivot_rhs = std.rhs[r].clone();
    for i in 0..std.tableau.len() {
        if i == r {
            continue;
        }
        let f = std.tableau[i][e].clone();
        if f.is_zero() {
            continue;
        }
        for j in 0..std.n_cols {
            if !pivot_row[j].is_zero() {
                let delta = &f * &pivot_row[j];
                std.tableau[i][j] -= delta;
            }
        }
        std.rhs[i] -= &f * &pivot_rhs;
    }
    let f = red[e].clone();
    if !f.is_zero() {
        for j in 0..std.n_cols {
            if !pivot_row[j].is_zero() {
                let delta = &f * &pivot_row[j];
                red[j] -= delta;
            }
        }
    }
    std.basis[r] = e;
}

/// Row multipliers `y = cost_B' B^-1`, read off the artificial columns
/// (artificial i's column is the i-th column of `B^-1` throughout).
fn row_multipliers(std: &Standard, cost: &[Rational]) -> Vec<Rational> {
    let m = std.tableau.len();
    let mut y = vec![Rational::zero(); m];
    for i in 0..m {
        let mut acc = Rational::zero();
        for r in 0..m {
            let cb = &cost[std.basis[r]];
            if !cb.is_zero() && !std.tableau[r][std.art_start + i].is_zero() {
                acc += cb * &std.tableau[r][std.art_start + i];
            }
        }
        y[i] = acc;
    }
    y
}

/// Undo the rhs-sign flips (and, for duals of a maximisation, the internal
/// objective negation) to express multipliers in terms of the original rows.
/// Farkas certificates are sense-independent and skip the second flip.
fn external_duals(
    lp: &LinearProgram,
    std: &Standard,
    y_int: &[Rational],
    apply_sense: bool,
) -> Vec<Rational> {
    let negate = apply_sense && lp.sense == Sense::Max;
    (0..std.m_orig)
        .map(|i| {
            let mut v = y_int[i].clone();
            if std.flip[i] < 0 {
                v = -v;
            }
            if negate {
                v = -v;
            }
            v
        })
        .collect()
}

fn primal_from(std: &Standard) -> Vec<Rational> {
    let mut cols = vec![Rational::zero(); std.n_cols];
    for (r, &b) in std.basis.iter().enumerate() {
        cols[b] = std.rhs[r].clone();
    }
    std.var_map
        .iter()
        .map(|vm| match vm {
            VarMap::Free(p, q) => &cols[*p] - &cols[*q],
            VarMap::Shifted(p, lo) => lo + &cols[*p],
            VarMap::Flipped(p, hi) => hi - &cols[*p],
        })
        .collect()
}

fn ray_from(std: &Standard, entering: usize) -> Vec<Rational> {
    // Direction: entering column moves up by one, basics compensate.
    let mut cols = vec![Rational::zero(); std.n_cols];
    cols[entering] = Rational::one();
    for (r, &b) in std.basis.iter().enumerate() {
        cols[b] = -std.tableau[r][entering].clone();
    }
    std.var_map
        .iter()
        .map(|vm| match vm {
            VarMap::Free(p, q) => &cols[*p] - &cols[*q],
            VarMap::Shifted(p, _) => cols[*p].clone(),
            VarMap::Flipped(p, _) => -cols[*p].clone(),
        })
        .collect()
}

/// Solve the program exactly.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let mut std = build_standard(lp);
    let m = std.tableau.len();

    // Phase one: minimise the sum of artificials.
    let mut phase1 = vec![Rational::zero(); std.n_cols];
    for j in std.art_start..std.n_cols {
        phase1[j] = Rational::one();
    }
    match simplex(&mut std, &phase1, false)? {
        Step::Optimal => {}
        Step::Unbounded { .. } => {
            return Err(Error::Internal(
                "phase one cannot be unbounded".into(),
            ))
        }
    }
    let infeas: Rational = (0..m)
        .filter(|&r| std.basis[r] >= std.art_start)
        .map(|r| std.rhs[r].clone())
        .sum();
    if !infeas.is_zero() {
        let y = row_multipliers(&std, &phase1);
        let farkas = external_duals(lp, &std, &y, false);
        return Ok(LpSolution::Infeasible { farkas });
    }

    // Phase two over the real objective, artificials pinned to zero.
    let obj = std.obj.clone();
    match simplex(&mut std, &obj, true)? {
        Step::Optimal => {
            let primal = primal_from(&std);
            let mut value = std.obj_const.clone();
            for (r, &b) in std.basis.iter().enumerate() {
                if !std.obj[b].is_zero() {
                    value += &std.obj[b] * &std.rhs[r];
                }
            }
            if lp.sense == Sense::Max {
                value = -value;
            }
            let y = row_multipliers(&std, &obj);
            let dual = external_duals(lp, &std, &y, true);
            Ok(LpSolution::Optimal {
                primal,
                value,
                dual,
            })
        }
        Step::Unbounded { entering } => Ok(LpSolution::Unbounded {
            ray: ray_from(&std, entering),
        }),
    }
}

/// Exact rank of a rational matrix (Gaussian elimination).
pub fn matrix_rank(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    if m.is_empty() {
        return 0;
    }
    let ncols = m[0].len();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let lead = m[rank][col].clone();
        for j in col..ncols {
            m[rank][j] /= &lead;
        }
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for j in col..ncols {
                    let delta = &f * &m[rank][j];
                    m[r][j] -= delta;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}
