//! The lexicographic center: the u-prenucleolus of a game with restricted
//! cooperation.
//!
//! Starting from the preimputation flat, each round minimizes the worst
//! remaining u-excess, restricts to the optimal face, and permanently
//! fixes every coalition whose total payoff `x(S)` is constant on that
//! face. The loop ends when every tracked coalition is fixed; the final
//! equality system describes the solution set, which is a single point
//! exactly when the incidence matrix of the feasible family has full
//! rank.
//!
//! The engine separates the coalitions whose excess levels are being
//! minimized (the constraint family) from the coalitions whose payoffs
//! are tracked and fixed (the bookkeeping family). The plain
//! u-prenucleolus uses the whole nontrivial family for both; the
//! essential-set reduction minimizes over essential coalitions only
//! while still tracking everything.

use std::collections::BTreeSet;

use num_traits::Zero;

use crate::balance::preimputation_row;
use crate::error::{Error, Result};
use crate::game::{Coalition, Game, Payoff};
use crate::lp::{matrix_rank, optimize_direction, solve, LinRow, LinearProgram, LpSolution, Relation, Sense};
use crate::num::{rat, to_f64, Rational, Value};
use crate::utility::{LevelVar, UtilityFamily};

/// One round of the lexicographic center loop.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    /// Round number, starting at 1.
    pub k: usize,
    /// The minimized excess level of this round. `None` for the trailing
    /// probe-only round that fixes tracked coalitions left over after the
    /// constraint family is exhausted.
    pub level: Option<Value>,
    /// Coalitions fixed this round with their now-constant payoffs.
    pub newly_fixed: Vec<(Coalition, Rational)>,
    /// Row description of the optimal face the round restricted to.
    pub polytope_rows: Vec<LinRow>,
}

/// The computed u-prenucleolus.
#[derive(Clone, Debug)]
pub struct PrenucleolusResult {
    /// A point of the solution set; the point itself when `is_singleton`.
    pub representative: Payoff,
    pub trace: Vec<IterationRecord>,
    /// Whether the final equality system pins a unique payoff, i.e. the
    /// incidence rows of the fixed coalitions and the grand coalition
    /// reach full rank.
    pub is_singleton: bool,
    /// The final equality system: the preimputation row plus one row per
    /// fixed coalition.
    pub solution_description: Vec<LinRow>,
    /// True when a general utility family made levels and fixed values
    /// tolerance-based rather than exact.
    pub approximate: bool,
}

impl PrenucleolusResult {
    /// The excess levels in the order they were minimized.
    pub fn levels(&self) -> Vec<Value> {
        self.trace.iter().filter_map(|r| r.level.clone()).collect()
    }
}

/// Is the u-core nonempty? Thin wrapper over the emptiness LP, the usual
/// companion question when certifying a prenucleolus.
pub fn check_nonempty(game: &Game, fam: &UtilityFamily) -> Result<bool> {
    Ok(crate::balance::core_emptiness(game, fam)?.is_nonempty())
}

/// Compute the u-prenucleolus over the whole nontrivial feasible family.
pub fn solve_prenucleolus(game: &Game, fam: &UtilityFamily) -> Result<PrenucleolusResult> {
    let all: Vec<Coalition> = game.family().nontrivial().collect();
    lex_center(game, fam, &all, &all)
}

fn coalition_sum(x: &[Rational], s: Coalition) -> Rational {
    s.members().map(|p| x[p].clone()).sum()
}

fn indicator(n: usize, s: Coalition) -> Vec<Rational> {
    let mut row = vec![Rational::zero(); n];
    for p in s.members() {
        row[p] = rat(1);
    }
    row
}

/// Levels are bounded below exactly when the grand coalition's indicator
/// lies in the cone spanned by the constraint coalitions' indicators.
fn levels_bounded(game: &Game, constraint: &[Coalition]) -> Result<bool> {
    let n = game.n();
    let m = constraint.len();
    let mut rows = Vec::with_capacity(n);
    for p in game.players().players() {
        let mut coeffs = vec![Rational::zero(); m];
        for (j, s) in constraint.iter().enumerate() {
            if s.contains(p) {
                coeffs[j] = rat(1);
            }
        }
        rows.push(LinRow::new(coeffs, Relation::Eq, rat(1)));
    }
    let bounds = vec![(Some(Rational::zero()), None); m];
    let lp = LinearProgram::new(Sense::Min, vec![Rational::zero(); m], rows).with_bounds(bounds);
    Ok(solve(&lp)?.is_optimal())
}

struct LevelOutcome {
    level: Value,
    /// A point of the optimal face, satisfying its rows exactly.
    representative: Vec<Rational>,
    /// Equalities so far plus the fixed-level rows of the active
    /// coalitions: a complete description of the optimal face.
    face_rows: Vec<LinRow>,
}

fn solve_level_affine(
    game: &Game,
    fam: &UtilityFamily,
    eq_rows: &[LinRow],
    active: &[Coalition],
) -> Result<LevelOutcome> {
    let n = game.n();
    let mut rows: Vec<LinRow> = eq_rows
        .iter()
        .map(|r| {
            let mut coeffs = r.coeffs.clone();
            coeffs.push(Rational::zero());
            LinRow::new(coeffs, r.rel, r.rhs.clone())
        })
        .collect();
    for &s in active {
        rows.push(fam.linearized_constraint(game, s, LevelVar::Variable)?);
    }
    let mut objective = vec![Rational::zero(); n + 1];
    objective[n] = rat(1);
    match solve(&LinearProgram::new(Sense::Min, objective, rows))? {
        LpSolution::Optimal { primal, value, .. } => {
            let level = Value::Exact(value);
            let mut face_rows = eq_rows.to_vec();
            for &s in active {
                face_rows.push(fam.linearized_constraint(game, s, LevelVar::Fixed(&level))?);
            }
            Ok(LevelOutcome {
                level,
                representative: primal[..n].to_vec(),
                face_rows,
            })
        }
        LpSolution::Unbounded { .. } => Err(Error::NotBalanced),
        LpSolution::Infeasible { .. } => Err(Error::Internal(
            "the running equality system always has a feasible point".into(),
        )),
    }
}

/// Exact feasibility of the level set at `t` over the running equalities.
fn level_point(
    game: &Game,
    fam: &UtilityFamily,
    eq_rows: &[LinRow],
    active: &[Coalition],
    t: f64,
) -> Result<Option<Vec<Rational>>> {
    let t = Value::Approx(t);
    let mut rows = eq_rows.to_vec();
    for &s in active {
        rows.push(fam.linearized_constraint(game, s, LevelVar::Fixed(&t))?);
    }
    match solve(&LinearProgram::new(
        Sense::Min,
        vec![Rational::zero(); game.n()],
        rows,
    ))? {
        LpSolution::Optimal { primal, .. } => Ok(Some(primal)),
        LpSolution::Infeasible { .. } => Ok(None),
        LpSolution::Unbounded { .. } => Err(Error::Internal(
            "a zero-objective feasibility check cannot be unbounded".into(),
        )),
    }
}

fn solve_level_general(
    game: &Game,
    fam: &UtilityFamily,
    eq_rows: &[LinRow],
    active: &[Coalition],
    start: &[Rational],
) -> Result<LevelOutcome> {
    let g = match fam {
        UtilityFamily::General(g) => g,
        UtilityFamily::Affine(_) => unreachable!("general path requires a general family"),
    };
    let (lo, _) = g.range();
    let tau = g.tolerances.bisection;
    const EXPANSION_CAP: usize = 80;

    // The worst excess at the start point is an attainable level.
    let x = Payoff(start.to_vec());
    let mut worst = f64::NEG_INFINITY;
    for &s in active {
        let e = fam.u_excess(game, &x, s)?.as_f64();
        if !e.is_finite() {
            return Err(Error::NonFiniteFloat(e));
        }
        worst = worst.max(e);
    }
    let mut t_hi = worst + (worst.abs() * 1e-12).max(tau);
    let mut witness = match level_point(game, fam, eq_rows, active, t_hi)? {
        Some(x) => x,
        None => start.to_vec(),
    };

    // March toward the lower end of the range until the level set empties.
    let mut t_lo = None;
    let mut step = 1.0f64;
    let mut probe = if lo.is_finite() {
        lo + (t_hi - lo) / 2.0
    } else {
        t_hi - step
    };
    for _ in 0..EXPANSION_CAP {
        if probe >= t_hi {
            break;
        }
        match level_point(game, fam, eq_rows, active, probe)? {
            Some(x) => {
                t_hi = probe;
                witness = x;
            }
            None => {
                t_lo = Some(probe);
                break;
            }
        }
        probe = if lo.is_finite() {
            lo + (probe - lo) / 2.0
        } else {
            step *= 2.0;
            probe - step
        };
    }
    let mut t_lo = t_lo.ok_or(Error::NotBalanced)?;

    while t_hi - t_lo > tau {
        let mid = t_lo + (t_hi - t_lo) / 2.0;
        if mid <= t_lo || mid >= t_hi {
            break;
        }
        match level_point(game, fam, eq_rows, active, mid)? {
            Some(x) => {
                t_hi = mid;
                witness = x;
            }
            None => t_lo = mid,
        }
    }

    let level = Value::Approx(t_hi);
    let mut face_rows = eq_rows.to_vec();
    for &s in active {
        face_rows.push(fam.linearized_constraint(game, s, LevelVar::Fixed(&level))?);
    }
    Ok(LevelOutcome {
        level,
        representative: witness,
        face_rows,
    })
}

/// Is `x(S)` constant over the face? Uses the point pool to refute
/// constancy cheaply, then exact min/max probes. Optimal probe points
/// join the pool. `tol` is `None` for exact mode.
fn payoff_constant_on_face(
    face: &[LinRow],
    n: usize,
    s: Coalition,
    at: &Rational,
    pool: &mut Vec<Vec<Rational>>,
    tol: Option<f64>,
) -> Result<bool> {
    let differs = |a: &Rational, b: &Rational| match tol {
        None => a != b,
        Some(t) => to_f64(&(a - b)).abs() > t,
    };
    for p in pool.iter() {
        if differs(&coalition_sum(p, s), at) {
            return Ok(false);
        }
    }
    let dir = indicator(n, s);
    let min = match optimize_direction(face, &dir, Sense::Min)? {
        LpSolution::Optimal { primal, value, .. } => {
            pool.push(primal);
            value
        }
        LpSolution::Unbounded { .. } => return Ok(false),
        LpSolution::Infeasible { .. } => {
            return Err(Error::Internal("the optimal face cannot be empty".into()))
        }
    };
    if differs(&min, at) {
        return Ok(false);
    }
    let max = match optimize_direction(face, &dir, Sense::Max)? {
        LpSolution::Optimal { primal, value, .. } => {
            pool.push(primal);
            value
        }
        LpSolution::Unbounded { .. } => return Ok(false),
        LpSolution::Infeasible { .. } => {
            return Err(Error::Internal("the optimal face cannot be empty".into()))
        }
    };
    Ok(!differs(&max, &min))
}

/// The lexicographic center loop. `constraint` lists the coalitions whose
/// excess levels are minimized; `bookkeeping` the coalitions tracked and
/// fixed (a superset). Both must consist of nontrivial feasible
/// coalitions.
pub(crate) fn lex_center(
    game: &Game,
    fam: &UtilityFamily,
    constraint: &[Coalition],
    bookkeeping: &[Coalition],
) -> Result<PrenucleolusResult> {
    let n = game.n();
    let mut unfixed: Vec<Coalition> = bookkeeping.to_vec();
    unfixed.sort();
    unfixed.dedup();
    if unfixed.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let constraint_set: BTreeSet<Coalition> = constraint.iter().copied().collect();
    debug_assert!(constraint_set.iter().all(|s| unfixed.binary_search(s).is_ok()));

    if !levels_bounded(game, constraint)? {
        return Err(Error::NotBalanced);
    }
    let general_tol = match fam {
        UtilityFamily::General(g) => {
            for &s in &unfixed {
                g.spot_check(s)?;
            }
            Some(g.tolerances.fixing)
        }
        UtilityFamily::Affine(_) => None,
    };

    let mut eq_rows = vec![preimputation_row(game, n)];
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut representative: Option<Vec<Rational>> = None;
    let iteration_cap = unfixed.len() + 1;

    for k in 1usize.. {
        let active: Vec<Coalition> = unfixed
            .iter()
            .copied()
            .filter(|s| constraint_set.contains(s))
            .collect();
        if active.is_empty() {
            break;
        }
        if k > iteration_cap {
            return Err(Error::Internal(
                "the lexicographic center loop failed to terminate".into(),
            ));
        }

        let outcome = match fam {
            UtilityFamily::Affine(_) => solve_level_affine(game, fam, &eq_rows, &active)?,
            UtilityFamily::General(_) => {
                let start = match representative.take() {
                    Some(x) => x,
                    None => level_point(game, fam, &eq_rows, &[], 0.0)?.ok_or_else(|| {
                        Error::Internal("the preimputation flat is nonempty".into())
                    })?,
                };
                solve_level_general(game, fam, &eq_rows, &active, &start)?
            }
        };

        let mut pool = vec![outcome.representative.clone()];
        let mut newly: Vec<(Coalition, Rational)> = Vec::new();
        for &s in &unfixed {
            let at = coalition_sum(&outcome.representative, s);
            if payoff_constant_on_face(&outcome.face_rows, n, s, &at, &mut pool, general_tol)? {
                newly.push((s, at));
            }
        }
        if newly.is_empty() {
            return Err(match general_tol {
                Some(_) => Error::BisectionTolerance(format!(
                    "no coalition payoff became constant at level {:?}",
                    outcome.level
                )),
                None => Error::Internal(
                    "an exact round always pins at least one constraint coalition".into(),
                ),
            });
        }
        for (s, w) in &newly {
            eq_rows.push(LinRow::new(indicator(n, *s), Relation::Eq, w.clone()));
        }
        unfixed.retain(|s| !newly.iter().any(|(t, _)| t == s));
        representative = Some(outcome.representative);
        trace.push(IterationRecord {
            k,
            level: Some(outcome.level),
            newly_fixed: newly,
            polytope_rows: outcome.face_rows,
        });
    }

    let representative = representative.ok_or(Error::Internal(
        "at least one round runs before the constraint family is exhausted".into(),
    ))?;

    // Constraint coalitions are exhausted. Any still-unfixed bookkeeping
    // coalition has a payoff determined by the fixed ones; one probe-only
    // round pins them on the final equality polytope.
    if !unfixed.is_empty() {
        let mut pool = vec![representative.clone()];
        let mut newly: Vec<(Coalition, Rational)> = Vec::new();
        for &s in &unfixed {
            let at = coalition_sum(&representative, s);
            if !payoff_constant_on_face(&eq_rows, n, s, &at, &mut pool, general_tol)? {
                return Err(match general_tol {
                    Some(_) => Error::BisectionTolerance(format!(
                        "tracked coalition {s} did not settle to a constant payoff"
                    )),
                    None => Error::Internal(format!(
                        "tracked coalition {s} is not determined by the constraint family"
                    )),
                });
            }
            newly.push((s, at));
        }
        let snapshot = eq_rows.clone();
        for (s, w) in &newly {
            eq_rows.push(LinRow::new(indicator(n, *s), Relation::Eq, w.clone()));
        }
        unfixed.clear();
        trace.push(IterationRecord {
            k: trace.len() + 1,
            level: None,
            newly_fixed: newly,
            polytope_rows: snapshot,
        });
    }

    let coeffs: Vec<Vec<Rational>> = eq_rows.iter().map(|r| r.coeffs.clone()).collect();
    let is_singleton = matrix_rank(&coeffs) == n;
    Ok(PrenucleolusResult {
        representative: Payoff(representative),
        trace,
        is_singleton,
        solution_description: eq_rows,
        approximate: general_tol.is_some(),
    })
}
