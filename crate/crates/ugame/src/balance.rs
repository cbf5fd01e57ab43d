//! The u-core, its emptiness test, u-balancedness and the u-least core.
//!
//! The u-core of `(N, v, A, u)` is the set of preimputations `x` with
//! `u_S(v(S) - x(S)) <= 0` for every nontrivial feasible `S`. When the
//! common range of the family contains zero this is decided by one exact
//! LP: minimize `x(N)` subject to `x(S) >= v(S) - u_S^{-1}(0)` for all
//! `S` and `x(N) >= v(N)`. The u-core is nonempty exactly when the
//! optimum equals `v(N)`; the dual solution is a weight system on the
//! coalitions that certifies either verdict, which is the generalized
//! Bondareva-Shapley test for u-balancedness.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::game::{Coalition, Game, Payoff};
use crate::lp::{optimize_direction, solve, LinRow, LinearProgram, LpSolution, Relation, Sense};
use crate::num::{rat, Rational, Value};
use crate::utility::{LevelVar, RangeClass, UtilityFamily};

/// Weights `(lambda_S)` on the nontrivial feasible coalitions plus a
/// weight on the grand coalition, summing to one on every player:
/// `sum_S lambda_S chi_S + lambda_N chi_N = chi_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSystem {
    pub coalition_weights: BTreeMap<Coalition, Rational>,
    pub grand_weight: Rational,
    /// `sum_S lambda_S (v(S) - u_S^{-1}(0)) + lambda_N v(N)`. The u-core
    /// is empty exactly when some weight system pushes this above `v(N)`.
    pub bound: Rational,
}

/// Outcome of the u-core emptiness test.
#[derive(Clone, Debug)]
pub enum CoreStatus {
    /// The range of the family is strictly negative (or there are no
    /// nontrivial feasible coalitions): every preimputation is in the
    /// u-core.
    NonEmptyAllPreimputations,
    /// The range of the family is strictly positive: no payoff satisfies
    /// any coalition, the u-core is empty.
    Empty,
    /// Zero lies in the range and the LP decided.
    DecidedByLp {
        /// Minimum of `x(N)` over the constraint system; `>= v(N)` always.
        lp_optimum: Rational,
        core_nonempty: bool,
        /// A u-core point when the core is nonempty.
        witness: Option<Payoff>,
        /// Optimal dual weights; their `bound` exceeds `v(N)` exactly
        /// when the u-core is empty.
        dual_weights: Option<WeightSystem>,
    },
}

impl CoreStatus {
    pub fn is_nonempty(&self) -> bool {
        match self {
            CoreStatus::NonEmptyAllPreimputations => true,
            CoreStatus::Empty => false,
            CoreStatus::DecidedByLp { core_nonempty, .. } => *core_nonempty,
        }
    }
}

/// u-balancedness verdict; equivalent to u-core nonemptiness.
#[derive(Clone, Debug)]
pub struct BalanceOutcome {
    pub balanced: bool,
    pub status: CoreStatus,
}

/// The polytope `{x : x(N) = v(N), u_S(v(S) - x(S)) <= t for all S}`
/// described by exact linear rows over the `n` payoff coordinates.
#[derive(Clone, Debug)]
pub struct LevelSetPolytope {
    pub n: usize,
    pub rows: Vec<LinRow>,
    pub threshold: Value,
}

impl LevelSetPolytope {
    pub fn contains(&self, x: &Payoff) -> bool {
        x.0.len() == self.n && self.rows.iter().all(|r| r.satisfied_by(&x.0))
    }
}

/// Result of the u-least-core computation: the smallest `t` whose level
/// set is nonempty, a payoff attaining it, and the level-set description.
#[derive(Clone, Debug)]
pub struct LeastCoreResult {
    pub level: Value,
    pub witness: Payoff,
    pub polytope: LevelSetPolytope,
}

fn indicator(n_cols: usize, s: Coalition) -> Vec<Rational> {
    let mut row = vec![Rational::zero(); n_cols];
    for p in s.members() {
        row[p] = rat(1);
    }
    row
}

/// The preimputation constraint `x(N) = v(N)` over `n_cols >= n` columns
/// (extra columns get zero coefficients).
pub fn preimputation_row(game: &Game, n_cols: usize) -> LinRow {
    let mut coeffs = vec![Rational::zero(); n_cols];
    for p in game.players().players() {
        coeffs[p] = rat(1);
    }
    LinRow::new(coeffs, Relation::Eq, game.grand_value())
}

fn spot_check_general(game: &Game, fam: &UtilityFamily) -> Result<()> {
    if let UtilityFamily::General(g) = fam {
        for s in game.family().nontrivial() {
            g.spot_check(s)?;
        }
    }
    Ok(())
}

/// Rows `x(S) >= v(S) - u_S^{-1}(t)` for all nontrivial feasible `S`,
/// over the `n` payoff columns. Requires `t` to be an attainable value of
/// the family in general mode.
pub fn level_rows(game: &Game, fam: &UtilityFamily, t: &Value) -> Result<Vec<LinRow>> {
    game.family()
        .nontrivial()
        .map(|s| fam.linearized_constraint(game, s, LevelVar::Fixed(t)))
        .collect()
}

/// The level-set polytope at threshold `t`, including the preimputation
/// equality.
pub fn level_set(game: &Game, fam: &UtilityFamily, t: &Value) -> Result<LevelSetPolytope> {
    let mut rows = vec![preimputation_row(game, game.n())];
    rows.extend(level_rows(game, fam, t)?);
    Ok(LevelSetPolytope {
        n: game.n(),
        rows,
        threshold: t.clone(),
    })
}

/// Direct membership test: is `x` a preimputation with every u-excess at
/// most zero? Exact in affine mode; in general mode approximate excesses
/// are compared against the family's level tolerance.
pub fn core_membership(game: &Game, fam: &UtilityFamily, x: &Payoff) -> Result<bool> {
    if !crate::game::is_preimputation(game, x)? {
        return Ok(false);
    }
    let tol = match fam {
        UtilityFamily::General(g) => g.tolerances.level,
        UtilityFamily::Affine(_) => 0.0,
    };
    for s in game.family().nontrivial() {
        match fam.u_excess(game, x, s)? {
            Value::Exact(e) => {
                if e > Rational::zero() {
                    return Ok(false);
                }
            }
            Value::Approx(e) => {
                if e > tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Decide u-core emptiness. Range cases short-circuit; otherwise the
/// minimization of `x(N)` over the core constraint system decides, with
/// the optimal dual as a weight-system certificate.
pub fn core_emptiness(game: &Game, fam: &UtilityFamily) -> Result<CoreStatus> {
    let coalitions: Vec<Coalition> = game.family().nontrivial().collect();
    if coalitions.is_empty() {
        return Ok(CoreStatus::NonEmptyAllPreimputations);
    }
    match fam.range_class() {
        RangeClass::StrictlyNegative => return Ok(CoreStatus::NonEmptyAllPreimputations),
        RangeClass::StrictlyPositive => return Ok(CoreStatus::Empty),
        RangeClass::ContainsZero => {}
    }
    spot_check_general(game, fam)?;

    let n = game.n();
    let zero = Value::Exact(Rational::zero());
    let mut rows = level_rows(game, fam, &zero)?;
    rows.push(LinRow::new(
        indicator(n, game.players().grand()),
        Relation::Ge,
        game.grand_value(),
    ));
    let lp = LinearProgram::new(Sense::Min, indicator(n, game.players().grand()), rows.clone());
    match solve(&lp)? {
        LpSolution::Optimal {
            primal,
            value,
            dual,
        } => {
            let core_nonempty = value == game.grand_value();
            let mut coalition_weights = BTreeMap::new();
            for (i, s) in coalitions.iter().enumerate() {
                if !dual[i].is_zero() {
                    coalition_weights.insert(*s, dual[i].clone());
                }
            }
            let grand_weight = dual[coalitions.len()].clone();
            let weights = WeightSystem {
                coalition_weights,
                grand_weight,
                bound: value.clone(),
            };
            Ok(CoreStatus::DecidedByLp {
                lp_optimum: value,
                core_nonempty,
                witness: core_nonempty.then(|| Payoff(primal)),
                dual_weights: Some(weights),
            })
        }
        LpSolution::Infeasible { .. } => Err(Error::Internal(
            "core system cannot be infeasible: large payoffs satisfy every row".into(),
        )),
        LpSolution::Unbounded { .. } => Err(Error::Internal(
            "x(N) is bounded below by v(N) in the core system".into(),
        )),
    }
}

/// Generalized Bondereva-Shapley test: the game is u-balanced exactly
/// when the u-core is nonempty.
pub fn u_balanced(game: &Game, fam: &UtilityFamily) -> Result<BalanceOutcome> {
    let status = core_emptiness(game, fam)?;
    Ok(BalanceOutcome {
        balanced: status.is_nonempty(),
        status,
    })
}

/// Smallest `t` with a nonempty level set. One exact LP in affine mode;
/// bracketed bisection over the declared range in general mode.
pub fn least_core(game: &Game, fam: &UtilityFamily) -> Result<LeastCoreResult> {
    let coalitions: Vec<Coalition> = game.family().nontrivial().collect();
    if coalitions.is_empty() {
        return Err(Error::EmptyFamily);
    }
    match fam {
        UtilityFamily::Affine(_) => least_core_affine(game, fam),
        UtilityFamily::General(_) => {
            spot_check_general(game, fam)?;
            least_core_bisect(game, fam)
        }
    }
}

fn least_core_affine(game: &Game, fam: &UtilityFamily) -> Result<LeastCoreResult> {
    let n = game.n();
    // Columns: x_0 .. x_{n-1}, t.
    let mut rows = vec![preimputation_row(game, n + 1)];
    for s in game.family().nontrivial() {
        rows.push(fam.linearized_constraint(game, s, LevelVar::Variable)?);
    }
    let mut objective = vec![Rational::zero(); n + 1];
    objective[n] = rat(1);
    let lp = LinearProgram::new(Sense::Min, objective, rows);
    match solve(&lp)? {
        LpSolution::Optimal { primal, value, .. } => {
            let witness = Payoff(primal[..n].to_vec());
            let level = Value::Exact(value);
            let polytope = level_set(game, fam, &level)?;
            debug_assert!(polytope.contains(&witness));
            Ok(LeastCoreResult {
                level,
                witness,
                polytope,
            })
        }
        LpSolution::Unbounded { .. } => Err(Error::UnboundedBelow),
        LpSolution::Infeasible { .. } => Err(Error::Internal(
            "level variable makes the least-core system feasible".into(),
        )),
    }
}

/// Is the level set at `t` nonempty? Exact feasibility LP.
fn level_feasible(game: &Game, fam: &UtilityFamily, t: f64) -> Result<Option<Payoff>> {
    let t = Value::Approx(t);
    let mut rows = vec![preimputation_row(game, game.n())];
    rows.extend(level_rows(game, fam, &t)?);
    let lp = LinearProgram::new(Sense::Min, vec![Rational::zero(); game.n()], rows);
    match solve(&lp)? {
        LpSolution::Optimal { primal, .. } => Ok(Some(Payoff(primal))),
        LpSolution::Infeasible { .. } => Ok(None),
        LpSolution::Unbounded { .. } => Err(Error::Internal(
            "a feasibility check with zero objective cannot be unbounded".into(),
        )),
    }
}

fn least_core_bisect(game: &Game, fam: &UtilityFamily) -> Result<LeastCoreResult> {
    let g = match fam {
        UtilityFamily::General(g) => g,
        UtilityFamily::Affine(_) => unreachable!("bisection is only used in general mode"),
    };
    let (lo, hi) = g.range();
    let tau = g.tolerances.bisection;
    const EXPANSION_CAP: usize = 80;

    // March toward the upper end of the range until some level set is
    // nonempty.
    let mut t_hi = None;
    let mut witness = None;
    let mut probe = if hi.is_finite() {
        if lo.is_finite() {
            hi - (hi - lo) / 4.0
        } else {
            hi - hi.abs().max(1.0) / 4.0
        }
    } else {
        lo.max(0.0).max(1.0)
    };
    for _ in 0..EXPANSION_CAP {
        if let Some(x) = level_feasible(game, fam, probe)? {
            t_hi = Some(probe);
            witness = Some(x);
            break;
        }
        probe = if hi.is_finite() {
            hi - (hi - probe) / 2.0
        } else {
            probe * 2.0
        };
    }
    let mut t_hi = t_hi.ok_or_else(|| {
        Error::BisectionTolerance("no feasible excess level found below the range's upper end".into())
    })?;

    // March toward the lower end until a level set is empty.
    let mut t_lo = None;
    let mut probe = if lo.is_finite() {
        lo + (t_hi - lo) / 2.0
    } else {
        t_hi.min(0.0).min(-1.0)
    };
    for _ in 0..EXPANSION_CAP {
        if level_feasible(game, fam, probe)?.is_none() {
            t_lo = Some(probe);
            break;
        }
        probe = if lo.is_finite() {
            lo + (probe - lo) / 2.0
        } else {
            probe * 2.0
        };
        if probe >= t_hi {
            break;
        }
    }
    // Feasible all the way down: the infimum over the range is not
    // attained, the least-core level escapes below.
    let mut t_lo = t_lo.ok_or(Error::UnboundedBelow)?;

    while t_hi - t_lo > tau {
        let mid = t_lo + (t_hi - t_lo) / 2.0;
        if mid <= t_lo || mid >= t_hi {
            break;
        }
        match level_feasible(game, fam, mid)? {
            Some(x) => {
                t_hi = mid;
                witness = Some(x);
            }
            None => t_lo = mid,
        }
    }

    let level = Value::Approx(t_hi);
    let polytope = level_set(game, fam, &level)?;
    Ok(LeastCoreResult {
        level,
        witness: witness.expect("a feasible probe produced a witness"),
        polytope,
    })
}

/// Exact bounds of the linear functional `direction . x` over a polytope
/// given by rows; `None` when unbounded in that direction.
pub fn extreme_values(
    rows: &[LinRow],
    direction: &[Rational],
) -> Result<(Option<Rational>, Option<Rational>)> {
    let min = match optimize_direction(rows, direction, Sense::Min)? {
        LpSolution::Optimal { value, .. } => Some(value),
        LpSolution::Unbounded { .. } => None,
        LpSolution::Infeasible { .. } => {
            return Err(Error::Internal("polytope is empty".into()))
        }
    };
    let max = match optimize_direction(rows, direction, Sense::Max)? {
        LpSolution::Optimal { value, .. } => Some(value),
        LpSolution::Unbounded { .. } => None,
        LpSolution::Infeasible { .. } => {
            return Err(Error::Internal("polytope is empty".into()))
        }
    };
    Ok((min, max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::FeasibleFamily;
    use crate::num::ratio;
    use crate::utility::GeneralUtility;

    fn majority_game() -> Game {
        Game::full(
            3,
            &[
                (&[0, 1][..], rat(1)),
                (&[0, 2][..], rat(1)),
                (&[1, 2][..], rat(1)),
                (&[0, 1, 2][..], rat(1)),
            ],
        )
        .unwrap()
    }

    fn sample_game() -> Game {
        Game::full(
            4,
            &[
                (&[0, 1][..], rat(6)),
                (&[2, 3][..], rat(6)),
                (&[1, 2, 3][..], rat(6)),
                (&[0, 3][..], rat(4)),
                (&[3][..], rat(3)),
                (&[0, 1, 2][..], rat(9)),
                (&[0, 1, 2, 3][..], rat(12)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn majority_core_is_empty_with_certificate() {
        let g = majority_game();
        let fam = UtilityFamily::identity();
        match core_emptiness(&g, &fam).unwrap() {
            CoreStatus::DecidedByLp {
                lp_optimum,
                core_nonempty,
                witness,
                dual_weights,
            } => {
                assert_eq!(lp_optimum, ratio(3, 2));
                assert!(!core_nonempty);
                assert!(witness.is_none());
                let w = dual_weights.unwrap();
                assert_eq!(w.bound, ratio(3, 2));
                assert!(w.bound > g.grand_value());
                // The weights really balance: per-player sums are one.
                for p in 0..3 {
                    let mut total = w.grand_weight.clone();
                    for (s, lam) in &w.coalition_weights {
                        if s.contains(p) {
                            total += lam;
                        }
                    }
                    assert_eq!(total, rat(1));
                }
            }
            other => panic!("expected an LP-decided status, got {other:?}"),
        }
        assert!(!u_balanced(&g, &fam).unwrap().balanced);
    }

    #[test]
    fn majority_least_core_level_is_one_third() {
        let g = majority_game();
        let fam = UtilityFamily::identity();
        let lc = least_core(&g, &fam).unwrap();
        assert_eq!(lc.level, Value::Exact(ratio(1, 3)));
        assert!(lc.polytope.contains(&lc.witness));
        // The witness is a preimputation whose worst excess is exactly 1/3.
        let worst = g
            .family()
            .nontrivial()
            .map(|s| fam.u_excess(&g, &lc.witness, s).unwrap())
            .map(|v| v.as_exact().unwrap().clone())
            .max()
            .unwrap();
        assert_eq!(worst, ratio(1, 3));
    }

    #[test]
    fn sample_game_percapita_core_nonempty() {
        let g = sample_game();
        let fam = UtilityFamily::percapita();
        match core_emptiness(&g, &fam).unwrap() {
            CoreStatus::DecidedByLp {
                lp_optimum,
                core_nonempty,
                witness,
                ..
            } => {
                assert_eq!(lp_optimum, rat(12));
                assert!(core_nonempty);
                let w = witness.unwrap();
                assert!(core_membership(&g, &fam, &w).unwrap());
            }
            other => panic!("expected an LP-decided status, got {other:?}"),
        }
        let lc = least_core(&g, &fam).unwrap();
        assert_eq!(lc.level, Value::Exact(rat(0)));
    }

    #[test]
    fn membership_checks_the_boundary_exactly() {
        let g = sample_game();
        let fam = UtilityFamily::percapita();
        let inside = Payoff::from_ints(&[3, 3, 3, 3]);
        assert!(core_membership(&g, &fam, &inside).unwrap());
        // Moves value away from player 3, violating the singleton {3}.
        let outside = Payoff::from_ints(&[4, 3, 3, 2]);
        assert!(!core_membership(&g, &fam, &outside).unwrap());
        // Not a preimputation at all.
        let off = Payoff::from_ints(&[3, 3, 3, 4]);
        assert!(!core_membership(&g, &fam, &off).unwrap());
    }

    #[test]
    fn shifting_utilities_down_enlarges_the_core() {
        let g = majority_game();
        let fam = UtilityFamily::shift(rat(-5));
        let out = u_balanced(&g, &fam).unwrap();
        assert!(out.balanced);
        match out.status {
            CoreStatus::DecidedByLp { lp_optimum, .. } => assert_eq!(lp_optimum, rat(1)),
            other => panic!("expected an LP-decided status, got {other:?}"),
        }
    }

    #[test]
    fn strictly_signed_ranges_short_circuit() {
        let g = majority_game();
        let neg = UtilityFamily::general(
            GeneralUtility::new(|_, t| -(-t).exp(), |_, y| -(-y).ln(), f64::NEG_INFINITY, 0.0)
                .unwrap(),
        );
        assert!(matches!(
            core_emptiness(&g, &neg).unwrap(),
            CoreStatus::NonEmptyAllPreimputations
        ));
        let pos = UtilityFamily::general(
            GeneralUtility::new(|_, t| t.exp(), |_, y| y.ln(), 0.0, f64::INFINITY).unwrap(),
        );
        assert!(matches!(core_emptiness(&g, &pos).unwrap(), CoreStatus::Empty));
        assert!(!u_balanced(&g, &pos).unwrap().balanced);
    }

    #[test]
    fn arctan_least_core_matches_transformed_identity_level() {
        // With the same strictly increasing transform on every coalition,
        // minimizing the worst transformed excess is the transform of the
        // identity least-core level: here atan(1/3).
        let g = majority_game();
        let fam = UtilityFamily::general(
            GeneralUtility::new(
                |_, t| t.atan(),
                |_, y| y.tan(),
                -std::f64::consts::FRAC_PI_2,
                std::f64::consts::FRAC_PI_2,
            )
            .unwrap(),
        );
        let lc = least_core(&g, &fam).unwrap();
        let expect = (1.0f64 / 3.0).atan();
        match lc.level {
            Value::Approx(t) => assert!((t - expect).abs() < 1e-6, "level {t} vs {expect}"),
            other => panic!("expected an approximate level, got {other:?}"),
        }
    }

    #[test]
    fn empty_nontrivial_family_conventions() {
        let players = crate::game::PlayerSet::new(3).unwrap();
        let fam_set = FeasibleFamily::restricted(players, &[]).unwrap();
        let g = Game::new(fam_set, BTreeMap::from([(Coalition::from_members(&[0, 1, 2]), rat(5))]))
            .unwrap();
        let u = UtilityFamily::identity();
        assert!(matches!(
            core_emptiness(&g, &u).unwrap(),
            CoreStatus::NonEmptyAllPreimputations
        ));
        assert!(matches!(least_core(&g, &u), Err(Error::EmptyFamily)));
    }

    #[test]
    fn random_games_emptiness_agrees_with_least_core_sign() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xba1a_0001);
        let fam = UtilityFamily::identity();
        for _ in 0..40 {
            let mut vals: Vec<(Vec<usize>, Rational)> = Vec::new();
            for s in 1u64..8 {
                let members: Vec<usize> = (0..3).filter(|p| s >> p & 1 == 1).collect();
                vals.push((members, rat(rng.gen_range(-4..8))));
            }
            let refs: Vec<(&[usize], Rational)> =
                vals.iter().map(|(m, v)| (&m[..], v.clone())).collect();
            let g = Game::full(3, &refs).unwrap();
            let status = core_emptiness(&g, &fam).unwrap();
            let lc = least_core(&g, &fam).unwrap();
            let nonneg_level = lc.level.as_exact().unwrap() <= &Rational::zero();
            assert_eq!(
                status.is_nonempty(),
                nonneg_level,
                "core emptiness and least-core sign disagree"
            );
            if let CoreStatus::DecidedByLp {
                witness: Some(w), ..
            } = &status
            {
                assert!(core_membership(&g, &fam, w).unwrap());
            }
        }
    }
}
