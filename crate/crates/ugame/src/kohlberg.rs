//! Balanced collections and the Kohlberg criterion.
//!
//! A collection `B` of nonempty coalitions is balanced when strictly
//! positive weights `lambda_S` exist with `sum_S lambda_S chi_S = chi_N`.
//! The Kohlberg criterion certifies a payoff as the u-prenucleolus: for
//! every attained u-excess level `alpha`, the cumulative collection
//! `D(alpha) = { S : u_S(v(S) - x(S)) >= alpha }` must be balanced.
//!
//! Deciding balancedness is done with a single exact LP over scaled
//! weights: maximize `sum_S eps_S` subject to
//! `sum_S lambda_S chi_S = tau chi_N`, `lambda_S >= eps_S`,
//! `0 <= eps_S <= 1`, `lambda, tau >= 0`. The collection is balanced
//! exactly when the optimum is `|B|`; the free scale `tau` makes the
//! test independent of weight normalization, and at an optimum each
//! `eps_S` is exactly 0 or 1, with the zero entries naming precisely the
//! coalitions that carry no weight in any balancing system.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::game::{Coalition, Game, Payoff, PlayerSet};
use crate::lp::{solve, LinRow, LinearProgram, LpSolution, Relation, Sense};
use crate::num::{rat, Rational, Value};
use crate::utility::UtilityFamily;

/// Strictly positive weights witnessing balancedness.
#[derive(Clone, Debug, PartialEq)]
pub struct BalancedCertificate {
    pub weights: BTreeMap<Coalition, Rational>,
}

impl BalancedCertificate {
    /// Exact check: all weights positive and per-player sums equal one.
    pub fn verify(&self, players: PlayerSet) -> bool {
        if self.weights.values().any(|w| *w <= Rational::zero()) {
            return false;
        }
        players.players().all(|p| {
            let total: Rational = self
                .weights
                .iter()
                .filter(|(s, _)| s.contains(p))
                .map(|(_, w)| w.clone())
                .sum();
            total == rat(1)
        })
    }
}

/// Why a collection fails to be balanced.
#[derive(Clone, Debug, PartialEq)]
pub struct ImbalanceDiagnostics {
    /// Players in no coalition of the collection.
    pub uncovered_players: Vec<usize>,
    /// Coalitions that carry zero weight in every nonnegative weight
    /// system proportional to the grand coalition.
    pub zero_weight_coalitions: Vec<Coalition>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CollectionVerdict {
    Balanced(BalancedCertificate),
    NotBalanced(ImbalanceDiagnostics),
}

impl CollectionVerdict {
    pub fn is_balanced(&self) -> bool {
        matches!(self, CollectionVerdict::Balanced(_))
    }
}

/// Decide whether `collection` is balanced over `players`. Coalitions may
/// repeat (duplicates are merged); the empty coalition is rejected.
pub fn is_balanced_collection(
    players: PlayerSet,
    collection: &[Coalition],
) -> Result<CollectionVerdict> {
    let grand = players.grand();
    let mut sets: Vec<Coalition> = Vec::with_capacity(collection.len());
    for &s in collection {
        if s.is_empty() {
            return Err(Error::TrivialCoalitionInCollection(s));
        }
        if !s.is_subset_of(grand) {
            return Err(Error::PlayerOutOfRange(s));
        }
        sets.push(s);
    }
    sets.sort();
    sets.dedup();

    let uncovered: Vec<usize> = players
        .players()
        .filter(|&p| !sets.iter().any(|s| s.contains(p)))
        .collect();
    if sets.is_empty() {
        return Ok(CollectionVerdict::NotBalanced(ImbalanceDiagnostics {
            uncovered_players: uncovered,
            zero_weight_coalitions: Vec::new(),
        }));
    }

    let m = sets.len();
    let n = players.count();
    // Columns: lambda_0..lambda_{m-1}, eps_0..eps_{m-1}, tau.
    let cols = 2 * m + 1;
    let mut rows = Vec::with_capacity(n + m);
    for p in players.players() {
        let mut coeffs = vec![Rational::zero(); cols];
        for (j, s) in sets.iter().enumerate() {
            if s.contains(p) {
                coeffs[j] = rat(1);
            }
        }
        coeffs[2 * m] = rat(-1);
        rows.push(LinRow::new(coeffs, Relation::Eq, Rational::zero()));
    }
    for j in 0..m {
        let mut coeffs = vec![Rational::zero(); cols];
        coeffs[j] = rat(1);
        coeffs[m + j] = rat(-1);
        rows.push(LinRow::new(coeffs, Relation::Ge, Rational::zero()));
    }
    let mut objective = vec![Rational::zero(); cols];
    let mut bounds = vec![(Some(Rational::zero()), None); cols];
    for j in 0..m {
        objective[m + j] = rat(1);
        bounds[m + j] = (Some(Rational::zero()), Some(rat(1)));
    }
    let lp = LinearProgram::new(Sense::Max, objective, rows).with_bounds(bounds);
    let (primal, value) = match solve(&lp)? {
        LpSolution::Optimal { primal, value, .. } => (primal, value),
        other => {
            return Err(Error::Internal(format!(
                "the balancedness program is always feasible and bounded, got {other:?}"
            )))
        }
    };

    if value == rat(m as i64) {
        let tau = primal[2 * m].clone();
        debug_assert!(tau > Rational::zero());
        let weights: BTreeMap<Coalition, Rational> = sets
            .iter()
            .enumerate()
            .map(|(j, &s)| (s, &primal[j] / &tau))
            .collect();
        let cert = BalancedCertificate { weights };
        debug_assert!(cert.verify(players));
        Ok(CollectionVerdict::Balanced(cert))
    } else {
        let zero_weight: Vec<Coalition> = sets
            .iter()
            .enumerate()
            .filter(|(j, _)| primal[m + j] < rat(1))
            .map(|(_, &s)| s)
            .collect();
        Ok(CollectionVerdict::NotBalanced(ImbalanceDiagnostics {
            uncovered_players: uncovered,
            zero_weight_coalitions: zero_weight,
        }))
    }
}

/// One attained u-excess level together with the cumulative collection
/// `D(alpha)` and its balancedness verdict.
#[derive(Clone, Debug)]
pub struct LevelReport {
    pub level: Value,
    pub coalitions: Vec<Coalition>,
    pub verdict: CollectionVerdict,
}

/// Result of the Kohlberg criterion at a payoff.
#[derive(Clone, Debug)]
pub struct KohlbergReport {
    pub preimputation: bool,
    /// All cumulative collections balanced (and `x` a preimputation).
    pub satisfied: bool,
    /// Reports up to and including the first failing level.
    pub levels: Vec<LevelReport>,
}

/// Group u-excesses into attained levels, decreasing. Exact grouping in
/// affine mode; in general mode two excesses within the family's level
/// tolerance of the group's representative fall into the same level.
fn excess_levels(
    game: &Game,
    fam: &UtilityFamily,
    x: &Payoff,
) -> Result<Vec<(Value, Vec<Coalition>)>> {
    match fam {
        UtilityFamily::Affine(_) => {
            let mut by_value: BTreeMap<Rational, Vec<Coalition>> = BTreeMap::new();
            for s in game.family().nontrivial() {
                let e = match fam.u_excess(game, x, s)? {
                    Value::Exact(e) => e,
                    Value::Approx(_) => unreachable!("affine excesses are exact"),
                };
                by_value.entry(e).or_default().push(s);
            }
            Ok(by_value
                .into_iter()
                .rev()
                .map(|(v, mut cs)| {
                    cs.sort();
                    (Value::Exact(v), cs)
                })
                .collect())
        }
        UtilityFamily::General(g) => {
            for s in game.family().nontrivial() {
                g.spot_check(s)?;
            }
            let mut pairs: Vec<(f64, Coalition)> = Vec::new();
            for s in game.family().nontrivial() {
                let e = fam.u_excess(game, x, s)?.as_f64();
                pairs.push((e, s));
            }
            pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let tol = g.tolerances.level;
            let mut levels: Vec<(Value, Vec<Coalition>)> = Vec::new();
            for (e, s) in pairs {
                match levels.last_mut() {
                    Some((Value::Approx(rep), cs)) if *rep - e <= tol => cs.push(s),
                    _ => levels.push((Value::Approx(e), vec![s])),
                }
            }
            for (_, cs) in &mut levels {
                cs.sort();
            }
            Ok(levels)
        }
    }
}

/// Check the Kohlberg criterion at `x`: every cumulative excess-level
/// collection must be balanced. Stops at the first failing level.
pub fn kohlberg_check(game: &Game, fam: &UtilityFamily, x: &Payoff) -> Result<KohlbergReport> {
    let preimputation = crate::game::is_preimputation(game, x)?;
    if !preimputation {
        return Ok(KohlbergReport {
            preimputation,
            satisfied: false,
            levels: Vec::new(),
        });
    }
    let mut cumulative: Vec<Coalition> = Vec::new();
    let mut levels = Vec::new();
    let mut satisfied = true;
    for (level, coalitions) in excess_levels(game, fam, x)? {
        cumulative.extend(coalitions);
        cumulative.sort();
        let verdict = is_balanced_collection(game.players(), &cumulative)?;
        let ok = verdict.is_balanced();
        levels.push(LevelReport {
            level,
            coalitions: cumulative.clone(),
            verdict,
        });
        if !ok {
            satisfied = false;
            break;
        }
    }
    Ok(KohlbergReport {
        preimputation,
        satisfied,
        levels,
    })
}
