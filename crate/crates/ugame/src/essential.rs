//! Essential coalitions and the essential-set reduction of the
//! u-prenucleolus.
//!
//! A coalition is inessential when splitting it into smaller feasible
//! coalitions is at least as attractive, so its constraint never matters.
//! Classically that means `v(S) <= sum_T v(T)` for some feasible
//! partition of `S`; with per-coalition utilities the comparison runs
//! over u-excesses at u-core points: `S` is u-essential when some u-core
//! point `x` has `u_S(v(S) - x(S))` strictly above the combined
//! `sum_T u_T(v(T) - x(T))` of every feasible partition. Inessential
//! constraints can be dropped: the u-core and the u-prenucleolus are
//! already determined by the essential family, which is what
//! [`restrict_and_solve`] exploits.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::balance::{core_emptiness, level_rows, preimputation_row};
use crate::error::{Error, Result};
use crate::game::{Coalition, Game, Payoff};
use crate::lexcenter::{lex_center, PrenucleolusResult};
use crate::lp::{solve, LinRow, LinearProgram, LpSolution, Relation, Sense};
use crate::num::{rat, Rational, Value};
use crate::utility::UtilityFamily;

/// Largest coalition for which feasible partitions are enumerated
/// explicitly.
pub const PARTITION_MEMBER_LIMIT: usize = 14;
/// Largest player count for the classical subset DP.
pub const CLASSICAL_PLAYER_LIMIT: usize = 16;

/// All partitions of `s` into at least two nontrivial feasible
/// coalitions, each partition sorted canonically, in deterministic order.
pub fn enumerate_partitions(game: &Game, s: Coalition) -> Result<Vec<Vec<Coalition>>> {
    if s.is_empty() {
        return Err(Error::TrivialCoalition(s));
    }
    if !s.is_subset_of(game.players().grand()) {
        return Err(Error::PlayerOutOfRange(s));
    }
    if s.len() > PARTITION_MEMBER_LIMIT {
        return Err(Error::EnumerationLimit {
            what: "coalition members",
            limit: PARTITION_MEMBER_LIMIT,
            got: s.len(),
        });
    }
    let feasible = |c: Coalition| game.family().contains(c) && c != game.players().grand();
    let mut out = Vec::new();
    let mut acc: Vec<Coalition> = Vec::new();
    fn recurse(
        remaining: u64,
        feasible: &dyn Fn(Coalition) -> bool,
        acc: &mut Vec<Coalition>,
        out: &mut Vec<Vec<Coalition>>,
    ) {
        if remaining == 0 {
            if acc.len() >= 2 {
                let mut parts = acc.clone();
                parts.sort();
                out.push(parts);
            }
            return;
        }
        let low = remaining & remaining.wrapping_neg();
        let rest = remaining ^ low;
        // Every submask of `rest`, largest first, combined with the lowest
        // remaining player.
        let mut sub = rest;
        loop {
            let part = Coalition(low | sub);
            if feasible(part) {
                acc.push(part);
                recurse(remaining ^ part.0, feasible, acc, out);
                acc.pop();
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    recurse(s.0, &feasible, &mut acc, &mut out);
    out.sort();
    Ok(out)
}

/// Classical essential coalitions under full cooperation: `S` with
/// `v(S) > sum_T v(T)` for every partition into at least two parts.
/// Subset DP over all `3^n` (coalition, part) pairs.
pub fn classical_essential(game: &Game) -> Result<Vec<Coalition>> {
    if !game.family().is_full() {
        return Err(Error::RestrictedFamilyUnsupported);
    }
    let n = game.n();
    if n > CLASSICAL_PLAYER_LIMIT {
        return Err(Error::EnumerationLimit {
            what: "players",
            limit: CLASSICAL_PLAYER_LIMIT,
            got: n,
        });
    }
    let full = 1u64 << n;
    let mut value = vec![Rational::zero(); full as usize];
    for mask in 1..full {
        value[mask as usize] = game.value(Coalition(mask))?;
    }
    // best[mask]: the most a partition into one or more parts can collect.
    let mut best = vec![Rational::zero(); full as usize];
    let mut essential = Vec::new();
    for mask in 1..full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // Best over partitions with >= 2 parts: split off the part holding
        // the lowest player, partition the remainder freely.
        let mut split: Option<Rational> = None;
        let mut sub = rest;
        loop {
            let part = low | sub;
            if part != mask {
                let cand = &value[part as usize] + &best[(mask ^ part) as usize];
                split = Some(match split {
                    Some(b) => b.max(cand),
                    None => cand,
                });
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        let v = value[mask as usize].clone();
        best[mask as usize] = match &split {
            Some(b) => v.clone().max(b.clone()),
            None => v.clone(),
        };
        let nontrivial = mask != full - 1;
        if nontrivial && split.map_or(true, |b| v > b) {
            essential.push(Coalition(mask));
        }
    }
    essential.sort();
    Ok(essential)
}

/// Why a coalition is, or is not, u-essential.
#[derive(Clone, Debug)]
pub enum EssentialEvidence {
    /// Essential: no feasible partition exists at all.
    NoFeasiblePartition,
    /// Essential: at `point` (a u-core point) the coalition's u-excess
    /// beats every feasible partition by `margin > 0`.
    Witness { point: Payoff, margin: Rational },
    /// Not essential: even at the u-core point most favorable to the
    /// coalition, `partition` (made of u-essential coalitions) collects
    /// at least as much u-excess; `margin <= 0` is the best achievable
    /// advantage.
    Dominated {
        partition: Vec<Coalition>,
        at: Payoff,
        margin: Rational,
    },
    /// Not essential: the u-core is empty, so no witness point can exist.
    UCoreEmpty,
}

/// The u-essential family with per-coalition evidence.
#[derive(Clone, Debug)]
pub struct EssentialReport {
    pub essential: Vec<Coalition>,
    pub evidence: BTreeMap<Coalition, EssentialEvidence>,
    pub core_nonempty: bool,
}

/// `u_S(v(S) - x(S)) - sum_T u_T(v(T) - x(T))` for a candidate partition,
/// evaluated exactly.
fn advantage(
    game: &Game,
    fam: &UtilityFamily,
    x: &Payoff,
    s: Coalition,
    parts: &[Coalition],
) -> Result<Rational> {
    let mut total = match fam.u_excess(game, x, s)? {
        Value::Exact(e) => e,
        Value::Approx(_) => unreachable!("essential sets run in affine mode"),
    };
    for &t in parts {
        match fam.u_excess(game, x, t)? {
            Value::Exact(e) => total -= e,
            Value::Approx(_) => unreachable!("essential sets run in affine mode"),
        }
    }
    Ok(total)
}

/// The partition of `s` collecting the most u-excess at `x` (first in
/// enumeration order among ties).
fn best_partition_at(
    game: &Game,
    fam: &UtilityFamily,
    x: &Payoff,
    s: Coalition,
) -> Result<Vec<Coalition>> {
    let mut best: Option<(Rational, Vec<Coalition>)> = None;
    for parts in enumerate_partitions(game, s)? {
        // Larger collected excess means smaller advantage for `s`.
        let adv = advantage(game, fam, x, s, &parts)?;
        match &best {
            Some((b, _)) if *b <= adv => {}
            _ => best = Some((adv, parts)),
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::Internal(format!("no feasible partition of {s} to refine into")))
}

/// Replace inessential parts by their own best partitions at `x` until
/// every part is u-essential.
fn refine_to_essentials(
    game: &Game,
    fam: &UtilityFamily,
    x: &Payoff,
    parts: Vec<Coalition>,
    essential: &BTreeMap<Coalition, bool>,
) -> Result<Vec<Coalition>> {
    let mut out = Vec::new();
    let mut queue = parts;
    while let Some(t) = queue.pop() {
        if *essential.get(&t).unwrap_or(&true) {
            out.push(t);
        } else {
            queue.extend(best_partition_at(game, fam, x, t)?);
        }
    }
    out.sort();
    Ok(out)
}

/// Compute the u-essential coalitions. Affine families only: the
/// excess-advantage constraints must stay linear.
pub fn u_essential(game: &Game, fam: &UtilityFamily) -> Result<EssentialReport> {
    fam.affine_or_err("essential-set computation")?;
    let n = game.n();
    let coalitions: Vec<Coalition> = game.family().nontrivial().collect();
    let core_nonempty = core_emptiness(game, fam)?.is_nonempty();

    let mut essential = Vec::new();
    let mut evidence = BTreeMap::new();
    let mut status: BTreeMap<Coalition, bool> = BTreeMap::new();

    // Canonical order is size-ascending, so partition parts (strictly
    // smaller) always have their status decided before they are needed.
    for &s in &coalitions {
        let partitions = enumerate_partitions(game, s)?;
        if partitions.is_empty() {
            essential.push(s);
            status.insert(s, true);
            evidence.insert(s, EssentialEvidence::NoFeasiblePartition);
            continue;
        }
        if !core_nonempty {
            status.insert(s, false);
            evidence.insert(s, EssentialEvidence::UCoreEmpty);
            continue;
        }

        // Maximize the advantage delta of S over its best partition,
        // subject to x lying in the u-core. Columns: x_0..x_{n-1}, delta.
        let mut rows = vec![preimputation_row(game, n + 1)];
        for r in level_rows(game, fam, &Value::Exact(Rational::zero()))? {
            let mut coeffs = r.coeffs;
            coeffs.push(Rational::zero());
            rows.push(LinRow::new(coeffs, r.rel, r.rhs));
        }
        let affine = fam.as_affine().expect("checked affine above");
        let (a_s, b_s) = affine.scale_shift(s)?;
        for parts in &partitions {
            // u_S excess minus the parts' excesses, as a row in (x, delta):
            // sum_p (a_T(p) - a_S) x_p - delta >= -(a_S v(S) + b_S)
            //                                     + sum_T (a_T v(T) + b_T).
            let mut coeffs = vec![Rational::zero(); n + 1];
            for p in s.members() {
                coeffs[p] = -a_s.clone();
            }
            let mut rhs = -(&a_s * game.value(s)? + &b_s);
            for &t in parts {
                let (a_t, b_t) = affine.scale_shift(t)?;
                for p in t.members() {
                    coeffs[p] += &a_t;
                }
                rhs += &a_t * game.value(t)? + &b_t;
            }
            coeffs[n] = rat(-1);
            rows.push(LinRow::new(coeffs, Relation::Ge, rhs));
        }
        let mut objective = vec![Rational::zero(); n + 1];
        objective[n] = rat(1);
        let mut bounds = vec![(None, None); n + 1];
        bounds[n] = (None, Some(rat(1)));
        let lp = LinearProgram::new(Sense::Max, objective, rows).with_bounds(bounds);
        let (primal, margin) = match solve(&lp)? {
            LpSolution::Optimal { primal, value, .. } => (primal, value),
            other => {
                return Err(Error::Internal(format!(
                    "the advantage program has a point (nonempty u-core) and is capped, got {other:?}"
                )))
            }
        };
        let point = Payoff(primal[..n].to_vec());
        if margin > Rational::zero() {
            essential.push(s);
            status.insert(s, true);
            evidence.insert(s, EssentialEvidence::Witness { point, margin });
        } else {
            status.insert(s, false);
            let tight = best_partition_at(game, fam, &point, s)?;
            let partition = refine_to_essentials(game, fam, &point, tight, &status)?;
            evidence.insert(
                s,
                EssentialEvidence::Dominated {
                    partition,
                    at: point,
                    margin,
                },
            );
        }
    }
    Ok(EssentialReport {
        essential,
        evidence,
        core_nonempty,
    })
}

/// The essential-set reduction together with the solve it certifies.
#[derive(Clone, Debug)]
pub struct RestrictedSolve {
    pub report: EssentialReport,
    pub result: PrenucleolusResult,
}

/// Compute the u-prenucleolus minimizing only over u-essential
/// coalitions, while still tracking and fixing the whole nontrivial
/// family. Requires a u-balanced game: with an empty u-core the
/// essential family no longer determines the solution.
pub fn restrict_and_solve(game: &Game, fam: &UtilityFamily) -> Result<RestrictedSolve> {
    let report = u_essential(game, fam)?;
    if !report.core_nonempty {
        return Err(Error::NotUBalanced);
    }
    let bookkeeping: Vec<Coalition> = game.family().nontrivial().collect();
    let result = lex_center(game, fam, &report.essential, &bookkeeping)?;
    Ok(RestrictedSolve { report, result })
}
