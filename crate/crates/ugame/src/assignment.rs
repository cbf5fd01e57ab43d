//! Two-sided assignment games.
//!
//! An assignment market has row players `0..m` and column players
//! `m..m+m'`, with a surplus `a_ij` when row `i` trades with column `j`.
//! A coalition is worth the best total surplus of a matching between its
//! own rows and columns. The coalition values of the whole game come from
//! one subset dynamic program; explicit matchings are computed by brute
//! force on small sides and by an exact linear program on the matching
//! polytope (whose vertices are integral) beyond that.
//!
//! Ties between maximum matchings are broken canonically: the matching
//! whose sorted pair list is lexicographically smallest wins, where a
//! proper prefix beats any extension, so zero-surplus pairs are never
//! included.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::game::{Coalition, FeasibleFamily, Game, PlayerSet};
use crate::lp::{LinRow, LinearProgram, LpSolution, Relation, Sense, solve};
use crate::num::{rat, Rational};
use crate::utility::UtilityFamily;

/// Player count cap for eagerly tabulating all coalition values.
pub const ASSIGNMENT_PLAYER_LIMIT: usize = 20;
/// Side size up to which matchings are enumerated by brute force.
pub const BRUTE_FORCE_SIDE_LIMIT: usize = 6;

/// A two-sided market: `weights[i][j]` is the surplus of matching row
/// player `i` with column player `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentSpec {
    weights: Vec<Vec<Rational>>,
    rows: usize,
    cols: usize,
}

impl AssignmentSpec {
    pub fn new(weights: Vec<Vec<Rational>>) -> Result<Self> {
        let rows = weights.len();
        if rows == 0 {
            return Err(Error::InvalidAssignment("no row players".into()));
        }
        let cols = weights[0].len();
        if cols == 0 {
            return Err(Error::InvalidAssignment("no column players".into()));
        }
        if let Some(bad) = weights.iter().find(|r| r.len() != cols) {
            return Err(Error::InvalidAssignment(format!(
                "ragged weight matrix: a row has {} entries, expected {cols}",
                bad.len()
            )));
        }
        if rows + cols > ASSIGNMENT_PLAYER_LIMIT {
            return Err(Error::EnumerationLimit {
                what: "assignment players",
                limit: ASSIGNMENT_PLAYER_LIMIT,
                got: rows + cols,
            });
        }
        Ok(AssignmentSpec {
            weights,
            rows,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn players(&self) -> usize {
        self.rows + self.cols
    }

    pub fn weight(&self, i: usize, j: usize) -> &Rational {
        &self.weights[i][j]
    }

    /// The player index of column `j`.
    pub fn col_player(&self, j: usize) -> usize {
        self.rows + j
    }

    /// Split a coalition into row indices and column indices.
    pub fn sides(&self, s: Coalition) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut r = Vec::new();
        let mut c = Vec::new();
        for p in s.members() {
            if p < self.rows {
                r.push(p);
            } else if p < self.players() {
                c.push(p - self.rows);
            } else {
                return Err(Error::PlayerOutOfRange(s));
            }
        }
        Ok((r, c))
    }
}

/// A matching as sorted (row, column) index pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching(pub Vec<(usize, usize)>);

fn brute_weight(spec: &AssignmentSpec, rows: &[usize], cols: &[usize]) -> Rational {
    fn go(spec: &AssignmentSpec, rows: &[usize], cols: &[usize], k: usize, used: u64) -> Rational {
        if k == rows.len() {
            return Rational::zero();
        }
        let mut best = go(spec, rows, cols, k + 1, used);
        for (cj, &j) in cols.iter().enumerate() {
            if used >> cj & 1 == 0 {
                let cand =
                    spec.weight(rows[k], j) + go(spec, rows, cols, k + 1, used | 1 << cj);
                if cand > best {
                    best = cand;
                }
            }
        }
        best
    }
    go(spec, rows, cols, 0, 0)
}

/// Maximum matching weight as a linear program over the matching
/// polytope; simplex returns a vertex, and vertices are integral.
fn lp_weight(spec: &AssignmentSpec, rows: &[usize], cols: &[usize]) -> Result<Rational> {
    if rows.is_empty() || cols.is_empty() {
        return Ok(Rational::zero());
    }
    let vars = rows.len() * cols.len();
    let mut lp_rows = Vec::with_capacity(rows.len() + cols.len());
    for ri in 0..rows.len() {
        let mut coeffs = vec![Rational::zero(); vars];
        for cj in 0..cols.len() {
            coeffs[ri * cols.len() + cj] = rat(1);
        }
        lp_rows.push(LinRow::new(coeffs, Relation::Le, rat(1)));
    }
    for cj in 0..cols.len() {
        let mut coeffs = vec![Rational::zero(); vars];
        for ri in 0..rows.len() {
            coeffs[ri * cols.len() + cj] = rat(1);
        }
        lp_rows.push(LinRow::new(coeffs, Relation::Le, rat(1)));
    }
    let mut objective = vec![Rational::zero(); vars];
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            objective[ri * cols.len() + cj] = spec.weight(i, j).clone();
        }
    }
    let bounds = vec![(Some(Rational::zero()), None); vars];
    let lp = LinearProgram::new(Sense::Max, objective, lp_rows).with_bounds(bounds);
    match solve(&lp)? {
        LpSolution::Optimal { value, .. } => Ok(value),
        other => Err(Error::Internal(format!(
            "the matching polytope is compact and nonempty, got {other:?}"
        ))),
    }
}

/// Best matching weight between the given row and column indices.
pub fn max_weight(spec: &AssignmentSpec, rows: &[usize], cols: &[usize]) -> Result<Rational> {
    if rows.len() <= BRUTE_FORCE_SIDE_LIMIT && cols.len() <= BRUTE_FORCE_SIDE_LIMIT {
        Ok(brute_weight(spec, rows, cols))
    } else {
        lp_weight(spec, rows, cols)
    }
}

/// Best matching weight and the canonical optimal matching between the
/// given row and column indices (both ascending).
pub fn max_weight_matching(
    spec: &AssignmentSpec,
    rows: &[usize],
    cols: &[usize],
) -> Result<(Rational, Matching)> {
    let total = max_weight(spec, rows, cols)?;
    let mut used = vec![false; cols.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut current = Rational::zero();
    for (ri, &i) in rows.iter().enumerate() {
        if current == total {
            break;
        }
        let free: Vec<(usize, usize)> = cols
            .iter()
            .enumerate()
            .filter(|(cj, _)| !used[*cj])
            .map(|(cj, &j)| (cj, j))
            .collect();
        for &(cj, j) in &free {
            let rest_cols: Vec<usize> = free
                .iter()
                .filter(|(other, _)| *other != cj)
                .map(|(_, c)| *c)
                .collect();
            let with = &current + spec.weight(i, j) + max_weight(spec, &rows[ri + 1..], &rest_cols)?;
            if with == total {
                used[cj] = true;
                current += spec.weight(i, j);
                pairs.push((i, j));
                break;
            }
        }
    }
    debug_assert_eq!(current, total);
    Ok((total, Matching(pairs)))
}

/// Best matching weight and canonical matching within a coalition.
pub fn coalition_matching(spec: &AssignmentSpec, s: Coalition) -> Result<(Rational, Matching)> {
    let (rows, cols) = spec.sides(s)?;
    max_weight_matching(spec, &rows, &cols)
}

/// Build the assignment game: full cooperation over `m + m'` players,
/// every coalition worth its best internal matching. All values are
/// computed eagerly by a subset dynamic program; only nonzero ones are
/// stored.
pub fn build_game(spec: &AssignmentSpec) -> Result<Game> {
    let n = spec.players();
    let players = PlayerSet::new(n)?;
    let full = 1u64 << n;
    let mut value = vec![Rational::zero(); full as usize];
    for mask in 1..full {
        let top = 63 - mask.leading_zeros() as usize;
        if top < spec.rows {
            // Rows only: nothing to match.
            continue;
        }
        let j = top - spec.rows;
        // Column `j` stays unmatched, or pairs with one of the rows.
        let rest = mask ^ (1 << top);
        let mut best = value[rest as usize].clone();
        for i in 0..spec.rows {
            if rest >> i & 1 == 1 {
                let cand = spec.weight(i, j) + &value[(rest ^ (1 << i)) as usize];
                if cand > best {
                    best = cand;
                }
            }
        }
        value[mask as usize] = best;
    }
    let mut values = BTreeMap::new();
    for mask in 1..full {
        if !value[mask as usize].is_zero() {
            values.insert(Coalition(mask), value[mask as usize].clone());
        }
    }
    Game::new(FeasibleFamily::Full(players), values)
}

/// The compact description of the assignment-game core: nonnegative
/// payoffs, `x_i + y_j >= a_ij` for every mixed pair, and efficiency.
/// Pair and singleton constraints already imply all the others.
pub fn compact_core_rows(spec: &AssignmentSpec) -> Result<Vec<LinRow>> {
    let n = spec.players();
    let all_rows: Vec<usize> = (0..spec.rows).collect();
    let all_cols: Vec<usize> = (0..spec.cols).collect();
    let grand_value = max_weight(spec, &all_rows, &all_cols)?;

    let mut rows = Vec::with_capacity(1 + n + spec.rows * spec.cols);
    rows.push(LinRow::new(vec![rat(1); n], Relation::Eq, grand_value));
    for p in 0..n {
        let mut coeffs = vec![Rational::zero(); n];
        coeffs[p] = rat(1);
        rows.push(LinRow::new(coeffs, Relation::Ge, Rational::zero()));
    }
    for i in 0..spec.rows {
        for j in 0..spec.cols {
            let mut coeffs = vec![Rational::zero(); n];
            coeffs[i] = rat(1);
            coeffs[spec.col_player(j)] = rat(1);
            rows.push(LinRow::new(coeffs, Relation::Ge, spec.weight(i, j).clone()));
        }
    }
    Ok(rows)
}

/// Outcome of checking the essential-set structure of an assignment game
/// under the reciprocal per-capita scale `u_S(t) = |S| t`.
#[derive(Clone, Debug)]
pub struct StructureCheck {
    pub report: crate::essential::EssentialReport,
    /// Every u-essential coalition is a singleton or a mixed pair.
    pub conforming: bool,
    pub violations: Vec<Coalition>,
    /// The structural cap `m + m' + m m'` on the essential count.
    pub bound: usize,
}

/// Check that the u-essential coalitions of the game under the
/// reciprocal per-capita scale are singletons and mixed row-column pairs
/// only, and at most `m + m' + m m'` many.
pub fn verify_essential_structure(spec: &AssignmentSpec) -> Result<StructureCheck> {
    let game = build_game(spec)?;
    let fam = UtilityFamily::reciprocal_percapita();
    let report = crate::essential::u_essential(&game, &fam)?;
    let allowed = |s: Coalition| -> bool {
        match s.len() {
            1 => true,
            2 => {
                let (r, c) = match spec.sides(s) {
                    Ok(rc) => rc,
                    Err(_) => return false,
                };
                r.len() == 1 && c.len() == 1
            }
            _ => false,
        }
    };
    let violations: Vec<Coalition> = report
        .essential
        .iter()
        .copied()
        .filter(|&s| !allowed(s))
        .collect();
    let bound = spec.rows + spec.cols + spec.rows * spec.cols;
    let conforming = violations.is_empty() && report.essential.len() <= bound;
    Ok(StructureCheck {
        report,
        conforming,
        violations,
        bound,
    })
}
