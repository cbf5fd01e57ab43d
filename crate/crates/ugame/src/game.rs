//! Players, coalitions, feasible coalition families and TU games.
//!
//! A game consists of a player set `N = {0, .., n-1}` (n <= 62), a feasible
//! family `A` of coalitions that always contains the empty and the grand
//! coalition, and a characteristic function `v : A -> Q` with `v(empty) = 0`.
//! Cooperation may be restricted: only members of `A` ever enter a solver.
//! Coalitions are 64-bit bitmasks, so membership tests and unions are
//! single instructions.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{rat, Rational};

/// The player set `{0, .., n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlayerSet {
    n: usize,
}

impl PlayerSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 62 {
            return Err(Error::TooManyPlayers(n));
        }
        Ok(PlayerSet { n })
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// The grand coalition `N`.
    pub fn grand(&self) -> Coalition {
        Coalition(((1u64 << self.n) - 1) as u64)
    }

    pub fn players(&self) -> impl Iterator<Item = usize> {
        0..self.n
    }
}

/// A coalition, encoded as a bitmask over player indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_members(members: &[usize]) -> Self {
        let mut mask = 0u64;
        for &p in members {
            debug_assert!(p < 62);
            mask |= 1 << p;
        }
        Coalition(mask)
    }

    pub fn singleton(player: usize) -> Self {
        Coalition(1 << player)
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(&self, player: usize) -> bool {
        self.0 >> player & 1 == 1
    }

    pub fn is_subset_of(&self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(&self, other: Coalition) -> Coalition {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(&self, other: Coalition) -> Coalition {
        Coalition(self.0 & other.0)
    }

    pub fn minus(&self, other: Coalition) -> Coalition {
        Coalition(self.0 & !other.0)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..64).filter(move |p| mask >> p & 1 == 1)
    }

    /// Canonical ordering: by size first, then lexicographically by the
    /// ascending member list. This is the order used for every listing the
    /// crate produces, so output is deterministic.
    pub fn canonical_cmp(&self, other: &Coalition) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.members().cmp(other.members()))
    }
}

/// Order coalitions canonically (size, then member list). `Ord` is the
/// canonical order so that `BTreeMap`/`BTreeSet` keyed by coalitions iterate
/// deterministically in listing order.
impl Ord for Coalition {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical_cmp(other)
    }
}

impl PartialOrd for Coalition {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Debug for Coalition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self}")
    }
}

impl std::fmt::Display for Coalition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for p in self.members() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// All size-`k` subsets of `{0..n-1}` in lexicographic member-list order,
/// which is the canonical order within one size class. Streams without
/// materialising the family.
fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = Coalition> {
    let mut idx: Option<Vec<usize>> = if k <= n {
        Some((0..k).collect())
    } else {
        None
    };
    std::iter::from_fn(move || {
        let cur = idx.as_ref()?;
        let coalition = Coalition::from_members(cur);
        // Advance to the next combination.
        if k == 0 {
            idx = None;
            return Some(coalition);
        }
        let cur = idx.as_mut().unwrap();
        let mut i = k;
        loop {
            if i == 0 {
                idx = None;
                break;
            }
            i -= 1;
            if cur[i] != i + n - k {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(coalition)
    })
}

/// The feasible coalition family `A`. Always contains the empty and the
/// grand coalition; `A*` denotes the nontrivial members.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeasibleFamily {
    /// Full cooperation: every subset of `N` is feasible. The family is
    /// never materialised; iteration streams subsets in canonical order.
    Full(PlayerSet),
    /// Restricted cooperation: an explicit list. Stored sorted canonically
    /// and duplicate-free, including the empty and the grand coalition.
    Restricted {
        players: PlayerSet,
        coalitions: Vec<Coalition>,
    },
}

impl FeasibleFamily {
    pub fn full(players: PlayerSet) -> Self {
        FeasibleFamily::Full(players)
    }

    /// Build a restricted family. The empty and grand coalitions are added
    /// automatically; listed coalitions must fit inside the player set.
    pub fn restricted(players: PlayerSet, coalitions: &[Coalition]) -> Result<Self> {
        let grand = players.grand();
        let mut all: Vec<Coalition> = Vec::with_capacity(coalitions.len() + 2);
        for &c in coalitions {
            if !c.is_subset_of(grand) {
                return Err(Error::PlayerOutOfRange(c));
            }
            all.push(c);
        }
        all.push(Coalition::EMPTY);
        all.push(grand);
        all.sort();
        all.dedup();
        Ok(FeasibleFamily::Restricted {
            players,
            coalitions: all,
        })
    }

    pub fn players(&self) -> PlayerSet {
        match self {
            FeasibleFamily::Full(p) => *p,
            FeasibleFamily::Restricted { players, .. } => *players,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, FeasibleFamily::Full(_))
    }

    pub fn contains(&self, s: Coalition) -> bool {
        match self {
            FeasibleFamily::Full(p) => s.is_subset_of(p.grand()),
            FeasibleFamily::Restricted { coalitions, .. } => coalitions.binary_search(&s).is_ok(),
        }
    }

    /// Number of members of `A*` (nontrivial coalitions).
    pub fn nontrivial_len(&self) -> usize {
        match self {
            FeasibleFamily::Full(p) => (1usize << p.count()) - 2,
            FeasibleFamily::Restricted { coalitions, .. } => coalitions.len() - 2,
        }
    }

    /// The nontrivial members `A* = A \ {empty, N}` in canonical order.
    pub fn nontrivial(&self) -> Box<dyn Iterator<Item = Coalition> + '_> {
        match self {
            FeasibleFamily::Full(p) => {
                let n = p.count();
                Box::new((1..n).flat_map(move |k| subsets_of_size(n, k)))
            }
            FeasibleFamily::Restricted { players, coalitions } => {
                let grand = players.grand();
                Box::new(
                    coalitions
                        .iter()
                        .copied()
                        .filter(move |c| !c.is_empty() && *c != grand),
                )
            }
        }
    }

    /// Every member including the trivial ones, in canonical order.
    pub fn all(&self) -> Box<dyn Iterator<Item = Coalition> + '_> {
        match self {
            FeasibleFamily::Full(p) => {
                let n = p.count();
                Box::new((0..=n).flat_map(move |k| subsets_of_size(n, k)))
            }
            FeasibleFamily::Restricted { coalitions, .. } => Box::new(coalitions.iter().copied()),
        }
    }
}

/// A TU game with (possibly) restricted cooperation.
///
/// Values are stored sparsely: under full cooperation an absent coalition is
/// worth zero, under restricted cooperation every nontrivial member of the
/// family must be listed explicitly (the empty coalition is always worth
/// zero and need not be).
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    family: FeasibleFamily,
    values: BTreeMap<Coalition, Rational>,
}

impl Game {
    pub fn new(family: FeasibleFamily, values: BTreeMap<Coalition, Rational>) -> Result<Self> {
        let grand = family.players().grand();
        for (&c, _) in &values {
            if !family.contains(c) {
                return Err(Error::UnknownCoalition(c));
            }
        }
        if let Some(v0) = values.get(&Coalition::EMPTY) {
            if !v0.is_zero() {
                return Err(Error::MalformedProgram(
                    "the empty coalition must be worth zero".into(),
                ));
            }
        }
        if let FeasibleFamily::Restricted { coalitions, .. } = &family {
            for &c in coalitions {
                if !c.is_empty() && !values.contains_key(&c) {
                    return Err(Error::UnknownCoalition(c));
                }
            }
        } else if !values.contains_key(&grand) {
            // Full mode defaults absentees to zero, including v(N).
        }
        let mut values = values;
        values.remove(&Coalition::EMPTY);
        Ok(Game { family, values })
    }

    /// Convenience constructor for full cooperation from (members, value)
    /// pairs; unlisted coalitions are worth zero.
    pub fn full(n: usize, entries: &[(&[usize], Rational)]) -> Result<Self> {
        let players = PlayerSet::new(n)?;
        let mut values = BTreeMap::new();
        for (members, v) in entries {
            values.insert(Coalition::from_members(members), v.clone());
        }
        Game::new(FeasibleFamily::full(players), values)
    }

    pub fn family(&self) -> &FeasibleFamily {
        &self.family
    }

    pub fn players(&self) -> PlayerSet {
        self.family.players()
    }

    pub fn n(&self) -> usize {
        self.family.players().count()
    }

    /// `v(S)`. Errors if `S` is not feasible.
    pub fn value(&self, s: Coalition) -> Result<Rational> {
        if !self.family.contains(s) {
            return Err(Error::UnknownCoalition(s));
        }
        Ok(self.values.get(&s).cloned().unwrap_or_else(Rational::zero))
    }

    /// `v(N)`.
    pub fn grand_value(&self) -> Rational {
        self.values
            .get(&self.players().grand())
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// The stored (nonzero under full mode) values, for serialisation.
    pub fn stored_values(&self) -> &BTreeMap<Coalition, Rational> {
        &self.values
    }

    /// Restrict the game to a sub-family of coalitions. The grand and empty
    /// coalitions are kept implicitly; every listed coalition must already
    /// be feasible. Values carry over unchanged.
    pub fn restrict_family(&self, keep: &[Coalition]) -> Result<Game> {
        let players = self.players();
        let grand = players.grand();
        let mut values = BTreeMap::new();
        for &c in keep {
            if c.is_empty() || c == grand {
                continue;
            }
            values.insert(c, self.value(c)?);
        }
        values.insert(grand, self.grand_value());
        let family = FeasibleFamily::restricted(players, keep)?;
        Game::new(family, values)
    }
}

/// A payoff vector `x` over the player set.
#[derive(Clone, Debug, PartialEq)]
pub struct Payoff(pub Vec<Rational>);

impl Payoff {
    pub fn from_ints(values: &[i64]) -> Self {
        Payoff(values.iter().map(|&v| rat(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `x(S) = sum of x_i over i in S`.
    pub fn coalition_sum(&self, s: Coalition) -> Rational {
        let mut total = Rational::zero();
        for p in s.members() {
            total += &self.0[p];
        }
        total
    }
}

/// `x(S)` with bounds checking against the game's player set.
pub fn coalition_value(game: &Game, x: &Payoff, s: Coalition) -> Result<Rational> {
    check_payoff(game, x)?;
    if !s.is_subset_of(game.players().grand()) {
        return Err(Error::PlayerOutOfRange(s));
    }
    Ok(x.coalition_sum(s))
}

/// The raw excess `e(S, x) = v(S) - x(S)`.
pub fn excess(game: &Game, x: &Payoff, s: Coalition) -> Result<Rational> {
    check_payoff(game, x)?;
    Ok(game.value(s)? - x.coalition_sum(s))
}

/// Is `x` a preimputation, i.e. `x(N) = v(N)`?
pub fn is_preimputation(game: &Game, x: &Payoff) -> Result<bool> {
    check_payoff(game, x)?;
    Ok(x.coalition_sum(game.players().grand()) == game.grand_value())
}

fn check_payoff(game: &Game, x: &Payoff) -> Result<()> {
    if x.len() != game.n() {
        return Err(Error::PayoffLength {
            expected: game.n(),
            got: x.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::ratio;

    /// Four-player running example used across the crate: v(N)=12,
    /// v({1,2})=v({3,4})=v({2,3,4})=6, v({1,4})=4, v({4})=3, v({1,2,3})=9
    /// in 1-based labels; players are 0-based indices here.
    pub(crate) fn sample_game() -> Game {
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
    fn coalition_basics() {
        let c = Coalition::from_members(&[0, 2, 5]);
        assert_eq!(c.len(), 3);
        assert!(c.contains(2) && !c.contains(1));
        assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(c.to_string(), "{0,2,5}");
        assert!(Coalition::from_members(&[0]).is_subset_of(c));
        assert_eq!(
            c.minus(Coalition::singleton(2)),
            Coalition::from_members(&[0, 5])
        );
    }

    #[test]
    fn canonical_order_sorts_by_size_then_members() {
        let mut cs = vec![
            Coalition::from_members(&[1, 2]),
            Coalition::from_members(&[0]),
            Coalition::from_members(&[0, 3]),
            Coalition::from_members(&[0, 2]),
            Coalition::from_members(&[3]),
        ];
        cs.sort();
        let shown: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
        assert_eq!(shown, ["{0}", "{3}", "{0,2}", "{0,3}", "{1,2}"]);
    }

    #[test]
    fn full_family_streams_all_nontrivial_subsets() {
        let fam = FeasibleFamily::full(PlayerSet::new(4).unwrap());
        let all: Vec<Coalition> = fam.nontrivial().collect();
        assert_eq!(all.len(), 14);
        // Canonical: all singletons first, then pairs, then triples.
        assert_eq!(all[0], Coalition::singleton(0));
        assert_eq!(all[3], Coalition::singleton(3));
        assert_eq!(all[4], Coalition::from_members(&[0, 1]));
        assert_eq!(all[13], Coalition::from_members(&[1, 2, 3]));
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    #[test]
    fn restricted_family_adds_trivial_members_and_validates() {
        let players = PlayerSet::new(3).unwrap();
        let fam = FeasibleFamily::restricted(
            players,
            &[
                Coalition::from_members(&[0, 1]),
                Coalition::singleton(2),
            ],
        )
        .unwrap();
        assert!(fam.contains(Coalition::EMPTY));
        assert!(fam.contains(players.grand()));
        assert!(fam.contains(Coalition::from_members(&[0, 1])));
        assert!(!fam.contains(Coalition::singleton(0)));
        assert_eq!(fam.nontrivial_len(), 2);

        let oob = FeasibleFamily::restricted(players, &[Coalition::from_members(&[5])]);
        assert!(matches!(oob, Err(Error::PlayerOutOfRange(_))));
    }

    #[test]
    fn game_values_default_to_zero_under_full_cooperation() {
        let g = sample_game();
        assert_eq!(g.value(Coalition::from_members(&[0, 1])).unwrap(), rat(6));
        assert_eq!(g.value(Coalition::from_members(&[0, 2])).unwrap(), rat(0));
        assert_eq!(g.grand_value(), rat(12));
    }

    #[test]
    fn restricted_game_requires_every_value() {
        let players = PlayerSet::new(2).unwrap();
        let fam = FeasibleFamily::restricted(players, &[Coalition::singleton(0)]).unwrap();
        let mut values = BTreeMap::new();
        values.insert(players.grand(), rat(2));
        // Missing v({0}).
        assert!(matches!(
            Game::new(fam.clone(), values.clone()),
            Err(Error::UnknownCoalition(_))
        ));
        values.insert(Coalition::singleton(0), rat(1));
        let g = Game::new(fam, values).unwrap();
        assert_eq!(g.value(Coalition::singleton(0)).unwrap(), rat(1));
        assert!(matches!(
            g.value(Coalition::singleton(1)),
            Err(Error::UnknownCoalition(_))
        ));
    }

    #[test]
    fn excess_and_preimputation() {
        let g = sample_game();
        let x = Payoff::from_ints(&[3, 3, 3, 3]);
        assert!(is_preimputation(&g, &x).unwrap());
        // v({1,2,4}) - x({1,2,4}) = 0 - 9 (1-based labels).
        assert_eq!(
            excess(&g, &x, Coalition::from_members(&[0, 1, 3])).unwrap(),
            rat(-9)
        );
        assert_eq!(
            excess(&g, &x, Coalition::from_members(&[0, 1])).unwrap(),
            rat(0)
        );
        let y = Payoff(vec![rat(3), rat(3), rat(3), ratio(7, 2)]);
        assert!(!is_preimputation(&g, &y).unwrap());
        let short = Payoff::from_ints(&[1, 2]);
        assert!(matches!(
            excess(&g, &short, Coalition::singleton(0)),
            Err(Error::PayoffLength { .. })
        ));
    }

    #[test]
    fn restrict_family_carries_values() {
        let g = sample_game();
        let keep = [
            Coalition::from_members(&[0, 1]),
            Coalition::from_members(&[3]),
        ];
        let r = g.restrict_family(&keep).unwrap();
        assert_eq!(r.family().nontrivial_len(), 2);
        assert_eq!(r.value(Coalition::from_members(&[0, 1])).unwrap(), rat(6));
        assert_eq!(r.grand_value(), rat(12));
        assert!(r.value(Coalition::from_members(&[2, 3])).is_err());
    }
}
