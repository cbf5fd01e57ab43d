//! Crate-wide error type.

use crate::game::Coalition;

/// Everything that can go wrong while building games or running solvers.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Player count outside 1..=62 (coalitions are 64-bit masks).
    #[error("player count {0} not supported (must be between 1 and 62)")]
    TooManyPlayers(usize),

    /// A coalition mentions a player outside the player set.
    #[error("coalition {0} is not contained in the player set")]
    PlayerOutOfRange(Coalition),

    /// A coalition is not a member of the feasible family.
    #[error("coalition {0} is not in the feasible family")]
    UnknownCoalition(Coalition),

    /// The empty or grand coalition was used where a nontrivial one is required.
    #[error("coalition {0} is trivial here (empty or grand coalition)")]
    TrivialCoalition(Coalition),

    /// A payoff vector has the wrong length for the player set.
    #[error("payoff has {got} entries, expected {expected}")]
    PayoffLength { expected: usize, got: usize },

    /// Rational input that could not be parsed, including zero denominators.
    #[error("malformed rational `{0}`")]
    MalformedRational(String),

    /// A float that cannot be converted to an exact rational.
    #[error("non-finite float {0} cannot be made exact")]
    NonFiniteFloat(f64),

    /// An LP whose shape is inconsistent (row lengths, bound order, ...).
    #[error("malformed linear program: {0}")]
    MalformedProgram(String),

    /// A utility scale or weight that must be strictly positive was not.
    #[error("utility for coalition {0} has a non-positive scale")]
    NonPositiveScale(Coalition),

    /// A per-coalition utility table/weight map does not cover the family.
    #[error("utility is undefined for coalition {0}")]
    UtilityUndefined(Coalition),

    /// General-mode evaluator failed a construction spot check.
    #[error("general utility rejected: {0}")]
    UtilityCheckFailed(String),

    /// A value outside the declared range of a general utility.
    #[error("value {0} is outside the declared utility range")]
    OutOfRange(f64),

    /// An operation that requires the affine utility mode got a general one.
    #[error("{0} supports affine utilities only")]
    GeneralUtilityUnsupported(&'static str),

    /// Level LP unbounded below: the family of nontrivial coalitions is not
    /// balanced, so no least-core level exists.
    #[error("least-core level is unbounded below; the coalition family is not balanced")]
    UnboundedBelow,

    /// There are no nontrivial feasible coalitions, so excess levels are
    /// undefined.
    #[error("the feasible family has no nontrivial coalitions")]
    EmptyFamily,

    /// The nontrivial feasible family admits no strictly positive balancing
    /// weights; the u-prenucleolus is empty.
    #[error("the nontrivial feasible family is not balanced")]
    NotBalanced,

    /// The game is not u-balanced, so the essential-restriction theorem does
    /// not apply.
    #[error("the game is not u-balanced")]
    NotUBalanced,

    /// Classical essential coalitions are only defined under full cooperation.
    #[error("classical essential coalitions require the full coalition family")]
    RestrictedFamilyUnsupported,

    /// A balanced-collection query contained the empty coalition.
    #[error("balanced-collection query contains trivial coalition {0}")]
    TrivialCoalitionInCollection(Coalition),

    /// An exhaustive enumeration (partitions, subset DP) would be too large.
    #[error("exhaustive enumeration over {what} is limited to {limit}, got {got}")]
    EnumerationLimit {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    /// A malformed two-sided assignment specification.
    #[error("invalid assignment specification: {0}")]
    InvalidAssignment(String),

    /// Bisection failed to bracket or converge in general utility mode.
    #[error("bisection failed: {0}")]
    BisectionTolerance(String),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
