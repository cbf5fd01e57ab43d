/*!
Cooperative TU games with restricted cooperation and per-coalition utility
scales, in exact rational arithmetic.

The crate models games whose feasible coalitions form an arbitrary family
`A` containing the empty and the grand coalition, and whose dissatisfaction
is measured by a strictly increasing utility `u_S` applied to the raw excess
`v(S) - x(S)` of each nontrivial feasible coalition. On top of that it
computes:

* the u-core and its emptiness test with a balancedness certificate from LP
  duality ([`balance`]);
* the u-least-core and the u-prenucleolus by the lexicographic-centre
  iteration, with the full fixing trace ([`lexcenter`]);
* the generalized Kohlberg criterion for verifying a candidate point
  ([`kohlberg`]);
* classical and u-essential coalitions, and prenucleolus computation
  restricted to the essential family ([`essential`]);
* assignment games built from profit matrices, with the structure of their
  essential coalitions under the per-capita-reciprocal scale
  ([`assignment`]).

Affine utility families keep every number exact; the general monotone mode
falls back to bisection with documented tolerances and flags its results as
approximate.
*/

pub mod assignment;
pub mod balance;
pub mod error;
pub mod essential;
pub mod game;
pub mod kohlberg;
pub mod lexcenter;
pub mod lp;
pub mod num;
pub mod utility;

pub use error::{Error, Result};
pub use game::{Coalition, FeasibleFamily, Game, Payoff, PlayerSet};
pub use num::{Rational, Value};
