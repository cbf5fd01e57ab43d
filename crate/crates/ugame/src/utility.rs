//! Per-coalition utility scales applied to raw excesses.
//!
//! Each nontrivial feasible coalition `S` gets a strictly increasing,
//! continuous `u_S` with a common range; dissatisfaction at `x` is
//! `u_S(v(S) - x(S))`. Affine families (`u_S(t) = a_S t + b_S`, `a_S > 0`)
//! cover the identity, per-capita, shifted, q-weighted and
//! reciprocal-per-capita scales and keep the whole pipeline exact, because
//! `u_S` and its inverse map rationals to rationals. The general mode
//! accepts arbitrary user evaluators plus a declared open range and runs
//! with floating-point tolerances instead.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::game::{Coalition, Game, Payoff};
use crate::lp::{LinRow, Relation};
use crate::num::{from_f64, rat, to_f64, Rational, Value};

/// Where the common range of the family sits relative to zero. Decides the
/// trivial u-core cases: a range of negatives means every preimputation is
/// in the u-core, a range of positives means none is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangeClass {
    ContainsZero,
    StrictlyNegative,
    StrictlyPositive,
}

/// Affine scales `u_S(t) = a_S t + b_S` with `a_S > 0`, range all of `R`.
#[derive(Clone)]
pub enum AffineUtility {
    /// `u_S(t) = t`.
    Identity,
    /// `u_S(t) = t / |S|`.
    PerCapita,
    /// `u_S(t) = |S| t`.
    ReciprocalPerCapita,
    /// `u_S(t) = t + c`.
    Shift(Rational),
    /// `u_S(t) = t / q(S)` with `q(S) > 0`, given per coalition.
    QWeighted(BTreeMap<Coalition, Rational>),
    /// Arbitrary `(a_S, b_S)` per coalition.
    Table(BTreeMap<Coalition, (Rational, Rational)>),
}

impl AffineUtility {
    /// The pair `(a_S, b_S)`.
    pub fn scale_shift(&self, s: Coalition) -> Result<(Rational, Rational)> {
        if s.is_empty() {
            return Err(Error::TrivialCoalition(s));
        }
        match self {
            AffineUtility::Identity => Ok((Rational::one(), Rational::zero())),
            AffineUtility::PerCapita => {
                Ok((Rational::one() / rat(s.len() as i64), Rational::zero()))
            }
            AffineUtility::ReciprocalPerCapita => Ok((rat(s.len() as i64), Rational::zero())),
            AffineUtility::Shift(c) => Ok((Rational::one(), c.clone())),
            AffineUtility::QWeighted(q) => {
                let w = q.get(&s).ok_or(Error::UtilityUndefined(s))?;
                Ok((Rational::one() / w.clone(), Rational::zero()))
            }
            AffineUtility::Table(t) => {
                let (a, b) = t.get(&s).ok_or(Error::UtilityUndefined(s))?;
                Ok((a.clone(), b.clone()))
            }
        }
    }
}

impl std::fmt::Debug for AffineUtility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AffineUtility::Identity => write!(f, "Identity"),
            AffineUtility::PerCapita => write!(f, "PerCapita"),
            AffineUtility::ReciprocalPerCapita => write!(f, "ReciprocalPerCapita"),
            AffineUtility::Shift(c) => write!(f, "Shift({c})"),
            AffineUtility::QWeighted(q) => write!(f, "QWeighted({} entries)", q.len()),
            AffineUtility::Table(t) => write!(f, "Table({} entries)", t.len()),
        }
    }
}

/// Tolerances used by the general (non-affine) mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralTolerances {
    /// Inverse-composition slack accepted at spot checks.
    pub inverse: f64,
    /// Absolute convergence threshold for level bisection.
    pub bisection: f64,
    /// Gap under which two probe values count as equal when fixing
    /// coalitions.
    pub fixing: f64,
    /// Gap under which two u-excesses fall into the same Kohlberg level.
    pub level: f64,
}

impl Default for GeneralTolerances {
    fn default() -> Self {
        GeneralTolerances {
            inverse: 1e-12,
            bisection: 1e-9,
            fixing: 1e-8,
            level: 1e-9,
        }
    }
}

type Evaluator = Arc<dyn Fn(Coalition, f64) -> f64 + Send + Sync>;

/// General strictly-increasing utilities given by forward and inverse
/// evaluators plus a declared open range `(lo, hi)` common to the family.
#[derive(Clone)]
pub struct GeneralUtility {
    forward: Evaluator,
    inverse: Evaluator,
    range: (f64, f64),
    pub tolerances: GeneralTolerances,
}

impl std::fmt::Debug for GeneralUtility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GeneralUtility(range ({}, {}))", self.range.0, self.range.1)
    }
}

impl GeneralUtility {
    /// `lo`/`hi` may be infinite; the interval is open and must be nonempty.
    pub fn new<F, G>(forward: F, inverse: G, lo: f64, hi: f64) -> Result<Self>
    where
        F: Fn(Coalition, f64) -> f64 + Send + Sync + 'static,
        G: Fn(Coalition, f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo < hi) || lo.is_nan() || hi.is_nan() {
            return Err(Error::UtilityCheckFailed(format!(
                "empty declared range ({lo}, {hi})"
            )));
        }
        Ok(GeneralUtility {
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            range: (lo, hi),
            tolerances: GeneralTolerances::default(),
        })
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn contains(&self, y: f64) -> bool {
        self.range.0 < y && y < self.range.1
    }

    /// Monotonicity and inverse-composition spot check for one coalition.
    /// Run by solvers before they rely on the evaluators.
    pub fn spot_check(&self, s: Coalition) -> Result<()> {
        let samples = [-8.0, -3.0, -1.0, -0.25, 0.0, 0.25, 1.0, 3.0, 8.0];
        let mut prev: Option<(f64, f64)> = None;
        for &t in &samples {
            let y = (self.forward)(s, t);
            if !y.is_finite() {
                return Err(Error::UtilityCheckFailed(format!(
                    "forward evaluator returned {y} at {t} for {s}"
                )));
            }
            if !self.contains(y) {
                return Err(Error::UtilityCheckFailed(format!(
                    "forward value {y} at {t} escapes the declared range for {s}"
                )));
            }
            if let Some((pt, py)) = prev {
                if y <= py {
                    return Err(Error::UtilityCheckFailed(format!(
                        "not strictly increasing for {s}: u({pt}) = {py}, u({t}) = {y}"
                    )));
                }
            }
            let back = (self.inverse)(s, y);
            if (back - t).abs() > self.tolerances.inverse * t.abs().max(1.0) {
                return Err(Error::UtilityCheckFailed(format!(
                    "inverse mismatch for {s} at {t}: got {back}"
                )));
            }
            prev = Some((t, y));
        }
        Ok(())
    }

    pub fn forward(&self, s: Coalition, t: f64) -> f64 {
        (self.forward)(s, t)
    }

    /// Inverse evaluation; `y` must lie strictly inside the declared range.
    pub fn inverse(&self, s: Coalition, y: f64) -> Result<f64> {
        if !self.contains(y) {
            return Err(Error::OutOfRange(y));
        }
        Ok((self.inverse)(s, y))
    }
}

/// A family of per-coalition utilities, affine (exact) or general
/// (tolerance-based).
#[derive(Clone, Debug)]
pub enum UtilityFamily {
    Affine(AffineUtility),
    General(GeneralUtility),
}

impl UtilityFamily {
    pub fn identity() -> Self {
        UtilityFamily::Affine(AffineUtility::Identity)
    }

    pub fn percapita() -> Self {
        UtilityFamily::Affine(AffineUtility::PerCapita)
    }

    pub fn reciprocal_percapita() -> Self {
        UtilityFamily::Affine(AffineUtility::ReciprocalPerCapita)
    }

    pub fn shift(c: Rational) -> Self {
        UtilityFamily::Affine(AffineUtility::Shift(c))
    }

    /// `u_S(t) = t / q(S)`; every weight must be strictly positive.
    pub fn q_weighted(weights: BTreeMap<Coalition, Rational>) -> Result<Self> {
        for (s, w) in &weights {
            if s.is_empty() {
                return Err(Error::TrivialCoalition(*s));
            }
            if *w <= Rational::zero() {
                return Err(Error::NonPositiveScale(*s));
            }
        }
        Ok(UtilityFamily::Affine(AffineUtility::QWeighted(weights)))
    }

    /// Arbitrary per-coalition `(a_S, b_S)` with `a_S > 0`.
    pub fn table(entries: BTreeMap<Coalition, (Rational, Rational)>) -> Result<Self> {
        for (s, (a, _)) in &entries {
            if s.is_empty() {
                return Err(Error::TrivialCoalition(*s));
            }
            if *a <= Rational::zero() {
                return Err(Error::NonPositiveScale(*s));
            }
        }
        Ok(UtilityFamily::Affine(AffineUtility::Table(entries)))
    }

    pub fn general(g: GeneralUtility) -> Self {
        UtilityFamily::General(g)
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, UtilityFamily::Affine(_))
    }

    pub fn as_affine(&self) -> Option<&AffineUtility> {
        match self {
            UtilityFamily::Affine(a) => Some(a),
            UtilityFamily::General(_) => None,
        }
    }

    /// Affine pair `(a_S, b_S)`, or an error naming `what` for general mode.
    pub fn affine_or_err(&self, what: &'static str) -> Result<&AffineUtility> {
        self.as_affine()
            .ok_or(Error::GeneralUtilityUnsupported(what))
    }

    /// Classification of the common range relative to zero. Affine scales
    /// are onto all of `R`; general ranges follow the declared interval.
    pub fn range_class(&self) -> RangeClass {
        match self {
            UtilityFamily::Affine(_) => RangeClass::ContainsZero,
            UtilityFamily::General(g) => {
                let (lo, hi) = g.range;
                if lo < 0.0 && 0.0 < hi {
                    RangeClass::ContainsZero
                } else if hi <= 0.0 {
                    RangeClass::StrictlyNegative
                } else {
                    RangeClass::StrictlyPositive
                }
            }
        }
    }

    /// The u-excess `u_S(v(S) - x(S))`.
    pub fn u_excess(&self, game: &Game, x: &Payoff, s: Coalition) -> Result<Value> {
        let e = crate::game::excess(game, x, s)?;
        if s.is_empty() || s == game.players().grand() {
            return Err(Error::TrivialCoalition(s));
        }
        match self {
            UtilityFamily::Affine(a) => {
                let (scale, shift) = a.scale_shift(s)?;
                Ok(Value::Exact(scale * e + shift))
            }
            UtilityFamily::General(g) => Ok(Value::Approx(g.forward(s, to_f64(&e)))),
        }
    }

    /// `u_S^{-1}(y)`. Exact for affine families; for general families the
    /// argument must lie strictly inside the declared range.
    pub fn inverse_at(&self, s: Coalition, y: &Value) -> Result<Value> {
        if s.is_empty() {
            return Err(Error::TrivialCoalition(s));
        }
        match self {
            UtilityFamily::Affine(a) => {
                let (scale, shift) = a.scale_shift(s)?;
                match y {
                    Value::Exact(r) => Ok(Value::Exact((r - shift) / scale)),
                    Value::Approx(f) => {
                        Ok(Value::Approx((f - to_f64(&shift)) / to_f64(&scale)))
                    }
                }
            }
            UtilityFamily::General(g) => Ok(Value::Approx(g.inverse(s, y.as_f64())?)),
        }
    }

    /// Exact rational inverse `u_S^{-1}(y)`; in general mode the float
    /// inverse is promoted to the exact rational it denotes.
    pub fn inverse_exact(&self, s: Coalition, y: &Value) -> Result<Rational> {
        match self.inverse_at(s, y)? {
            Value::Exact(r) => Ok(r),
            Value::Approx(f) => from_f64(f),
        }
    }

    /// The constraint `u_S(v(S) - x(S)) <= t` as a linear row.
    ///
    /// With `t` a variable (affine mode only) the row ranges over `n + 1`
    /// columns, `t` last: `a_S x(S) + t >= a_S v(S) + b_S`. With `t` fixed
    /// the row ranges over the `n` payoff columns: `x(S) >= v(S) - u_S^{-1}(t)`.
    pub fn linearized_constraint(
        &self,
        game: &Game,
        s: Coalition,
        t: LevelVar<'_>,
    ) -> Result<LinRow> {
        let n = game.n();
        if s.is_empty() || s == game.players().grand() {
            return Err(Error::TrivialCoalition(s));
        }
        let v = game.value(s)?;
        match t {
            LevelVar::Variable => {
                let a = self.affine_or_err("a variable-level constraint")?;
                let (scale, shift) = a.scale_shift(s)?;
                let mut coeffs = vec![Rational::zero(); n + 1];
                for p in s.members() {
                    coeffs[p] = scale.clone();
                }
                coeffs[n] = Rational::one();
                Ok(LinRow::new(coeffs, Relation::Ge, &scale * &v + shift))
            }
            LevelVar::Fixed(level) => {
                let inv = self.inverse_exact(s, level)?;
                let mut coeffs = vec![Rational::zero(); n];
                for p in s.members() {
                    coeffs[p] = Rational::one();
                }
                Ok(LinRow::new(coeffs, Relation::Ge, v - inv))
            }
        }
    }
}

/// Whether the excess level `t` appears as an LP variable or a constant in
/// a linearized constraint.
#[derive(Clone, Copy, Debug)]
pub enum LevelVar<'a> {
    Variable,
    Fixed(&'a Value),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::ratio;

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
    fn percapita_excess_is_scaled_exactly() {
        let g = sample_game();
        let x = Payoff::from_ints(&[3, 3, 3, 3]);
        let fam = UtilityFamily::percapita();
        let s = Coalition::from_members(&[1, 2, 3]);
        assert_eq!(fam.u_excess(&g, &x, s).unwrap(), Value::Exact(rat(-1)));
        let s = Coalition::from_members(&[0, 1, 3]);
        assert_eq!(fam.u_excess(&g, &x, s).unwrap(), Value::Exact(rat(-3)));
    }

    #[test]
    fn shift_adds_constant_to_every_excess() {
        let g = sample_game();
        let x = Payoff::from_ints(&[3, 3, 3, 3]);
        let id = UtilityFamily::identity();
        let sh = UtilityFamily::shift(ratio(5, 2));
        for s in g.family().nontrivial() {
            let a = id.u_excess(&g, &x, s).unwrap();
            let b = sh.u_excess(&g, &x, s).unwrap();
            assert_eq!(
                b.as_exact().unwrap(),
                &(a.as_exact().unwrap() + ratio(5, 2))
            );
        }
    }

    #[test]
    fn inverse_round_trips_affine() {
        let fam = UtilityFamily::reciprocal_percapita();
        let s = Coalition::from_members(&[0, 1, 2]);
        let y = Value::Exact(ratio(-9, 2));
        let inv = fam.inverse_at(s, &y).unwrap();
        assert_eq!(inv, Value::Exact(ratio(-3, 2)));
    }

    #[test]
    fn linearized_row_with_level_variable() {
        let g = sample_game();
        let fam = UtilityFamily::identity();
        let s = Coalition::from_members(&[0, 1]);
        let row = fam
            .linearized_constraint(&g, s, LevelVar::Variable)
            .unwrap();
        // x0 + x1 + t >= 6
        assert_eq!(row.rel, Relation::Ge);
        assert_eq!(row.rhs, rat(6));
        assert_eq!(
            row.coeffs,
            vec![rat(1), rat(1), rat(0), rat(0), rat(1)]
        );
    }

    #[test]
    fn linearized_row_with_fixed_level_reciprocal_percapita() {
        // |S| = 2, v(S) = 4, t = -2: u^-1(-2) = -1, so x(S) >= 5.
        let g = Game::full(3, &[(&[0, 1][..], rat(4)), (&[0, 1, 2][..], rat(10))]).unwrap();
        let fam = UtilityFamily::reciprocal_percapita();
        let s = Coalition::from_members(&[0, 1]);
        let t = Value::Exact(rat(-2));
        let row = fam
            .linearized_constraint(&g, s, LevelVar::Fixed(&t))
            .unwrap();
        assert_eq!(row.coeffs, vec![rat(1), rat(1), rat(0)]);
        assert_eq!(row.rel, Relation::Ge);
        assert_eq!(row.rhs, rat(5));
    }

    #[test]
    fn q_weights_must_be_positive_and_cover() {
        let s = Coalition::from_members(&[0, 1]);
        let mut w = BTreeMap::new();
        w.insert(s, rat(0));
        assert!(matches!(
            UtilityFamily::q_weighted(w),
            Err(Error::NonPositiveScale(_))
        ));

        let mut w = BTreeMap::new();
        w.insert(s, rat(2));
        let fam = UtilityFamily::q_weighted(w).unwrap();
        let g = Game::full(3, &[(&[0, 1][..], rat(4)), (&[0, 1, 2][..], rat(9))]).unwrap();
        let x = Payoff::from_ints(&[1, 1, 7]);
        assert_eq!(
            fam.u_excess(&g, &x, s).unwrap(),
            Value::Exact(rat(1)) // (4 - 2) / 2
        );
        assert!(matches!(
            fam.u_excess(&g, &x, Coalition::singleton(0)),
            Err(Error::UtilityUndefined(_))
        ));
    }

    #[test]
    fn trivial_coalitions_are_rejected() {
        let g = sample_game();
        let x = Payoff::from_ints(&[3, 3, 3, 3]);
        let fam = UtilityFamily::identity();
        assert!(matches!(
            fam.u_excess(&g, &x, Coalition::EMPTY),
            Err(Error::TrivialCoalition(_))
        ));
        assert!(matches!(
            fam.u_excess(&g, &x, g.players().grand()),
            Err(Error::TrivialCoalition(_))
        ));
    }

    #[test]
    fn general_arctan_family() {
        let fam = GeneralUtility::new(
            |_, t| t.atan(),
            |_, y| y.tan(),
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        fam.spot_check(Coalition::singleton(0)).unwrap();
        let fam = UtilityFamily::general(fam);
        assert_eq!(fam.range_class(), RangeClass::ContainsZero);

        let g = sample_game();
        let x = Payoff::from_ints(&[3, 3, 3, 3]);
        let s = Coalition::from_members(&[0, 1, 3]);
        match fam.u_excess(&g, &x, s).unwrap() {
            Value::Approx(v) => assert!((v - (-9.0f64).atan()).abs() < 1e-12),
            v => panic!("expected approx, got {v:?}"),
        }
        // Out of the declared range.
        assert!(matches!(
            fam.inverse_at(s, &Value::Approx(2.0)),
            Err(Error::OutOfRange(_))
        ));
        // Variable-level rows need affine data.
        assert!(matches!(
            fam.linearized_constraint(&g, s, LevelVar::Variable),
            Err(Error::GeneralUtilityUnsupported(_))
        ));
    }

    #[test]
    fn general_spot_check_rejects_bad_evaluators() {
        let decreasing = GeneralUtility::new(|_, t| -t, |_, y| -y, f64::NEG_INFINITY, f64::INFINITY)
            .unwrap();
        assert!(matches!(
            decreasing.spot_check(Coalition::singleton(0)),
            Err(Error::UtilityCheckFailed(_))
        ));

        let wrong_inverse =
            GeneralUtility::new(|_, t| t, |_, y| y + 0.5, f64::NEG_INFINITY, f64::INFINITY)
                .unwrap();
        assert!(matches!(
            wrong_inverse.spot_check(Coalition::singleton(0)),
            Err(Error::UtilityCheckFailed(_))
        ));

        let escapes = GeneralUtility::new(|_, t| t, |_, y| y, -1.0, 1.0).unwrap();
        assert!(matches!(
            escapes.spot_check(Coalition::singleton(0)),
            Err(Error::UtilityCheckFailed(_))
        ));
    }

    #[test]
    fn range_classification_from_declared_interval() {
        let neg = GeneralUtility::new(|_, t| -(-t).exp(), |_, y| -(-y).ln(), -1e9, 0.0).unwrap();
        assert_eq!(
            UtilityFamily::general(neg).range_class(),
            RangeClass::StrictlyNegative
        );
        let pos = GeneralUtility::new(|_, t| t.exp(), |_, y| y.ln(), 0.0, f64::INFINITY).unwrap();
        assert_eq!(
            UtilityFamily::general(pos).range_class(),
            RangeClass::StrictlyPositive
        );
    }
}
