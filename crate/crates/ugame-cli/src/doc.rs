//! Input documents: JSON descriptions of games, utility families, and
//! assignment markets.
//!
//! A document names its players (by count or by a list of names), lists
//! coalition values, and optionally carries a utility specification and
//! an assignment-market variant. Coalition members may be referenced by
//! index or by name. Rationals are written as integers or as exact
//! strings such as `"5"`, `"-7/3"` or `"1.25"`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use ugame::assignment::AssignmentSpec;
use ugame::game::{Coalition, FeasibleFamily, Game, PlayerSet};
use ugame::num::{parse_rational, rat, Rational};
use ugame::utility::{GeneralUtility, UtilityFamily};

/// The only document schema this build understands.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub schema: u32,
    #[serde(default)]
    pub players: Option<PlayersField>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub coalitions: Vec<CoalitionEntry>,
    #[serde(default)]
    pub utility: Option<UtilitySpec>,
    #[serde(default)]
    pub assignment: Option<AssignmentDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PlayersField {
    Count(usize),
    Names(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Restricted,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionEntry {
    pub members: Vec<PlayerRef>,
    pub value: RationalField,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PlayerRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum RationalField {
    Int(i64),
    Text(String),
}

impl RationalField {
    pub fn parse(&self) -> Result<Rational, String> {
        match self {
            RationalField::Int(i) => Ok(rat(*i)),
            RationalField::Text(s) => parse_rational(s).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UtilitySpec {
    /// `u_S(t) = t`: plain excesses.
    Identity,
    /// `u_S(t) = t / |S|`.
    Percapita,
    /// `u_S(t) = |S| t`.
    ReciprocalPercapita,
    /// `u_S(t) = t + c`.
    Shift { c: RationalField },
    /// `u_S(t) = t / q(S)` with positive per-coalition weights.
    QWeighted { weights: Vec<QEntry> },
    /// `u_S(t) = a_S t + b_S` from an explicit table.
    Table { entries: Vec<TableEntry> },
    /// A named nonlinear transform evaluated in floating point:
    /// `arctan` or `cbrt`.
    General { name: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QEntry {
    pub members: Vec<PlayerRef>,
    pub q: RationalField,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub members: Vec<PlayerRef>,
    pub scale: RationalField,
    pub offset: RationalField,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentDoc {
    pub buyers: usize,
    pub sellers: usize,
    pub profits: Vec<Vec<RationalField>>,
}

/// Player names with reverse lookup. Documents that give only a count
/// get the indices themselves as names.
#[derive(Debug, Clone)]
pub struct Players {
    pub names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Players {
    fn numbered(n: usize) -> Players {
        Players::from_names((0..n).map(|i| i.to_string()).collect()).expect("indices are unique")
    }

    fn from_names(names: Vec<String>) -> Result<Players, String> {
        let mut index = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(format!("duplicate player name {name:?}"));
            }
        }
        Ok(Players { names, index })
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn resolve(&self, r: &PlayerRef) -> Result<usize, String> {
        match r {
            PlayerRef::Index(i) if *i < self.count() => Ok(*i),
            PlayerRef::Index(i) => Err(format!(
                "player index {i} out of range for {} players",
                self.count()
            )),
            PlayerRef::Name(name) => self
                .index
                .get(name)
                .copied()
                .ok_or_else(|| format!("unknown player {name:?}")),
        }
    }

    pub fn coalition(&self, members: &[PlayerRef]) -> Result<Coalition, String> {
        let mut indices = Vec::with_capacity(members.len());
        for m in members {
            indices.push(self.resolve(m)?);
        }
        Ok(Coalition::from_members(&indices))
    }

    /// Resolve a written reference that may be a name or a bare index.
    pub fn resolve_text(&self, text: &str) -> Result<usize, String> {
        let t = text.trim();
        if let Some(&i) = self.index.get(t) {
            return Ok(i);
        }
        match t.parse::<usize>() {
            Ok(i) if i < self.count() => Ok(i),
            _ => Err(format!("unknown player {t:?}")),
        }
    }
}

/// A fully assembled input: game, utility family, and (for market
/// documents) the underlying assignment specification.
pub struct Loaded {
    pub players: Players,
    pub game: Game,
    pub utility: UtilityFamily,
    /// Short echo of the utility in force, e.g. `"percapita"`.
    pub utility_name: String,
    pub assignment: Option<AssignmentSpec>,
}

pub fn read_document(path: &Path) -> Result<GameDocument, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let doc: GameDocument =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if doc.schema != SCHEMA {
        return Err(format!(
            "unsupported schema version {} (expected {SCHEMA})",
            doc.schema
        ));
    }
    Ok(doc)
}

fn players_of(doc: &GameDocument) -> Result<Players, String> {
    match (&doc.players, &doc.assignment) {
        (Some(PlayersField::Count(n)), _) => Ok(Players::numbered(*n)),
        (Some(PlayersField::Names(names)), _) => Players::from_names(names.clone()),
        (None, Some(a)) => Ok(Players::numbered(a.buyers + a.sellers)),
        (None, None) => Err("document lists no players".into()),
    }
}

fn build_assignment(a: &AssignmentDoc) -> Result<AssignmentSpec, String> {
    if a.profits.len() != a.buyers {
        return Err(format!(
            "profits matrix has {} rows, expected {} (one per buyer)",
            a.profits.len(),
            a.buyers
        ));
    }
    let mut matrix = Vec::with_capacity(a.buyers);
    for row in &a.profits {
        if row.len() != a.sellers {
            return Err(format!(
                "profits row has {} entries, expected {} (one per seller)",
                row.len(),
                a.sellers
            ));
        }
        matrix.push(row.iter().map(|f| f.parse()).collect::<Result<Vec<_>, _>>()?);
    }
    AssignmentSpec::new(matrix).map_err(|e| e.to_string())
}

fn build_game(doc: &GameDocument, players: &Players) -> Result<Game, String> {
    if let Some(a) = &doc.assignment {
        if !doc.coalitions.is_empty() {
            return Err("assignment documents must not list coalition values".into());
        }
        if doc.mode == Some(Mode::Restricted) {
            return Err("assignment games use the full coalition family".into());
        }
        if players.count() != a.buyers + a.sellers {
            return Err(format!(
                "{} players listed, but the market has {} buyers and {} sellers",
                players.count(),
                a.buyers,
                a.sellers
            ));
        }
        let spec = build_assignment(a)?;
        return ugame::assignment::build_game(&spec).map_err(|e| e.to_string());
    }

    let ps = PlayerSet::new(players.count()).map_err(|e| e.to_string())?;
    let grand = ps.grand();
    let mut values: BTreeMap<Coalition, Rational> = BTreeMap::new();
    for entry in &doc.coalitions {
        let c = players.coalition(&entry.members)?;
        let v = entry.value.parse()?;
        if values.insert(c, v).is_some() {
            return Err(format!("coalition {c} is listed twice"));
        }
    }
    let family = match doc.mode.unwrap_or(Mode::Full) {
        Mode::Full => FeasibleFamily::full(ps),
        Mode::Restricted => {
            if !values.contains_key(&grand) {
                return Err("restricted documents must list the grand coalition's value".into());
            }
            let nontrivial: Vec<Coalition> = values
                .keys()
                .copied()
                .filter(|c| !c.is_empty() && *c != grand)
                .collect();
            FeasibleFamily::restricted(ps, &nontrivial).map_err(|e| e.to_string())?
        }
    };
    Game::new(family, values).map_err(|e| e.to_string())
}

fn named_general(name: &str) -> Result<GeneralUtility, String> {
    use std::f64::consts::FRAC_PI_2;
    match name {
        "arctan" => GeneralUtility::new(
            |_, t| t.atan(),
            |_, y| y.tan(),
            -FRAC_PI_2,
            FRAC_PI_2,
        )
        .map_err(|e| e.to_string()),
        "cbrt" => GeneralUtility::new(
            |_, t| t.cbrt(),
            |_, y| y * y * y,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .map_err(|e| e.to_string()),
        other => Err(format!(
            "unknown general utility {other:?} (available: arctan, cbrt)"
        )),
    }
}

fn build_utility(
    spec: &UtilitySpec,
    players: &Players,
    tolerance: Option<f64>,
) -> Result<(UtilityFamily, String), String> {
    let fam = match spec {
        UtilitySpec::Identity => UtilityFamily::identity(),
        UtilitySpec::Percapita => UtilityFamily::percapita(),
        UtilitySpec::ReciprocalPercapita => UtilityFamily::reciprocal_percapita(),
        UtilitySpec::Shift { c } => UtilityFamily::shift(c.parse()?),
        UtilitySpec::QWeighted { weights } => {
            let mut map = BTreeMap::new();
            for w in weights {
                let c = players.coalition(&w.members)?;
                if map.insert(c, w.q.parse()?).is_some() {
                    return Err(format!("coalition {c} has two weights"));
                }
            }
            UtilityFamily::q_weighted(map).map_err(|e| e.to_string())?
        }
        UtilitySpec::Table { entries } => {
            let mut map = BTreeMap::new();
            for e in entries {
                let c = players.coalition(&e.members)?;
                if map
                    .insert(c, (e.scale.parse()?, e.offset.parse()?))
                    .is_some()
                {
                    return Err(format!("coalition {c} has two table entries"));
                }
            }
            UtilityFamily::table(map).map_err(|e| e.to_string())?
        }
        UtilitySpec::General { name } => {
            let mut g = named_general(name)?;
            if let Some(tol) = tolerance {
                if !(tol.is_finite() && tol > 0.0) {
                    return Err(format!("tolerance must be a positive number, got {tol}"));
                }
                g.tolerances.bisection = tol;
            }
            UtilityFamily::general(g)
        }
    };
    if tolerance.is_some() && fam.is_affine() {
        return Err("--tolerance only applies to general (nonlinear) utilities".into());
    }
    let name = match spec {
        UtilitySpec::Identity => "identity".to_string(),
        UtilitySpec::Percapita => "percapita".to_string(),
        UtilitySpec::ReciprocalPercapita => "reciprocal-percapita".to_string(),
        UtilitySpec::Shift { c } => format!("shift({})", c.parse()?),
        UtilitySpec::QWeighted { .. } => "q-weighted".to_string(),
        UtilitySpec::Table { .. } => "table".to_string(),
        UtilitySpec::General { name } => format!("general:{name}"),
    };
    Ok((fam, name))
}

/// Parse a `--utility` override: either a bare kind name or a JSON
/// object in the same shape as the document's `utility` field.
pub fn parse_utility_flag(text: &str) -> Result<UtilitySpec, String> {
    let t = text.trim();
    if t.starts_with('{') {
        return serde_json::from_str(t).map_err(|e| format!("--utility: {e}"));
    }
    match t {
        "identity" => Ok(UtilitySpec::Identity),
        "percapita" => Ok(UtilitySpec::Percapita),
        "reciprocal-percapita" => Ok(UtilitySpec::ReciprocalPercapita),
        "arctan" | "cbrt" => Ok(UtilitySpec::General {
            name: t.to_string(),
        }),
        other => Err(format!(
            "unknown utility {other:?}; use a kind name (identity, percapita, \
             reciprocal-percapita, arctan, cbrt) or a JSON object"
        )),
    }
}

/// Assemble a document into a game plus utility family, with an optional
/// command-line utility override and general-mode bisection tolerance.
pub fn realize(
    doc: &GameDocument,
    utility_override: Option<&str>,
    tolerance: Option<f64>,
) -> Result<Loaded, String> {
    let players = players_of(doc)?;
    let game = build_game(doc, &players)?;
    let override_spec = utility_override.map(parse_utility_flag).transpose()?;
    let spec = override_spec
        .as_ref()
        .or(doc.utility.as_ref())
        .unwrap_or(&UtilitySpec::Identity);
    let (utility, utility_name) = build_utility(spec, &players, tolerance)?;
    let assignment = match &doc.assignment {
        Some(a) => Some(build_assignment(a)?),
        None => None,
    };
    Ok(Loaded {
        players,
        game,
        utility,
        utility_name,
        assignment,
    })
}
