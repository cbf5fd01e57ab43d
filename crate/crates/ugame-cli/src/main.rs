//! `ugame`: exact solvers for TU games with restricted cooperation and
//! per-coalition utility-transformed excesses.
//!
//! Every command reads a JSON game document, prints one JSON result
//! document on standard output and a short human summary on standard
//! error. Exit codes: 0 success, 1 input error, 2 negative verdict
//! (empty core, failed criterion, non-member point), 3 structural
//! failure (the nontrivial feasible family is not balanced).

mod doc;
mod render;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value as Json};

use ugame::balance::{core_emptiness, core_membership, u_balanced};
use ugame::essential::{classical_essential, restrict_and_solve, u_essential, EssentialEvidence};
use ugame::game::{is_preimputation, Coalition, Game, Payoff};
use ugame::kohlberg::{is_balanced_collection, kohlberg_check, CollectionVerdict};
use ugame::lexcenter::{solve_prenucleolus, PrenucleolusResult};
use ugame::lp::matrix_rank;
use ugame::num::{parse_rational, rat, Rational, Value};
use ugame::utility::UtilityFamily;

use doc::{Loaded, Players};
use render::*;

#[derive(Parser)]
#[command(
    name = "ugame",
    version,
    about = "Exact cooperative-game solvers: u-core, u-least-core, u-prenucleolus,\n\
             balancedness, Kohlberg verification, essential sets, assignment games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON game document
    file: PathBuf,
    /// Override the document's utility (kind name or JSON object)
    #[arg(long)]
    utility: Option<String>,
    /// Bisection tolerance for general (nonlinear) utilities
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct EssentialWhich {
    /// List classical essential coalitions (full families only)
    #[arg(long)]
    classical: bool,
    /// List u-essential coalitions under the utility in force
    #[arg(long)]
    u: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check u-core membership of a point, or decide u-core emptiness
    Core {
        #[command(flatten)]
        common: CommonArgs,
        /// Payoff to test, e.g. "3,3,3,3"; omit to decide emptiness
        #[arg(long)]
        point: Option<String>,
    },
    /// Decide u-balancedness of the game, or test an explicit collection
    Balanced {
        #[command(flatten)]
        common: CommonArgs,
        /// Semicolon-separated coalitions, e.g. "0,1;2;0,2"
        #[arg(long)]
        collection: Option<String>,
    },
    /// Compute the u-prenucleolus by the lexicographic-center iteration
    Prenucleolus {
        #[command(flatten)]
        common: CommonArgs,
        /// Include the per-round trace (levels and fixed coalitions)
        #[arg(long)]
        trace: bool,
        /// Minimize over u-essential coalitions only and compare with
        /// the full solve
        #[arg(long)]
        restrict_to_essential: bool,
        /// Verify the result against the Kohlberg criterion
        #[arg(long)]
        verify_kohlberg: bool,
    },
    /// List essential coalitions
    Essential {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        which: EssentialWhich,
    },
    /// Check the Kohlberg criterion at a payoff
    Kohlberg {
        #[command(flatten)]
        common: CommonArgs,
        /// Payoff to test, e.g. "3,3,3,3"
        #[arg(long)]
        point: String,
    },
    /// Build an assignment game from a market document
    Assignment {
        /// Path to the JSON game document (with an assignment block)
        file: PathBuf,
        /// Verify that u-essential coalitions under the reciprocal
        /// per-capita scale are singletons and mixed pairs only
        #[arg(long)]
        verify_structure: bool,
    },
    /// Rank of the feasible family's coalition incidence vectors
    Rank {
        /// Path to the JSON game document
        file: PathBuf,
    },
}

/// A finished command: the result document, a human summary, and the
/// process exit code.
struct Outcome {
    document: Json,
    summary: String,
    exit: i32,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli.command) {
        Ok(out) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&out.document).expect("result documents serialize")
            );
            if !out.summary.is_empty() {
                eprintln!("{}", out.summary);
            }
            std::process::exit(out.exit);
        }
        Err(message) => {
            eprintln!("error: {message}");
            std::process::exit(1);
        }
    }
}

fn run(command: Command) -> Result<Outcome, String> {
    match command {
        Command::Core { common, point } => cmd_core(&common, point.as_deref()),
        Command::Balanced { common, collection } => cmd_balanced(&common, collection.as_deref()),
        Command::Prenucleolus {
            common,
            trace,
            restrict_to_essential,
            verify_kohlberg,
        } => cmd_prenucleolus(&common, trace, restrict_to_essential, verify_kohlberg),
        Command::Essential { common, which } => cmd_essential(&common, which.classical),
        Command::Kohlberg { common, point } => cmd_kohlberg(&common, &point),
        Command::Assignment {
            file,
            verify_structure,
        } => cmd_assignment(&file, verify_structure),
        Command::Rank { file } => cmd_rank(&file),
    }
}

fn load(common: &CommonArgs) -> Result<Loaded, String> {
    let document = doc::read_document(&common.file)?;
    doc::realize(&document, common.utility.as_deref(), common.tolerance)
}

fn estr(e: ugame::Error) -> String {
    e.to_string()
}

fn envelope(command: &str, loaded: &Loaded) -> Map<String, Json> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("players".into(), json!(loaded.players.names));
    m.insert("utility".into(), json!(loaded.utility_name));
    m
}

fn parse_point(text: &str, n: usize) -> Result<Payoff, String> {
    let trimmed = text.trim();
    let inner = trimmed
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .unwrap_or(trimmed);
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != n {
        return Err(format!(
            "point has {} coordinates, expected {n}",
            parts.len()
        ));
    }
    let mut coords = Vec::with_capacity(n);
    for p in parts {
        coords.push(parse_rational(p).map_err(estr)?);
    }
    Ok(Payoff(coords))
}

fn parse_collection(text: &str, players: &Players) -> Result<Vec<Coalition>, String> {
    let mut out = Vec::new();
    for part in text.split(';') {
        let part = part.trim();
        if part.is_empty() {
            return Err("empty coalition in --collection".into());
        }
        let mut members = Vec::new();
        for m in part.split(',') {
            members.push(players.resolve_text(m)?);
        }
        out.push(Coalition::from_members(&members));
    }
    Ok(out)
}

/// Positive-u-excess threshold: zero for exact families, the level
/// tolerance for general ones.
fn level_tolerance(fam: &UtilityFamily) -> f64 {
    match fam {
        UtilityFamily::Affine(_) => 0.0,
        UtilityFamily::General(g) => g.tolerances.level,
    }
}

fn cmd_core(common: &CommonArgs, point: Option<&str>) -> Result<Outcome, String> {
    let loaded = load(common)?;
    let game = &loaded.game;
    let fam = &loaded.utility;
    let mut m = envelope("core", &loaded);

    match point {
        Some(text) => {
            let x = parse_point(text, game.n())?;
            let member = core_membership(game, fam, &x).map_err(estr)?;
            let preimputation = is_preimputation(game, &x).map_err(estr)?;
            let mut violations = Vec::new();
            if preimputation {
                let tol = level_tolerance(fam);
                for s in game.family().nontrivial() {
                    let e = fam.u_excess(game, &x, s).map_err(estr)?;
                    let positive = match &e {
                        Value::Exact(r) => *r > Rational::from_integer(0.into()),
                        Value::Approx(v) => *v > tol,
                    };
                    if positive {
                        violations.push(json!({
                            "coalition": coalition_json(s),
                            "u_excess": value_json(&e),
                        }));
                    }
                }
            }
            m.insert("mode".into(), json!("membership"));
            m.insert("point".into(), payoff_json(&x));
            m.insert("preimputation".into(), json!(preimputation));
            m.insert("member".into(), json!(member));
            m.insert("violations".into(), Json::Array(violations.clone()));
            let summary = if member {
                format!("{} is in the u-core", payoff_text(&x))
            } else if !preimputation {
                format!("{} is not a preimputation", payoff_text(&x))
            } else {
                format!(
                    "{} is not in the u-core ({} coalition(s) with positive u-excess)",
                    payoff_text(&x),
                    violations.len()
                )
            };
            Ok(Outcome {
                document: Json::Object(m),
                summary,
                exit: if member { 0 } else { 2 },
            })
        }
        None => {
            let status = core_emptiness(game, fam).map_err(estr)?;
            let nonempty = status.is_nonempty();
            m.insert("mode".into(), json!("emptiness"));
            m.insert("nonempty".into(), json!(nonempty));
            m.insert("status".into(), core_status_json(&status));
            let summary = match (&status, nonempty) {
                (ugame::balance::CoreStatus::DecidedByLp { witness, .. }, true) => {
                    match witness {
                        Some(w) => format!("u-core is nonempty; witness {}", payoff_text(w)),
                        None => "u-core is nonempty".to_string(),
                    }
                }
                (_, true) => "u-core contains every preimputation".to_string(),
                (_, false) => "u-core is empty".to_string(),
            };
            Ok(Outcome {
                document: Json::Object(m),
                summary,
                exit: if nonempty { 0 } else { 2 },
            })
        }
    }
}

fn cmd_balanced(common: &CommonArgs, collection: Option<&str>) -> Result<Outcome, String> {
    let loaded = load(common)?;
    let game = &loaded.game;

    match collection {
        Some(text) => {
            let coalitions = parse_collection(text, &loaded.players)?;
            let verdict =
                is_balanced_collection(game.players(), &coalitions).map_err(estr)?;
            let balanced = verdict.is_balanced();
            let mut m = Map::new();
            m.insert("command".into(), json!("balanced"));
            m.insert("players".into(), json!(loaded.players.names));
            m.insert("mode".into(), json!("collection"));
            m.insert(
                "collection".into(),
                coalitions_json(coalitions.iter().copied()),
            );
            m.insert("verdict".into(), verdict_json(&verdict));
            let summary = match &verdict {
                CollectionVerdict::Balanced(_) => "the collection is balanced".to_string(),
                CollectionVerdict::NotBalanced(d) => format!(
                    "the collection is not balanced ({} uncovered player(s), {} zero-weight coalition(s))",
                    d.uncovered_players.len(),
                    d.zero_weight_coalitions.len()
                ),
            };
            Ok(Outcome {
                document: Json::Object(m),
                summary,
                exit: if balanced { 0 } else { 2 },
            })
        }
        None => {
            let outcome = u_balanced(game, &loaded.utility).map_err(estr)?;
            let mut m = envelope("balanced", &loaded);
            m.insert("mode".into(), json!("game"));
            m.insert("balanced".into(), json!(outcome.balanced));
            m.insert("status".into(), core_status_json(&outcome.status));
            let summary = if outcome.balanced {
                "the game is u-balanced (nonempty u-core)".to_string()
            } else {
                "the game is not u-balanced (empty u-core)".to_string()
            };
            Ok(Outcome {
                document: Json::Object(m),
                summary,
                exit: if outcome.balanced { 0 } else { 2 },
            })
        }
    }
}

fn coeff_rows(rows: &[ugame::lp::LinRow]) -> Vec<Vec<Rational>> {
    rows.iter().map(|r| r.coeffs.clone()).collect()
}

/// The criterion used to call two solves equal: mutual containment of
/// representative points in the final equality systems, plus equal rank.
fn same_solution(a: &PrenucleolusResult, b: &PrenucleolusResult) -> bool {
    a.solution_description
        .iter()
        .all(|r| r.satisfied_by(&b.representative.0))
        && b.solution_description
            .iter()
            .all(|r| r.satisfied_by(&a.representative.0))
        && matrix_rank(&coeff_rows(&a.solution_description))
            == matrix_rank(&coeff_rows(&b.solution_description))
}

/// Exit-3 document for a family with no balanced subcollection: report
/// uncovered players and the zero-weight diagnostics of the whole family.
fn unbalanced_outcome(loaded: &Loaded) -> Result<Outcome, String> {
    let game = &loaded.game;
    let all: Vec<Coalition> = game.family().nontrivial().collect();
    let mut m = envelope("prenucleolus", loaded);
    m.insert("balanced_family".into(), json!(false));
    if all.is_empty() {
        let uncovered: Vec<usize> = game.players().players().collect();
        m.insert(
            "certificate".into(),
            json!({
                "balanced": false,
                "uncovered_players": uncovered,
                "zero_weight_coalitions": Json::Array(vec![]),
            }),
        );
    } else {
        let verdict = is_balanced_collection(game.players(), &all).map_err(estr)?;
        m.insert("certificate".into(), verdict_json(&verdict));
    }
    Ok(Outcome {
        document: Json::Object(m),
        summary: "the nontrivial feasible family is not balanced; no u-prenucleolus exists"
            .to_string(),
        exit: 3,
    })
}

fn cmd_prenucleolus(
    common: &CommonArgs,
    trace: bool,
    restrict_to_essential: bool,
    verify_kohlberg: bool,
) -> Result<Outcome, String> {
    let loaded = load(common)?;
    let game = &loaded.game;
    let fam = &loaded.utility;
    let mut exit = 0;
    let mut m = envelope("prenucleolus", &loaded);
    let mut summary_parts: Vec<String> = Vec::new();

    let result = if restrict_to_essential {
        let restricted = match restrict_and_solve(game, fam) {
            Ok(r) => r,
            Err(ugame::Error::NotUBalanced) => {
                m.insert("u_balanced".into(), json!(false));
                return Ok(Outcome {
                    document: Json::Object(m),
                    summary: "the game is not u-balanced; the essential restriction needs a \
                              nonempty u-core"
                        .to_string(),
                    exit: 2,
                });
            }
            Err(ugame::Error::NotBalanced | ugame::Error::EmptyFamily) => {
                return unbalanced_outcome(&loaded);
            }
            Err(e) => return Err(estr(e)),
        };
        let full = solve_prenucleolus(game, fam).map_err(estr)?;
        let matched = same_solution(&restricted.result, &full);
        m.insert(
            "essential".into(),
            json!({
                "count": restricted.report.essential.len(),
                "coalitions": coalitions_json(restricted.report.essential.iter().copied()),
            }),
        );
        m.insert("matches_full_solve".into(), json!(matched));
        summary_parts.push(format!(
            "restricted to {} u-essential coalition(s); {} the full solve",
            restricted.report.essential.len(),
            if matched { "matches" } else { "DIFFERS from" }
        ));
        if !matched {
            exit = exit.max(2);
        }
        restricted.result
    } else {
        match solve_prenucleolus(game, fam) {
            Ok(r) => r,
            Err(ugame::Error::NotBalanced | ugame::Error::EmptyFamily) => {
                return unbalanced_outcome(&loaded);
            }
            Err(e) => return Err(estr(e)),
        }
    };

    for (key, value) in prenucleolus_json(&result, trace) {
        m.insert(key, value);
    }
    summary_parts.insert(
        0,
        format!(
            "u-prenucleolus {} {}; levels {}{}",
            if result.is_singleton {
                "point"
            } else {
                "representative"
            },
            payoff_text(&result.representative),
            levels_text(&result.levels()),
            if result.approximate {
                " (tolerance-based)"
            } else {
                ""
            }
        ),
    );

    if verify_kohlberg {
        let report = kohlberg_check(game, fam, &result.representative).map_err(estr)?;
        m.insert("kohlberg".into(), kohlberg_json(&report));
        summary_parts.push(format!(
            "Kohlberg criterion {}",
            if report.satisfied {
                "satisfied"
            } else {
                "NOT satisfied"
            }
        ));
        if !report.satisfied {
            exit = exit.max(2);
        }
    }

    Ok(Outcome {
        document: Json::Object(m),
        summary: summary_parts.join("\n"),
        exit,
    })
}

fn evidence_json(e: &EssentialEvidence) -> Json {
    match e {
        EssentialEvidence::NoFeasiblePartition => json!({"reason": "no-feasible-partition"}),
        EssentialEvidence::Witness { point, margin } => json!({
            "reason": "witness",
            "point": payoff_json(point),
            "margin": rat_json(margin),
        }),
        EssentialEvidence::Dominated {
            partition,
            at,
            margin,
        } => json!({
            "reason": "dominated",
            "partition": coalitions_json(partition.iter().copied()),
            "at": payoff_json(at),
            "margin": rat_json(margin),
        }),
        EssentialEvidence::UCoreEmpty => json!({"reason": "u-core-empty"}),
    }
}

fn cmd_essential(common: &CommonArgs, classical: bool) -> Result<Outcome, String> {
    let loaded = load(common)?;
    let game = &loaded.game;

    if classical {
        let essentials = classical_essential(game).map_err(estr)?;
        let mut m = Map::new();
        m.insert("command".into(), json!("essential"));
        m.insert("players".into(), json!(loaded.players.names));
        m.insert("variant".into(), json!("classical"));
        m.insert("count".into(), json!(essentials.len()));
        m.insert(
            "coalitions".into(),
            coalitions_json(essentials.iter().copied()),
        );
        let summary = format!(
            "{} classical essential coalition(s) of {}",
            essentials.len(),
            game.family().nontrivial_len()
        );
        Ok(Outcome {
            document: Json::Object(m),
            summary,
            exit: 0,
        })
    } else {
        let report = u_essential(game, &loaded.utility).map_err(estr)?;
        let mut m = envelope("essential", &loaded);
        m.insert("variant".into(), json!("u"));
        m.insert("core_nonempty".into(), json!(report.core_nonempty));
        m.insert("count".into(), json!(report.essential.len()));
        m.insert(
            "coalitions".into(),
            coalitions_json(report.essential.iter().copied()),
        );
        let details: Vec<Json> = report
            .evidence
            .iter()
            .map(|(c, e)| {
                let mut entry = Map::new();
                entry.insert("coalition".into(), coalition_json(*c));
                entry.insert(
                    "essential".into(),
                    json!(report.essential.contains(c)),
                );
                entry.insert("evidence".into(), evidence_json(e));
                Json::Object(entry)
            })
            .collect();
        m.insert("details".into(), Json::Array(details));
        let summary = format!(
            "{} u-essential coalition(s) of {}",
            report.essential.len(),
            game.family().nontrivial_len()
        );
        Ok(Outcome {
            document: Json::Object(m),
            summary,
            exit: 0,
        })
    }
}

fn cmd_kohlberg(common: &CommonArgs, point: &str) -> Result<Outcome, String> {
    let loaded = load(common)?;
    let game = &loaded.game;
    let x = parse_point(point, game.n())?;
    let report = kohlberg_check(game, &loaded.utility, &x).map_err(estr)?;
    let mut m = envelope("kohlberg", &loaded);
    m.insert("point".into(), payoff_json(&x));
    for (key, value) in kohlberg_json(&report)
        .as_object()
        .expect("kohlberg renders to an object")
    {
        m.insert(key.clone(), value.clone());
    }
    let summary = if report.satisfied {
        format!(
            "Kohlberg criterion satisfied at {} ({} level(s), all balanced)",
            payoff_text(&x),
            report.levels.len()
        )
    } else if !report.preimputation {
        format!("{} is not a preimputation", payoff_text(&x))
    } else {
        format!(
            "Kohlberg criterion fails at {} (level {} unbalanced)",
            payoff_text(&x),
            report
                .levels
                .last()
                .map(|l| value_text(&l.level))
                .unwrap_or_default()
        )
    };
    Ok(Outcome {
        document: Json::Object(m),
        summary,
        exit: if report.satisfied { 0 } else { 2 },
    })
}

fn cmd_assignment(file: &PathBuf, verify_structure: bool) -> Result<Outcome, String> {
    let document = doc::read_document(file)?;
    let loaded = doc::realize(&document, None, None)?;
    let spec = loaded
        .assignment
        .as_ref()
        .ok_or("this command needs a document with an assignment block")?;
    let all_rows: Vec<usize> = (0..spec.rows()).collect();
    let all_cols: Vec<usize> = (0..spec.cols()).collect();
    let (grand, matching) =
        ugame::assignment::max_weight_matching(spec, &all_rows, &all_cols).map_err(estr)?;

    let mut m = Map::new();
    m.insert("command".into(), json!("assignment"));
    m.insert("players".into(), json!(loaded.players.names));
    m.insert("buyers".into(), json!(spec.rows()));
    m.insert("sellers".into(), json!(spec.cols()));
    m.insert("grand_value".into(), rat_json(&grand));
    m.insert(
        "matching".into(),
        Json::Array(
            matching
                .0
                .iter()
                .map(|&(i, j)| json!({"buyer": i, "seller": j}))
                .collect(),
        ),
    );

    let mut exit = 0;
    let mut summary = format!(
        "{}x{} market: v(N) = {}, optimal matching {}",
        spec.rows(),
        spec.cols(),
        ugame::num::format_rational(&grand),
        if matching.0.is_empty() {
            "empty".to_string()
        } else {
            matching
                .0
                .iter()
                .map(|&(i, j)| format!("({i},{j})"))
                .collect::<Vec<_>>()
                .join(", ")
        }
    );

    if verify_structure {
        let check = ugame::assignment::verify_essential_structure(spec).map_err(estr)?;
        m.insert(
            "structure".into(),
            json!({
                "conforming": check.conforming,
                "essential_count": check.report.essential.len(),
                "bound": check.bound,
                "essential": coalitions_json(check.report.essential.iter().copied()),
                "violations": coalitions_json(check.violations.iter().copied()),
            }),
        );
        summary.push_str(&format!(
            "\nessential structure {}: {} u-essential coalition(s), bound {}",
            if check.conforming {
                "conforms"
            } else {
                "VIOLATED"
            },
            check.report.essential.len(),
            check.bound
        ));
        if !check.conforming {
            exit = 2;
        }
    }

    Ok(Outcome {
        document: Json::Object(m),
        summary,
        exit,
    })
}

fn indicator_rows(game: &Game) -> Vec<Vec<Rational>> {
    let n = game.n();
    let mut rows: Vec<Vec<Rational>> = game
        .family()
        .nontrivial()
        .map(|s| {
            let mut row = vec![Rational::from_integer(0.into()); n];
            for p in s.members() {
                row[p] = rat(1);
            }
            row
        })
        .collect();
    rows.push(vec![rat(1); n]);
    rows
}

fn cmd_rank(file: &PathBuf) -> Result<Outcome, String> {
    let document = doc::read_document(file)?;
    let loaded = doc::realize(&document, None, None)?;
    let game = &loaded.game;
    let rank = matrix_rank(&indicator_rows(game));
    let full_rank = rank == game.n();
    let mut m = Map::new();
    m.insert("command".into(), json!("rank"));
    m.insert("players".into(), json!(loaded.players.names));
    m.insert("n".into(), json!(game.n()));
    m.insert(
        "nontrivial_coalitions".into(),
        json!(game.family().nontrivial_len()),
    );
    m.insert("rank".into(), json!(rank));
    m.insert("full_rank".into(), json!(full_rank));
    let summary = format!(
        "incidence vectors of {} nontrivial coalition(s) plus N span rank {} of {}",
        game.family().nontrivial_len(),
        rank,
        game.n()
    );
    Ok(Outcome {
        document: Json::Object(m),
        summary,
        exit: 0,
    })
}
