//! Command-line front door.
//!
//! Every library operation is reachable through a subcommand. Exit codes:
//! 0 on success, 1 on domain errors (the error name and witness go to
//! stderr), 2 on usage and input-parse errors. Output is byte-deterministic
//! for fixed input: collections are ordered and JSON field order is fixed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::derivation::{
    analyze_topology, apply_derivation, check_homomorphism, sd_to_graph, AnnotatedSd,
    DerivationScript, RelationSet, Snapshot, Term,
};
use crate::fixtures::bundle_examples;
use crate::knot::{
    apply_rmove, attempt_collapse, enumerate_applicable_moves, is_tricolorable, lackenby_bound,
    reduce_to_unknot_budgeted, writhe, KnotDiagram, DEFAULT_STATE_BUDGET,
};
use crate::lgraph::{
    classify_occurrences, classify_walk, detect_cycle, dominates, immediately_dominates,
    is_ordered, single_mother_violations, LGraph, VertexId,
};
use crate::mono::{
    bracketing, classify_steps, history_tree, is_fs_describable, segment_max_monotonic,
    GrowthHistory, PlainTree,
};
use crate::rat::{approx_rat, format_rat, parse_rat, Rat};
use crate::space::{
    are_separated, boundary, classify_space, make_ultrametric_field, metric_closure, metrize_step,
    neighborhood, triangle_census, ClassWitness, DistanceMatrix, NeighborhoodSpec, PointId,
};
use crate::tree::{
    build_dendrogram, cophenetic_matrix, height_dominates, node_heights, xbar_matrix, Dendrogram,
    NodeId, XBarSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Args)]
struct FormatArg {
    /// Output format; dot is only valid for tree- and graph-producing
    /// commands.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Parser)]
#[command(
    name = "synfold",
    version,
    about = "Distance-space syntax workbench: metrization, folding, multidominance, knot moves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance-space checks and metrization.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Dendrograms and X-bar matrices.
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Annotated structural descriptions.
    #[command(subcommand)]
    Sd(SdCmd),
    /// Derivation scripts and homomorphism checks.
    #[command(subcommand)]
    Derive(DeriveCmd),
    /// Structural-description graph audits.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Growth monotonicity and bracketing.
    #[command(subcommand)]
    Mono(MonoCmd),
    /// Gauss-code knot diagrams.
    #[command(subcommand)]
    Knot(KnotCmd),
    /// Write the bundled example corpus.
    Bundle {
        /// Target directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SpaceCmd {
    /// Classify a matrix; optionally census its triangles or query
    /// neighborhoods, separation, and boundaries.
    Check {
        file: PathBuf,
        /// Also report the triangle census.
        #[arg(long)]
        census: bool,
        /// Report the ball around this point (requires --eps).
        #[arg(long, value_name = "POINT")]
        neighborhood: Option<String>,
        /// Report the boundary of this comma-separated subset (requires
        /// --eps).
        #[arg(long, value_name = "P1,P2,...")]
        boundary: Option<String>,
        /// Report the largest separating radius for this pair.
        #[arg(long, value_name = "X,Y")]
        separated: Option<String>,
        /// Radius for --neighborhood / --boundary, as p/q or an integer.
        #[arg(long, value_name = "p/q")]
        eps: Option<String>,
        /// Use open balls instead of closed ones.
        #[arg(long)]
        open: bool,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Re-close a matrix, optionally after pulling point pairs together.
    Metrize {
        /// Matrix file; omit when building a fresh field with --field.
        file: Option<PathBuf>,
        /// Build a constant ultrametric field N,K instead of reading a
        /// file.
        #[arg(long, value_name = "N,K", conflicts_with = "file")]
        field: Option<String>,
        /// Metrization step X,Y,D; repeatable, applied in order. With no
        /// steps the command just applies the metric closure.
        #[arg(long, value_name = "X,Y,D")]
        step: Vec<String>,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Subcommand)]
enum TreeCmd {
    /// Build the dendrogram of an ultrametric matrix.
    Build {
        file: PathBuf,
        /// List every node with its preorder id and height.
        #[arg(long)]
        heights: bool,
        /// Query height-based domination between two preorder node ids.
        #[arg(long, value_name = "A,B")]
        dominates: Option<String>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Emit the X-bar matrix for the given base distance.
    Xbar {
        base: u32,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Emit the cophenetic matrix of a dendrogram file.
    Cophenetic {
        file: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Subcommand)]
enum SdCmd {
    /// Fold/intersection analysis of annotated sentences.
    Analyze {
        files: Vec<PathBuf>,
        /// Emit the occurrence graph instead of the report.
        #[arg(long)]
        emit_graph: bool,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Subcommand)]
enum DeriveCmd {
    /// Replay a derivation script over a field and a graph.
    Run {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Initial term for substitution steps.
        #[arg(long)]
        term: Option<PathBuf>,
        /// Write per-snapshot DOT files into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Check that a mapping carries the source relations into the target.
    Hom {
        src: PathBuf,
        dst: PathBuf,
        /// Expression mapping as a JSON object; identity when omitted.
        #[arg(long)]
        map: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Single-mother, cycle, and occurrence audits, plus relation queries.
    Audit {
        file: PathBuf,
        /// Classify this comma-separated vertex sequence as a walk.
        #[arg(long, value_name = "V1,V2,...")]
        walk: Option<String>,
        /// Does the first vertex transitively dominate the second?
        #[arg(long, value_name = "A,B")]
        dominates: Option<String>,
        /// Does the first vertex immediately dominate the second?
        #[arg(long, value_name = "A,B")]
        immediate: Option<String>,
        /// Are the two vertices ordered with respect to each other?
        #[arg(long, value_name = "A,B")]
        ordered: Option<String>,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Subcommand)]
enum MonoCmd {
    /// Split a tree into maximal finite-state segments; with --history,
    /// classify the growth steps and segment the tree they build.
    Segment {
        /// Plain-tree file (nested lists).
        file: Option<PathBuf>,
        /// Growth-history file (op list).
        #[arg(long, conflicts_with = "file")]
        history: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Print the bracketing of a plain tree.
    Bracket {
        file: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Subcommand)]
enum KnotCmd {
    /// Enumerate applicable Reidemeister moves; optionally apply one.
    Moves {
        file: PathBuf,
        /// Apply the move with this index from the enumeration and print
        /// the resulting code.
        #[arg(long)]
        apply: Option<usize>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Search for a reduction to the empty diagram.
    Reduce {
        file: PathBuf,
        #[arg(long, default_value_t = 12)]
        max_moves: usize,
        #[arg(long, default_value_t = 8)]
        max_crossings: usize,
        /// Cap on distinct diagrams explored.
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
        max_states: usize,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Decide tricolorability.
    Tricolor {
        file: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Attempt to identify two arcs; always fails, demonstrating that the
    /// diagram model cannot express self-intersection.
    CollapseDemo {
        file: PathBuf,
        /// Arc indices to identify.
        #[arg(long, value_name = "A,B", default_value = "0,1")]
        arcs: String,
    },
}

enum CliError {
    /// Usage or input-parse problems: exit 2.
    Parse(String),
    /// Domain errors from the operations: exit 1.
    Domain(String),
}

impl CliError {
    fn exit(&self) -> ExitCode {
        match self {
            CliError::Parse(_) => ExitCode::from(2),
            CliError::Domain(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Domain(m) => m,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

type CliResult = Result<String, CliError>;

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<DistanceMatrix, CliError> {
    DistanceMatrix::from_json(&read(path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<LGraph, CliError> {
    LGraph::from_json(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_diagram(path: &Path) -> Result<KnotDiagram, CliError> {
    KnotDiagram::parse(&read(path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn parse_pair(s: &str, what: &str) -> Result<(String, String), CliError> {
    match s.split(',').collect::<Vec<_>>()[..] {
        [a, b] => Ok((a.trim().to_string(), b.trim().to_string())),
        _ => Err(CliError::Parse(format!(
            "{what} expects two comma-separated values, got {s:?}"
        ))),
    }
}

fn parse_eps(eps: &Option<String>) -> Result<Rat, CliError> {
    let s = eps
        .as_ref()
        .ok_or_else(|| CliError::Parse("this query needs --eps".into()))?;
    parse_rat(s).map_err(CliError::Parse)
}

fn no_dot(format: Format) -> Result<(), CliError> {
    if format == Format::Dot {
        return Err(CliError::Parse(
            "dot output is only valid for tree- and graph-producing commands".into(),
        ));
    }
    Ok(())
}

fn matrix_text(m: &DistanceMatrix) -> String {
    let mut out = String::new();
    let width = m
        .points()
        .iter()
        .map(|p| p.to_string().len())
        .chain(
            (0..m.len())
                .flat_map(|i| (0..m.len()).map(move |j| (i, j)))
                .map(|(i, j)| approx_rat(m.at(i, j)).len()),
        )
        .max()
        .unwrap_or(1)
        + 2;
    let _ = write!(out, "{:width$}", "");
    for p in m.points() {
        let _ = write!(out, "{:>width$}", p.to_string());
    }
    out.push('\n');
    for (i, p) in m.points().iter().enumerate() {
        let _ = write!(out, "{:<width$}", p.to_string());
        for j in 0..m.len() {
            let _ = write!(out, "{:>width$}", approx_rat(m.at(i, j)));
        }
        out.push('\n');
    }
    out
}

fn matrix_output(m: &DistanceMatrix, format: Format) -> CliResult {
    no_dot(format)?;
    Ok(match format {
        Format::Json => m.to_json() + "\n",
        _ => {
            let class = classify_space(m);
            format!("{}class: {}\n", matrix_text(m), class.class)
        }
    })
}

fn witness_json(w: &ClassWitness) -> serde_json::Value {
    match w {
        ClassWitness::ZeroOffDiagonal { x, y } => json!({
            "kind": "ZeroOffDiagonal",
            "points": [x.to_string(), y.to_string()],
        }),
        ClassWitness::TriangleViolation { x, y, z } => json!({
            "kind": "TriangleViolation",
            "points": [x.to_string(), y.to_string(), z.to_string()],
        }),
        ClassWitness::UltrametricViolation { x, y, z } => json!({
            "kind": "UltrametricViolation",
            "points": [x.to_string(), y.to_string(), z.to_string()],
        }),
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Space(cmd) => run_space(cmd),
        Command::Tree(cmd) => run_tree(cmd),
        Command::Sd(cmd) => run_sd(cmd),
        Command::Derive(cmd) => run_derive(cmd),
        Command::Graph(cmd) => run_graph(cmd),
        Command::Mono(cmd) => run_mono(cmd),
        Command::Knot(cmd) => run_knot(cmd),
        Command::Bundle { out } => {
            let files =
                bundle_examples(&out).map_err(|e| CliError::Domain(format!("IoError: {e}")))?;
            let mut text = String::new();
            for f in files {
                let _ = writeln!(text, "{}", f.display());
            }
            Ok(text)
        }
    }
}

fn run_space(cmd: SpaceCmd) -> CliResult {
    match cmd {
        SpaceCmd::Check {
            file,
            census,
            neighborhood: nbhd,
            boundary: bdry,
            separated,
            eps,
            open,
            format,
        } => {
            let format = format.format;
            no_dot(format)?;
            let m = load_matrix(&file)?;

            if let Some(center) = nbhd {
                let spec = NeighborhoodSpec {
                    center: PointId::new(center),
                    radius: parse_eps(&eps)?,
                    closed: !open,
                };
                let ball = neighborhood(&m, &spec).map_err(domain)?;
                let names: Vec<String> = ball.iter().map(|p| p.to_string()).collect();
                return Ok(match format {
                    Format::Json => json!({ "neighborhood": names }).to_string() + "\n",
                    _ => format!("neighborhood: {}\n", names.join(", ")),
                });
            }
            if let Some(subset) = bdry {
                let subset: BTreeSet<PointId> =
                    subset.split(',').map(|s| PointId::new(s.trim())).collect();
                let edge = boundary(&m, &subset, &parse_eps(&eps)?).map_err(domain)?;
                let names: Vec<String> = edge.iter().map(|p| p.to_string()).collect();
                return Ok(match format {
                    Format::Json => json!({ "boundary": names }).to_string() + "\n",
                    _ => format!("boundary: {}\n", names.join(", ")),
                });
            }
            if let Some(pair) = separated {
                let (x, y) = parse_pair(&pair, "--separated")?;
                let radius =
                    are_separated(&m, &PointId::new(x), &PointId::new(y), !open).map_err(domain)?;
                return Ok(match format {
                    Format::Json => {
                        json!({ "separated": radius.as_ref().map(format_rat) }).to_string() + "\n"
                    }
                    _ => match radius {
                        Some(r) => format!("separated: radius {}\n", format_rat(&r)),
                        None => "separated: no\n".to_string(),
                    },
                });
            }

            let c = classify_space(&m);
            if format == Format::Json {
                let mut obj = serde_json::Map::new();
                obj.insert("class".into(), json!(c.class.to_string()));
                if let Some(w) = &c.witness {
                    obj.insert("witness".into(), witness_json(w));
                }
                if census {
                    obj.insert(
                        "census".into(),
                        serde_json::to_value(triangle_census(&m)).expect("census serializes"),
                    );
                }
                return Ok(serde_json::Value::Object(obj).to_string() + "\n");
            }
            let mut text = format!("class: {}\n", c.class);
            if let Some(w) = &c.witness {
                let _ = writeln!(text, "witness: {w}");
            }
            if census {
                let t = triangle_census(&m);
                let _ = writeln!(
                    text,
                    "census: equilateral={} isoscelesTopTwoEqual={} other={} total={}",
                    t.equilateral, t.isosceles_top_two_equal, t.other, t.total
                );
            }
            Ok(text)
        }
        SpaceCmd::Metrize {
            file,
            field,
            step,
            format,
        } => {
            let mut m = match (&file, &field) {
                (Some(path), None) => load_matrix(path)?,
                (None, Some(spec)) => {
                    let (n, k) = parse_pair(spec, "--field")?;
                    let n: usize = n
                        .parse()
                        .map_err(|_| CliError::Parse(format!("bad point count {n:?}")))?;
                    let k = parse_rat(&k).map_err(CliError::Parse)?;
                    make_ultrametric_field(n, &k).map_err(domain)?
                }
                _ => {
                    return Err(CliError::Parse(
                        "space metrize needs a matrix file or --field N,K".into(),
                    ))
                }
            };
            for s in &step {
                let parts: Vec<&str> = s.split(',').map(str::trim).collect();
                let [x, y, d] = parts[..] else {
                    return Err(CliError::Parse(format!("--step expects X,Y,D, got {s:?}")));
                };
                let d = parse_rat(d).map_err(CliError::Parse)?;
                m = metrize_step(&m, &PointId::new(x), &PointId::new(y), &d).map_err(domain)?;
            }
            if step.is_empty() {
                m = metric_closure(&m);
            }
            matrix_output(&m, format.format)
        }
    }
}

fn tree_text(t: &Dendrogram, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match t {
        Dendrogram::Leaf { label } => {
            let _ = writeln!(out, "{pad}{label}");
        }
        Dendrogram::Node { height, children } => {
            let _ = writeln!(out, "{pad}({})", approx_rat(height));
            for c in children {
                tree_text(c, indent + 1, out);
            }
        }
    }
}

fn run_tree(cmd: TreeCmd) -> CliResult {
    match cmd {
        TreeCmd::Build {
            file,
            heights,
            dominates: dom,
            format,
        } => {
            let m = load_matrix(&file)?;
            let t = build_dendrogram(&m).map_err(domain)?;
            if let Some(pair) = dom {
                let (a, b) = parse_pair(&pair, "--dominates")?;
                let parse_id = |s: &String| {
                    s.parse::<usize>()
                        .map(NodeId)
                        .map_err(|_| CliError::Parse(format!("bad node id {s:?}")))
                };
                let holds = height_dominates(&t, parse_id(&a)?, parse_id(&b)?).map_err(domain)?;
                return Ok(match format.format {
                    Format::Json => json!({ "dominates": holds }).to_string() + "\n",
                    _ => format!("dominates: {holds}\n"),
                });
            }
            if heights {
                let listing = node_heights(&t);
                return Ok(match format.format {
                    Format::Json => {
                        let obj: BTreeMap<String, String> = listing
                            .iter()
                            .map(|(id, h)| (id.0.to_string(), format_rat(h)))
                            .collect();
                        json!({ "heights": obj }).to_string() + "\n"
                    }
                    _ => {
                        let mut text = String::new();
                        for ((id, h), (_, _, label)) in listing.iter().zip(t.preorder()) {
                            let _ = writeln!(
                                text,
                                "node {}: height {}{}",
                                id.0,
                                approx_rat(h),
                                label.map(|l| format!(" ({l})")).unwrap_or_default()
                            );
                        }
                        text
                    }
                });
            }
            Ok(match format.format {
                Format::Json => t.to_json() + "\n",
                Format::Dot => t.to_dot(),
                Format::Text => {
                    let mut text = String::new();
                    tree_text(&t.canonicalize(), 0, &mut text);
                    text
                }
            })
        }
        TreeCmd::Xbar { base, format } => {
            matrix_output(&xbar_matrix(&XBarSpec { base }), format.format)
        }
        TreeCmd::Cophenetic { file, format } => {
            let t = Dendrogram::from_json(&read(&file)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", file.display())))?;
            let m = cophenetic_matrix(&t).map_err(domain)?;
            matrix_output(&m, format.format)
        }
    }
}

fn report_json(report: &crate::derivation::TopoReport) -> serde_json::Value {
    let intersections: BTreeMap<String, usize> = report
        .self_intersections
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    json!({
        "foldings": report.foldings,
        "selfIntersections": intersections,
        "totalIntersections": report.total_intersections,
        "classification": report.classification,
    })
}

fn run_sd(cmd: SdCmd) -> CliResult {
    match cmd {
        SdCmd::Analyze {
            files,
            emit_graph,
            format,
        } => {
            if files.is_empty() {
                return Err(CliError::Parse("sd analyze needs at least one file".into()));
            }
            let mut sds = Vec::new();
            for file in &files {
                sds.push(
                    AnnotatedSd::from_json(&read(file)?)
                        .map_err(|e| CliError::Parse(format!("{}: {e}", file.display())))?,
                );
            }
            if emit_graph || format.format == Format::Dot {
                let mut out = String::new();
                for sd in &sds {
                    let g = sd_to_graph(sd).map_err(domain)?;
                    match format.format {
                        Format::Json => out.push_str(&(g.to_json() + "\n")),
                        _ => out.push_str(&g.to_dot()),
                    }
                }
                return Ok(out);
            }
            let mut reports = Vec::new();
            for sd in &sds {
                reports.push(analyze_topology(sd).map_err(domain)?);
            }
            Ok(match format.format {
                Format::Json => {
                    let values: Vec<_> = reports.iter().map(report_json).collect();
                    if values.len() == 1 {
                        values[0].to_string() + "\n"
                    } else {
                        serde_json::Value::Array(values).to_string() + "\n"
                    }
                }
                _ => {
                    let mut text = String::new();
                    for (file, report) in files.iter().zip(&reports) {
                        let _ = writeln!(text, "{}:", file.display());
                        let _ = writeln!(text, "  foldings: {}", report.foldings);
                        for (addr, k) in &report.self_intersections {
                            let _ = writeln!(text, "  self-intersections at {addr}: {k}");
                        }
                        let _ = writeln!(
                            text,
                            "  total self-intersections: {}",
                            report.total_intersections
                        );
                        let _ = writeln!(text, "  classification: {}", report.classification);
                    }
                    text
                }
            })
        }
    }
}

fn snapshot_json(s: &Snapshot) -> serde_json::Value {
    json!({
        "step": s.step_index,
        "label": s.label,
        "class": s.class.to_string(),
        "matrix": serde_json::from_str::<serde_json::Value>(&s.matrix.to_json())
            .expect("matrix json parses"),
    })
}

fn run_derive(cmd: DeriveCmd) -> CliResult {
    match cmd {
        DeriveCmd::Run {
            field,
            graph,
            script,
            term,
            out,
            format,
        } => {
            let m = load_matrix(&field)?;
            let g = load_graph(&graph)?;
            let script = DerivationScript::from_json(&read(&script)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", script.display())))?;
            let term = term
                .map(|p| {
                    Term::from_json(&read(&p)?)
                        .map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))
                })
                .transpose()?;
            let snapshots = apply_derivation(&script, &m, &g, term).map_err(domain)?;
            if let Some(dir) = &out {
                fs::create_dir_all(dir).map_err(|e| CliError::Domain(format!("IoError: {e}")))?;
                for s in &snapshots {
                    let path = dir.join(format!("snapshot_{:02}.dot", s.step_index));
                    fs::write(&path, s.graph.to_dot())
                        .map_err(|e| CliError::Domain(format!("IoError: {e}")))?;
                }
            }
            Ok(match format.format {
                Format::Json => {
                    let values: Vec<_> = snapshots.iter().map(snapshot_json).collect();
                    serde_json::Value::Array(values).to_string() + "\n"
                }
                Format::Dot => {
                    let mut text = String::new();
                    for s in &snapshots {
                        text.push_str(&s.graph.to_dot());
                    }
                    text
                }
                Format::Text => {
                    let mut text = String::new();
                    for s in &snapshots {
                        let _ = writeln!(text, "{s}");
                        if let Some(t) = &s.term {
                            let _ = writeln!(text, "  term: {}", t.bracketing());
                        }
                    }
                    text
                }
            })
        }
        DeriveCmd::Hom {
            src,
            dst,
            map,
            format,
        } => {
            no_dot(format.format)?;
            let src = RelationSet::from_json(&read(&src)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", src.display())))?;
            let dst = RelationSet::from_json(&read(&dst)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", dst.display())))?;
            let mapping: BTreeMap<String, String> = match map {
                Some(path) => serde_json::from_str(&read(&path)?)
                    .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?,
                None => src
                    .universe()
                    .iter()
                    .map(|e| (e.clone(), e.clone()))
                    .collect(),
            };
            let holds = check_homomorphism(&src, &dst, &mapping).map_err(domain)?;
            Ok(match format.format {
                Format::Json => json!({ "holds": holds }).to_string() + "\n",
                _ => format!("homomorphism: {holds}\n"),
            })
        }
    }
}

fn run_graph(cmd: GraphCmd) -> CliResult {
    match cmd {
        GraphCmd::Audit {
            file,
            walk,
            dominates: dom,
            immediate,
            ordered,
            format,
        } => {
            let g = load_graph(&file)?;
            let vids = |s: &str| -> Vec<VertexId> {
                s.split(',').map(|v| VertexId::new(v.trim())).collect()
            };
            if let Some(seq) = walk {
                let class = classify_walk(&g, &vids(&seq));
                return Ok(match format.format {
                    Format::Json => json!({ "walk": class.to_string() }).to_string() + "\n",
                    _ => format!("walk: {class}\n"),
                });
            }
            for (flag, query) in [
                (&dom, "dominates"),
                (&immediate, "immediate"),
                (&ordered, "ordered"),
            ] {
                if let Some(pair) = flag {
                    let (a, b) = parse_pair(pair, query)?;
                    let (a, b) = (VertexId::new(a), VertexId::new(b));
                    let holds = match query {
                        "dominates" => dominates(&g, &a, &b),
                        "immediate" => immediately_dominates(&g, &a, &b),
                        _ => is_ordered(&g, &a, &b),
                    }
                    .map_err(domain)?;
                    return Ok(match format.format {
                        Format::Json => json!({ query: holds }).to_string() + "\n",
                        _ => format!("{query}: {holds}\n"),
                    });
                }
            }
            match format.format {
                Format::Dot => Ok(g.to_dot()),
                Format::Json => {
                    let violations: Vec<String> = single_mother_violations(&g)
                        .iter()
                        .map(|v| v.to_string())
                        .collect();
                    let cycle: Option<Vec<String>> =
                        detect_cycle(&g).map(|c| c.iter().map(|v| v.to_string()).collect());
                    let occurrences: BTreeMap<String, String> = classify_occurrences(&g)
                        .iter()
                        .map(|(v, c)| (v.to_string(), c.to_string()))
                        .collect();
                    Ok(json!({
                        "singleMotherViolations": violations,
                        "cycle": cycle,
                        "occurrences": occurrences,
                    })
                    .to_string()
                        + "\n")
                }
                Format::Text => {
                    let mut text = String::new();
                    let violations = single_mother_violations(&g);
                    let names: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(
                        text,
                        "single-mother violations: {}",
                        if names.is_empty() {
                            "none".to_string()
                        } else {
                            names.join(", ")
                        }
                    );
                    let _ = writeln!(
                        text,
                        "cycle: {}",
                        detect_cycle(&g)
                            .map(|c| c
                                .iter()
                                .map(|v| v.to_string())
                                .collect::<Vec<_>>()
                                .join(" -> "))
                            .unwrap_or_else(|| "none".to_string())
                    );
                    for (vid, class) in classify_occurrences(&g) {
                        let _ = writeln!(text, "{vid}: {class}");
                    }
                    Ok(text)
                }
            }
        }
    }
}

fn run_mono(cmd: MonoCmd) -> CliResult {
    match cmd {
        MonoCmd::Segment {
            file,
            history,
            format,
        } => {
            no_dot(format.format)?;
            let (steps, tree) = match (&file, &history) {
                (Some(path), None) => (
                    None,
                    PlainTree::from_json(&read(path)?)
                        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?,
                ),
                (None, Some(path)) => {
                    let h = GrowthHistory::from_json(&read(path)?)
                        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
                    (Some(classify_steps(&h)), history_tree(&h))
                }
                _ => {
                    return Err(CliError::Parse(
                        "mono segment needs a tree file or --history".into(),
                    ))
                }
            };
            let fs_ok = is_fs_describable(&tree).map_err(domain)?;
            let seg = segment_max_monotonic(&tree).map_err(domain)?;
            Ok(match format.format {
                Format::Json => {
                    let segments: Vec<String> = seg.segments.iter().map(bracketing).collect();
                    json!({
                        "steps": steps.map(|s| s.iter().map(|c| c.to_string()).collect::<Vec<_>>()),
                        "fsDescribable": fs_ok,
                        "segments": segments,
                        "joints": seg.joints,
                    })
                    .to_string()
                        + "\n"
                }
                _ => {
                    let mut text = String::new();
                    if let Some(steps) = steps {
                        let names: Vec<String> = steps.iter().map(|c| c.to_string()).collect();
                        let _ = writeln!(text, "steps: {}", names.join(", "));
                    }
                    let _ = writeln!(text, "fs-describable: {fs_ok}");
                    let _ = writeln!(text, "segments: {}", seg.segments.len());
                    for s in &seg.segments {
                        let _ = writeln!(text, "  {}", bracketing(s));
                    }
                    let _ = writeln!(text, "joints: {}", seg.joints.len());
                    for j in &seg.joints {
                        let path: Vec<String> = j.iter().map(|i| i.to_string()).collect();
                        let _ = writeln!(text, "  at [{}]", path.join(", "));
                    }
                    text
                }
            })
        }
        MonoCmd::Bracket { file, format } => {
            no_dot(format.format)?;
            let tree = PlainTree::from_json(&read(&file)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", file.display())))?;
            let b = bracketing(&tree);
            Ok(match format.format {
                Format::Json => json!({ "bracketing": b }).to_string() + "\n",
                _ => b + "\n",
            })
        }
    }
}

fn run_knot(cmd: KnotCmd) -> CliResult {
    match cmd {
        KnotCmd::Moves {
            file,
            apply,
            format,
        } => {
            no_dot(format.format)?;
            let d = load_diagram(&file)?;
            let moves = enumerate_applicable_moves(&d);
            if let Some(index) = apply {
                let m = moves.get(index).ok_or_else(|| {
                    CliError::Parse(format!(
                        "move index {index} out of range ({} moves)",
                        moves.len()
                    ))
                })?;
                let next = apply_rmove(&d, m).map_err(domain)?;
                return Ok(match format.format {
                    Format::Json => {
                        json!({ "applied": m.to_string(), "code": next.to_string() }).to_string()
                            + "\n"
                    }
                    _ => format!("{next}\n"),
                });
            }
            Ok(match format.format {
                Format::Json => {
                    let listing: Vec<String> = moves.iter().map(|m| m.to_string()).collect();
                    json!({
                        "crossings": d.crossing_count(),
                        "writhe": writhe(&d),
                        "moves": listing,
                    })
                    .to_string()
                        + "\n"
                }
                _ => {
                    let mut text = format!(
                        "crossings: {}\nwrithe: {}\n",
                        d.crossing_count(),
                        writhe(&d)
                    );
                    for (i, m) in moves.iter().enumerate() {
                        let _ = writeln!(text, "{i}: {m}");
                    }
                    text
                }
            })
        }
        KnotCmd::Reduce {
            file,
            max_moves,
            max_crossings,
            max_states,
            format,
        } => {
            no_dot(format.format)?;
            let d = load_diagram(&file)?;
            let bound = lackenby_bound(d.crossing_count().max(1));
            let result = reduce_to_unknot_budgeted(&d, max_moves, max_crossings, max_states);
            Ok(match format.format {
                Format::Json => {
                    json!({
                        "reduced": result.is_some(),
                        "moves": result
                            .as_ref()
                            .map(|ms| ms.iter().map(|m| m.to_string()).collect::<Vec<_>>()),
                        "worstCaseBound": bound.to_string(),
                    })
                    .to_string()
                        + "\n"
                }
                _ => match result {
                    Some(moves) => {
                        let listing: Vec<String> = moves.iter().map(|m| m.to_string()).collect();
                        format!(
                            "reduced in {} move(s): {}\n",
                            moves.len(),
                            if listing.is_empty() {
                                "already the unknot".to_string()
                            } else {
                                listing.join(" ")
                            }
                        )
                    }
                    None => format!(
                        "no reduction found (moves <= {max_moves}, crossings <= {max_crossings}, \
                         states <= {max_states}); not proof of knottedness — the worst-case move \
                         bound here is {bound}\n"
                    ),
                },
            })
        }
        KnotCmd::Tricolor { file, format } => {
            no_dot(format.format)?;
            let d = load_diagram(&file)?;
            let value = is_tricolorable(&d);
            Ok(match format.format {
                Format::Json => json!({ "tricolorable": value }).to_string() + "\n",
                _ => format!("tricolorable: {value}\n"),
            })
        }
        KnotCmd::CollapseDemo { file, arcs } => {
            let d = load_diagram(&file)?;
            let (a, b) = parse_pair(&arcs, "--arcs")?;
            let parse_arc = |s: &String| {
                s.parse::<usize>()
                    .map_err(|_| CliError::Parse(format!("bad arc index {s:?}")))
            };
            attempt_collapse(&d, parse_arc(&a)?, parse_arc(&b)?).map_err(domain)?;
            unreachable!("attempt_collapse never succeeds");
        }
    }
}
