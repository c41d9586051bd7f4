use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pcf_core::approximation::{resistance_matrix, CellFunction, Fractal, Function, VertexFunction};
use pcf_core::besov::{besov_norm, NormKind};
use pcf_core::decompositions::{
    atomic_from_function_with, haar_expand, smoothed_haar_expand, smoothed_tent_expand, tent_expand, Smoothing,
    Variant, WindowMode,
};
use pcf_core::exec::Exec;
use pcf_core::harness::{
    dimension_experiment, divergence_probe, emit_report, equivalence_experiment, generate, render_report, Format,
    RecipeKind, ReportData, TestFunctionRecipe, Thresholds,
};
use pcf_core::operators::{eigensystem, weyl_slope, Boundary};
use pcf_core::spec_core::{verify_harmonic_structure, FractalSpec};
use pcf_core::Error;

#[derive(Parser)]
#[command(name = "pcf", version, about = "Analysis on p.c.f. self-similar fractals")]
struct Cli {
    /// Preset name (sg, interval) or path to a spec JSON file.
    #[arg(long, global = true, default_value = "sg")]
    spec: String,
    /// Approximation level M; each command has its own default.
    #[arg(long, global = true)]
    level: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; inferred from the --out extension when absent.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Run experiments on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the fractal spec and print derived constants.
    Spec,
    /// Dimensions, graph counts per level and multiharmonic ranks.
    Dims,
    /// Vertex or cell graph at a level.
    Graph {
        #[arg(long, value_enum, default_value = "vertex")]
        kind: GraphKind,
    },
    /// Effective resistances among vertices of V_M.
    Resistance {
        /// `boundary`, `all`, or comma-separated vertex ids.
        #[arg(long, default_value = "boundary")]
        pairs: String,
    },
    /// Graph Laplacian eigenvalues.
    Spectrum {
        #[arg(long, default_value = "neumann")]
        bc: String,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Fit the eigenvalue counting function against the spectral dimension.
    Weyl {
        /// Largest relative error that counts as a pass.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Haar, tent, smoothed or atomic expansion of a function.
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        kind: DecomposeKind,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Working level for smoothed expansions; continuum bubbles for
        /// smoothed-haar when absent.
        #[arg(long)]
        working: Option<usize>,
        /// Multiharmonic order for atomic expansions.
        #[arg(long, default_value_t = 0)]
        k: usize,
        /// Proceed (with a warning) outside the atomic validity window.
        #[arg(long)]
        lenient: bool,
    },
    /// Besov-type and spectral norms with per-level terms.
    Norms {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated list or start:stop:step.
        #[arg(long, default_value = "0.3,0.7,1.0,1.3")]
        sigma: String,
        #[arg(long, default_value = "gamma,tgamma,lambda,tlambda,b22,spectralN")]
        kinds: String,
    },
    /// Norm ratio bands across a random family at levels M−1 and M.
    Equivalence {
        /// Two norm kinds, e.g. spectralN,gamma.
        #[arg(long)]
        kinds: String,
        #[arg(long)]
        sigma: String,
        /// Number of random-haar functions.
        #[arg(long, default_value_t = 50)]
        family: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_star: f64,
        /// Number of Neumann eigenfunctions added to the family.
        #[arg(long, default_value_t = 10)]
        eigen: usize,
        #[arg(long, default_value_t = 100.0)]
        band: f64,
        #[arg(long, default_value_t = 0.10)]
        instability: f64,
    },
    /// Locate the σ where a norm's per-level terms stop decaying.
    Probe {
        #[arg(long)]
        kind: String,
        /// Recipe as JSON text or a file path.
        #[arg(long)]
        recipe: String,
        /// Ascending grid: list or start:stop:step.
        #[arg(long)]
        sigma: String,
        /// Predicted threshold; the probe fails when the estimate is
        /// farther than `tolerance` from it.
        #[arg(long)]
        expect: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Re-emit a JSON report in another format.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Function file with `level` and `values` or `averages`.
    #[arg(long, conflicts_with = "recipe")]
    input: Option<PathBuf>,
    /// Test-function recipe as JSON text or a file path.
    #[arg(long)]
    recipe: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Vertex,
    Cell,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecomposeKind {
    Haar,
    SmoothedHaar,
    Tent,
    SmoothedTent,
    AtomicA,
    AtomicB,
}

/// Outcome of a command that ran to completion.
enum Status {
    Pass,
    Fail,
}

struct Ctx {
    fr: Fractal,
    level: Option<usize>,
    seed: u64,
    out: Option<PathBuf>,
    format: Option<Format>,
    exec: Exec,
}

impl Ctx {
    fn level(&self, default: usize) -> usize {
        self.level.unwrap_or(default)
    }

    fn format(&self, default: Format) -> Format {
        if let Some(f) = self.format {
            return f;
        }
        match self.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            _ => default,
        }
    }

    fn write(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => print_stdout(text),
        }
    }

    fn write_json(&self, value: &impl serde::Serialize) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(&s)
    }

    fn report(&self, data: &ReportData, default: Format) -> anyhow::Result<()> {
        let format = self.format(default);
        match &self.out {
            Some(p) => emit_report(data, format, Some(p)).map(|_| ()).map_err(Into::into),
            None => print_stdout(&render_report(data, format)?),
        }
    }
}

/// A closed pipe on stdout (e.g. `| head`) is not an error.
fn print_stdout(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!(Error::InvalidArgument(format!("'{s}': {e}")))))
        .collect()
}

fn parse_sigmas(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let sigmas = if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!(Error::InvalidArgument(format!("'{p}': {e}")))))
            .collect::<anyhow::Result<_>>()?;
        let (a, b, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || b < a {
            return Err(Error::InvalidArgument("grid start:stop:step needs step > 0 and stop >= start".into()).into());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| ((a + step * i as f64) * 1e12).round() / 1e12).collect()
    } else {
        parse_list::<f64>(text)?
    };
    if sigmas.is_empty() {
        return Err(Error::InvalidArgument("empty sigma list".into()).into());
    }
    Ok(sigmas)
}

fn read_text(arg: &str) -> anyhow::Result<String> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).map_err(|source| Error::Io { path: arg.into(), source }.into())
}

fn parse_recipe(arg: &str) -> anyhow::Result<TestFunctionRecipe> {
    let text = read_text(arg)?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn load_function(ctx: &Ctx, input: &InputArgs) -> anyhow::Result<Function> {
    let f = match (&input.input, &input.recipe) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
            serde_json::from_str::<Function>(&text).map_err(Error::from)?
        }
        (None, Some(r)) => generate(&ctx.fr, &parse_recipe(r)?)?,
        (None, None) => return Err(Error::InvalidArgument("pass --input or --recipe".into()).into()),
    };
    f.check(&ctx.fr)?;
    Ok(f)
}

fn vertex_input(f: &Function) -> anyhow::Result<&VertexFunction> {
    f.as_vertex().ok_or_else(|| Error::InvalidArgument("this command needs vertex values".into()).into())
}

fn cmd_spec(ctx: &Ctx) -> anyhow::Result<Status> {
    let spec = ctx.fr.spec();
    let check = verify_harmonic_structure(spec)?;
    ctx.write_json(&json!({
        "spec": spec,
        "constants": ctx.fr.constants(),
        "critical_orders": ctx.fr.constants().critical_orders(4.0),
        "harmonic_check": check,
    }))?;
    Ok(if check.passes { Status::Pass } else { Status::Fail })
}

fn cmd_dims(ctx: &Ctx) -> anyhow::Result<Status> {
    let fr = &ctx.fr;
    let level = ctx.level(4);
    let mut rows = Vec::new();
    for m in 0..=level {
        let v = fr.try_vertex_approx(m)?;
        let cell_edges = if m == 0 { 0 } else { fr.cell_approx(m)?.edges.len() };
        rows.push((m, v.num_vertices(), v.num_cells(), v.edges.len(), cell_edges));
    }
    let structure = dimension_experiment(fr, level.max(1), 2, ctx.seed, None)?;
    let pass = structure.orders.iter().all(|o| o.dim == o.expected && o.dim_prime == o.expected)
        && structure.split_residual <= 1e-8;
    if ctx.format(Format::Json) == Format::Csv {
        let mut s = String::from("level,vertices,cells,vertex_edges,cell_edges\n");
        for (m, v, c, e, ce) in &rows {
            s += &format!("{m},{v},{c},{e},{ce}\n");
        }
        ctx.write(&s)?;
    } else {
        let counts: Vec<_> = rows
            .iter()
            .map(|(m, v, c, e, ce)| json!({"level": m, "vertices": v, "cells": c, "vertex_edges": e, "cell_edges": ce}))
            .collect();
        ctx.write_json(&json!({
            "constants": fr.constants(),
            "critical_orders": fr.constants().critical_orders(4.0),
            "counts": counts,
            "structure": structure,
        }))?;
    }
    Ok(if pass { Status::Pass } else { Status::Fail })
}

fn cmd_graph(ctx: &Ctx, kind: GraphKind) -> anyhow::Result<Status> {
    let fr = &ctx.fr;
    let m = ctx.level(2);
    let v = fr.try_vertex_approx(m)?;
    let csv = ctx.format(Format::Json) == Format::Csv;
    match kind {
        GraphKind::Vertex => {
            if csv {
                let mut s = String::from("a,b,conductance\n");
                for (a, b, c) in &v.edges {
                    s += &format!("{a},{b},{c}\n");
                }
                ctx.write(&s)?;
            } else {
                let d = v.tent_weights(fr.ell());
                ctx.write_json(&json!({
                    "kind": "vertex",
                    "level": m,
                    "vertices": v.num_vertices(),
                    "addresses": v.addresses.iter().map(|(w, p)| format!("{w}:{p}")).collect::<Vec<_>>(),
                    "measures": d,
                    "edges": v.edges,
                }))?;
            }
        }
        GraphKind::Cell => {
            let cells = fr.cell_approx(m)?;
            if csv {
                let mut s = String::from("a,b,shared,refined\n");
                for e in &cells.edges {
                    s += &format!("{},{},{},{}\n", e.a, e.b, e.shared, e.refined);
                }
                ctx.write(&s)?;
            } else {
                ctx.write_json(&json!({
                    "kind": "cell",
                    "level": m,
                    "cells": v.words.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                    "measures": v.mu_w,
                    "edges": cells.edges,
                }))?;
            }
        }
    }
    Ok(Status::Pass)
}

fn cmd_resistance(ctx: &Ctx, pairs: &str) -> anyhow::Result<Status> {
    let m = ctx.level(2);
    let v = ctx.fr.try_vertex_approx(m)?;
    let ids: Vec<usize> = match pairs {
        "boundary" => (0..ctx.fr.b()).collect(),
        "all" => (0..v.num_vertices()).collect(),
        list => parse_list(list)?,
    };
    let r = resistance_matrix(&v, &ids)?;
    if ctx.format(Format::Json) == Format::Csv {
        let mut s = String::from("x,y,resistance\n");
        for (i, &x) in ids.iter().enumerate() {
            for (j, &y) in ids.iter().enumerate() {
                s += &format!("{x},{y},{}\n", r[(i, j)]);
            }
        }
        ctx.write(&s)?;
    } else {
        let rows: Vec<Vec<f64>> = (0..ids.len()).map(|i| r.row(i).iter().copied().collect()).collect();
        ctx.write_json(&json!({"level": m, "ids": ids, "resistance": rows}))?;
    }
    Ok(Status::Pass)
}

fn cmd_spectrum(ctx: &Ctx, bc: &str, count: Option<usize>) -> anyhow::Result<Status> {
    let bc: Boundary = bc.parse()?;
    let m = ctx.level(4);
    let sys = eigensystem(&ctx.fr, m, bc, count, false)?;
    if ctx.format(Format::Csv) == Format::Csv {
        let mut s = String::from("index,eigenvalue\n");
        for (i, l) in sys.values.iter().enumerate() {
            s += &format!("{i},{l}\n");
        }
        ctx.write(&s)?;
    } else {
        ctx.write_json(&json!({"level": m, "bc": bc, "values": sys.values}))?;
    }
    Ok(Status::Pass)
}

fn cmd_weyl(ctx: &Ctx, tolerance: f64) -> anyhow::Result<Status> {
    let w = weyl_slope(&ctx.fr, ctx.level(6))?;
    if ctx.format(Format::Json) == Format::Csv {
        ctx.write(&format!(
            "level,eigenvalues,fitted_points,slope,target,relative_error\n{},{},{},{},{},{}\n",
            w.level, w.eigenvalues, w.fitted_points, w.slope, w.target, w.relative_error
        ))?;
    } else {
        ctx.write_json(&w)?;
    }
    Ok(if w.relative_error <= tolerance { Status::Pass } else { Status::Fail })
}

struct DecomposeOpts {
    kind: DecomposeKind,
    sigma: f64,
    working: Option<usize>,
    k: usize,
    lenient: bool,
}

fn cmd_decompose(ctx: &Ctx, input: &InputArgs, o: DecomposeOpts) -> anyhow::Result<Status> {
    let fr = &ctx.fr;
    let f = load_function(ctx, input)?;
    let level = ctx.level(f.level());
    let mode = if o.lenient { WindowMode::Warn } else { WindowMode::Strict };
    let out = match o.kind {
        DecomposeKind::Haar => {
            let cells = CellFunction { level, averages: f.averages(fr, level)? };
            serde_json::to_value(haar_expand(fr, &cells)?)?
        }
        DecomposeKind::Tent => serde_json::to_value(tent_expand(fr, vertex_input(&f)?)?)?,
        DecomposeKind::SmoothedHaar => {
            let smoothing = match o.working {
                Some(w) => Smoothing::Discrete { working: w },
                None => Smoothing::Continuum,
            };
            let exp = smoothed_haar_expand(fr, vertex_input(&f)?, level, smoothing)?;
            let target = o.working.unwrap_or(level);
            serde_json::to_value(exp.to_layers(fr, target)?)?
        }
        DecomposeKind::SmoothedTent => {
            let working = o.working.unwrap_or(level + 3);
            serde_json::to_value(smoothed_tent_expand(fr, vertex_input(&f)?, level, working)?)?
        }
        DecomposeKind::AtomicA | DecomposeKind::AtomicB => {
            let variant = if matches!(o.kind, DecomposeKind::AtomicA) { Variant::A } else { Variant::B };
            let g = vertex_input(&f)?;
            let c = atomic_from_function_with(fr, g, variant, o.k, o.sigma, mode)?;
            let norm = pcf_core::decompositions::atomic_norm(fr, &c, o.sigma, mode)?;
            json!({"coefficients": c, "norm": norm})
        }
    };
    ctx.write_json(&out)?;
    Ok(Status::Pass)
}

fn cmd_norms(ctx: &Ctx, input: &InputArgs, sigma: &str, kinds: &str) -> anyhow::Result<Status> {
    let f = load_function(ctx, input)?;
    let level = ctx.level(f.level());
    let sigmas = parse_sigmas(sigma)?;
    let kinds: Vec<NormKind> = parse_list(kinds)?;
    let mut reports = Vec::new();
    for &kind in &kinds {
        for &s in &sigmas {
            reports.push(besov_norm(&ctx.fr, &f, s, level, kind)?);
        }
    }
    ctx.report(&ReportData::Norms(reports), Format::Csv)?;
    Ok(Status::Pass)
}

struct EquivalenceOpts {
    kinds: String,
    sigma: String,
    family: usize,
    sigma_star: f64,
    eigen: usize,
    thresholds: Thresholds,
}

fn cmd_equivalence(ctx: &Ctx, o: EquivalenceOpts) -> anyhow::Result<Status> {
    let kinds: Vec<NormKind> = parse_list(&o.kinds)?;
    if kinds.len() != 2 {
        return Err(Error::InvalidArgument("--kinds needs exactly two norms".into()).into());
    }
    let sigmas = parse_sigmas(&o.sigma)?;
    let m = ctx.level(6);
    let mut family: Vec<TestFunctionRecipe> = (0..o.family as u64)
        .map(|i| {
            let kind = RecipeKind::RandomHaar { sigma_star: o.sigma_star, layers: None, cell: false };
            TestFunctionRecipe::new(kind, m, ctx.seed.wrapping_add(i))
        })
        .collect();
    family.extend((1..=o.eigen).map(|i| {
        TestFunctionRecipe::new(RecipeKind::Eigenfunction { index: i }, m, ctx.seed.wrapping_add(1000 + i as u64))
    }));
    let res = equivalence_experiment(&ctx.fr, (kinds[0], kinds[1]), &sigmas, &family, m, o.thresholds, ctx.exec)?;
    let pass = res.pass;
    for (s, sigma) in res.sigmas.iter().enumerate() {
        eprintln!(
            "({},{}) sigma={sigma}: band {:.3}, instability {:.2}%",
            kinds[0],
            kinds[1],
            res.band[s],
            100.0 * res.instability[s]
        );
    }
    ctx.report(&ReportData::Equivalence(vec![res]), Format::Json)?;
    Ok(if pass { Status::Pass } else { Status::Fail })
}

fn cmd_probe(ctx: &Ctx, kind: &str, recipe: &str, sigma: &str, expect: Option<f64>, tol: f64) -> anyhow::Result<Status> {
    let kind: NormKind = kind.parse()?;
    let recipe = parse_recipe(recipe)?;
    let sigmas = parse_sigmas(sigma)?;
    let m = ctx.level(6);
    let res = match divergence_probe(&ctx.fr, kind, &recipe, &sigmas, m, ctx.exec) {
        Ok(r) => r,
        Err(Error::NoTransition(msg)) => {
            eprintln!("no transition inside the grid: {msg}");
            return Ok(Status::Fail);
        }
        Err(e) => return Err(e.into()),
    };
    eprintln!("{} {}: transition at {:.4} in {:?}", kind, res.label, res.threshold, res.bracket);
    let pass = expect.is_none_or(|t| (res.threshold - t).abs() <= tol);
    ctx.report(&ReportData::Probes(vec![res]), Format::Json)?;
    Ok(if pass { Status::Pass } else { Status::Fail })
}

fn cmd_report(ctx: &Ctx, input: &Path) -> anyhow::Result<Status> {
    let text = std::fs::read_to_string(input).map_err(|source| Error::Io { path: input.into(), source })?;
    let data: ReportData = serde_json::from_str(&text).map_err(Error::from)?;
    ctx.report(&data, Format::Csv)?;
    Ok(Status::Pass)
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let spec = FractalSpec::load(&cli.spec)?;
    let ctx = Ctx {
        fr: Fractal::new(spec)?,
        level: cli.level,
        seed: cli.seed,
        out: cli.out,
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
    };
    match cli.command {
        Command::Spec => cmd_spec(&ctx),
        Command::Dims => cmd_dims(&ctx),
        Command::Graph { kind } => cmd_graph(&ctx, kind),
        Command::Resistance { pairs } => cmd_resistance(&ctx, &pairs),
        Command::Spectrum { bc, count } => cmd_spectrum(&ctx, &bc, count),
        Command::Weyl { tolerance } => cmd_weyl(&ctx, tolerance),
        Command::Decompose { input, kind, sigma, working, k, lenient } => {
            cmd_decompose(&ctx, &input, DecomposeOpts { kind, sigma, working, k, lenient })
        }
        Command::Norms { input, sigma, kinds } => cmd_norms(&ctx, &input, &sigma, &kinds),
        Command::Equivalence { kinds, sigma, family, sigma_star, eigen, band, instability } => cmd_equivalence(
            &ctx,
            EquivalenceOpts {
                kinds,
                sigma,
                family,
                sigma_star,
                eigen,
                thresholds: Thresholds { band, instability, ..Thresholds::default() },
            },
        ),
        Command::Probe { kind, recipe, sigma, expect, tolerance } => {
            cmd_probe(&ctx, &kind, &recipe, &sigma, expect, tolerance)
        }
        Command::Report { input } => cmd_report(&ctx, &input),
    }
}

/// Usage errors exit with 2, computational failures with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidArgument(_)
            | Error::Schema(_)
            | Error::Invariant { .. }
            | Error::Io { .. }
            | Error::Json(_)
            | Error::OutOfWindow { .. }
            | Error::CriticalOrder(_),
        ) => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            match e.downcast_ref::<Error>() {
                Some(inner) => eprintln!("error: {inner}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
