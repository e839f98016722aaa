//! Command-line surface for the phase-space transformation toolkit.
//!
//! Exit codes: 0 when every check passes, 1 when a verification fails,
//! 2 on usage or input errors. `--json` switches the output to a stable
//! `{command, pass, checks: [{label, residual}]}` document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nambu3::canonical::{
    classify, covariance_check, transport_hamiltonians, verify_new_hamiltonians, CanonicityKind,
    KCoords, PhaseMap,
};
use nambu3::decompose::{verify_equal, CTSequence};
use nambu3::dynamics::{integrate_flow, HamiltonPair};
use nambu3::expr::{parse, to_text_upper, Domain, Expr, Point};
use nambu3::genfun::{pfaffian_residual_x, verify_genfun, verify_time_part, GenFunPair};
use nambu3::lie::{cross_check, flow_map, lie_series, GeneratorPair};
use nambu3::registry;
use nambu3::report::CheckReport;
use nambu3::selftest::{self, Injection};

#[derive(Parser)]
#[command(
    name = "nambu3",
    version,
    about = "Canonical transformations in three-dimensional Nambu phase space",
    after_help = "Examples:\n  nambu3 classify --example scaling --param a=1 --param b=1 --param c=1\n  nambu3 lie \"(x2^2+x3^2)/2\" \"x1\" --eps 0.5 --order 20\n  nambu3 compose --example SC --verify\n  nambu3 selftest"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Emit a machine-readable report instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Equivalence tolerance override (default 1e-9).
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Sample count override (default 64).
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Sampling box override, e.g. "x1:0.5,2;x2:-1,1;t:0,1".
    #[arg(long, global = true)]
    domain: Option<String>,

    /// Parameter binding NAME=VALUE (repeatable).
    #[arg(long = "param", global = true, value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct MapInput {
    /// Map file (JSON: {"X1": ..., "X2": ..., "X3": ..., "inverse": ...}).
    #[arg(long, conflicts_with = "example")]
    map: Option<PathBuf>,

    /// Registry entry id (see `selftest` for the list).
    #[arg(long)]
    example: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a map as canonical / universally canonoid / neither.
    Classify(MapInput),

    /// Verify generating functions against a map.
    VerifyGf {
        #[command(flatten)]
        input: MapInput,
        /// Generating functions (JSON: {"F1": "...", "F2": "..."}).
        #[arg(long)]
        gf: Option<PathBuf>,
    },

    /// Transport the Hamiltonian pair of a time-independent map.
    Transport {
        #[command(flatten)]
        input: MapInput,
        /// Source Hamilton functions when no example is used.
        #[arg(long)]
        h1: Option<String>,
        #[arg(long)]
        h2: Option<String>,
    },

    /// Verify a candidate new Hamiltonian pair.
    VerifyK {
        #[command(flatten)]
        input: MapInput,
        #[arg(long)]
        h1: Option<String>,
        #[arg(long)]
        h2: Option<String>,
        /// Candidate pair, in the image coordinates unless --k-in-x.
        #[arg(long)]
        k1: Option<String>,
        #[arg(long)]
        k2: Option<String>,
        /// The candidate pair is written in the source coordinates.
        #[arg(long)]
        k_in_x: bool,
    },

    /// Compare the mapped source trajectory with the image trajectory.
    Covariance {
        #[command(flatten)]
        input: MapInput,
        #[arg(long)]
        h1: Option<String>,
        #[arg(long)]
        h2: Option<String>,
        #[arg(long)]
        k1: Option<String>,
        #[arg(long)]
        k2: Option<String>,
        /// Start point "x1,x2,x3".
        #[arg(long)]
        x0: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Maximum allowed pointwise deviation.
        #[arg(long, default_value_t = 1e-6)]
        deviation: f64,
    },

    /// Exponentiate a generator pair and cross-check series against flow.
    Lie {
        /// First generator function.
        g1: String,
        /// Second generator function.
        g2: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 12)]
        order: usize,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Print the truncated series expressions.
        #[arg(long)]
        print_series: bool,
    },

    /// Apply the numeric flow of a generator pair to points.
    Flow {
        g1: String,
        g2: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Start point "x1,x2,x3" (repeatable).
        #[arg(long, required = true)]
        x0: Vec<String>,
    },

    /// Compose a transformation sequence and optionally verify it.
    Compose {
        /// Sequence file (JSON array of steps, rightmost applied first).
        #[arg(long, conflicts_with = "example")]
        sequence: Option<PathBuf>,
        #[arg(long)]
        example: Option<String>,
        /// Interpret the sequence in procedural order (first entry first).
        #[arg(long)]
        leftmost_first: bool,
        /// Verify the composite against the target map.
        #[arg(long)]
        verify: bool,
        /// Target map file for --verify (defaults to the example target).
        #[arg(long)]
        target: Option<PathBuf>,
    },

    /// Integrate the Nambu–Hamilton flow and export the trajectory.
    Evolve {
        #[command(flatten)]
        input: MapInput,
        #[arg(long)]
        h1: Option<String>,
        #[arg(long)]
        h2: Option<String>,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Write CSV here (plus a .json drift sidecar) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Run every registry entry through every applicable verification.
    Selftest {
        /// Keep only checks whose entry id or label contains this.
        #[arg(long)]
        filter: Option<String>,
        /// Plant a deliberate defect: wrong-k or bad-scaling.
        #[arg(long)]
        inject: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_params(specs: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("--param expects NAME=VALUE, got `{spec}`"))?;
        let value: f64 = value
            .parse()
            .with_context(|| format!("parameter `{name}`"))?;
        out.insert(name.to_string(), value);
    }
    Ok(out)
}

fn apply_domain_spec(mut d: Domain, spec: &str) -> Result<Domain> {
    for part in spec.split(';').filter(|s| !s.is_empty()) {
        let (var, range) = part
            .split_once(':')
            .ok_or_else(|| anyhow!("--domain expects var:lo,hi parts, got `{part}`"))?;
        let (lo, hi) = range
            .split_once(',')
            .ok_or_else(|| anyhow!("--domain range `{range}` needs lo,hi"))?;
        let lo: f64 = lo.trim().parse().context("domain bound")?;
        let hi: f64 = hi.trim().parse().context("domain bound")?;
        d = match var.trim() {
            "x1" => d.with_x1(lo, hi),
            "x2" => d.with_x2(lo, hi),
            "x3" => d.with_x3(lo, hi),
            "t" => d.with_t(lo, hi),
            other => bail!("unknown domain variable `{other}`"),
        };
    }
    Ok(d)
}

/// Start from the entry/map domain, then apply the global overrides.
fn effective_domain(cli: &Cli, base: Option<Domain>) -> Result<Domain> {
    let mut d = base.unwrap_or_default();
    if let Some(spec) = &cli.domain {
        d = apply_domain_spec(d, spec)?;
    }
    if let Some(tol) = cli.tol {
        d = d.with_tol(tol);
    }
    if let Some(samples) = cli.samples {
        d = d.with_samples(samples);
    }
    d = d.with_params(parse_params(&cli.params)?);
    if !d.is_valid() {
        bail!("invalid sampling domain");
    }
    Ok(d)
}

fn parse_coords(spec: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("point `{spec}`"))?;
    if parts.len() != 3 {
        bail!("point `{spec}` needs exactly three coordinates");
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_entry(id: &str) -> Result<registry::ExampleEntry> {
    registry::find(id).ok_or_else(|| {
        anyhow!(
            "unknown example `{id}` (known: {})",
            registry::ids().join(", ")
        )
    })
}

struct Resolved {
    map: Option<PhaseMap>,
    entry: Option<registry::ExampleEntry>,
}

impl Resolved {
    fn require_map(&self) -> Result<&PhaseMap> {
        self.map.as_ref().ok_or_else(|| anyhow!("no map resolved"))
    }

    fn base_domain(&self) -> Option<Domain> {
        if let Some(entry) = &self.entry {
            return Some(entry.domain.clone());
        }
        self.map.as_ref().and_then(|m| m.domain.clone())
    }
}

fn resolve_map(input: &MapInput) -> Result<Resolved> {
    if let Some(id) = &input.example {
        let entry = load_entry(id)?;
        return Ok(Resolved {
            map: entry.map.clone(),
            entry: Some(entry),
        });
    }
    if let Some(path) = &input.map {
        let map = PhaseMap::from_json(&read_json(path)?)?;
        return Ok(Resolved {
            map: Some(map),
            entry: None,
        });
    }
    bail!("either --map FILE or --example ID is required")
}

fn expr_arg(text: &Option<String>, what: &str) -> Result<Expr> {
    let text = text
        .as_ref()
        .ok_or_else(|| anyhow!("missing --{what} expression"))?;
    parse(text).map_err(|e| anyhow!("--{what}: {e}"))
}

/// Uniform rendering: one line per identity plus the stable JSON form.
struct Output {
    command: &'static str,
    json: bool,
    info: Vec<String>,
    checks: Vec<(String, f64, bool)>,
}

impl Output {
    fn new(command: &'static str, json: bool) -> Output {
        Output {
            command,
            json,
            info: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn info(&mut self, line: impl Into<String>) {
        self.info.push(line.into());
    }

    fn add_report(&mut self, report: &CheckReport) {
        for c in &report.identities {
            self.checks.push((c.label.clone(), c.residual, c.pass));
        }
    }

    fn add_check(&mut self, label: impl Into<String>, residual: f64, pass: bool) {
        self.checks.push((label.into(), residual, pass));
    }

    fn pass(&self) -> bool {
        self.checks.iter().all(|(_, _, pass)| *pass)
    }

    fn finish(self) -> bool {
        self.finish_to(false)
    }

    /// Like [`Self::finish`], but human-readable output goes to stderr so
    /// stdout can carry data (CSV streaming).
    fn finish_data_mode(self) -> bool {
        self.finish_to(true)
    }

    fn finish_to(self, human_to_stderr: bool) -> bool {
        let pass = self.pass();
        if self.json {
            let checks: Vec<serde_json::Value> = self
                .checks
                .iter()
                .map(|(label, residual, ok)| {
                    serde_json::json!({"label": label, "residual": residual, "pass": ok})
                })
                .collect();
            let doc = serde_json::json!({
                "command": self.command,
                "pass": pass,
                "checks": checks,
                "info": self.info,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("report json"));
        } else {
            let emit = |line: String| {
                if human_to_stderr {
                    eprintln!("{line}");
                } else {
                    println!("{line}");
                }
            };
            for line in &self.info {
                emit(line.clone());
            }
            for (label, residual, ok) in &self.checks {
                let tag = if *ok { "PASS" } else { "FAIL" };
                emit(format!("{tag} {label} (residual {residual:.3e})"));
            }
            if !self.checks.is_empty() {
                emit(format!("overall: {}", if pass { "PASS" } else { "FAIL" }));
            }
        }
        pass
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Classify(input) => {
            let resolved = resolve_map(input)?;
            let map = resolved.require_map()?;
            let d = effective_domain(cli, resolved.base_domain())?;
            let verdict = classify(map, &d)?;
            let mut out = Output::new("classify", cli.json);
            let kind = match verdict.kind {
                CanonicityKind::Canonical => "canonical",
                CanonicityKind::CanonoidUniversal => "canonoid_universal",
                CanonicityKind::NotUniversal => "not_universal",
            };
            out.info(format!("verdict: {kind}"));
            out.info(format!("bracket: {}", verdict.bracket));
            if let Some(c) = verdict.constant {
                out.info(format!("constant: {c}"));
            }
            // classification is an answer, not a check; but when the entry
            // declares an expectation, report agreement
            if let Some(expected) = resolved.entry.as_ref().and_then(|e| e.expected) {
                if cli.params.is_empty() {
                    out.add_check(
                        format!("classification[{kind}]"),
                        0.0,
                        verdict.kind == expected,
                    );
                }
            }
            Ok(out.finish())
        }

        Command::VerifyGf { input, gf } => {
            let resolved = resolve_map(input)?;
            let map = resolved.require_map()?;
            let d = effective_domain(cli, resolved.base_domain())?;
            let gf = match (gf, &resolved.entry) {
                (Some(path), _) => GenFunPair::from_json(&read_json(path)?)?,
                (None, Some(entry)) => entry
                    .genfuns
                    .clone()
                    .ok_or_else(|| anyhow!("example has no generating functions"))?,
                (None, None) => bail!("--gf FILE is required with --map"),
            };
            let mut out = Output::new("verify-gf", cli.json);
            let mut report = verify_genfun(map, &gf, &d)?;
            report.merge(pfaffian_residual_x(map, &gf, &d)?);
            // the time-part identity needs both Hamiltonian pairs
            if let Some(entry) = &resolved.entry {
                if let (Some(pair), Some(k_source)) = (&entry.source_pair, &entry.k_source) {
                    report.merge(verify_time_part(map, &gf, pair, k_source, &d)?);
                }
            }
            out.add_report(&report);
            Ok(out.finish())
        }

        Command::Transport { input, h1, h2 } => {
            let resolved = resolve_map(input)?;
            let map = resolved.require_map()?;
            let d = effective_domain(cli, resolved.base_domain())?;
            let pair = match &resolved.entry {
                Some(entry) if h1.is_none() => entry
                    .source_pair
                    .clone()
                    .ok_or_else(|| anyhow!("example has no Hamiltonian pair"))?,
                _ => HamiltonPair::new(expr_arg(h1, "h1")?, expr_arg(h2, "h2")?, "cli"),
            };
            let k = transport_hamiltonians(map, &pair)?;
            let mut out = Output::new("transport", cli.json);
            out.info(format!("K1 = {}", to_text_upper(&k.h1)));
            out.info(format!("K2 = {}", to_text_upper(&k.h2)));
            if let Some(entry) = &resolved.entry {
                if let Some(target) = &entry.target_pair {
                    for (label, got, want) in
                        [("transport[K1]", &k.h1, &target.h1), ("transport[K2]", &k.h2, &target.h2)]
                    {
                        let r = nambu3::expr::equiv(got, want, &d)?;
                        out.add_check(label, r.max_residual, r.equivalent);
                    }
                }
            }
            Ok(out.finish())
        }

        Command::VerifyK {
            input,
            h1,
            h2,
            k1,
            k2,
            k_in_x,
        } => {
            let resolved = resolve_map(input)?;
            let map = resolved.require_map()?;
            let d = effective_domain(cli, resolved.base_domain())?;
            let (pair, k, coords) = match &resolved.entry {
                Some(entry) if k1.is_none() => {
                    let pair = entry
                        .source_pair
                        .clone()
                        .ok_or_else(|| anyhow!("example has no Hamiltonian pair"))?;
                    let k = entry
                        .target_pair
                        .clone()
                        .ok_or_else(|| anyhow!("example has no transformed pair"))?;
                    (pair, k, KCoords::Image)
                }
                _ => {
                    let pair = HamiltonPair::new(expr_arg(h1, "h1")?, expr_arg(h2, "h2")?, "cli");
                    let k = HamiltonPair::new(expr_arg(k1, "k1")?, expr_arg(k2, "k2")?, "cli-k");
                    let coords = if *k_in_x { KCoords::Source } else { KCoords::Image };
                    (pair, k, coords)
                }
            };
            let report = verify_new_hamiltonians(map, &pair, &k, coords, &d)?;
            let mut out = Output::new("verify-k", cli.json);
            out.add_report(&report);
            Ok(out.finish())
        }

        Command::Covariance {
            input,
            h1,
            h2,
            k1,
            k2,
            x0,
            t_end,
            h,
            deviation,
        } => {
            let resolved = resolve_map(input)?;
            let map = resolved.require_map()?;
            let d = effective_domain(cli, resolved.base_domain())?;
            let (pair, k) = match &resolved.entry {
                Some(entry) if k1.is_none() => (
                    entry
                        .source_pair
                        .clone()
                        .ok_or_else(|| anyhow!("example has no Hamiltonian pair"))?,
                    entry
                        .target_pair
                        .clone()
                        .ok_or_else(|| anyhow!("example has no transformed pair"))?,
                ),
                _ => (
                    HamiltonPair::new(expr_arg(h1, "h1")?, expr_arg(h2, "h2")?, "cli"),
                    HamiltonPair::new(expr_arg(k1, "k1")?, expr_arg(k2, "k2")?, "cli-k"),
                ),
            };
            let coords = match (x0, &resolved.entry) {
                (Some(spec), _) => parse_coords(spec)?,
                (None, Some(entry)) => entry
                    .flow_start
                    .as_ref()
                    .map(|p| p.coords())
                    .ok_or_else(|| anyhow!("example has no start point; pass --x0"))?,
                (None, None) => bail!("--x0 is required"),
            };
            let start = Point {
                x1: coords[0],
                x2: coords[1],
                x3: coords[2],
                t: d.t.0,
                params: d.params.clone(),
            };
            let report = covariance_check(map, &pair, &k, &start, *t_end, *h, *deviation)?;
            let mut out = Output::new("covariance", cli.json);
            out.add_report(&report);
            Ok(out.finish())
        }

        Command::Lie {
            g1,
            g2,
            eps,
            order,
            h,
            print_series,
        } => {
            let d = effective_domain(cli, None)?;
            let g = GeneratorPair::new(
                parse(g1).map_err(|e| anyhow!("g1: {e}"))?,
                parse(g2).map_err(|e| anyhow!("g2: {e}"))?,
            )?;
            let mut out = Output::new("lie", cli.json);
            let div = g.field().divergence_check(&d)?;
            out.add_report(&div);
            if *print_series {
                let series = lie_series(&g, *eps, *order)?;
                for (i, e) in series.series_exprs().iter().enumerate() {
                    out.info(format!("X{} = {}", i + 1, to_text_upper(e)));
                }
            }
            let report = cross_check(&g, *eps, *order, *h, &d)?;
            out.add_report(&report);
            Ok(out.finish())
        }

        Command::Flow { g1, g2, eps, h, x0 } => {
            let d = effective_domain(cli, None)?;
            let g = GeneratorPair::new(
                parse(g1).map_err(|e| anyhow!("g1: {e}"))?,
                parse(g2).map_err(|e| anyhow!("g2: {e}"))?,
            )?;
            let flow = flow_map(&g, *eps, *h)?;
            let mut out = Output::new("flow", cli.json);
            out.info("x1,x2,x3".to_string());
            for spec in x0 {
                let coords = parse_coords(spec)?;
                let start = Point {
                    x1: coords[0],
                    x2: coords[1],
                    x3: coords[2],
                    t: 0.0,
                    params: d.params.clone(),
                };
                let image = flow.apply(&start)?;
                out.info(format!("{},{},{}", image[0], image[1], image[2]));
            }
            Ok(out.finish())
        }

        Command::Compose {
            sequence,
            example,
            leftmost_first,
            verify,
            target,
        } => {
            let d_default = effective_domain(cli, None)?;
            let (seq, entry) = match (sequence, example) {
                (Some(path), _) => (
                    CTSequence::from_json(&read_json(path)?, *leftmost_first, &d_default)?,
                    None,
                ),
                (None, Some(id)) => {
                    let entry = load_entry(id)?;
                    let seq = entry
                        .sequence
                        .clone()
                        .ok_or_else(|| anyhow!("example `{id}` has no sequence"))?;
                    (seq, Some(entry))
                }
                (None, None) => bail!("either --sequence FILE or --example ID is required"),
            };
            let d = effective_domain(cli, entry.as_ref().map(|e| e.domain.clone()))?;
            let composite = seq.compose();
            let mut out = Output::new("compose", cli.json);
            for (i, c) in composite.components().iter().enumerate() {
                out.info(format!("X{} = {}", i + 1, c));
            }
            if *verify {
                let target_map = match (target, &entry) {
                    (Some(path), _) => PhaseMap::from_json(&read_json(path)?)?,
                    (None, Some(entry)) => entry
                        .sequence_target
                        .clone()
                        .ok_or_else(|| anyhow!("example has no composition target"))?,
                    (None, None) => bail!("--verify needs --target FILE or --example"),
                };
                let report = verify_equal(&composite, &target_map, &d)?;
                out.add_report(&report);
                for (k, partial) in seq.partial_composites().iter().enumerate() {
                    let r = nambu3::expr::equiv(&partial.bracket(), &Expr::one(), &d)?;
                    out.add_check(format!("partial_bracket[{k}]"), r.max_residual, r.equivalent);
                }
            }
            Ok(out.finish())
        }

        Command::Evolve {
            input,
            h1,
            h2,
            x0,
            t_end,
            h,
            out: out_path,
        } => {
            let (pair, base_domain) = if input.example.is_some() || input.map.is_some() {
                let resolved = resolve_map(input)?;
                match &resolved.entry {
                    Some(entry) => (
                        entry
                            .source_pair
                            .clone()
                            .ok_or_else(|| anyhow!("example has no Hamiltonian pair"))?,
                        resolved.base_domain(),
                    ),
                    None => bail!("evolve needs --example or --h1/--h2"),
                }
            } else {
                (
                    HamiltonPair::new(expr_arg(h1, "h1")?, expr_arg(h2, "h2")?, "cli"),
                    None,
                )
            };
            let d = effective_domain(cli, base_domain)?;
            let coords = match x0 {
                Some(spec) => parse_coords(spec)?,
                None => bail!("--x0 is required"),
            };
            let start = Point {
                x1: coords[0],
                x2: coords[1],
                x3: coords[2],
                t: d.t.0,
                params: d.params.clone(),
            };
            let traj = integrate_flow(&pair, &start, *t_end, *h)?;
            let mut out = Output::new("evolve", cli.json);
            let mut streamed = false;
            match out_path {
                Some(path) => {
                    std::fs::write(path, traj.to_csv())
                        .with_context(|| format!("writing {}", path.display()))?;
                    let sidecar = path.with_extension("json");
                    std::fs::write(
                        &sidecar,
                        serde_json::to_string_pretty(&traj.sidecar_json())?,
                    )
                    .with_context(|| format!("writing {}", sidecar.display()))?;
                    out.info(format!(
                        "wrote {} samples to {} (drift sidecar {})",
                        traj.samples.len(),
                        path.display(),
                        sidecar.display()
                    ));
                }
                None if !cli.json => {
                    // stream clean CSV; the report goes to stderr
                    print!("{}", traj.to_csv());
                    streamed = true;
                }
                None => out.info("pass --out FILE to write the trajectory CSV".to_string()),
            }
            if let Some(drift) = traj.drift.h1 {
                out.add_check("drift[H1]", drift, drift.is_finite());
            }
            if let Some(drift) = traj.drift.h2 {
                out.add_check("drift[H2]", drift, drift.is_finite());
            }
            out.add_check("finite_trajectory", 0.0, !traj.truncated);
            Ok(if streamed {
                out.finish_data_mode()
            } else {
                out.finish()
            })
        }

        Command::Selftest { filter, inject } => {
            let injection = match inject {
                Some(name) => Some(Injection::from_name(name).ok_or_else(|| {
                    anyhow!("unknown injection `{name}` (use wrong-k or bad-scaling)")
                })?),
                None => None,
            };
            let outcome = selftest::run(filter.as_deref(), injection)?;
            let mut out = Output::new("selftest", cli.json);
            for item in &outcome.items {
                for c in &item.report.identities {
                    out.add_check(
                        format!("{}: {}: {}", item.entry, item.check, c.label),
                        c.residual,
                        c.pass,
                    );
                }
            }
            out.info(format!(
                "{} checks across {} entries",
                out.checks.len(),
                registry::ids().len()
            ));
            Ok(out.finish())
        }
    }
}
