//! `aes`: named constructions, heuristic sweeps and certified SDP bounds.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aes_core::aesbound::{self, BoundOutcome, RelaxationConfig, SolveMode};
use aes_core::heuristic::{self, Measure, MinimizeOptions, SweepPoint};
use aes_core::io::{self, Grid, StateInput, SweepRecord};
use aes_core::linalg::{self, CMatrix};
use aes_core::qstate::{self, Bipartition, PureState};
use aes_core::sdpcore::{self, ExportOptions, SdpSolution, SizeBudget, SolverOptions};
use aes_core::sets::{self, FamilyKind, FamilyParams, SetSpec, StateSet};
use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "aes", version, about = "Absolutely entangled sets: constructions, upper bounds and certified lower bounds")]
struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, env = "AES_JOBS", global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Negativity of one state, or of every state in a set.
    Negativity(StateArgs),
    /// Entanglement entropy of a pure state, or the entropy bound K f(N/K).
    Entropy(EntropyArgs),
    /// Write a state set as JSON.
    Construct(ConstructArgs),
    /// Unitary that makes a few pure states product.
    Productize(ProductizeArgs),
    /// The separable-basis construction for the four-state family.
    Appb(AppbArgs),
    /// Heuristic minimization over a parameter or noise grid, as CSV.
    Sweep(SweepArgs),
    /// Heuristic minimization of the summed entanglement of a set.
    Minimize(MinimizeArgs),
    /// Moment-relaxation lower bound on the absolute set negativity.
    Bound(BoundArgs),
    /// Validate an SDP solution against an SDPA problem.
    CheckCert(CheckCertArgs),
    /// Re-export an SDPA file and compare it with the input.
    SdpaRoundtrip(RoundtripArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StateArgs {
    /// `bell`, `product`, or a JSON file with an amplitude vector or density matrix.
    #[arg(long, conflicts_with = "set", required_unless_present = "set")]
    state: Option<String>,
    /// Local dimensions of a state read from a file.
    #[arg(long, default_value = "2x2", value_parser = parse_dims)]
    dims: Bipartition,
    /// A built-in set label or a state set JSON file.
    #[arg(long)]
    set: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// `bell`, `product`, or a JSON file with an amplitude vector.
    #[arg(long, required_unless_present = "negativity", conflicts_with = "negativity")]
    state: Option<String>,
    #[arg(long, default_value = "2x2", value_parser = parse_dims)]
    dims: Bipartition,
    /// Lower bound N on the summed negativity.
    #[arg(long)]
    negativity: Option<f64>,
    /// Number of states K in the set.
    #[arg(long, default_value_t = 1, requires = "negativity")]
    states: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    /// A built-in set label or a state set JSON file.
    #[arg(long)]
    set: String,
    /// Mix every state with white noise at this visibility.
    #[arg(long)]
    noise: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ProductizeArgs {
    /// A built-in set label or a state set JSON file with pure states.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    set: Option<String>,
    /// Productize this many seeded random pure states instead.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value = "2x2", value_parser = parse_dims)]
    dims: Bipartition,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct AppbArgs {
    /// The free coefficient c21.
    #[arg(long)]
    c21: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Clone, Copy)]
struct MinOpts {
    #[arg(long, value_enum, default_value_t = MeasureArg::Negativity)]
    measure: MeasureArg,
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Skip projecting nearly unentangled states onto the unentangled set.
    #[arg(long)]
    no_polish: bool,
}

impl MinOpts {
    fn options(&self) -> MinimizeOptions {
        MinimizeOptions {
            starts: self.starts,
            max_iter: self.max_iter,
            seed: self.seed,
            polish: !self.no_polish,
            ..MinimizeOptions::default()
        }
    }

    fn measure(&self) -> Measure {
        match self.measure {
            MeasureArg::Negativity => Measure::Negativity,
            MeasureArg::Entropy => Measure::Entropy,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MeasureArg {
    Negativity,
    Entropy,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum SweepParam {
    /// The amplitude parameter of the family.
    C,
    /// White-noise visibility.
    V,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// A built-in set label; the swept parameter may be left out.
    #[arg(long)]
    set: String,
    #[arg(long, value_enum, requires_all = ["from", "to", "steps"])]
    param: Option<SweepParam>,
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Visibility grid `from:to:steps`, applied to the set as white noise.
    #[arg(long, conflicts_with = "param", required_unless_present = "param")]
    noise_grid: Option<Grid>,
    #[command(flatten)]
    opts: MinOpts,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    /// A built-in set label or a state set JSON file.
    #[arg(long)]
    set: String,
    #[command(flatten)]
    opts: MinOpts,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Mode {
    Internal,
    Export,
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// A built-in set label or a state set JSON file.
    #[arg(long)]
    set: String,
    /// `default`, `reduced`, or a JSON relaxation config file.
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long, value_enum, default_value_t = Mode::Internal)]
    mode: Mode,
    /// Report file, or for export the `.dat-s` path or a directory.
    #[arg(long, required_if_eq("mode", "export"))]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Largest block solved internally.
    #[arg(long)]
    max_block: Option<usize>,
    /// Most block variables solved internally.
    #[arg(long)]
    max_vars: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckCertArgs {
    /// SDPA problem file.
    #[arg(long)]
    problem: PathBuf,
    /// Solution JSON with `y`, values, status and optionally `x`.
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct RoundtripArgs {
    /// SDPA problem file.
    #[arg(long)]
    input: PathBuf,
    /// Write the re-exported problem here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An invalid combination of otherwise well-formed arguments.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_dims(s: &str) -> Result<Bipartition, String> {
    let (a, b) = s.split_once('x').ok_or_else(|| format!("`{s}` is not <d1>x<d2>"))?;
    let d1: usize = a.parse().map_err(|_| format!("bad dimension `{a}`"))?;
    let d2: usize = b.parse().map_err(|_| format!("bad dimension `{b}`"))?;
    if d1 > 64 || d2 > 64 {
        return Err("local dimensions above 64 are not supported".into());
    }
    Bipartition::new(d1, d2).map_err(|e| e.to_string())
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, v: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(out, &s)
}

/// A scalar for humans: rounded to 15 significant digits, shortest form.
fn scalar(v: f64) -> String {
    let rounded: f64 = format!("{v:.14e}").parse().unwrap_or(v);
    format!("{}\n", rounded + 0.0)
}

fn looks_like_file(s: &str) -> bool {
    s.ends_with(".json") || Path::new(s).is_file()
}

fn load_set(s: &str) -> anyhow::Result<StateSet> {
    if looks_like_file(s) {
        return io::state_set_from_json(&read(Path::new(s))?).with_context(|| format!("parsing {s}"));
    }
    let spec: SetSpec = s.parse().map_err(|e| usage(format!("{e}")))?;
    Ok(spec.build()?)
}

fn load_state(s: &str, bp: Bipartition) -> anyhow::Result<(StateInput, Bipartition)> {
    let h = 0.5f64.sqrt();
    match s {
        "bell" => Ok((StateInput::Pure(PureState::from_real(&[h, 0.0, 0.0, h])?), Bipartition::qubits())),
        "product" => Ok((StateInput::Pure(PureState::basis(4, 0)), Bipartition::qubits())),
        _ if looks_like_file(s) => Ok((io::state_from_json(&read(Path::new(s))?, bp).with_context(|| format!("parsing {s}"))?, bp)),
        _ => Err(usage(format!("unknown state `{s}` (expected bell, product or a JSON file)"))),
    }
}

fn negativity(a: &StateArgs) -> anyhow::Result<()> {
    let out = a.output.out.as_deref();
    if let Some(s) = &a.state {
        let (st, bp) = load_state(s, a.dims)?;
        let n = match &st {
            StateInput::Pure(p) => qstate::pure_negativity(p, bp)?,
            StateInput::Mixed(r) => qstate::negativity(r.matrix(), bp)?,
        };
        return emit(out, &scalar(n));
    }
    let set = load_set(a.set.as_deref().expect("clap requires state or set"))?;
    let per_state = set
        .density_matrices()
        .iter()
        .map(|r| qstate::negativity(r.matrix(), set.bipartition()))
        .collect::<aes_core::Result<Vec<_>>>()?;
    let total: f64 = per_state.iter().sum();
    emit_json(out, &json!({ "set": set.label(), "total": total, "per_state": per_state }))
}

fn entropy(a: &EntropyArgs) -> anyhow::Result<()> {
    let out = a.output.out.as_deref();
    if let Some(n) = a.negativity {
        return emit(out, &scalar(aesbound::entropy_lower_bound(n, a.states)?));
    }
    let (st, bp) = load_state(a.state.as_deref().expect("clap requires state or negativity"), a.dims)?;
    let StateInput::Pure(p) = st else {
        return Err(usage("entanglement entropy needs a pure state"));
    };
    emit(out, &scalar(qstate::entropy_of_entanglement(&p, bp)?))
}

fn construct(a: &ConstructArgs) -> anyhow::Result<()> {
    let mut set = load_set(&a.set)?;
    if let Some(v) = a.noise {
        set = sets::add_white_noise(&set, v)?;
    }
    let mut s = io::state_set_to_json(&set);
    s.push('\n');
    emit(a.output.out.as_deref(), &s)
}

fn product_report(states: &[PureState], bp: Bipartition, u: &CMatrix) -> anyhow::Result<serde_json::Value> {
    let residuals = states
        .iter()
        .map(|s| qstate::product_residual(&s.transformed(u)?, bp))
        .collect::<aes_core::Result<Vec<_>>>()?;
    Ok(json!({
        "unitary": io::matrix_to_json(u),
        "unitarity_defect": linalg::unitarity_defect(u),
        "residuals": residuals,
    }))
}

fn productize(a: &ProductizeArgs) -> anyhow::Result<()> {
    let (states, bp) = match (&a.set, a.random) {
        (Some(s), _) => {
            let set = load_set(s)?;
            let states = set.pure_states().ok_or_else(|| usage("productize needs pure states"))?.to_vec();
            (states, set.bipartition())
        }
        (None, Some(n)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let states = (0..n)
                .map(|_| PureState::new(linalg::random_state(a.dims.dim(), &mut rng)))
                .collect::<aes_core::Result<Vec<_>>>()?;
            (states, a.dims)
        }
        (None, None) => unreachable!("clap requires set or random"),
    };
    let u = sets::productizing_basis(&states, bp)?;
    emit_json(a.output.out.as_deref(), &product_report(&states, bp, &u)?)
}

fn appb(a: &AppbArgs) -> anyhow::Result<()> {
    let coeffs = sets::appb_coefficients(a.c21)?;
    let (set, u) = sets::separability_unitary_appb(a.c21)?;
    let states = set.pure_states().expect("pure family");
    let mut v = product_report(states, set.bipartition(), &u)?;
    v["c21"] = json!(a.c21);
    v["c"] = json!(coeffs.c);
    v["b4_max"] = json!(coeffs.b4_max);
    emit_json(a.output.out.as_deref(), &v)
}

fn family_of(spec: SetSpec) -> anyhow::Result<(FamilyKind, Bipartition, Option<f64>, usize)> {
    Ok(match spec {
        SetSpec::OneParam { bp, c } => (FamilyKind::OneParam, bp, c, bp.d1() + bp.d2()),
        SetSpec::Set2 => (FamilyKind::CandidateMax, Bipartition::qubits(), None, 4),
        SetSpec::AppB { c21 } => (FamilyKind::AppendixB, Bipartition::qubits(), c21, 4),
        SetSpec::Warmup => return Err(usage("the warmup set has no parameter to sweep")),
    })
}

fn sweep_points(a: &SweepArgs, kind: FamilyKind, bp: Bipartition, c: Option<f64>) -> anyhow::Result<Vec<SweepPoint>> {
    let (param, grid) = match (a.param, a.noise_grid) {
        (_, Some(g)) => (SweepParam::V, g),
        (Some(p), None) => {
            let (Some(from), Some(to), Some(steps)) = (a.from, a.to, a.steps) else {
                return Err(usage("--param needs --from, --to and --steps"));
            };
            (p, Grid::new(from, to, steps).map_err(|e| usage(e.to_string()))?)
        }
        (None, None) => return Err(usage("give --param with a range, or --noise-grid")),
    };
    if param == SweepParam::C && kind == FamilyKind::CandidateMax {
        return Err(usage(format!("`{}` has no amplitude parameter", a.set)));
    }
    Ok(grid
        .points()
        .into_iter()
        .map(|x| {
            let family = match param {
                SweepParam::C => FamilyParams { kind, bp, c: Some(x), v: 1.0 },
                SweepParam::V => FamilyParams { kind, bp, c, v: x },
            };
            SweepPoint { param: x, family }
        })
        .collect())
}

fn write_records(records: &[SweepRecord], states: usize, format: Format, out: Option<&Path>) -> anyhow::Result<()> {
    match format {
        Format::Csv => emit(out, &io::sweep_table(records, states)?.to_csv_string()),
        Format::Json => {
            let rows: Vec<_> = records
                .iter()
                .map(|r| {
                    json!({
                        "param": r.param,
                        "value": r.value.is_finite().then_some(r.value),
                        "converged": r.converged,
                        "per_state": r.per_state,
                        "starts": r.starts,
                        "seed": r.seed,
                    })
                })
                .collect();
            emit_json(out, &rows)
        }
    }
}

fn sweep(a: &SweepArgs) -> anyhow::Result<()> {
    let spec: SetSpec = a.set.parse().map_err(|e| usage(format!("{e}")))?;
    let (kind, bp, c, states) = family_of(spec)?;
    let points = sweep_points(a, kind, bp, c)?;
    let opts = a.opts.options();
    eprintln!("sweep {}: {} points, {} starts, seed {}", a.set, points.len(), opts.starts, opts.seed);
    let rows = heuristic::sweep(&points, a.opts.measure(), &opts)?;
    for r in &rows {
        if let Err(e) = &r.result {
            eprintln!("warning: point {} failed: {e}", r.param);
        }
    }
    let records: Vec<SweepRecord> = rows.iter().map(|r| SweepRecord::from_row(r, states, opts.seed)).collect();
    write_records(&records, states, a.format, a.output.out.as_deref())
}

fn minimize(a: &MinimizeArgs) -> anyhow::Result<()> {
    let set = load_set(&a.set)?;
    let opts = a.opts.options();
    eprintln!("minimize {}: {} starts, seed {}", set.label(), opts.starts, opts.seed);
    let r = heuristic::minimize_set_entanglement(&set, a.opts.measure(), &opts)?;
    let out = a.output.out.as_deref();
    match a.format {
        Format::Csv => {
            let row = heuristic::SweepRow { param: 0.0, result: Ok(r) };
            let rec = SweepRecord::from_row(&row, set.len(), opts.seed);
            emit(out, &io::sweep_table(&[rec], set.len())?.to_csv_string())
        }
        Format::Json => {
            let u = heuristic::unitary_from_params(&r.theta_opt, set.dim())?;
            emit_json(
                out,
                &json!({
                    "set": set.label(),
                    "measure": a.opts.measure(),
                    "seed": opts.seed,
                    "value": r.value,
                    "per_state": r.per_state,
                    "starts": r.starts,
                    "converged": r.converged,
                    "theta": r.theta_opt,
                    "unitary": io::matrix_to_json(&u),
                }),
            )
        }
    }
}

fn relaxation_config(s: &str) -> anyhow::Result<RelaxationConfig> {
    match s {
        "default" => Ok(RelaxationConfig::default()),
        "reduced" => Ok(RelaxationConfig::reduced()),
        _ if looks_like_file(s) => Ok(serde_json::from_str(&read(Path::new(s))?).with_context(|| format!("parsing {s}"))?),
        _ => Err(usage(format!("unknown config `{s}` (expected default, reduced or a JSON file)"))),
    }
}

fn bound(a: &BoundArgs) -> anyhow::Result<()> {
    let set = load_set(&a.set)?;
    let cfg = relaxation_config(&a.config)?;
    let mode = match a.mode {
        Mode::Internal => SolveMode::Internal,
        Mode::Export => SolveMode::Export(a.out.clone().expect("clap requires --out for export")),
    };
    let mut budget = SizeBudget::default();
    budget.max_block = a.max_block.unwrap_or(budget.max_block);
    budget.max_vars = a.max_vars.unwrap_or(budget.max_vars);
    let opts = SolverOptions {
        tol: a.tol,
        max_iter: a.max_iter,
    };
    eprintln!("bound {}: building relaxation", set.label());
    let outcome = aesbound::lower_bound_negativity_with(&set, &cfg, &mode, &budget, &opts).map_err(|e| match e {
        aes_core::Error::BudgetExceeded(m) => anyhow!("{m}; rerun with --mode export to solve externally"),
        e => e.into(),
    })?;
    match outcome {
        BoundOutcome::Solved(r) => {
            let entropy = aesbound::entropy_lower_bound(r.bound, set.len()).ok();
            emit_json(
                a.out.as_deref(),
                &json!({ "set": set.label(), "config": cfg, "report": r, "entropy_lower_bound": entropy }),
            )?;
            if !r.certificate.pass {
                bail!("the certificate check failed");
            }
            Ok(())
        }
        BoundOutcome::Exported { sdpa, sidecar } => {
            eprintln!("wrote {} and {}", sdpa.display(), sidecar.display());
            emit_json(None, &json!({ "sdpa": sdpa, "sidecar": sidecar }))
        }
    }
}

fn check_cert(a: &CheckCertArgs) -> anyhow::Result<()> {
    let p = sdpcore::import_sdpa(&read(&a.problem)?).with_context(|| format!("parsing {}", a.problem.display()))?;
    let sol: SdpSolution = serde_json::from_str(&read(&a.solution)?).with_context(|| format!("parsing {}", a.solution.display()))?;
    let r = aesbound::bound_from_solution(&p, &sol)?;
    emit_json(a.output.out.as_deref(), &r)?;
    if !r.certificate.pass {
        bail!("the certificate check failed");
    }
    Ok(())
}

fn sdpa_roundtrip(a: &RoundtripArgs) -> anyhow::Result<()> {
    let text = read(&a.input)?;
    let p = sdpcore::import_sdpa(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    let again = sdpcore::export_sdpa(&p, &ExportOptions::default());
    if let Some(out) = &a.out {
        std::fs::write(out, &again).with_context(|| format!("writing {}", out.display()))?;
    }
    if again != text {
        let line = text.lines().zip(again.lines()).position(|(x, y)| x != y).map_or(text.lines().count().min(again.lines().count()), |i| i);
        bail!("re-export differs from the input at line {}", line + 1);
    }
    println!("identical");
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Negativity(a) => negativity(a),
        Command::Entropy(a) => entropy(a),
        Command::Construct(a) => construct(a),
        Command::Productize(a) => productize(a),
        Command::Appb(a) => appb(a),
        Command::Sweep(a) => sweep(a),
        Command::Minimize(a) => minimize(a),
        Command::Bound(a) => bound(a),
        Command::CheckCert(a) => check_cert(a),
        Command::SdpaRoundtrip(a) => sdpa_roundtrip(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}");
            eprintln!("run `aes --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
