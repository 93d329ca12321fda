use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use probecheck::expr::SymbolTable;
use probecheck::gadgets::{self, gadget_from_parts, Fixture};
use probecheck::manager::{
    self, probe_positions, verify_order, DupletMode, Granularity, LeakReport, LeakageModel,
    RunOptions,
};
use probecheck::netlist::Circuit;
use probecheck::sim::Stimuli;
use probecheck::verify::{ni, NiError, Strategy, Verdict, DEFAULT_ENUM_LIMIT};

/// Like `println!`, but a closed stdout (e.g. piped into `head`) is ignored
/// so the verdict still decides the exit code.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const EXIT_CLEAN: u8 = 0;
const EXIT_FINDINGS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SIM: u8 = 3;

#[derive(Parser)]
#[command(name = "probecheck", version, about = "Probing-model leakage verification of gate-level netlists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and check every probe under a (g,t) model.
    Verify(VerifyArgs),
    /// Check a masked gadget for d-non-interference.
    Ni(GadgetArgs),
    /// Check a masked gadget for d-strong-non-interference.
    Sni(GadgetArgs),
    /// Check every d-uplet of probe positions.
    Order(OrderArgs),
    /// Write the built-in fixtures as netlist, labels and stimuli files.
    GenFixtures(GenArgs),
}

#[derive(Args)]
struct Source {
    #[arg(long, requires_all = ["labels", "stimuli"], conflicts_with = "fixture")]
    netlist: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    stimuli: Option<PathBuf>,
    /// A built-in fixture (fig5, fig6, fig7, dom_and_d<k>, isw_and_d<k>).
    #[arg(long)]
    fixture: Option<String>,
}

/// `g,t` with each of `g` and `t` in {0,1}, or the `rr1sw` preset.
#[derive(Clone, Copy, Debug)]
enum ModelPreset {
    Pair(bool, bool),
    Rr1sw,
}

impl FromStr for ModelPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("rr1sw") {
            return Ok(ModelPreset::Rr1sw);
        }
        let bit = |p: &str| match p.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(format!("expected `g,t` with 0/1 values or `rr1sw`, got `{s}`")),
        };
        match s.split_once(',') {
            Some((g, t)) => Ok(ModelPreset::Pair(bit(g)?, bit(t)?)),
            None => Err(format!("expected `g,t` or `rr1sw`, got `{s}`")),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Bit,
    Sw,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, conflicts_with_all = ["glitches", "transitions"])]
    model: Option<ModelPreset>,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    glitches: bool,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    transitions: bool,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    stability: Option<bool>,
    #[arg(long, value_enum)]
    granularity: Option<GranularityArg>,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    overapprox: Option<bool>,
    /// Largest number of symbolic bits the enumeration prover accepts.
    #[arg(long, default_value_t = DEFAULT_ENUM_LIMIT)]
    enum_limit: u32,
}

impl ModelArgs {
    fn model(&self) -> LeakageModel {
        let mut m = match self.model {
            Some(ModelPreset::Rr1sw) => LeakageModel::rr1sw(),
            Some(ModelPreset::Pair(g, t)) => LeakageModel::new(g, t),
            None => LeakageModel::new(self.glitches, self.transitions),
        };
        if let Some(s) = self.stability {
            m.use_stability = s;
        }
        if let Some(g) = self.granularity {
            m.granularity = match g {
                GranularityArg::Bit => Granularity::Bit,
                GranularityArg::Sw => Granularity::SupportWise,
            };
        }
        if let Some(o) = self.overapprox {
            m.overapprox = o;
        }
        m
    }

    fn strategy(&self) -> Strategy {
        Strategy {
            enum_limit: self.enum_limit,
            ..Strategy::default()
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    model: ModelArgs,
    /// Probing order; only 1 is checked per wire, use `order` for d > 1.
    #[arg(long, default_value_t = 1)]
    order: u32,
    #[arg(long)]
    stop_on_first_leak: bool,
    #[arg(long)]
    no_cache: bool,
    /// Check every wire even where the model allows fewer.
    #[arg(long)]
    all_wires: bool,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct GadgetArgs {
    #[command(flatten)]
    source: Source,
    /// Number of probes; defaults to the gadget's masking order.
    #[arg(long)]
    order: Option<u32>,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    glitches: bool,
    #[arg(long, default_value_t = DEFAULT_ENUM_LIMIT)]
    enum_limit: u32,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Spatial,
    Temporal,
    Mixed,
}

#[derive(Args)]
struct OrderArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    order: usize,
    #[arg(long, value_enum, default_value = "spatial")]
    mode: ModeArg,
    /// Refuse to run when more d-uplets than this would be checked.
    #[arg(long, default_value_t = 10_000_000)]
    cap: u128,
    #[arg(long)]
    stop_on_first_leak: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "fixtures")]
    out: PathBuf,
    /// Only these fixtures (repeatable); all built-ins by default.
    #[arg(long)]
    fixture: Vec<String>,
}

enum Failure {
    Usage(String),
    Sim(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Sim(_) => EXIT_SIM,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Sim(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn from_manager(e: manager::ManagerError) -> Failure {
    match e {
        manager::ManagerError::Sim(e) => Failure::Sim(e.to_string()),
        other => usage(other),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load(src: &Source) -> Result<Fixture, Failure> {
    if let Some(name) = &src.fixture {
        return gadgets::fixture(name).ok_or_else(|| usage(format!("unknown fixture `{name}`")));
    }
    let (Some(n), Some(l), Some(s)) = (&src.netlist, &src.labels, &src.stimuli) else {
        return Err(usage("give --fixture or all of --netlist, --labels, --stimuli"));
    };
    let circuit = Circuit::parse(&read(n)?).map_err(|e| usage(format!("{}: {e}", n.display())))?;
    let labels =
        SymbolTable::from_json(&read(l)?).map_err(|e| usage(format!("{}: {e}", l.display())))?;
    let stimuli = Stimuli::parse(&read(s)?, &labels)
        .map_err(|e| usage(format!("{}: {e}", s.display())))?;
    let name = n
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("netlist")
        .to_string();
    Ok(Fixture {
        name,
        circuit,
        labels,
        stimuli,
    })
}

fn write_report(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => Ok(()),
    }
}

fn model_label(m: &LeakageModel) -> String {
    let mut s = format!(
        "({},{}) {}",
        u8::from(m.glitches),
        u8::from(m.transitions),
        match m.granularity {
            Granularity::Bit => "bit",
            Granularity::SupportWise => "sw",
        }
    );
    if m.use_stability {
        s.push_str(" +stability");
    }
    if m.overapprox {
        s.push_str(" +overapprox");
    }
    s
}

fn print_summary(name: &str, model: &LeakageModel, r: &LeakReport) {
    let s = &r.summary;
    out!("{name}: model {}", model_label(model));
    out!(
        "cycles {}  leaking cycles {}  expr_to_verify {}  verified {}  cache hits {}  trivial {}",
        s.cycles, s.leaking_cycles, s.expr_to_verify, s.verified_expr, s.cache_hits, s.trivial_skipped
    );
    for e in r.findings() {
        let src = e
            .src
            .as_ref()
            .map(|l| format!(" ({}:{})", l.file, l.line))
            .unwrap_or_default();
        out!("  cycle {} {}{src}: {}", e.cycle, e.wire, e.verdict);
    }
    if r.stopped_early {
        out!("stopped at the first leaking cycle");
    }
    if !r.warnings.is_empty() {
        out!("{} simulation warnings", r.warnings.len());
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<u8, Failure> {
    let f = load(&a.source)?;
    let mut model = a.model.model();
    model.order = a.order;
    if a.order != 1 {
        return Err(usage("verify checks single probes; use `order` for d > 1"));
    }
    let options = RunOptions {
        strategy: a.model.strategy(),
        stop_on_first_leak: a.stop_on_first_leak,
        cache: !a.no_cache,
        jobs: a.jobs,
        all_wires: a.all_wires,
        ..RunOptions::default()
    };
    let report =
        manager::run(&f.circuit, &f.stimuli, &f.labels, &model, &options).map_err(from_manager)?;
    write_report(a.report.as_deref(), &report.to_jsonl())?;
    print_summary(&f.name, &model, &report);
    Ok(if report.has_findings() {
        EXIT_FINDINGS
    } else {
        EXIT_CLEAN
    })
}

fn cmd_gadget(a: &GadgetArgs, strong: bool) -> Result<u8, Failure> {
    let f = load(&a.source)?;
    let masking = f
        .labels
        .iter()
        .filter_map(|(_, i)| match &i.kind {
            probecheck::expr::SymbolKind::Share { index, .. } => Some(*index),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let d = a.order.unwrap_or(masking);
    let g = gadget_from_parts(f.circuit, f.labels, f.stimuli, masking);
    let verdict = match ni::check_with_limit(&g, d, a.glitches, strong, a.enum_limit) {
        Ok(v) => v,
        Err(NiError::Sim(e)) => return Err(Failure::Sim(e.to_string())),
        Err(NiError::Enum(e)) => Verdict::Inconclusive(e.to_string()),
        Err(e) => return Err(usage(e)),
    };
    let kind = if strong { "SNI" } else { "NI" };
    let mut line = json!({
        "gadget": f.name,
        "property": kind,
        "order": d,
        "glitches": a.glitches,
        "verdict": verdict.name(),
    });
    match &verdict {
        Verdict::Leaks(w) => line["witness"] = manager::witness_json(w),
        Verdict::Inconclusive(why) => line["reason"] = json!(why),
        Verdict::Secure => {}
    }
    write_report(a.report.as_deref(), &format!("{line}\n"))?;
    out!(
        "{}: {kind} order {d} glitches={}: {verdict}",
        f.name,
        if a.glitches { "on" } else { "off" }
    );
    if let Some(w) = verdict.witness() {
        out!("  probes: {}", w.probes.join(", "));
    }
    Ok(if verdict.is_secure() {
        EXIT_CLEAN
    } else {
        EXIT_FINDINGS
    })
}

fn cmd_order(a: &OrderArgs) -> Result<u8, Failure> {
    let f = load(&a.source)?;
    let model = a.model.model();
    let positions = probe_positions(&f.circuit, &f.stimuli, &model, &RunOptions::default())
        .map_err(from_manager)?;
    let mode = match a.mode {
        ModeArg::Spatial => DupletMode::Spatial,
        ModeArg::Temporal => DupletMode::Temporal,
        ModeArg::Mixed => DupletMode::Mixed,
    };
    let r = verify_order(
        &positions,
        &f.labels,
        a.order,
        mode,
        a.model.strategy(),
        a.cap,
        a.stop_on_first_leak,
    )
    .map_err(usage)?;
    let mut text = String::new();
    for (probes, v) in &r.findings {
        let mut line = json!({"probes": probes, "verdict": v.name()});
        if let Some(w) = v.witness() {
            line["witness"] = manager::witness_json(w);
        }
        text.push_str(&format!("{line}\n"));
    }
    let groups: Vec<_> = r
        .groups
        .iter()
        .map(|(g, p, n)| json!({"group": g, "positions": p, "duplets": n.to_string()}))
        .collect();
    text.push_str(&format!(
        "{}\n",
        json!({
            "order": r.order,
            "positions": positions.len(),
            "checked": r.checked.to_string(),
            "leaking": r.leaking.to_string(),
            "groups": groups,
            "verdict": r.verdict.name(),
        })
    ));
    write_report(a.report.as_deref(), &text)?;
    out!(
        "{}: model {} order {} over {} positions: {} d-uplets checked, {} leaking",
        f.name,
        model_label(&model),
        r.order,
        positions.len(),
        r.checked,
        r.leaking
    );
    for (probes, v) in &r.findings {
        out!("  {}: {v}", probes.join(" + "));
    }
    Ok(if r.verdict.is_secure() {
        EXIT_CLEAN
    } else {
        EXIT_FINDINGS
    })
}

fn cmd_gen(a: &GenArgs) -> Result<u8, Failure> {
    let fixtures = if a.fixture.is_empty() {
        gadgets::all_fixtures()
    } else {
        a.fixture
            .iter()
            .map(|n| gadgets::fixture(n).ok_or_else(|| usage(format!("unknown fixture `{n}`"))))
            .collect::<Result<_, _>>()?
    };
    fs::create_dir_all(&a.out).map_err(|e| usage(format!("{}: {e}", a.out.display())))?;
    for f in &fixtures {
        f.write_to(&a.out)
            .map_err(|e| usage(format!("{}: {e}", a.out.display())))?;
        out!("wrote {}", a.out.join(format!("{}.json", f.name)).display());
    }
    Ok(EXIT_CLEAN)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN });
        }
    };
    let outcome = match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Ni(a) => cmd_gadget(a, false),
        Command::Sni(a) => cmd_gadget(a, true),
        Command::Order(a) => cmd_order(a),
        Command::GenFixtures(a) => cmd_gen(a),
    };
    let _ = std::io::stdout().flush();
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("probecheck: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
