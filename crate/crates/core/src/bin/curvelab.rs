use clap::{Args, Parser, Subcommand};
use curvelab::experiment::{exit_code, load_config, replay, run, write_csv, write_report, Command};
use curvelab::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "curvelab", version, about = "Numerical experiments on averaging operators along curves")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decay of the Fourier transform of the arc-length measure along a ray.
    Decay(RunArgs),
    /// Root-size relations near the cone.
    Geometry(RunArgs),
    /// Reconstruction and support audit of the symbol decompositions.
    DecomposeAudit(RunArgs),
    /// Rescaling identity for cone tuples.
    Lorentz(RunArgs),
    /// Empirical decoupling constants for box, slab or plate families.
    Decouple(RunArgs),
    /// Norm of frequency-localised pieces of the averaging operator.
    OperatorProbe(RunArgs),
    /// Bump, Wolff and separation examples.
    Sharpness(RunArgs),
    /// Rerun a stored report and compare.
    Replay {
        dir: PathBuf,
        /// Rerun with another seed and compare estimates statistically.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-key override in TOML syntax, e.g. `--set decouple.levels=[1,3]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Moment curve dimension.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// `lo:hi` in log2 units.
    #[arg(long, value_name = "LO:HI")]
    lambda_range: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// bump, wolff or separation.
    #[arg(long)]
    example: Option<String>,
    /// Decoupling region family: frenet-box, slab or plate.
    #[arg(long)]
    family: Option<String>,
    /// Box order or tuple split for decoupling.
    #[arg(long)]
    d: Option<usize>,
    /// Decoupling scales `2^-lo..2^-hi` as `lo:hi`.
    #[arg(long, value_name = "LO:HI")]
    scales: Option<String>,
    /// Memory budget in bytes; overrides the config and CURVELAB_BUDGET_BYTES.
    #[arg(long)]
    budget: Option<u64>,
    /// Write records.jsonl and summary.json here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn config_err(field: &str, detail: impl Into<String>) -> Error {
    Error::Config { field: field.into(), detail: detail.into() }
}

fn overrides(cmd: Command, a: &RunArgs, text: &str) -> Result<Vec<(String, String)>, Error> {
    let section = cmd.section();
    let mut out = Vec::new();
    if let Some(n) = a.n {
        let has_curve = toml::from_str::<toml::Table>(text).map(|t| t.contains_key("curve")).unwrap_or(false);
        if !has_curve {
            out.push(("curve.kind".into(), "\"moment\"".into()));
        }
        out.push(("curve.n".into(), n.to_string()));
    }
    if let Some(g) = a.grid {
        match cmd {
            Command::Decouple | Command::OperatorProbe | Command::Sharpness => out.push((format!("{section}.grid"), g.to_string())),
            _ => return Err(config_err("--grid", format!("{section} has no grid"))),
        }
    }
    if let Some(p) = a.p {
        match cmd {
            Command::Decouple => out.push(("decouple.p".into(), format!("[{p:?}]"))),
            Command::OperatorProbe | Command::Sharpness => out.push((format!("{section}.p"), format!("{p:?}"))),
            _ => return Err(config_err("--p", format!("{section} takes no exponent"))),
        }
    }
    if let Some(r) = &a.lambda_range {
        let (lo, hi) = r.split_once(':').ok_or_else(|| config_err("--lambda-range", "expected LO:HI"))?;
        let key = match cmd {
            Command::Decay => "decay.lambda_exp",
            Command::Sharpness => "sharpness.lambda_exp",
            Command::OperatorProbe => "operator_probe.ks",
            _ => return Err(config_err("--lambda-range", format!("{section} has no frequency range"))),
        };
        if cmd == Command::Decay {
            let lo: f64 = lo.trim().parse().map_err(|_| config_err("--lambda-range", "LO is not a number"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| config_err("--lambda-range", "HI is not a number"))?;
            out.push((key.into(), format!("[{lo:?}, {hi:?}]")));
        } else {
            out.push((key.into(), format!("[{}, {}]", lo.trim(), hi.trim())));
        }
    }
    if let Some(t) = a.trials {
        let key = match cmd {
            Command::Decouple => "decouple.trials",
            Command::Sharpness => "sharpness.trials",
            Command::OperatorProbe => "operator_probe.random_trials",
            Command::Lorentz => "lorentz.draws",
            Command::Geometry => "geometry.samples",
            _ => return Err(config_err("--trials", format!("{section} has no trial count"))),
        };
        out.push((key.into(), t.to_string()));
    }
    if let Some(e) = &a.example {
        if cmd != Command::Sharpness {
            return Err(config_err("--example", "only sharpness has examples"));
        }
        out.push(("sharpness.example".into(), format!("{e:?}")));
    }
    if a.family.is_some() || a.d.is_some() || a.scales.is_some() {
        if cmd != Command::Decouple {
            return Err(config_err("--family/--d/--scales", "only decouple takes region options"));
        }
    }
    if let Some(f) = &a.family {
        let v = match f.as_str() {
            "frenet-box" | "box" => "box",
            "slab" => "slab",
            "plate" => "plate",
            other => return Err(config_err("--family", format!("unknown family `{other}`"))),
        };
        out.push(("decouple.family".into(), format!("{v:?}")));
    }
    if let Some(d) = a.d {
        out.push(("decouple.d".into(), d.to_string()));
    }
    if let Some(r) = &a.scales {
        let (lo, hi) = r.split_once(':').ok_or_else(|| config_err("--scales", "expected LO:HI"))?;
        out.push(("decouple.levels".into(), format!("[{}, {}]", lo.trim(), hi.trim())));
    }
    if let Some(s) = a.seed {
        out.push(("seed".into(), s.to_string()));
    }
    if let Some(b) = a.budget {
        out.push(("budget_bytes".into(), b.to_string()));
    }
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| config_err("--set", format!("`{kv}` is not KEY=VALUE")))?;
        out.push((k.trim().into(), v.trim().into()));
    }
    Ok(out)
}

fn execute(cmd: Command, a: RunArgs) -> Result<bool, Error> {
    let text = match &a.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| config_err("--config", format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let cfg = load_config(&text, &overrides(cmd, &a, &text)?, cmd)?;
    let report = run(&cfg)?;
    if let Some(path) = &a.csv {
        write_csv(&report.records, path)?;
    }
    match &a.out {
        Some(dir) => {
            write_report(&report, dir)?;
            println!("{}", serde_json::to_string_pretty(&report.summary).map_err(|e| Error::Io(e.to_string()))?);
        }
        None => {
            for r in &report.records {
                println!("{r}");
            }
            println!("{}", serde_json::to_string(&report.summary).map_err(|e| Error::Io(e.to_string()))?);
        }
    }
    Ok(report.summary.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Decay(a) => execute(Command::Decay, a),
        Cmd::Geometry(a) => execute(Command::Geometry, a),
        Cmd::DecomposeAudit(a) => execute(Command::DecomposeAudit, a),
        Cmd::Lorentz(a) => execute(Command::Lorentz, a),
        Cmd::Decouple(a) => execute(Command::Decouple, a),
        Cmd::OperatorProbe(a) => execute(Command::OperatorProbe, a),
        Cmd::Sharpness(a) => execute(Command::Sharpness, a),
        Cmd::Replay { dir, seed } => replay(&dir, seed).and_then(|o| {
            println!("{}", serde_json::to_string_pretty(&o).map_err(|e| Error::Io(e.to_string()))?);
            Ok(o.matched)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": e.to_string(), "detail": format!("{e:?}")}));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
