//! The `stepwise` command line: `derive`, `compare`, `practice` and `serve`.

use std::io::{BufRead, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::engine::{Derivation, Diagnosis, Engine, EngineError, Mode, StrategyChoice, STANDARD_PRELUDE};
use crate::feedback::FeedbackScript;
use crate::rules::Primitive;
use crate::service::{load_examples, Service, DEFAULT_PORT};

pub const EXIT_OK: i32 = 0;
/// Unparsable expression, prelude, script or other unusable input.
pub const EXIT_INPUT: i32 = 1;
/// Evaluation exceeded the step budget or got stuck.
pub const EXIT_EVALUATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "stepwise", version, about = "Step-by-step evaluation of functional programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the derivation of an expression, one rewrite step at a time.
    Derive {
        expr: String,
        #[arg(long, default_value = "outermost")]
        strategy: StrategyChoiceArg,
        /// Number the expressions of the derivation.
        #[arg(long)]
        numbered: bool,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Show the innermost and outermost derivations side by side.
    Compare {
        expr: String,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Practise evaluating an expression step by step.
    Practice {
        expr: String,
        #[arg(long, default_value = "outermost")]
        strategy: ModeArg,
        #[arg(long, env = "STEPWISE_SCRIPT")]
        script: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run the JSON service.
    Serve {
        #[arg(long, env = "STEPWISE_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = "STEPWISE_HOST", default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        #[arg(long, env = "STEPWISE_SCRIPT")]
        script: Option<PathBuf>,
        /// JSON list of example expressions.
        #[arg(long, env = "STEPWISE_EXAMPLES")]
        examples: Option<PathBuf>,
        /// Origin allowed to call the service; any origin when omitted.
        #[arg(long, env = "STEPWISE_CORS_ORIGIN")]
        cors_origin: Option<String>,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Clone, Debug)]
struct StrategyChoiceArg(StrategyChoice);

impl std::str::FromStr for StrategyChoiceArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(StrategyChoiceArg)
    }
}

#[derive(Clone, Debug)]
struct ModeArg(Mode);

impl std::str::FromStr for ModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(ModeArg)
    }
}

#[derive(Args, Debug)]
struct EngineArgs {
    /// Prelude file with function definitions.
    #[arg(long, env = "STEPWISE_PRELUDE")]
    prelude: Option<PathBuf>,
    /// Maximum number of rewrite steps.
    #[arg(long, env = "STEPWISE_BUDGET", default_value_t = crate::strategy::DEFAULT_STEP_BUDGET)]
    budget: usize,
    /// Use only rules generated from the prelude (plus `+` and beta
    /// reduction). Without --prelude the standard definitions are loaded.
    #[arg(long, env = "STEPWISE_NO_BUILTINS")]
    no_builtins: bool,
    /// Enable `-` or `*` as primitive operators.
    #[arg(long = "primitive", value_parser = ["sub", "mul"])]
    primitives: Vec<String>,
}

impl EngineArgs {
    fn build(&self) -> Result<Engine, String> {
        let mut builder = Engine::builder().budget(self.budget).builtins(!self.no_builtins);
        match &self.prelude {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                builder = builder.prelude(text);
            }
            None if self.no_builtins => builder = builder.prelude(STANDARD_PRELUDE),
            None => {}
        }
        for p in &self.primitives {
            builder = builder.primitive(if p == "sub" { Primitive::Sub } else { Primitive::Mul });
        }
        let engine = builder.build().map_err(|e| match &self.prelude {
            Some(path) => format!("{}: {e}", path.display()),
            None => e.to_string(),
        })?;
        Ok(engine)
    }
}

struct Io<'a> {
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { input, out, err };
    match execute(cli.command, &mut io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn execute(command: Command, io: &mut Io<'_>) -> Result<i32, String> {
    match command {
        Command::Derive { expr, strategy, numbered, engine } => {
            let engine = engine.build()?;
            let e = engine.parse(&expr).map_err(|e| e.to_string())?;
            Ok(match engine.derive(&e, strategy.0) {
                Ok(d) => {
                    write_out(io, &render_derivation(&d, numbered));
                    EXIT_OK
                }
                Err(failure) => report_failure(io, &failure, numbered),
            })
        }
        Command::Compare { expr, engine } => {
            let engine = engine.build()?;
            let e = engine.parse(&expr).map_err(|e| e.to_string())?;
            Ok(compare(io, &engine, &e))
        }
        Command::Practice { expr, strategy, script, engine } => {
            let engine = engine.build()?;
            let script = match script {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                    FeedbackScript::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => FeedbackScript::default(),
            };
            let e = engine.parse(&expr).map_err(|e| e.to_string())?;
            practice(io, &engine, &script, e, strategy.0)
        }
        Command::Serve { port, host, script, examples, cors_origin, engine } => {
            let engine = Arc::new(engine.build()?);
            for w in engine.warnings() {
                tracing::warn!("{w}");
            }
            let mut service = match script {
                Some(path) => Service::with_script_file(engine, path).map_err(|e| e.to_string())?,
                None => Service::new(engine, FeedbackScript::default()),
            };
            if let Some(path) = examples {
                service = service.with_examples(load_examples(&path).map_err(|e| e.to_string())?);
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime
                .block_on(crate::service::serve(Arc::new(service), SocketAddr::new(host, port), cors_origin))
                .map_err(|e| e.to_string())?;
            Ok(EXIT_OK)
        }
    }
}

fn write_out(io: &mut Io<'_>, text: &str) {
    let _ = io.out.write_all(text.as_bytes());
}

fn report_failure(io: &mut Io<'_>, failure: &EngineError, numbered: bool) -> i32 {
    if let Some(partial) = failure.partial() {
        write_out(io, &render_derivation(partial, numbered));
    }
    let _ = writeln!(io.err, "error: {failure}");
    match failure {
        EngineError::BudgetExceeded { .. } | EngineError::Stuck { .. } | EngineError::Strategy(_) => EXIT_EVALUATION,
        _ => EXIT_INPUT,
    }
}

/// Lines of a derivation in textbook layout:
///
/// ```text
///   double 3
/// = { definition double }
///   3 + 3
/// ```
pub fn derivation_lines(d: &Derivation, numbered: bool) -> Vec<String> {
    let width = if numbered { d.len().to_string().len() + 2 } else { 0 };
    let term = |i: usize, e: &crate::expr::Expr| {
        if numbered {
            format!("{:>w$}   {e}", format!("{i}."), w = width)
        } else {
            format!("  {e}")
        }
    };
    let mut lines = vec![term(0, &d.start)];
    for (i, s) in d.steps.iter().enumerate() {
        lines.push(format!("{:w$}= {{ {} }}", "", s.rule.annotation, w = width));
        lines.push(term(i + 1, &s.after));
    }
    lines
}

pub fn render_derivation(d: &Derivation, numbered: bool) -> String {
    let mut text = derivation_lines(d, numbered).join("\n");
    text.push('\n');
    text
}

fn compare(io: &mut Io<'_>, engine: &Engine, e: &crate::expr::Expr) -> i32 {
    let mut columns = Vec::new();
    let mut footer = Vec::new();
    let mut code = EXIT_OK;
    for choice in [StrategyChoice::Innermost, StrategyChoice::Outermost] {
        match engine.derive(e, choice) {
            Ok(d) => {
                footer.push(format!("{choice}: {} steps", d.len()));
                columns.push(derivation_lines(&d, false));
            }
            Err(failure) => {
                code = EXIT_EVALUATION.max(code);
                footer.push(format!("{choice}: {failure}"));
                columns.push(failure.partial().map_or_else(Vec::new, |d| derivation_lines(d, false)));
            }
        }
    }
    let header = ["innermost", "outermost"];
    let width = columns[0].iter().map(|l| l.chars().count()).chain([header[0].len()]).max().unwrap_or(0);
    let rows = columns[0].len().max(columns[1].len());
    let mut text = format!("{:width$}   | {}\n", header[0], header[1]);
    text.push_str(&format!("{}---+-{}\n", "-".repeat(width), "-".repeat(header[1].len())));
    for i in 0..rows {
        let left = columns[0].get(i).map_or("", String::as_str);
        let right = columns[1].get(i).map_or("", String::as_str);
        let pad = width - left.chars().count();
        text.push_str(format!("{left}{}   | {right}", " ".repeat(pad)).trim_end());
        text.push('\n');
    }
    text.push_str(&format!("\n{}\n", footer.join(", ")));
    write_out(io, &text);
    code
}

fn practice(
    io: &mut Io<'_>,
    engine: &Engine,
    script: &FeedbackScript,
    start: crate::expr::Expr,
    mode: Mode,
) -> Result<i32, String> {
    let mut current = start;
    let _ = writeln!(io.out, "Evaluate step by step ({mode}). Commands: :hint, :steps, :quit");
    loop {
        match engine.hint(&current, mode.strategy()) {
            Err(EngineError::NoStep(_)) => {
                let _ = writeln!(io.out, "  {current}\nDone: the expression is fully evaluated.");
                return Ok(EXIT_OK);
            }
            Err(e) => {
                let _ = writeln!(io.err, "error: {e}");
                return Ok(EXIT_EVALUATION);
            }
            Ok(_) => {}
        }
        let _ = write!(io.out, "  {current}\n> ");
        let _ = io.out.flush();
        let mut line = String::new();
        if io.input.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
            let _ = writeln!(io.out);
            return Ok(EXIT_OK);
        }
        let line = line.trim();
        match line {
            "" => continue,
            ":quit" | ":q" => return Ok(EXIT_OK),
            ":hint" => {
                match engine.hint(&current, mode.strategy()) {
                    Ok(step) => {
                        let _ = writeln!(io.out, "Hint: {}", script.message_for_rule(&step.rule));
                    }
                    Err(e) => {
                        let _ = writeln!(io.out, "No hint: {e}");
                    }
                }
                continue;
            }
            ":steps" => {
                match engine.steps_remaining(&current, mode.strategy()) {
                    Ok(n) => {
                        let _ = writeln!(io.out, "{n} {} remaining", plural(n));
                    }
                    Err(e) => {
                        let _ = writeln!(io.out, "Cannot count the steps: {e}");
                    }
                }
                continue;
            }
            _ => {}
        }
        let submitted = match engine.parse(line) {
            Ok(s) => s,
            Err(e) => {
                let _ = writeln!(io.out, "Parse error: {e}");
                continue;
            }
        };
        match engine.diagnose(&current, &submitted, mode).map_err(|e| e.to_string())? {
            Diagnosis::CorrectStep { rule, remaining } => {
                let count = match remaining {
                    Some(n) => format!(" ({n} {} remaining)", plural(n)),
                    None => String::new(),
                };
                let _ = writeln!(io.out, "Correct — {}{count}", rule.annotation);
                current = submitted;
            }
            Diagnosis::EquivalentButOffStrategy { expected } => {
                let _ = writeln!(
                    io.out,
                    "Equivalent, but not a single {mode} step. Expected: {}",
                    join(&expected)
                );
            }
            Diagnosis::CorrectResultWrongPath { expected } => {
                let _ = writeln!(
                    io.out,
                    "Same value, but not obtainable by rewriting. Expected: {}",
                    join(&expected)
                );
            }
            Diagnosis::Incorrect { expected, note } => {
                let note = note.map(|n| format!(" ({n})")).unwrap_or_default();
                let _ = writeln!(io.out, "Incorrect{note}. Expected: {}", join(&expected));
            }
            Diagnosis::ParseError { message } => {
                let _ = writeln!(io.out, "Parse error: {message}");
            }
        }
    }
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        "step"
    } else {
        "steps"
    }
}

fn join(items: &[crate::expr::Expr]) -> String {
    items.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" | ")
}
