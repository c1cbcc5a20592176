//! `metaspec`: transform and check mini-C programs against meta-properties.
//!
//! Exit codes: 0 success, 1 assertion violations, 2 parse/type/spec errors,
//! 3 runtime error in the driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metaspec_core::checker::{
    diff_reports, naive_oracle, run_with_checks, CheckError, CheckReport, Equivalence,
};
use metaspec_core::corpus::{load_files, run_corpus, Loaded, BUNDLED};
use metaspec_core::minic::pretty_print;
use metaspec_core::spec::resolve_targets;
use metaspec_core::transform::{apply_all, emit_annotated_source, AnnotatedProgram};

#[derive(Parser)]
#[command(
    name = "metaspec",
    version,
    about = "Meta-properties for mini-C programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the program with generated contracts and assertions.
    Transform {
        #[command(flatten)]
        input: Input,
        /// Output path; defaults to `<input>.annot.mc`, `-` for stdout.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// Print the normalized program to stdout.
        #[arg(long)]
        dump_normalized: bool,
    },
    /// Run a driver over the instrumented program.
    Check(Run),
    /// Run a driver under the unpruned reference checker.
    Oracle(Run),
    /// Compare instrumented and reference failures.
    Diff(Run),
    /// Report well-formedness errors and suspicious metas.
    Lint {
        #[command(flatten)]
        input: Input,
    },
    /// Run the case studies under a corpus directory.
    Corpus {
        /// Defaults to the bundled corpus.
        dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    input: PathBuf,
    /// Sidecar file of `/*@ meta ... */` blocks.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct Run {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value = "main")]
    driver: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    dump_normalized: bool,
}

const OK: u8 = 0;
const VIOLATION: u8 = 1;
const INPUT_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

struct Fail(u8, String);

impl From<CheckError> for Fail {
    fn from(e: CheckError) -> Self {
        Fail(INPUT_ERROR, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Fail> {
    match cmd {
        Command::Transform {
            input,
            output,
            dump_normalized,
        } => {
            let l = load(&input)?;
            if dump_normalized {
                print!("{}", pretty_print(l.normalized.program()));
            }
            let ap = annotate(&l)?;
            let text = emit_annotated_source(&ap);
            let out = output.unwrap_or_else(|| default_output(&input.input));
            write_out(&out, &text)?;
            Ok(OK)
        }
        Command::Check(r) => {
            let l = load_run(&r)?;
            let rep = run_with_checks(&annotate(&l)?, &r.driver, r.seed)?;
            report(&r, &rep)
        }
        Command::Oracle(r) => {
            let l = load_run(&r)?;
            let rep = naive_oracle(&l.normalized, &l.metas, &r.driver, r.seed)?;
            report(&r, &rep)
        }
        Command::Diff(r) => {
            let l = load_run(&r)?;
            let a = run_with_checks(&annotate(&l)?, &r.driver, r.seed)?;
            let b = naive_oracle(&l.normalized, &l.metas, &r.driver, r.seed)?;
            match diff_reports(&a, &b).map_err(|e| Fail(INPUT_ERROR, e.to_string()))? {
                Equivalence::Equivalent => {
                    println!("equivalent ({} failure(s) in both)", a.failure_set().len());
                    Ok(OK)
                }
                Equivalence::Different {
                    only_in_first,
                    only_in_second,
                } => {
                    for k in only_in_first {
                        println!("only instrumented: {} {}", k.meta, k.digest);
                    }
                    for k in only_in_second {
                        println!("only reference:    {} {}", k.meta, k.digest);
                    }
                    Ok(VIOLATION)
                }
            }
        }
        Command::Lint { input } => {
            let l = load(&input)?;
            let ap = annotate(&l)?;
            let mut warnings = ap.warnings.clone();
            for m in &l.metas {
                if resolve_targets(&m.targets, l.normalized.program()).is_empty() {
                    warnings.push(format!("meta-property `{}` targets no function", m.name));
                } else if apply_all(&l.normalized, std::slice::from_ref(m))
                    .map(|a| a.annotations.is_empty())
                    .unwrap_or(false)
                {
                    warnings.push(format!(
                        "meta-property `{}` generates no annotation",
                        m.name
                    ));
                }
            }
            for w in &warnings {
                println!("warning: {w}");
            }
            println!(
                "{} meta-propert{}, {} warning(s)",
                l.metas.len(),
                if l.metas.len() == 1 { "y" } else { "ies" },
                warnings.len()
            );
            Ok(OK)
        }
        Command::Corpus { dir } => {
            let dir = dir.unwrap_or_else(|| PathBuf::from(BUNDLED));
            let s = run_corpus(&dir).map_err(|e| Fail(INPUT_ERROR, e.to_string()))?;
            println!("{s}");
            Ok(if s.ok() { OK } else { VIOLATION })
        }
    }
}

fn load(i: &Input) -> Result<Loaded, Fail> {
    load_files(&i.input, i.spec.as_deref()).map_err(|e| Fail(INPUT_ERROR, e.to_string()))
}

fn load_run(r: &Run) -> Result<Loaded, Fail> {
    let l = load(&r.input)?;
    if r.dump_normalized {
        print!("{}", pretty_print(l.normalized.program()));
    }
    Ok(l)
}

fn annotate(l: &Loaded) -> Result<AnnotatedProgram, Fail> {
    let ap = apply_all(&l.normalized, &l.metas).map_err(|es| {
        Fail(
            INPUT_ERROR,
            es.iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("\n"),
        )
    })?;
    for w in &ap.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ap)
}

fn default_output(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    input.with_file_name(format!("{stem}.annot.mc"))
}

fn write_out(path: &Path, text: &str) -> Result<(), Fail> {
    if path == Path::new("-") {
        print!("{text}");
        return Ok(());
    }
    fs::write(path, text).map_err(|e| Fail(INPUT_ERROR, format!("{}: {e}", path.display())))
}

fn report(r: &Run, rep: &CheckReport) -> Result<u8, Fail> {
    for v in &rep.verdicts {
        if v.verdict == metaspec_core::checker::Outcome::Fail {
            let w: Vec<String> = v.witness.iter().map(|(k, x)| format!("{k}={x}")).collect();
            let reason = v
                .reason
                .as_deref()
                .map(|s| format!(" ({s})"))
                .unwrap_or_default();
            println!(
                "FAIL {} in {} line {} [{}] {}{reason}",
                v.meta,
                v.function,
                v.line,
                format!("{:?}", v.phase).to_lowercase(),
                if w.is_empty() {
                    String::new()
                } else {
                    format!("witness {}", w.join(", "))
                }
            );
        }
    }
    let fails = rep.failures().count();
    println!("{} verdict(s), {fails} failure(s)", rep.verdicts.len());
    if let Some(e) = &rep.runtime_error {
        println!("runtime error: {e}");
    }
    if let Some(p) = &r.json {
        let text = serde_json::to_string_pretty(rep).expect("report serializes");
        write_out(p, &format!("{text}\n"))?;
    }
    Ok(if rep.runtime_error.is_some() {
        RUNTIME_ERROR
    } else if fails > 0 {
        VIOLATION
    } else {
        OK
    })
}
