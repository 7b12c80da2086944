use std::io::{Read, Write};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use cainf::novikov::{parse_q, Q};
use cainf_cli::{parse_document, run_command, Command, Document, Flags, Inputs};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cainf", version, about = "Verify and transform gapped cyclic filtered A-infinity algebras")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the axioms of an algebra, morphism or isotopy document.
    Verify(Common),
    /// Transfer an algebra to its canonical model.
    Transfer {
        #[command(flatten)]
        common: Common,
        /// Where to write the inclusion morphism.
        #[arg(long)]
        morphism_out: Option<String>,
    },
    /// Check the axioms of a pseudo-isotopy.
    IsotopyVerify(Common),
    /// Integrate a pseudo-isotopy to a morphism between two of its slices.
    IsotopyIntegrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0", value_parser = rational)]
        tau0: Q,
        #[arg(long, default_value = "1", value_parser = rational)]
        tau1: Q,
    },
    /// Extend a pseudo-isotopy to the energy cut of a new end algebra.
    IsotopyExtend {
        #[command(flatten)]
        common: Common,
        /// The new end algebra.
        algebra: String,
        /// Isotopy whose connection is added at the new levels.
        #[arg(long)]
        connection: Option<String>,
    },
    /// Deform by the bounding cochain of the document, or shift energies with `--shift`.
    Deform {
        #[command(flatten)]
        common: Common,
        /// Comma-separated shift vector, one rational per divisor element.
        #[arg(long, value_delimiter = ',', value_parser = rational, allow_hyphen_values = true)]
        shift: Option<Vec<Q>>,
        /// Admissible valuation radius for divisor coordinates.
        #[arg(long, value_parser = rational)]
        delta: Option<Q>,
        /// Largest number of divisor insertions checked.
        #[arg(long, default_value_t = 3)]
        m_bound: usize,
    },
    /// List ribbon trees of a given arity and label over the monoid of an algebra.
    Trees {
        /// Algebra supplying the monoid; the trivial monoid when omitted.
        input: Option<String>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value = "0", value_parser = rational)]
        energy: Q,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        maslov: i64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Common {
    /// Input document, `-` for stdin.
    input: String,
    /// Largest arity checked.
    #[arg(long, default_value_t = 4)]
    k_max: usize,
    /// Truncate the input at this energy first.
    #[arg(long, value_parser = rational)]
    e_cut: Option<Q>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct Output {
    /// Where to write the output document, `-` for stdout.
    #[arg(long)]
    out: Option<String>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn rational(s: &str) -> Result<Q, String> {
    parse_q(s).map_err(|e| e.to_string())
}

fn read_text(path: &str) -> Result<String> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

fn read_doc(path: &str) -> Result<Document> {
    parse_document(&read_text(path)?).map_err(|e| anyhow!("{path}: {e}"))
}

fn write_text(path: &str, text: &str) -> Result<()> {
    if path == "-" {
        std::io::stdout().write_all(text.as_bytes()).context("writing stdout")
    } else {
        std::fs::write(path, text).with_context(|| format!("writing {path}"))
    }
}

fn run(cli: Cli) -> Result<i32> {
    let mut flags = Flags::default();
    let mut inputs = Inputs::default();
    let mut morphism_out = None;
    let (cmd, output) = match cli.cmd {
        Cmd::Verify(c) => (Command::Verify, common(c, &mut flags, &mut inputs)?),
        Cmd::IsotopyVerify(c) => (Command::IsotopyVerify, common(c, &mut flags, &mut inputs)?),
        Cmd::Transfer { common: c, morphism_out: m } => {
            morphism_out = m;
            (Command::Transfer, common(c, &mut flags, &mut inputs)?)
        }
        Cmd::IsotopyIntegrate { common: c, tau0, tau1 } => {
            flags.tau0 = tau0;
            flags.tau1 = tau1;
            (Command::IsotopyIntegrate, common(c, &mut flags, &mut inputs)?)
        }
        Cmd::IsotopyExtend { common: c, algebra, connection } => {
            inputs.algebra = Some(read_doc(&algebra)?);
            inputs.connection = connection.as_deref().map(read_doc).transpose()?;
            (Command::IsotopyExtend, common(c, &mut flags, &mut inputs)?)
        }
        Cmd::Deform { common: c, shift, delta, m_bound } => {
            flags.shift = shift;
            flags.delta = delta;
            flags.m_bound = m_bound;
            (Command::Deform, common(c, &mut flags, &mut inputs)?)
        }
        Cmd::Trees { input, k, energy, maslov, output } => {
            flags.k = k;
            flags.energy = energy;
            flags.maslov = maslov;
            inputs.primary = input.as_deref().map(read_doc).transpose()?;
            (Command::Trees, output)
        }
    };
    let outcome = run_command(cmd, inputs, &flags)?;
    let report = if output.json { outcome.report_json() } else { outcome.report_text() };
    // The report moves to stderr when a document is streamed to stdout.
    let doc_on_stdout = output.out.as_deref() == Some("-") || morphism_out.as_deref() == Some("-");
    if doc_on_stdout {
        eprint!("{report}");
    } else {
        print!("{report}");
    }
    if let (Some(path), Some(text)) = (output.out.as_deref(), outcome.output_text()) {
        write_text(path, &text)?;
    }
    if let (Some(path), Some(text)) = (morphism_out.as_deref(), outcome.morphism_text()) {
        write_text(path, &text)?;
    }
    Ok(outcome.exit_code())
}

fn common(c: Common, flags: &mut Flags, inputs: &mut Inputs) -> Result<Output> {
    flags.k_max = c.k_max;
    flags.e_cut = c.e_cut;
    inputs.primary = Some(read_doc(&c.input)?);
    Ok(c.output)
}

fn main() -> ExitCode {
    cainf::configure_threads();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
