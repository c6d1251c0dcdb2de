//! Command-line driver: simulate `.rtl` netlists to CSV, extract truth
//! tables, verify circuits exhaustively against oracles, and compare
//! device-count cost between logic families.
//!
//! Exit codes: 0 success, 1 verification mismatch (or a contradictory truth
//! table), 2 parse/validation/usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rmtl::dsl::{self, NetlistDocument, SignalRef};
use rmtl::engine::{simulate, SimConfig, SimMode};
use rmtl::report::{
    cost_report, export_csv, export_csv_file, extract_truth_table, CostCoefficients, ReportError,
};
use rmtl::verify::{run_exhaustive, OracleKind};
use rmtl::Netlist;

#[derive(Parser)]
#[command(
    name = "rmtl",
    version,
    about = "Memristor threshold-logic circuit simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Physical,
    Behavioral,
}

impl From<ModeArg> for SimMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Physical => SimMode::Physical,
            ModeArg::Behavioral => SimMode::Behavioral,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a transient simulation and write waveform CSV
    Simulate {
        file: PathBuf,
        /// End time, SI suffixes allowed (default: two periods of the slowest pulse)
        #[arg(long)]
        t_end: Option<String>,
        /// READ-phase sampling step (default: frame / 50)
        #[arg(long)]
        dt_read: Option<String>,
        /// WRITE-phase ODE step (default: t_switch / 20)
        #[arg(long)]
        dt_write: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Physical)]
        mode: ModeArg,
        /// Output CSV path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and print the extracted truth table
    TruthTable {
        file: PathBuf,
        /// Comma-separated input node names
        #[arg(long)]
        inputs: String,
        /// Output node name
        #[arg(long)]
        output: String,
        /// Print as CSV instead of an aligned table
        #[arg(long)]
        csv: bool,
    },
    /// Exhaustively verify the circuit against an oracle
    Verify {
        file: PathBuf,
        /// nand | nor | xor | half-adder | full-adder | cla4
        #[arg(long)]
        oracle: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Behavioral)]
        mode: ModeArg,
    },
    /// Device-count cost comparison from a coefficient file
    Report {
        file: PathBuf,
        /// Coefficient file: lines of `<family> <kind> <area> <power>`
        #[arg(long)]
        coefficients: PathBuf,
        /// Families to total, comma-separated
        #[arg(long, default_value = "cmos,rmtl")]
        families: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    };
    ExitCode::from(code)
}

fn load(path: &Path) -> Result<(NetlistDocument, Netlist), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read '{}': {e}", path.display()))?;
    let doc = dsl::parse(&text).map_err(|d| format!("{}:\n{d}", path.display()))?;
    let netlist = doc
        .to_netlist()
        .map_err(|d| format!("{}:\n{d}", path.display()))?;
    Ok((doc, netlist))
}

fn parse_time(name: &str, value: &Option<String>) -> Result<Option<f64>, String> {
    match value {
        None => Ok(None),
        Some(text) => dsl::parse_value(text)
            .map(Some)
            .map_err(|e| format!("--{name}: {e}")),
    }
}

/// Probes requested by the document, or a default set (sources, then cell and
/// inverter outputs) when the file declares none.
fn probe_keys(doc: &NetlistDocument, netlist: &Netlist) -> Vec<String> {
    let declared = doc.probes();
    if !declared.is_empty() {
        return declared.iter().map(SignalRef::key).collect();
    }
    let mut keys = Vec::new();
    for src in netlist.sources() {
        keys.push(rmtl::engine::node_signal(netlist.node_name(src.node)));
    }
    for cell in netlist.cells() {
        keys.push(rmtl::engine::node_signal(netlist.node_name(cell.output)));
    }
    for inv in netlist.inverters() {
        keys.push(rmtl::engine::node_signal(netlist.node_name(inv.output)));
    }
    keys.dedup();
    keys
}

fn run(cmd: Cmd) -> Result<u8, String> {
    match cmd {
        Cmd::Simulate {
            file,
            t_end,
            dt_read,
            dt_write,
            mode,
            out,
        } => {
            let (doc, netlist) = load(&file)?;
            let mut config = SimConfig::defaults_for(&netlist);
            config.mode = mode.into();
            if let Some(v) = parse_time("t-end", &t_end)? {
                config.t_end = v;
            }
            if let Some(v) = parse_time("dt-read", &dt_read)? {
                config.dt_read = v;
            }
            if let Some(v) = parse_time("dt-write", &dt_write)? {
                config.dt_write = v;
            }
            let result = simulate(&netlist, &config).map_err(|e| e.to_string())?;
            let probes = probe_keys(&doc, &netlist);
            match out {
                Some(path) => {
                    export_csv_file(&path, &result, &probes).map_err(|e| e.to_string())?;
                    eprintln!("wrote {} signals to {}", probes.len(), path.display());
                }
                None => {
                    let stdout = std::io::stdout();
                    export_csv(stdout.lock(), &result, &probes).map_err(|e| e.to_string())?;
                }
            }
            Ok(0)
        }
        Cmd::TruthTable {
            file,
            inputs,
            output,
            csv,
        } => {
            let (_, netlist) = load(&file)?;
            let config = SimConfig::defaults_for(&netlist);
            let result = simulate(&netlist, &config).map_err(|e| e.to_string())?;
            let input_names: Vec<&str> = inputs.split(',').map(str::trim).collect();
            let table =
                match extract_truth_table(&result, &input_names, &output, netlist.logic_high()) {
                    Ok(t) => t,
                    Err(e @ ReportError::ContradictoryRows { .. }) => {
                        eprintln!("error: {e}");
                        return Ok(1);
                    }
                    Err(e) => return Err(e.to_string()),
                };
            if csv {
                println!("{},{}", table.inputs.join(","), table.output);
                for row in &table.rows {
                    let bits: Vec<String> =
                        row.inputs.iter().map(|b| (*b as u8).to_string()).collect();
                    println!("{},{}", bits.join(","), row.output as u8);
                }
            } else {
                print!("{table}");
            }
            Ok(0)
        }
        Cmd::Verify { file, oracle, mode } => {
            let (_, netlist) = load(&file)?;
            let oracle: OracleKind = oracle.parse()?;
            let outcome =
                run_exhaustive(&netlist, oracle, mode.into()).map_err(|e| e.to_string())?;
            println!("{}/{} vectors match", outcome.matches(), outcome.total);
            if outcome.passed() {
                Ok(0)
            } else {
                for m in outcome.mismatches.iter().take(8) {
                    let fmt = |bits: &[bool]| -> String {
                        bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
                    };
                    eprintln!(
                        "mismatch at vector {}: inputs {} expected {} got {}",
                        m.index,
                        fmt(&m.inputs),
                        fmt(&m.expected),
                        fmt(&m.got)
                    );
                }
                if outcome.mismatches.len() > 8 {
                    eprintln!("... and {} more", outcome.mismatches.len() - 8);
                }
                Ok(1)
            }
        }
        Cmd::Report {
            file,
            coefficients,
            families,
        } => {
            let (_, netlist) = load(&file)?;
            let coeffs = CostCoefficients::load(&coefficients).map_err(|e| e.to_string())?;
            let families: Vec<&str> = families.split(',').map(str::trim).collect();
            let report = cost_report(&netlist, &coeffs, &families).map_err(|e| e.to_string())?;
            println!("gate census:");
            for (kind, count) in &report.census {
                println!("  {kind:>5} x {count}");
            }
            if report.census.is_empty() {
                println!("  (no logic gates)");
            }
            println!("totals (area um^2, power uW):");
            for (family, (area, power)) in &report.totals {
                println!("  {family:>6}: {area:.4} {power:.4}");
            }
            match (report.area_ratio, report.power_ratio) {
                (Some(a), Some(p)) => println!("rmtl/cmos ratios: area {a:.6}, power {p:.6}"),
                _ => println!("rmtl/cmos ratios: n/a"),
            }
            Ok(0)
        }
    }
}
