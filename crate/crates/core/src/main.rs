use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spin_sga::adiabatic::{run_schedule, sweep, write_sweep_csv, Schedule};
use spin_sga::basis::CsfBasis;
use spin_sga::circuits::{sz_trotter_step, CsfCompiler};
use spin_sga::encode::{Encoding, EncodingStyle};
use spin_sga::oracle::{oracle_matrix, OracleOp, MAX_ELEMENT_SITES};
use spin_sga::sga::{build_hamiltonian, TruncationMode};
use spin_sga::sim::{trotter_evolve, EvolutionRecord, Representation, TrotterConfig};
use spin_sga::{Error, Result};

/// Heisenberg chains in truncated spin-adapted bases.
#[derive(Parser, Debug)]
#[command(name = "spin-sga", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker thread cap for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Energy unit J; outputs are rescaled by it.
    #[arg(long, global = true, default_value_t = 1.0)]
    coupling: f64,

    /// Cross-check Hamiltonian matrices against the Clebsch-Gordan expansion.
    #[arg(long, global = true, hide = true)]
    oracle_check: bool,
}

#[derive(Args, Debug, Clone)]
struct System {
    /// Number of spins N.
    #[arg(long)]
    sites: usize,

    /// Total spin S, as a decimal multiple of 1/2.
    #[arg(long, default_value = "0", value_parser = parse_half)]
    total_spin: u32,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the basis paths as CSV.
    Basis {
        #[command(flatten)]
        system: System,
        /// Truncation spin (0.5, 1, 1.5, ...); untruncated when absent.
        #[arg(long, value_parser = parse_half)]
        trunc: Option<u32>,
    },
    /// Export the Hamiltonian as qubit Pauli text or a sparse matrix.
    Ham {
        #[command(flatten)]
        system: System,
        #[arg(long, value_parser = parse_half)]
        trunc: Option<u32>,
        #[arg(long, value_enum, default_value_t = Mode::Band)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = HamFormat::Pauli)]
        format: HamFormat,
    },
    /// Ground energy and gap for one or more truncations.
    Diag {
        #[command(flatten)]
        system: System,
        /// Comma-separated truncation spins; untruncated when absent.
        #[arg(long, value_delimiter = ',', value_parser = parse_half)]
        trunc: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Mode::Band)]
        mode: Mode,
    },
    /// Trotterized real-time evolution of the reference state.
    Evolve {
        #[command(flatten)]
        system: System,
        #[arg(long, value_enum, default_value_t = Basis::Csf)]
        representation: Basis,
        #[arg(long, value_parser = parse_half)]
        trunc: Option<u32>,
        #[arg(long, default_value_t = 1)]
        order: u8,
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        #[arg(long, default_value_t = 10)]
        layers: usize,
        /// Skip the one-qubit-per-spin reference run used for bond errors.
        #[arg(long)]
        no_reference: bool,
    },
    /// Adiabatic schedules over a grid of truncations, durations and layers.
    Adiabatic {
        #[command(flatten)]
        system: System,
        #[arg(long, value_delimiter = ',', value_parser = parse_half, default_value = "1")]
        trunc: Vec<u32>,
        #[arg(long, default_value_t = 2)]
        order: u8,
        #[arg(long, value_delimiter = ',', default_value = "20")]
        duration: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "40")]
        layers: Vec<usize>,
        /// `trajectory` writes the per-layer record of a single schedule.
        #[arg(long, value_enum, default_value_t = AdiabaticFormat::Sweep)]
        format: AdiabaticFormat,
    },
    /// Export one Trotter step as a gate list or QASM.
    Circuit {
        #[command(flatten)]
        system: System,
        #[arg(long, value_enum, default_value_t = Basis::Csf)]
        representation: Basis,
        #[arg(long, value_parser = parse_half)]
        trunc: Option<u32>,
        #[arg(long, default_value_t = 1)]
        order: u8,
        /// Step length; defaults to duration / layers.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 10)]
        layers: usize,
        #[arg(long, value_enum, default_value_t = CircuitFormat::Gates)]
        format: CircuitFormat,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Mode {
    Band,
    Height,
}

impl From<Mode> for TruncationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Band => TruncationMode::Band,
            Mode::Height => TruncationMode::Height,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum HamFormat {
    Pauli,
    Matrix,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Basis {
    Sz,
    Csf,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AdiabaticFormat {
    Sweep,
    Trajectory,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum CircuitFormat {
    Gates,
    Qasm,
}

/// Parses a non-negative multiple of 1/2 into its doubled integer.
fn parse_half(s: &str) -> std::result::Result<u32, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{}' is not a number", s))?;
    let doubled = v * 2.0;
    if !(0.0..=1e6).contains(&doubled) || doubled.fract() != 0.0 {
        return Err(format!("'{}' is not a non-negative multiple of 1/2", s));
    }
    Ok(doubled as u32)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Unsupported(msg.into())
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn basis_of(system: &System, trunc: Option<u32>) -> Result<CsfBasis> {
    match trunc {
        Some(t) => CsfBasis::new(system.sites, system.total_spin, t),
        None => CsfBasis::untruncated(system.sites, system.total_spin),
    }
}

fn oracle_check(basis: &CsfBasis, coupling: f64) -> Result<()> {
    if basis.n_sites() > MAX_ELEMENT_SITES {
        return Err(Error::ResourceLimit(format!(
            "oracle check limited to N <= {}",
            MAX_ELEMENT_SITES
        )));
    }
    let sga = build_hamiltonian(basis, TruncationMode::Height, coupling).to_dense();
    let oracle = oracle_matrix(OracleOp::Hamiltonian(coupling), basis.paths())?;
    let dev = (sga - oracle).amax();
    eprintln!("oracle check: max deviation {:.3e}", dev);
    if dev > 1e-10 {
        return Err(invalid(format!("oracle check failed with deviation {:.3e}", dev)));
    }
    Ok(())
}

fn scale_record(rec: &mut EvolutionRecord, j: f64) {
    rec.total_energy.iter_mut().for_each(|e| *e *= j);
    rec.bond_energies.iter_mut().flatten().for_each(|e| *e *= j);
    for e in rec.avg_abs_bond_error.iter_mut().flatten() {
        *e *= j.abs();
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| invalid(e.to_string()))?;
    }
    let j = cli.coupling;
    match cli.command {
        Command::Basis { system, trunc } => {
            let basis = basis_of(&system, trunc)?;
            let mut out = open_output(&cli.out)?;
            basis.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::Ham {
            system,
            trunc,
            mode,
            format,
        } => {
            let basis = basis_of(&system, trunc)?;
            if cli.oracle_check {
                oracle_check(&basis, j)?;
            }
            let mut out = open_output(&cli.out)?;
            match format {
                HamFormat::Matrix => build_hamiltonian(&basis, mode.into(), j).write_coo(&mut out)?,
                HamFormat::Pauli => {
                    if matches!(mode, Mode::Height) {
                        return Err(invalid("qubit encodings use band truncation"));
                    }
                    let t = trunc.ok_or_else(|| invalid("qubit encodings need --trunc"))?;
                    let enc = Encoding::new(system.sites, system.total_spin, t, EncodingStyle::Simplified)?;
                    enc.pauli_sum(j).write_text(&mut out)?;
                }
            }
            out.flush()?;
        }
        Command::Diag { system, trunc, mode } => {
            let truncs: Vec<Option<u32>> = if trunc.is_empty() {
                vec![None]
            } else {
                trunc.into_iter().map(Some).collect()
            };
            let mut rows = Vec::new();
            for t in truncs {
                let basis = basis_of(&system, t)?;
                if cli.oracle_check {
                    oracle_check(&basis, 1.0)?;
                }
                if basis.is_empty() {
                    return Err(Error::InvalidQuantumNumbers(format!(
                        "truncation {} leaves no paths",
                        basis.trunc_x2() as f64 / 2.0
                    )));
                }
                let (e0, e1) = build_hamiltonian(&basis, mode.into(), 1.0).lowest_two()?;
                let gap = e1.map_or(String::new(), |e| format!("{:.16e}", (e - e0) * j.abs()));
                rows.push(format!(
                    "{},{},{},{:.16e},{}",
                    basis.trunc_x2() as f64 / 2.0,
                    match mode {
                        Mode::Band => "band",
                        Mode::Height => "height",
                    },
                    basis.len(),
                    e0 * j,
                    gap
                ));
            }
            let mut out = open_output(&cli.out)?;
            writeln!(out, "trunc,mode,dimension,ground_energy,gap")?;
            for r in rows {
                writeln!(out, "{}", r)?;
            }
            out.flush()?;
        }
        Command::Evolve {
            system,
            representation,
            trunc,
            order,
            duration,
            layers,
            no_reference,
        } => {
            let mk = |representation| TrotterConfig {
                n_sites: system.sites,
                representation,
                duration,
                n_layers: layers,
                order,
                coupling: 1.0,
                track_symmetries: false,
            };
            let sz = Representation::Sz {
                total_spin_x2: system.total_spin,
            };
            let mut rec = match representation {
                Basis::Sz => trotter_evolve(&mk(sz))?,
                Basis::Csf => {
                    let trunc_x2 = trunc.ok_or_else(|| invalid("csf evolution needs --trunc"))?;
                    let mut rec = trotter_evolve(&mk(Representation::Csf {
                        total_spin_x2: system.total_spin,
                        trunc_x2,
                    }))?;
                    if !no_reference {
                        rec.compare_bonds(&trotter_evolve(&mk(sz))?)?;
                    }
                    rec
                }
            };
            scale_record(&mut rec, j);
            let mut out = open_output(&cli.out)?;
            rec.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::Adiabatic {
            system,
            trunc,
            order,
            duration,
            layers,
            format,
        } => {
            let mut out = open_output(&cli.out)?;
            match format {
                AdiabaticFormat::Sweep => {
                    let mut rows = sweep(system.sites, system.total_spin, &trunc, &duration, &layers, order)?;
                    rows.iter_mut().for_each(|r| r.final_energy *= j);
                    write_sweep_csv(&rows, &mut out)?;
                }
                AdiabaticFormat::Trajectory => {
                    let ([t], [d], [l]) = (&trunc[..], &duration[..], &layers[..]) else {
                        return Err(invalid("a trajectory needs a single truncation, duration and layer count"));
                    };
                    let mut traj = run_schedule(&Schedule::new(system.sites, system.total_spin, *t, *d, *l, order))?;
                    traj.energy.iter_mut().for_each(|e| *e *= j);
                    traj.target_energy.iter_mut().for_each(|e| *e *= j);
                    traj.write_csv(&mut out)?;
                }
            }
            out.flush()?;
        }
        Command::Circuit {
            system,
            representation,
            trunc,
            order,
            dt,
            duration,
            layers,
            format,
        } => {
            let dt = match dt {
                Some(dt) => dt,
                None if layers > 0 => duration / layers as f64,
                None => return Err(invalid("--layers must be positive")),
            };
            let circuit = match representation {
                Basis::Sz => sz_trotter_step(system.sites, dt, order, j)?,
                Basis::Csf => {
                    let t = trunc.ok_or_else(|| invalid("csf circuits need --trunc"))?;
                    CsfCompiler::new(system.sites, system.total_spin, t, j)?.step(dt, &|_| 1.0, order)?
                }
            };
            let mut out = open_output(&cli.out)?;
            match format {
                CircuitFormat::Gates => circuit.write_gatelist(&mut out)?,
                CircuitFormat::Qasm => out.write_all(circuit.to_qasm().as_bytes())?,
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(match e {
                Error::ResourceLimit(_) => 3,
                Error::Io(_) => 1,
                _ => 2,
            })
        }
    }
}
