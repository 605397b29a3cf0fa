use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tdmpo::bench::{
    fit_slope, run_benchmark, step_mpo, write_csv, EvolutionConfig, InitialState, Method,
};
use tdmpo::compression::DEFAULT_COMPRESSION_TOL;
use tdmpo::integrals::{TimeOrderedIntegralTable, DEFAULT_BITS};
use tdmpo::model::load_model;

#[derive(Parser)]
#[command(
    name = "tdmpo",
    version,
    about = "Evolution MPOs for time-dependent lattice Hamiltonians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the evolution MPO for one time step and print its structure.
    BuildMpo {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "dyson")]
        method: Method,
        #[arg(long)]
        order: usize,
        #[arg(long, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Skip row compression.
        #[arg(long)]
        no_compress: bool,
        /// Print the compression report as TOML.
        #[arg(long)]
        report: bool,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        bits: usize,
        #[arg(long, default_value_t = DEFAULT_COMPRESSION_TOL)]
        tol: f64,
        /// Write the full MPO as TOML to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the time-ordered integral table of the model's drivings as CSV.
    Integrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long)]
        max_order: usize,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        bits: usize,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error-scaling benchmark on a finite chain.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        orders: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        #[arg(long)]
        sites: usize,
        /// Compare against the highest-order, smallest-dt run instead of the integrator.
        #[arg(long)]
        self_reference: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "dyson")]
        method: Method,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        t: f64,
        /// MPS bond cap; defaults to the exact value d^(L/2).
        #[arg(long)]
        d_max: Option<usize>,
        #[arg(long, default_value_t = 1e-14)]
        svd_tol: f64,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        bits: usize,
        /// Largest step of the reference integrator.
        #[arg(long, default_value_t = 1e-4)]
        oracle_step: f64,
        #[arg(long)]
        no_compress: bool,
        /// Start from a random MPS of this bond dimension instead of |0…0⟩.
        #[arg(long)]
        random_bond: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::BuildMpo {
            model,
            method,
            order,
            t0,
            t,
            no_compress,
            report,
            bits,
            tol,
            out,
        } => {
            let h = load_model(&model)?;
            let table = Arc::new(TimeOrderedIntegralTable::from_hamiltonian(
                &h, t0, t, order, bits,
            )?);
            let (mpo, rep) = step_mpo(
                &h,
                method,
                order,
                t0,
                t - t0,
                &table,
                (!no_compress).then_some(tol),
            )?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "method = \"{method}\"")?;
            writeln!(stdout, "order = {order}")?;
            writeln!(stdout, "bond_dimension = {}", mpo.bond_dimension())?;
            let levels: Vec<String> = mpo.levels().iter().map(|l| format!("\"{l}\"")).collect();
            writeln!(stdout, "levels = [{}]", levels.join(", "))?;
            if report {
                match rep {
                    Some(r) => write!(stdout, "\n[report]\n{}", r.to_toml())?,
                    None => writeln!(stdout, "\n# no compression applied")?,
                }
            }
            if let Some(path) = out {
                std::fs::write(path, mpo.to_toml())?;
            }
        }
        Command::Integrate {
            model,
            t0,
            t,
            max_order,
            bits,
            out,
        } => {
            let h = load_model(&model)?;
            let table = TimeOrderedIntegralTable::from_hamiltonian(&h, t0, t, max_order, bits)?;
            let names: Vec<String> = h.channels().iter().map(|c| c.name.clone()).collect();
            table.write_csv(&names, output(out.as_ref())?)?;
        }
        Command::Bench {
            model,
            orders,
            dts,
            sites,
            self_reference,
            out,
            method,
            t0,
            t,
            d_max,
            svd_tol,
            bits,
            oracle_step,
            no_compress,
            random_bond,
            seed,
        } => {
            let h = load_model(&model)?;
            let exact_bond = h.d().saturating_pow((sites / 2) as u32);
            let config = EvolutionConfig {
                t0,
                t_final: t,
                n_sites: sites,
                method,
                d_max: d_max.unwrap_or(exact_bond),
                svd_tol,
                qtt_bits: bits,
                oracle_step,
                compress: !no_compress,
                initial: random_bond
                    .map_or(InitialState::Zeros, |bond| InitialState::Random { bond }),
                seed,
                ..EvolutionConfig::default()
            };
            let records = run_benchmark(&h, &config, &orders, &dts, self_reference)?;
            write_csv(&records, File::create(&out)?)?;
            for &n in &orders {
                if let Some((slope, _, points)) = fit_slope(&records, n, 0.0, f64::INFINITY, 0.0) {
                    eprintln!("order {n}: slope {slope:.3} over {points} points");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
