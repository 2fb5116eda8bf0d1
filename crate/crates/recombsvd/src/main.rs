//! Command-line entry point: detection, simulation, evaluation, and
//! plot-data export.

use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use recombsvd::detector::{self, DetectConfig, MethodSelection};
use recombsvd::error::Result;
use recombsvd::harness::{self, ExperimentGrid};
use recombsvd::seqio::{self, ParseOptions, SequencePopulation};
use recombsvd::simgen::{self, SimulationConfig};
use recombsvd::distmat;

#[derive(Parser)]
#[command(
    name = "recombsvd",
    version,
    about = "Recombination hot spot detection via the SVD of smoothed Hamming distance matrices"
)]
struct Cli {
    /// Cap the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DetectorArgs {
    /// Smoothing window half-width w.
    #[arg(short = 'w', long, default_value_t = 50)]
    window: usize,

    /// Number of permutation replicates M.
    #[arg(short = 'M', long, default_value_t = 100)]
    permutations: usize,

    /// Null quantile level for the existence threshold.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Maximum number of hot spots K.
    #[arg(short = 'K', long, default_value_t = 2)]
    max_hotspots: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DetectorArgs {
    fn to_config(&self) -> DetectConfig {
        DetectConfig {
            window: self.window,
            permutations: self.permutations,
            alpha: self.alpha,
            seed: self.seed,
            max_hotspots: self.max_hotspots,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect recombination hot spots in an aligned FASTA population.
    Detect {
        /// FASTA path, or "-" for stdin.
        input: String,

        #[command(flatten)]
        detector: DetectorArgs,

        /// Report diff locations, ols locations, or both.
        #[arg(long, default_value = "both")]
        method: String,

        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,

        /// Keep sequence case instead of folding to upper.
        #[arg(long)]
        no_case_fold: bool,

        /// Also dump the smoothed distance matrix as TSV.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },

    /// Generate a synthetic population with known breakpoints.
    Simulate {
        /// Common mutation rate r_c.
        #[arg(long = "r-c")]
        r_c: f64,

        /// Individual mutation rate r_i.
        #[arg(long = "r-i")]
        r_i: f64,

        /// Number of recombination hot spots (0, 1, or 2).
        #[arg(long, default_value_t = 1)]
        recombs: usize,

        /// Fixed 1-based breakpoints (comma-separated); random if omitted.
        #[arg(long, value_delimiter = ',')]
        locations: Option<Vec<usize>>,

        #[arg(short = 'n', long, default_value_t = 100)]
        population: usize,

        #[arg(short = 'L', long, default_value_t = 1000)]
        length: usize,

        /// Minimum separation between two random breakpoints.
        #[arg(long, default_value_t = 150)]
        min_separation: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Output prefix: writes <prefix>.fasta and <prefix>.truth.json.
        #[arg(long)]
        out_prefix: PathBuf,
    },

    /// Run the synthetic evaluation grid and emit table/ECDF CSVs.
    Evaluate {
        /// Trials per grid cell.
        #[arg(long, default_value_t = 20)]
        trials: usize,

        #[arg(short = 'n', long, default_value_t = 100)]
        population: usize,

        #[arg(short = 'L', long, default_value_t = 1000)]
        length: usize,

        #[command(flatten)]
        detector: DetectorArgs,

        /// Minimum separation between two random breakpoints.
        #[arg(long, default_value_t = 150)]
        min_separation: usize,

        /// Directory for table.csv, ECDF CSVs, and the run manifest.
        #[arg(long)]
        out_dir: PathBuf,
    },

    /// Export right singular vectors of a population as CSV.
    DumpVectors {
        /// FASTA path, or "-" for stdin.
        input: String,

        #[arg(short = 'w', long, default_value_t = 50)]
        window: usize,

        /// Number of singular vectors to export.
        #[arg(short = 'k', long, default_value_t = 3)]
        k: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,

        /// Keep sequence case instead of folding to upper.
        #[arg(long)]
        no_case_fold: bool,
    },
}

fn read_population(input: &str, fold_case: bool) -> Result<SequencePopulation> {
    let options = ParseOptions { fold_case };
    if input == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        seqio::parse_fasta(text.as_bytes(), options)
    } else {
        seqio::parse_fasta_path(input, options)
    }
}

fn write_output(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            handle.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Detect {
            input,
            detector,
            method,
            out,
            no_case_fold,
            dump_matrix,
        } => {
            let method: MethodSelection = method.parse()?;
            let config = detector.to_config();
            config.validate()?;
            eprintln!("seed: {}", config.seed);
            let pop = read_population(&input, !no_case_fold)?;
            if let Some(path) = dump_matrix {
                let matrix = distmat::build_matrix(&pop, config.window)?;
                let file = std::fs::File::create(path)?;
                matrix.write_tsv(pop.labels(), std::io::BufWriter::new(file))?;
            }
            let report = detector::detect(&pop, &config)?;
            let mut json = report.to_json(method);
            json.push('\n');
            write_output(&json, out.as_ref())
        }

        Command::Simulate {
            r_c,
            r_i,
            recombs,
            locations,
            population,
            length,
            min_separation,
            seed,
            out_prefix,
        } => {
            eprintln!("seed: {seed}");
            let config = SimulationConfig {
                population_size: population,
                sequence_length: length,
                common_rate: r_c,
                individual_rate: r_i,
                num_recomb: recombs,
                recomb_locations: locations,
                min_separation,
                seed,
            };
            let sim = simgen::simulate(&config)?;
            let fasta_path = PathBuf::from(format!("{}.fasta", out_prefix.display()));
            let truth_path = PathBuf::from(format!("{}.truth.json", out_prefix.display()));
            let fasta = std::fs::File::create(&fasta_path)?;
            seqio::write_fasta(&sim.population, std::io::BufWriter::new(fasta))?;
            let truth = std::fs::File::create(&truth_path)?;
            sim.write_truth_json(std::io::BufWriter::new(truth))?;
            eprintln!(
                "wrote {} and {}",
                fasta_path.display(),
                truth_path.display()
            );
            Ok(())
        }

        Command::Evaluate {
            trials,
            population,
            length,
            detector,
            min_separation,
            out_dir,
        } => {
            if trials == 0 {
                return Err(recombsvd::Error::InvalidConfig(
                    "at least one trial per cell is required".into(),
                ));
            }
            let det = detector.to_config();
            det.validate()?;
            eprintln!("seed: {}", det.seed);
            let grid = ExperimentGrid {
                trials,
                population_size: population,
                sequence_length: length,
                master_seed: det.seed,
                detector: det,
                min_separation,
            };
            std::fs::create_dir_all(&out_dir)?;

            let mut results = Vec::new();
            for cell in harness::cells() {
                let start = std::time::Instant::now();
                let result = harness::run_cell(&grid, &cell);
                eprintln!(
                    "cell {} ({} recomb): fp={} fn={} [{:.1}s]",
                    result.cell.label(),
                    result.cell.num_recomb,
                    result.fp_rate,
                    result
                        .fn_rate
                        .map_or_else(|| "NA".to_string(), |v| v.to_string()),
                    start.elapsed().as_secs_f64()
                );
                results.push(result);
            }

            let table = std::fs::File::create(out_dir.join("table.csv"))?;
            harness::write_table_csv(&results, std::io::BufWriter::new(table))?;
            harness::write_ecdf_files(&results, &out_dir)?;
            let manifest = std::fs::File::create(out_dir.join("manifest.json"))?;
            harness::write_manifest_json(&grid, std::io::BufWriter::new(manifest))?;
            eprintln!("wrote {}", out_dir.join("table.csv").display());
            Ok(())
        }

        Command::DumpVectors {
            input,
            window,
            k,
            seed,
            out,
            no_case_fold,
        } => {
            eprintln!("seed: {seed}");
            eprintln!("config: window={window} k={k}");
            let pop = read_population(&input, !no_case_fold)?;
            let factors = detector::population_factors(&pop, window, k, seed)?;
            let mut csv = Vec::new();
            factors.write_right_vectors_csv(&mut csv)?;
            let text = String::from_utf8(csv).expect("csv output is ascii");
            write_output(&text, out.as_ref())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} threads: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
