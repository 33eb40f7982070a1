use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "causal", version, about = "Causal modelling and cause-effect experiments")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with the command's parameters; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Run on one thread (output is identical either way).
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Anm,
    Igci,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a model to CSV.
    Simulate {
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
        #[arg(short = 'n', long)]
        n: Option<usize>,
    },
    /// Sample an intervened model to CSV.
    Intervene {
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
        #[arg(short = 'n', long)]
        n: Option<usize>,
        /// Hard intervention, repeatable.
        #[arg(long = "do", value_name = "NAME=VALUE")]
        set: Vec<String>,
        /// JSON list of interventions, applied before the `--do` ones.
        #[arg(long, value_name = "PATH")]
        interventions: Option<PathBuf>,
    },
    /// Test whether two node sets are d-separated given a third.
    Dsep {
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',')]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Check every graph-implied independence against the exact distribution.
    Markov {
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Infer the causal direction of one pair file.
    DiscoverPair {
        file: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Score a method on a directory of pair files with known directions.
    DiscoverDir {
        dir: PathBuf,
        /// Ground-truth file; defaults to `<dir>/pairmeta.txt`.
        #[arg(long, value_name = "PATH")]
        metadata: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Simulate a light-curve panel and denoise it by half-sibling regression.
    Hsr {
        /// Also write the simulated panel as CSV.
        #[arg(long, value_name = "PATH")]
        panel_csv: Option<PathBuf>,
    },
    /// Compressed size of a reversible automaton run, as CSV.
    SecondLaw {
        #[arg(long)]
        n_bits: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        block_bits: Option<u32>,
    },
    /// Self-training gains on causal and anticausal tasks.
    SslBench {
        #[arg(long)]
        seeds: Option<usize>,
    },
}
