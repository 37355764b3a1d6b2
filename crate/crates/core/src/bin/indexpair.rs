use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use indexpair::dynamics::SystemKind;
use indexpair::pipeline::{cmd_run, cmd_sweep, KPolicy, Mode, RunConfig};
use indexpair::report::cmd_report;

#[derive(Parser)]
#[command(name = "indexpair", version, about = "Index pairs and certified entropy bounds for planar maps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single run on one parameter interval.
    Run(RunArgs),
    /// Runs over a partition of the parameter range.
    Sweep(RunArgs),
    /// CSV table and SVG plots from a results directory.
    Report {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// standard, henon or horseshoe.
    #[arg(long, default_value = "standard")]
    map: SystemKind,
    /// Parameter interval LO:HI (a single value means a point).
    #[arg(long, default_value = "2:2")]
    eps: String,
    /// Depths START:END.
    #[arg(long, default_value = "4:9")]
    depth: String,
    /// homoclinic, periodic or periodic-plus-orbits.
    #[arg(long, default_value = "homoclinic")]
    mode: Mode,
    #[arg(long, default_value_t = 2)]
    max_period: usize,
    /// Comma-separated periods of extra orbits (periodic-plus-orbits mode).
    #[arg(long, value_delimiter = ',')]
    add_periods: Vec<usize>,
    /// auto, off or a number above the action bound.
    #[arg(long = "K", default_value = "auto")]
    k: KPolicy,
    #[arg(long, default_value_t = 32)]
    maxpow: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cache file (run) or directory (sweep).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 4_000_000)]
    max_boxes: usize,
}

fn split(s: &str) -> (String, String) {
    match s.split_once(':') {
        Some((a, b)) => (a.trim().to_owned(), b.trim().to_owned()),
        None => (s.trim().to_owned(), s.trim().to_owned()),
    }
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, String> {
        let (eps_lo, eps_hi) = split(&self.eps);
        let (a, b) = split(&self.depth);
        let d = |s: &str| s.parse::<u32>().map_err(|_| format!("bad depth {s:?}"));
        let mut k_policy = self.k;
        if self.map != SystemKind::Standard && k_policy == KPolicy::Auto {
            k_policy = KPolicy::Off;
        }
        Ok(RunConfig {
            map: self.map,
            eps_lo,
            eps_hi,
            d_start: d(&a)?,
            d_end: d(&b)?,
            mode: self.mode,
            max_period: self.max_period,
            add_periods: self.add_periods.clone(),
            k_policy,
            maxpow: self.maxpow,
            out: self.out.clone(),
            cache: self.cache.clone(),
            max_iterations: self.max_iterations,
            max_boxes: self.max_boxes,
            ..Default::default()
        })
    }

    fn init_workers(&self) {
        if let Some(n) = self.workers {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("worker pool: {e}");
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let fail = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(2)
    };
    match cli.cmd {
        Cmd::Run(args) => {
            args.init_workers();
            let cfg = match args.config() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match cmd_run(&cfg) {
                Ok(run) => {
                    println!("{}", serde_json::to_string_pretty(&run.result).expect("serializable"));
                    if run.result.ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => fail(e.to_string()),
            }
        }
        Cmd::Sweep(args) => {
            args.init_workers();
            let cfg = match args.config() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match cmd_sweep(&cfg) {
                Ok(rs) => {
                    print!("{}", indexpair::report::csv_table(&rs));
                    if rs.iter().all(|r| r.ok) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => fail(e.to_string()),
            }
        }
        Cmd::Report { dir } => match cmd_report(&dir) {
            Ok(files) => {
                println!("{}", files.csv.display());
                println!("{}", files.plot.display());
                for p in files.pairs {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e.to_string()),
        },
    }
}
