use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use bessbt::benchmark::{run_benchmark, BenchmarkSpec, DURATIONS_H};
use bessbt::engine::{run_scenario, ScenarioFile};
use bessbt::market::{compute_indices, gen_synthetic, ingest_auctions, ingest_trades, write_indices, MarketData, SyntheticSpec};
use bessbt::model::{Market, MARKET_ZONE};
use bessbt::report::{report_ledgers, write_summary};

#[derive(Parser)]
#[command(name = "bessbt", version, about = "Battery arbitrage backtests on German power spot markets")]
struct Cli {
    /// Scenario file (TOML); command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads for the benchmark matrix (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding auctions.csv and trades.csv.
    #[arg(long, default_value = "data")]
    data: PathBuf,
}

#[derive(Args)]
struct RangeArgs {
    /// First delivery day; defaults to the first day with data.
    #[arg(long)]
    start: Option<NaiveDate>,
    /// Number of delivery days; defaults to every day with ticks.
    #[arg(long)]
    days: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate auction and trade files and print their size.
    Ingest(DataArgs),
    /// Compute ID1/ID3/IDFULL from a trades file into <out>/indices.csv.
    Indices {
        #[arg(long)]
        trades: PathBuf,
    },
    /// Write a seeded synthetic market into <out>.
    GenSynthetic {
        #[arg(long, default_value = "2023-01-01")]
        start: NaiveDate,
        #[arg(long, default_value_t = 7)]
        days: u32,
        /// Generator parameters (TOML).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Run one scenario and write its ledger, summary and trades CSV.
    Backtest {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        market: Option<Market>,
        /// Battery discharge duration in hours.
        #[arg(long)]
        duration_h: Option<f64>,
        /// Write the last optimized window as JSON.
        #[arg(long)]
        dump_window: Option<PathBuf>,
    },
    /// Run the market x duration matrix and write the result tables.
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        range: RangeArgs,
        /// Comma-separated markets (default: all seven).
        #[arg(long, value_delimiter = ',')]
        markets: Option<Vec<Market>>,
        /// Comma-separated durations in hours (default: 1..=5).
        #[arg(long, value_delimiter = ',')]
        durations: Option<Vec<u32>>,
    },
    /// Render per-interval series and summaries for ledgers.
    Report {
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
    },
}

fn load_data(dir: &Path) -> anyhow::Result<MarketData> {
    let auctions = ingest_auctions(dir.join("auctions.csv"))?;
    let store = ingest_trades(dir.join("trades.csv"))?;
    Ok(MarketData::new(store, auctions))
}

fn data_range(data: &MarketData, range: &RangeArgs) -> anyhow::Result<(NaiveDate, u32)> {
    let days: Vec<NaiveDate> = if data.store.is_empty() {
        data.auctions.iter().map(|(_, p, _)| p.delivery_day(MARKET_ZONE)).collect()
    } else {
        data.store.products().map(|p| p.delivery_day(MARKET_ZONE)).collect()
    };
    let (Some(first), Some(last)) = (days.iter().min(), days.iter().max()) else {
        bail!("input data is empty");
    };
    let start = range.start.unwrap_or(*first);
    let default_days = ((*last - start).num_days() + 1).max(1) as u32;
    Ok((start, range.days.unwrap_or(default_days)))
}

fn scenario_file(cli: &Cli) -> anyhow::Result<ScenarioFile> {
    match &cli.config {
        Some(path) => Ok(ScenarioFile::load(path)?),
        None => Ok(ScenarioFile::default()),
    }
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(args) => {
            let data = load_data(&args.data)?;
            println!(
                "auctions: {} prices, trades: {} across {} products",
                data.auctions.len(),
                data.store.len(),
                data.store.products().count()
            );
        }
        Command::Indices { trades } => {
            let store = ingest_trades(trades)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("indices.csv");
            write_indices(&compute_indices(&store), create(&path)?)?;
            println!("{}", path.display());
        }
        Command::GenSynthetic { start, days, spec } => {
            let mut s = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str::<SyntheticSpec>(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => SyntheticSpec::default(),
            };
            s.start = *start;
            s.days = *days;
            let data = gen_synthetic(cli.seed, &s)?;
            let (a, t) = data.write_to_dir(&cli.out)?;
            println!("{}\n{}", a.display(), t.display());
        }
        Command::Backtest {
            data,
            range,
            market,
            duration_h,
            dump_window,
        } => {
            let market_data = load_data(&data.data)?;
            let (start, days) = data_range(&market_data, range)?;
            let mut file = scenario_file(&cli)?;
            file.market = market.or(file.market);
            file.bess.duration_h = duration_h.or(file.bess.duration_h);
            if range.start.is_some() {
                file.start = range.start;
            }
            if range.days.is_some() {
                file.days = range.days;
            }
            let cfg = file.resolve(start, days)?;
            let run = match run_scenario(&cfg, &market_data) {
                Ok(run) => run,
                Err(bessbt::Error::Infeasible { at, reason, dump }) => {
                    if let Some(path) = dump_window {
                        serde_json::to_writer_pretty(create(path)?, &dump)?;
                    }
                    bail!("window at {at} infeasible: {reason}");
                }
                Err(e) => return Err(e.into()),
            };
            std::fs::create_dir_all(&cli.out)?;
            let ledger_path = cli.out.join("ledger.ndjson");
            run.ledger.save(&ledger_path)?;
            write_summary(&run.ledger, create(&cli.out.join("summary.json"))?)?;
            run.ledger.write_trades_csv(create(&cli.out.join("trades.csv"))?)?;
            if let (Some(path), Some(dump)) = (dump_window, &run.last_window) {
                serde_json::to_writer_pretty(create(path)?, dump)?;
            }
            let report = bessbt::accounting::ScenarioReport::from_ledger(&run.ledger);
            println!(
                "{} {:.0} h: profit {:.2} EUR, {:.3} cycles/day, {} trades, {} skipped -> {}",
                cfg.market,
                cfg.bess.e_max() / cfg.bess.p_sell_max(),
                report.total_profit,
                report.daily_cycles,
                report.trade_count,
                report.skipped_count,
                ledger_path.display()
            );
        }
        Command::Benchmark {
            data,
            range,
            markets,
            durations,
        } => {
            let market_data = load_data(&data.data)?;
            let (start, days) = data_range(&market_data, range)?;
            let spec = BenchmarkSpec {
                markets: markets.clone().unwrap_or_else(|| Market::ALL.to_vec()),
                durations_h: durations.clone().unwrap_or_else(|| DURATIONS_H.to_vec()),
                template: scenario_file(&cli)?,
                start,
                days,
                jobs: cli.jobs,
            };
            let result = run_benchmark(&spec, &market_data)?;
            result.write_tables(&cli.out)?;
            print!("{}", result.profits_table().to_text());
            let failures = result.failures();
            if !failures.is_empty() {
                for cell in &failures {
                    if let Err(e) = &cell.outcome {
                        eprintln!("{} {}h failed: {e}", cell.market, cell.duration_h);
                    }
                }
                bail!("{} of {} cells failed", failures.len(), result.cells.len());
            }
        }
        Command::Report { ledgers } => {
            for files in report_ledgers(ledgers, &cli.out)? {
                println!("{}\n{}", files.series.display(), files.summary.display());
            }
        }
    }
    Ok(())
}
