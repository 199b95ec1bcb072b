use std::process::ExitCode;

use anyhow::{Context, Result};
use srcf::bench::{run_filter_bench, run_integral_bench, GrowthModel};
use srcf::config::{parse_config, BenchConfig, Command, ConfigError};
use srcf::report::{emit_report, filter_table, integral_table, rule_check_table};
use srcf::rule_check::rule_check;
use srcf::RngStream;

fn run(cfg: &BenchConfig) -> Result<bool> {
    let rng = RngStream::new(cfg.seed);
    let schemes = cfg.integration_schemes()?;
    let (table, ok) = match cfg.command {
        Command::IntegralBench => {
            let report = run_integral_bench(cfg.n, &schemes, cfg.runs, &rng)?;
            for m in report.reference_mismatches() {
                log::warn!("{m}");
            }
            (integral_table(&report), true)
        }
        Command::FilterBench => {
            let model = GrowthModel::new(cfg.n, cfg.q);
            let report = run_filter_bench(&model, &schemes, cfg.n_mc, cfg.steps, &rng)?;
            let mut ok = true;
            for s in &report.series {
                if !s.excluded.is_empty() {
                    log::warn!("{}: {} of {} runs diverged and were excluded", s.scheme, s.excluded.len(), cfg.n_mc);
                }
                if s.included_runs() == 0 {
                    log::error!("{}: every run diverged", s.scheme);
                    ok = false;
                }
            }
            (filter_table(&report), ok)
        }
        Command::RuleCheck => {
            let reports = schemes
                .iter()
                .map(|s| rule_check(cfg.n, s, cfg.draws, &rng))
                .collect::<Result<Vec<_>, _>>()?;
            (rule_check_table(&reports, cfg.seed), true)
        }
    };
    emit_report(&table, cfg.format, cfg.out.as_deref())
        .with_context(|| match &cfg.out {
            Some(p) => format!("writing {}", p.display()),
            None => "writing to stdout".to_string(),
        })?;
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = match parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(ConfigError::Cli(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(&cfg)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
