use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use synergistic_harness::report::{audit_scenario, DEFAULT_AUDIT_SAMPLES};
use synergistic_harness::run::RunSummary;
use synergistic_harness::{
    export_csv, export_svg, load_config, report_consistency, run_many, run_scenario, HarnessError, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "synnav", version, about = "Simulate and check synergistic navigation controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trajectory as CSV.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
    },
    /// Print derived bounds, the saddle point and the quadruple audit.
    Check { config: PathBuf },
    /// Sample the quadruple conditions of the scenario's controller.
    Audit {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_AUDIT_SAMPLES)]
        samples: usize,
        /// Defaults to the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several scenarios and tabulate the outcomes.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn print_summary(name: &str, s: &RunSummary) {
    println!("scenario {name}");
    println!("  termination        {:?} at t = {:.3}", s.termination, s.final_time);
    println!("  samples            {}", s.samples);
    println!("  jumps              {} (bound {})", s.jump_count, s.jump_bound.map_or("-".into(), |b| b.to_string()));
    println!("  final |p - p_d|    {:.6e}", s.final_dist_to_dest);
    println!("  reach time         {}", s.reach_time.map_or("-".into(), |t| format!("{t:.3}")));
    if let Some(th) = s.final_theta {
        println!("  final theta        {th:.6e}");
    }
    if let Some(e) = s.final_input_tracking {
        println!("  final |u - k_bar|  {e:.6e}");
    }
    println!("  min d_o - epsilon  {:.6e}", s.min_safety_margin);
    println!("  max V rise (flow)  {:.3e}", s.max_flow_increase);
    if let Some(m) = s.min_jump_drop_margin {
        println!("  min jump drop - gap {m:.3e}");
    }
    if let Some(d) = s.max_input_jump {
        println!("  max input jump     {d:.3e}");
    }
    if s.projections > 0 {
        println!("  clamped steps      {}", s.projections);
    }
    println!("  properties         {}", if s.properties_hold() { "ok" } else { "VIOLATED" });
}

fn run(config: PathBuf, out: PathBuf, svg: bool) -> Result<bool, HarnessError> {
    let cfg = load_config(&config)?;
    let record = run_scenario(&cfg)?;
    std::fs::create_dir_all(&out).map_err(|source| HarnessError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let csv_path = out.join(format!("{}.csv", cfg.name));
    export_csv(&record, &csv_path)?;
    println!("wrote {}", csv_path.display());
    if svg {
        let svg_path = out.join(format!("{}.svg", cfg.name));
        export_svg(&record, &svg_path)?;
        println!("wrote {}", svg_path.display());
    }
    print_summary(&cfg.name, &record.summary);
    Ok(record.summary.properties_hold())
}

fn check(config: PathBuf) -> Result<bool, HarnessError> {
    let cfg = load_config(&config)?;
    let report = report_consistency(&cfg);
    print!("{report}");
    Ok(report.passed())
}

fn audit(config: PathBuf, samples: usize, seed: Option<u64>) -> Result<bool, HarnessError> {
    let cfg = load_config(&config)?;
    let report = audit_scenario(&cfg, samples, seed.unwrap_or(cfg.seed))?;
    println!("audit of {} ({})", cfg.name, cfg.controller);
    println!("  min V                {:.6e}", report.min_v);
    println!("  worst <grad V, flow> {:.6e} over {} samples", report.c3_worst, report.c3_samples);
    println!("  critical margin      {:.6e}", report.c4_margin);
    println!("  sublevel ray probe   {}", report.sublevel_probe_ok);
    for note in &report.notes {
        println!("  note: {note}");
    }
    println!("  result               {}", if report.passed() { "pass" } else { "FAIL" });
    Ok(report.passed())
}

fn compare(configs: Vec<PathBuf>) -> Result<bool, HarnessError> {
    let cfgs = configs
        .iter()
        .map(load_config)
        .collect::<Result<Vec<ScenarioConfig>, _>>()?;
    let results = run_many(&cfgs);
    println!(
        "{:<28} {:<14} {:>14} {:>6} {:>14} {:>10} {:>6}",
        "scenario", "controller", "final |p-p_d|", "jumps", "min d_o-eps", "reach t", "props"
    );
    let mut ok = true;
    for (cfg, res) in cfgs.iter().zip(results) {
        let record = res?;
        let s = &record.summary;
        ok &= s.properties_hold();
        println!(
            "{:<28} {:<14} {:>14.6e} {:>6} {:>14.6e} {:>10} {:>6}",
            cfg.name,
            cfg.controller.to_string(),
            s.final_dist_to_dest,
            s.jump_count,
            s.min_safety_margin,
            s.reach_time.map_or("-".into(), |t| format!("{t:.2}")),
            if s.properties_hold() { "ok" } else { "FAIL" }
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, svg } => run(config, out, svg),
        Command::Check { config } => check(config),
        Command::Audit { config, samples, seed } => audit(config, samples, seed),
        Command::Compare { configs } => compare(configs),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
