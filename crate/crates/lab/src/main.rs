//! Experiment driver: `lab <experiment> [--config FILE] [--key value ...]`.
//!
//! One invocation runs one experiment and writes a CSV of rows plus a JSON
//! summary (resolved config, build id, fits, pass/fail checks) into the
//! output directory. Exit codes: 0 pass, 1 acceptance-check failure,
//! 2 usage/config error, 3 numerical-resolution error.

mod config;
mod experiments;
mod report;

use gp_lab::error::LabError;

const USAGE: &str = "\
usage: lab <experiment> [--config FILE] [--key value ...]
       lab help-keys [experiment]

experiments:
  expsum-l4 expsum-lp divisor multiplier-scan dyadic-count endpoint-slice
  nls-converge hierarchy-residual rescale-check extremizer-sweep bump-verify

Flags mirror config keys one-to-one and override the file; `lab help-keys`
prints every key with its default. Exit codes: 0 pass, 1 acceptance-check
failure, 2 usage/config error, 3 numerical-resolution error.";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&args));
}

fn run(args: &[String]) -> i32 {
    match args.first().map(String::as_str) {
        None => {
            eprintln!("{USAGE}");
            return 2;
        }
        Some("help") | Some("--help") | Some("-h") => {
            println!("{USAGE}");
            return 0;
        }
        Some("help-keys") => match config::reference_page(args.get(1).map(String::as_str)) {
            Ok(page) => {
                print!("{page}");
                return 0;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        },
        _ => {}
    }
    let cli = match config::parse_cli(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}\n{USAGE}");
            return 2;
        }
    };
    let mut cfg = match config::resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let threads = match experiments::init_threads(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let t0 = std::time::Instant::now();
    let rep = match experiments::run(&mut cfg) {
        Ok(r) => r,
        Err(e) => {
            for n in &cfg.notices {
                eprintln!("{n}");
            }
            eprintln!("error: {e}");
            return match e {
                LabError::Resolution(_) => 3,
                _ => 2,
            };
        }
    };
    for n in &cfg.notices {
        println!("{n}");
    }
    match report::write_outputs(&rep, &cfg, threads) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    }
    for c in &rep.checks {
        println!(
            "check {}: {} — {:e} ({})",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.threshold
        );
    }
    println!("wall clock: {:.3} s", t0.elapsed().as_secs_f64());
    let pass = rep.pass();
    println!("result: {}", if pass { "PASS" } else { "FAIL" });
    if pass {
        0
    } else {
        1
    }
}
