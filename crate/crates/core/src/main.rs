use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdflow::cli::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pdflow", version, about = "Run pseudo-differential flow experiments from config files")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write report.json, series/*.csv and timings.json.
    Run {
        /// Config file, or `example:<name>` for a shipped example.
        config: String,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config and print it with every default filled in.
    Validate { config: String },
    /// List the shipped example configs.
    ListExamples {
        /// Print the config text of one example.
        #[arg(long)]
        show: Option<String>,
    },
}

fn load(spec: &str) -> pdflow::Result<ExperimentConfig> {
    if let Some(name) = spec.strip_prefix("example:") {
        let text = cli::example(name).ok_or_else(|| pdflow::Error::Config(vec![format!("no shipped example named '{name}'")]))?;
        return cli::validate(text, Path::new("."));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)?;
    cli::validate(&text, path.parent().unwrap_or(Path::new(".")))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let res = match args.cmd {
        Cmd::Validate { config } => load(&config).map(|c| {
            print!("{}", c.to_text());
            true
        }),
        Cmd::ListExamples { show } => match show {
            Some(name) => match cli::example(&name) {
                Some(t) => {
                    print!("{t}");
                    Ok(true)
                }
                None => Err(pdflow::Error::Config(vec![format!("no shipped example named '{name}'")])),
            },
            None => {
                for (name, text) in cli::EXAMPLES {
                    println!("{name:<24} {}", cli::example_summary(text));
                }
                Ok(true)
            }
        },
        Cmd::Run { config, output } => load(&config).and_then(|c| {
            let dir = output.unwrap_or_else(|| c.output.clone());
            let workers = cli::workers_from_env()?;
            let out = cli::with_workers(workers, || cli::run(&c))??;
            cli::write_outputs(&out, &dir)?;
            for ch in &out.report.checks {
                let v = ch.value.map_or("-".to_string(), |v| format!("{v:.6e}"));
                println!("{:<8} {:<36} {:>14}  {}", format!("{:?}", ch.status).to_uppercase(), ch.name, v, ch.tolerance);
            }
            println!("{} -> {}", if out.report.pass { "PASS" } else { "FAIL" }, dir.display());
            Ok(out.report.pass)
        }),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
