use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use merw::WeightedGraph;
use merw_lab::{compare, init_threads, run, verify, ExperimentConfig, LabError, LabResult};

#[derive(Parser)]
#[command(name = "merw-lab", version, about = "Maximal entropy random walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiment configs (in parallel when several) and write their
    /// artifacts plus manifest.json.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output directory; overrides `output` in the config. Single config only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-hash the artifacts and re-run the recorded config.
    Verify { manifest: PathBuf },
    /// Metric deltas and field distances between two runs of one kind.
    Compare {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Inspect a graph file.
    Graph {
        #[arg(value_enum)]
        what: GraphQuery,
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphQuery {
    Degrees,
    Period,
    Eigen,
}

fn graph_query(what: GraphQuery, g: &WeightedGraph) -> LabResult<String> {
    let mut s = String::new();
    match what {
        GraphQuery::Degrees => {
            s.push_str("vertex,out_degree,in_degree\n");
            let (out, inn) = (g.degrees(), g.transpose().degrees());
            for i in 0..g.n() {
                s.push_str(&format!("{i},{},{}\n", merw::io::fmt17(out[i]), merw::io::fmt17(inn[i])));
            }
        }
        GraphQuery::Period => {
            let p = merw::graph::period(g)?;
            s.push_str(&format!("period {}\n", p.period));
            for c in 0..p.period {
                let m: Vec<String> = p.class_members(c).iter().map(|v| v.to_string()).collect();
                s.push_str(&format!("class {c}: {}\n", m.join(" ")));
            }
        }
        GraphQuery::Eigen => {
            let e = merw::dominant_eigenpair(g, &Default::default())?;
            s.push_str(&format!("lambda {}\n", merw::io::fmt17(e.lambda)));
            s.push_str(&merw::io::eigenpair_table(&e).to_csv()?);
        }
    }
    Ok(s)
}

fn dispatch(cli: Cli) -> LabResult<()> {
    init_threads()?;
    match cli.command {
        Command::Run { configs, out } => {
            if out.is_some() && configs.len() > 1 {
                return Err(LabError::Config("--out applies to a single config".into()));
            }
            let cfgs = configs
                .iter()
                .map(|p| ExperimentConfig::from_file(p).map_err(|e| LabError::Config(format!("{}: {e}", p.display()))))
                .collect::<LabResult<Vec<_>>>()?;
            let runs: Vec<_> = cfgs.par_iter().map(|c| run(c, out.as_deref())).collect();
            let mut first_err = None;
            for (path, r) in configs.iter().zip(runs) {
                match r {
                    Ok((manifest, m)) => {
                        println!("{} {} files, {:.3} s, manifest {}", m.kind, m.files.len(), m.wall_time_seconds, manifest.display())
                    }
                    Err(e) => {
                        if configs.len() > 1 {
                            eprintln!("merw-lab: {}: {e}", path.display());
                        }
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Command::Verify { manifest } => {
            let r = verify(&manifest)?;
            for f in &r.stale {
                eprintln!("modified on disk: {f}");
            }
            for f in &r.nondeterministic {
                eprintln!("re-run differs: {f}");
            }
            if !r.ok() {
                return Err(LabError::Determinism(format!(
                    "{} of {} files failed",
                    r.stale.len() + r.nondeterministic.len(),
                    r.files_checked
                )));
            }
            println!("verified {} files", r.files_checked);
        }
        Command::Compare { left, right, json } => {
            let r = compare(&left, &right)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            } else {
                print!("{}", r.render());
            }
        }
        Command::Graph { what, file } => {
            let g = merw::io::read_graph(&file)?;
            print!("{}", graph_query(what, &g)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("merw-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
