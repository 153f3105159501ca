use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpgeo::harness::{
    build_mesh, fit_table, read_csv, run_cell, run_experiment, write_outputs, DomainSpec, ExperimentConfig, FitMode,
    Norm, Reference,
};
use hpgeo::macro_mesh::{assign_refinement_patterns, build_geo_bl_mesh, validate_mesh, Domain};
use hpgeo::Error;

#[derive(Parser)]
#[command(name = "hpgeo", version, about = "hp-FEM on geometric boundary layer meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, validate and draw the mesh for one p.
    Mesh {
        #[command(flatten)]
        opts: Opts,
        #[arg(long, default_value_t = 2)]
        p: usize,
    },
    /// Solve once and report the error.
    Solve {
        #[command(flatten)]
        opts: Opts,
        #[arg(long, default_value_t = 4)]
        p: usize,
    },
    /// Full convergence sweep; writes CSV and SVG.
    Study {
        #[command(flatten)]
        opts: Opts,
    },
    /// Exponential rates from a study CSV.
    Fit {
        csv: PathBuf,
        /// `p` or `dofs` (N^{1/4}).
        #[arg(long, default_value = "p")]
        mode: String,
    },
}

#[derive(Args)]
struct Opts {
    /// TOML experiment file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// square, lshape, slit, or a custom domain file.
    #[arg(long)]
    domain: Option<String>,
    /// Comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    pmax: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// energy, balanced or h1.
    #[arg(long)]
    norm: Option<String>,
    /// Compare with the exact solution X(x)X(y) on the unit square.
    #[arg(long)]
    manufactured: bool,
    /// Record wall times in the CSV.
    #[arg(long)]
    timings: bool,
}

impl Opts {
    fn config(&self) -> hpgeo::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::new(Domain::Square, vec![1e-2]),
        };
        if let Some(d) = &self.domain {
            c.domain = DomainSpec::from(d.clone());
        }
        if !self.eps.is_empty() {
            c.eps = self.eps.clone();
        }
        if let Some(s) = self.sigma {
            c.sigma = s;
        }
        if let Some(p) = self.pmax {
            c.p_max = p;
            c.p_min = c.p_min.min(p);
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(n) = &self.norm {
            c.norm = match n.as_str() {
                "energy" => Norm::Energy,
                "balanced" => Norm::Balanced,
                "h1" => Norm::H1,
                _ => return Err(Error::Input(format!("unknown norm '{n}'"))),
            };
        }
        if self.manufactured {
            c.reference = Reference::Manufactured;
        }
        c.timings |= self.timings;
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Convergence { .. } | Error::Experiment { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> hpgeo::Result<()> {
    match cli.command {
        Command::Mesh { opts, p } => {
            let c = opts.config()?;
            let (poly, m) = c.domain.layout()?;
            let assign = assign_refinement_patterns(&m, &poly)?;
            let mesh = build_geo_bl_mesh(&m, &assign, c.patch_params(p, c.eps[0])?)?;
            let report = validate_mesh(&mesh, &poly);
            for w in &report.warnings {
                eprintln!("warning: {w:?}");
            }
            std::fs::create_dir_all(&c.out)?;
            let stem = format!("mesh_{}_p{p}", c.domain.name());
            std::fs::write(c.out.join(format!("{stem}.svg")), mesh.to_svg(800.0))?;
            std::fs::write(c.out.join(format!("{stem}.txt")), mesh.to_text())?;
            println!("{} elements, {} nodes, {} macro quads", mesh.num_elements(), mesh.nodes.len(), m.quads.len());
            if !report.clean() {
                for e in &report.errors {
                    eprintln!("error: {e:?}");
                }
                return Err(Error::Consistency("mesh validation failed".into()));
            }
        }
        Command::Solve { opts, p } => {
            let mut c = opts.config()?;
            c.p_max = c.p_max.max(p);
            build_mesh(&c, p, c.eps[0])?;
            for &eps in &c.eps {
                let r = run_cell(&c, p, eps).map_err(|e| Error::Experiment { p, eps, source: Box::new(e) })?;
                println!(
                    "eps={eps:e} p={p} L={} elements={} N={} error={:e} iters={}",
                    r.layers, r.elements, r.n, r.error, r.iterations
                );
            }
        }
        Command::Study { opts } => {
            let c = opts.config()?;
            let tables = run_experiment(&c)?;
            for t in &tables {
                for r in &t.rows {
                    println!("{} eps={:e} p={} N={} error={:e} iters={}", t.domain, t.eps, r.p, r.n, r.error, r.iterations);
                }
                match fit_table(t, FitMode::P) {
                    Ok(f) => println!("{} eps={:e}: b={:.4} R2={:.4}", t.domain, t.eps, f.b, f.r2),
                    Err(e) => println!("{} eps={:e}: no fit ({e})", t.domain, t.eps),
                }
            }
            for p in write_outputs(&tables, &c.out)? {
                println!("wrote {}", p.display());
            }
            for p in c.p_min..=c.p_max {
                let (_, mesh) = build_mesh(&c, p, c.eps[0])?;
                let path = c.out.join(format!("mesh_{}_p{p}.svg", c.domain.name()));
                std::fs::write(path, mesh.to_svg(800.0))?;
            }
        }
        Command::Fit { csv, mode } => {
            let mode: FitMode = mode.parse()?;
            for t in read_csv(&std::fs::read_to_string(csv)?)? {
                let f = fit_table(&t, mode)?;
                println!("{},{},{},b={},C={},R2={}", t.domain, t.eps, t.sigma, f.b, f.c, f.r2);
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
            ExitCode::from(exit_code(&e))
        }
    }
}
