mod args;
mod bench;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use graphsplit::equilibrate::{check_equilibrated, equilibrate_with, rescale_even, EquilibrateOptions};
use graphsplit::generators::{generate, GenSpec};
use graphsplit::io::{load_matrix, read_problem_file, write_problem_file, write_problem_file_with_matrix};
use graphsplit::{Solver, Status};
use serde_json::json;

use args::{BenchArgs, Cli, Command, EquilibrateArgs, GenerateArgs, SolveArgs};

const EXIT_SOLVED: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_MAX_ITER: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors share the input-error code
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_SOLVED });
        }
    };
    let res = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Equilibrate(a) => cmd_equilibrate(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}").map_err(|e| e.to_string())
        }
    }
}

fn cmd_solve(a: SolveArgs) -> Result<u8, String> {
    let problem = read_problem_file(&a.problem).map_err(|e| e.to_string())?;
    let settings = a.settings.to_settings();
    let mut solver = Solver::new(problem, settings).map_err(|e| e.to_string())?;
    let r = solver.solve(None).map_err(|e| e.to_string())?;
    let mut report = serde_json::to_value(&r).map_err(|e| e.to_string())?;
    if a.summary_only {
        if let Some(obj) = report.as_object_mut() {
            for k in ["x", "y", "mu", "nu"] {
                obj.remove(k);
            }
        }
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    write_output(a.out.as_deref(), &text)?;
    Ok(match r.status {
        Status::Solved => EXIT_SOLVED,
        Status::MaxIterations => EXIT_MAX_ITER,
        Status::Degenerate => EXIT_DEGENERATE,
    })
}

fn cmd_generate(a: GenerateArgs) -> Result<u8, String> {
    let family = a.family.parse().map_err(|e: graphsplit::Error| e.to_string())?;
    let spec = GenSpec::new(family, a.m, a.n, a.seed);
    let (problem, meta) = generate(&spec).map_err(|e| e.to_string())?;
    if a.binary {
        let bin = a.out.with_extension("bin");
        write_problem_file_with_matrix(&a.out, &bin, &problem).map_err(|e| e.to_string())?;
    } else {
        write_problem_file(&a.out, &problem).map_err(|e| e.to_string())?;
    }
    let meta_path = a.out.with_extension("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| e.to_string())?;
    fs::write(&meta_path, text).map_err(|e| format!("{}: {e}", meta_path.display()))?;
    eprintln!(
        "wrote {} ({} x {}) and {}",
        a.out.display(),
        meta.rows,
        meta.cols,
        meta_path.display()
    );
    Ok(EXIT_SOLVED)
}

fn cmd_bench(a: BenchArgs) -> Result<u8, String> {
    let families = match bench::parse_families(&a.families) {
        Ok(f) => f,
        Err(msg) => {
            let mut cmd = Cli::command();
            cmd.build();
            let usage = cmd
                .find_subcommand_mut("bench")
                .map(|c| c.render_usage().to_string())
                .unwrap_or_default();
            return Err(format!("{msg}\n\n{usage}"));
        }
    };
    let nnz = a
        .nnz
        .iter()
        .map(|s| bench::parse_count(s))
        .collect::<Result<Vec<_>, _>>()?;
    if a.aspects.is_empty() || a.aspects.iter().any(|&r| r < 2) {
        return Err("aspect ratios must be at least 2".into());
    }
    if a.seeds == 0 {
        return Err("--seeds must be at least 1".into());
    }
    let plan = bench::plan(&families, &nnz, &a.aspects, a.seed, a.seeds);
    for inst in &plan {
        let (r, c) = bench::emitted_shape(&inst.spec);
        if r * c > a.max_elements {
            return Err(format!(
                "{} instance {r} x {c} exceeds the element budget {} (raise --max-elements)",
                inst.spec.family, a.max_elements
            ));
        }
    }
    let settings = a.settings.to_settings();
    let records = bench::run_all(&plan, &settings, a.jobs)?;
    bench::write_csv(&a.out, &records)?;
    let summary_path = bench::summary_path(&a.out);
    bench::write_csv(&summary_path, &bench::summarize(&plan, &records))?;
    let solved = records.iter().filter(|r| r.status == "Solved").count();
    eprintln!(
        "{} instances, {solved} solved; wrote {} and {}",
        records.len(),
        a.out.display(),
        summary_path.display()
    );
    Ok(EXIT_SOLVED)
}

fn cmd_equilibrate(a: EquilibrateArgs) -> Result<u8, String> {
    let mat = load_matrix(&a.matrix).map_err(|e| e.to_string())?;
    let (m, n) = mat.shape();
    let mut opts = EquilibrateOptions::for_shape(m, n);
    if let Some(g) = a.gamma {
        opts.gamma = g;
    }
    if let Some(e) = a.eps {
        opts.eps = e;
    }
    opts.max_iter = a.max_iter;
    let mut eq = equilibrate_with(&mat, &opts).map_err(|e| e.to_string())?;
    if a.rescale {
        eq = rescale_even(&eq, &mat).map_err(|e| e.to_string())?;
    }
    // the balance conditions are stated for D^p and E^p
    let report = check_equilibrated(&mat, &eq.d, &eq.e, eq.p, a.tol).map_err(|e| e.to_string())?;
    fs::create_dir_all(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let vec_text = |v: &[f64]| v.iter().map(|x| format!("{x:?}\n")).collect::<String>();
    let write = |name: &str, text: String| {
        let p = a.out.join(name);
        fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()))
    };
    write("d.txt", vec_text(&eq.d))?;
    write("e.txt", vec_text(&eq.e))?;
    let doc = json!({
        "m": m,
        "n": n,
        "gamma": eq.gamma,
        "eps": opts.eps,
        "iterations": eq.iterations,
        "converged": eq.converged,
        "rescaled": a.rescale,
        "tol": a.tol,
        "report": report,
    });
    write("report.json", serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())? + "\n")?;
    println!("{}", serde_json::to_string(&doc).map_err(|e| e.to_string())?);
    Ok(EXIT_SOLVED)
}
