use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use graphsplit::generators::{generate, Family, GenSpec};
use graphsplit::{Solver, SolverSettings, Status};
use serde::Serialize;

/// One solved instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub family: String,
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    pub iterations: usize,
    pub status: String,
    pub solve_time_s: f64,
    pub setup_time_s: f64,
    pub objective: f64,
    pub r_pri: f64,
    pub r_dual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub family: String,
    pub target_nnz: usize,
    pub instances: usize,
    pub solved: usize,
    pub mean_iterations: f64,
    pub mean_solve_time_s: f64,
    pub mean_setup_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub target_nnz: usize,
    pub spec: GenSpec,
}

pub fn parse_families(raw: &[String]) -> Result<Vec<Family>, String> {
    let names: Vec<&str> = raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err("no families given".into());
    }
    let mut out = Vec::new();
    for name in names {
        if name.eq_ignore_ascii_case("all") {
            out.extend(Family::ALL);
        } else {
            out.push(name.parse::<Family>().map_err(|e| e.to_string())?);
        }
    }
    let mut seen = Vec::new();
    out.retain(|f| {
        let fresh = !seen.contains(f);
        seen.push(*f);
        fresh
    });
    Ok(out)
}

/// Accepts integers and scientific notation such as `1e4`.
pub fn parse_count(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 1.0 && v.fract() == 0.0 && v < 1e15 => Ok(v as usize),
        _ => Err(format!("invalid count `{s}`")),
    }
}

/// The sweep in output order: family, target size, aspect, seed.
pub fn plan(families: &[Family], nnz: &[usize], aspects: &[usize], seed: u64, seeds: u64) -> Vec<Instance> {
    let mut out = Vec::new();
    for &family in families {
        for &target in nnz {
            for &aspect in aspects {
                let (m, n) = family.shape_for_nnz(target, aspect);
                for s in seed..seed + seeds {
                    out.push(Instance {
                        target_nnz: target,
                        spec: GenSpec::new(family, m, n, s),
                    });
                }
            }
        }
    }
    out
}

/// Rows and columns of the matrix an instance will emit.
pub fn emitted_shape(spec: &GenSpec) -> (usize, usize) {
    match spec.family {
        Family::EntropyMax | Family::Portfolio => (spec.m + 1, spec.n),
        _ => (spec.m, spec.n),
    }
}

pub fn run_one(inst: &Instance, settings: &SolverSettings) -> Result<BenchRecord, String> {
    let (problem, meta) = generate(&inst.spec).map_err(|e| e.to_string())?;
    let mut solver = Solver::new(problem, settings.clone()).map_err(|e| format!("{}: {e}", inst.spec.family))?;
    let r = solver.solve(None).map_err(|e| format!("{}: {e}", inst.spec.family))?;
    Ok(BenchRecord {
        family: inst.spec.family.name().to_string(),
        m: meta.rows,
        n: meta.cols,
        nnz: meta.rows * meta.cols,
        iterations: r.iterations,
        status: status_name(r.status).to_string(),
        solve_time_s: r.solve_time,
        setup_time_s: r.setup_time,
        objective: r.objective,
        r_pri: r.primal_residual,
        r_dual: r.dual_residual,
    })
}

pub fn status_name(s: Status) -> &'static str {
    match s {
        Status::Solved => "Solved",
        Status::MaxIterations => "MaxIterations",
        Status::Degenerate => "Degenerate",
    }
}

/// Runs all instances on up to `jobs` threads. Results come back in plan
/// order regardless of scheduling.
pub fn run_all(plan: &[Instance], settings: &SolverSettings, jobs: usize) -> Result<Vec<BenchRecord>, String> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<BenchRecord, String>>>> = Mutex::new(vec![None; plan.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, plan.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= plan.len() {
                    break;
                }
                let rec = run_one(&plan[i], settings);
                slots.lock().unwrap()[i] = Some(rec);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

pub fn summarize(plan: &[Instance], records: &[BenchRecord]) -> Vec<SummaryRecord> {
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, usize), Vec<&BenchRecord>> = BTreeMap::new();
    for (inst, rec) in plan.iter().zip(records) {
        let key = (rec.family.clone(), inst.target_nnz);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(rec);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let k = g.len() as f64;
            SummaryRecord {
                family: key.0.clone(),
                target_nnz: key.1,
                instances: g.len(),
                solved: g.iter().filter(|r| r.status == "Solved").count(),
                mean_iterations: g.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
                mean_solve_time_s: g.iter().map(|r| r.solve_time_s).sum::<f64>() / k,
                mean_setup_time_s: g.iter().map(|r| r.setup_time_s).sum::<f64>() / k,
            }
        })
        .collect()
}

pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "bench".into());
    out.with_file_name(format!("{stem}_summary.csv"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}
