//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines are always visible.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use numsolve::bench::{
    run_experiment, timing_sweep, uniform_configs, ExperimentSpec, FlowSource, TimingOptions,
};
use numsolve_core::oracle::{analytic_single_link, default_fd_steps, finite_diff_grad, grid_refine_optimum, vertex_lp_optimum, FdMode};
use numsolve_core::solvers::{
    self, agm_error_bound, expnum_update, momentum_coeff, pgd_smooth_error_bound, CBound, StepSize,
};
use numsolve_core::{
    InitPoint, NoClock, ProblemInstance, RoutingMatrix, SolverConfig, SolverKind, Topology,
    TraceStride, UtilityParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> Topology {
    numsolve::parse_topology(&fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

/// `d ≤ max_flows` flows over `|E| ≤ max_links` links; every flow crosses
/// at least one link.
fn random_instance(rng: &mut ChaCha8Rng, max_flows: usize, max_links: usize, alpha: f64) -> ProblemInstance {
    let d = rng.gen_range(1..=max_flows);
    let links = rng.gen_range(1..=max_links);
    let mut entries = Vec::new();
    for s in 0..d {
        let mut any = false;
        for e in 0..links {
            if rng.gen_bool(0.3) {
                entries.push((e, s, 1.0));
                any = true;
            }
        }
        if !any {
            entries.push((rng.gen_range(0..links), s, 1.0));
        }
    }
    let caps = (0..links).map(|_| rng.gen_range(1.0..50.0)).collect();
    let a = RoutingMatrix::from_entries(links, d, &entries).unwrap();
    let xi = if alpha == 0.0 { 0.0 } else { 0.5 };
    ProblemInstance::new(a, caps, UtilityParams::new(alpha, xi).unwrap(), 2.0).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let alpha = [0.0, 1.0, 2.0][i % 3];
        let inst = random_instance(&mut rng, 20, 10, alpha);
        let x: Vec<f64> = (0..inst.flow_count()).map(|_| rng.gen_range(0.1..20.0)).collect();
        let g = inst.objective_grad(&x).unwrap();
        let fd = finite_diff_grad(&inst, &x, &default_fd_steps(&x));
        if fd.modes.iter().any(|m| *m != FdMode::Central) {
            return Err(format!("instance {i}: a coordinate fell back to a one-sided stencil"));
        }
        for (a, b) in g.iter().zip(&fd.grad) {
            worst = worst.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("100 instances, max relative error {worst:.2e}, {secs:.2} s");
    if worst < 1e-6 && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn smoothness_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0usize;
    let mut tightest = 0.0f64;
    let instances = 30;
    let pairs = 10_000;
    for i in 0..instances {
        let inst = random_instance(&mut rng, 20, 10, [0.0, 1.0, 2.0][i % 3]);
        let beta = inst.certify().beta_v;
        let d = inst.flow_count();
        let mut eval = inst.evaluator();
        let (mut gx, mut gy) = (vec![0.0; d], vec![0.0; d]);
        for k in 0..pairs {
            // half the pairs near the origin, where the utility curvature peaks
            let hi = if k % 2 == 0 { 1.0 } else { 60.0 };
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..hi)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..hi)).collect();
            eval.gradient(&x, &mut gx);
            eval.gradient(&y, &mut gy);
            let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let (lhs, rhs) = (norm(&dg), beta * norm(&dx));
            if lhs > rhs * (1.0 + 1e-9) {
                violations += 1;
            }
            if rhs > 0.0 {
                tightest = tightest.max(lhs / rhs);
            }
        }
    }
    let detail = format!(
        "{instances} instances x {pairs} pairs, {violations} violations, largest ratio {tightest:.3}"
    );
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn single_link(flows: usize, c: f64, utility: UtilityParams) -> ProblemInstance {
    let entries: Vec<_> = (0..flows).map(|s| (0, s, 1.0)).collect();
    let a = RoutingMatrix::from_entries(1, flows, &entries).unwrap();
    ProblemInstance::new(a, vec![c], utility, 2.0).unwrap()
}

fn analytic_stationary_point() -> Outcome {
    let inst = single_link(1, 10.0, UtilityParams::new(0.0, 0.0).unwrap());
    let oracle = analytic_single_link(10.0, 2.0, 1).map_err(|e| e.to_string())?;
    let beta = inst.certify().beta_v;
    let cfg = SolverConfig::new(SolverKind::AgmFunctionRestart, 10_000).with_step(1.0 / beta);
    let sol = solvers::run_agm_restart(&inst, &cfg).map_err(|e| e.to_string())?;
    let x = sol.point[0];
    let v = inst.objective_value(&sol.point).unwrap();
    let target = -10.0 + 2.0 * 2f64.ln();
    let (dx, dv) = ((x - 10.0).abs(), (v - target).abs());
    let detail = format!(
        "|x-10| = {dx:.2e}, |V-(-10+2 ln 2)| = {dv:.2e}, oracle value gap {:.2e}",
        (oracle.value - target).abs()
    );
    if dx < 1e-4 && dv < 1e-6 && (oracle.value - target).abs() < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_instances() -> Vec<(ProblemInstance, String)> {
    let mut out = Vec::new();
    for n in 1..=3 {
        out.push((single_link(n, 10.0, UtilityParams::new(0.0, 0.0).unwrap()), format!("analytic n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..12 {
        let alpha = [1.0, 2.0][i % 2];
        out.push((random_instance(&mut rng, 3, 3, alpha), format!("grid #{i} alpha={alpha}")));
    }
    let serial = RoutingMatrix::from_entries(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
    let inst = ProblemInstance::new(serial, vec![7.0, 12.0], UtilityParams::new(0.0, 0.0).unwrap(), 2.0).unwrap();
    out.push((inst, "grid serial alpha=0".into()));
    out
}

fn convergence_bounds() -> Outcome {
    let mut violations = Vec::new();
    let mut checks = 0;
    let checkpoints = [1, 10, 100, 1000];
    let instances = oracle_instances();
    for (inst, name) in &instances {
        let oracle = match numsolve::bench::analytic_oracle(inst).map_err(|e| e.to_string())? {
            Some(r) => r,
            None => grid_refine_optimum(inst, None, 1e-7).map_err(|e| e.to_string())?,
        };
        let beta = inst.certify().beta_v;
        let radius_sq: f64 = oracle.point.iter().map(|v| v * v).sum();
        for kind in [SolverKind::Agm, SolverKind::PgdSmooth] {
            let cfg = SolverConfig::new(kind, 1000).with_init(InitPoint::Zeros);
            let sol = solvers::solve(inst, &cfg, &mut NoClock).map_err(|e| e.to_string())?;
            for t in checkpoints {
                let rec = sol.trace.records[t - 1];
                let bound = match kind {
                    SolverKind::Agm => agm_error_bound(beta, radius_sq, t),
                    _ => pgd_smooth_error_bound(beta, radius_sq, t),
                };
                let gap = rec.objective - oracle.value;
                checks += 1;
                if gap > bound + oracle.tolerance {
                    violations.push(format!("{name} {kind} T={t}: gap {gap:.3e} > bound {bound:.3e}"));
                }
            }
        }
    }
    let detail = format!("{} instances, {checks} checkpoint checks, {} violations", instances.len(), violations.len());
    if violations.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", violations.join("; ")))
    }
}

fn lp_agreement() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;

    let throughput = UtilityParams::new(0.0, 0.0).unwrap();
    let mut specs = Vec::new();
    let mut one = ExperimentSpec::new(Topology::new(2, &[(0, 1, 10.0)]).unwrap(), throughput, 2.0, Vec::new());
    one.cap_max = None;
    one.flows = FlowSource::Listed((0..3).map(|id| numsolve_core::Flow { id, src: 0, dst: 1 }).collect());
    specs.push(("3 flows / 1 link", one));
    specs.push(("three-node ring, all pairs", ExperimentSpec::new(fixture("two_link.txt"), throughput, 2.0, Vec::new())));
    let ring = Topology::new(4, &[(0, 1, 40.0), (1, 2, 90.0), (2, 3, 65.0), (3, 0, 25.0)]).unwrap();
    let mut ring_spec = ExperimentSpec::new(ring, throughput, 2.0, Vec::new());
    ring_spec.flows = FlowSource::Sampled(8);
    ring_spec.seed = 5;
    specs.push(("four-node ring, 8 sampled flows", ring_spec));

    for (name, mut spec) in specs {
        spec.solvers = uniform_configs(
            &[SolverKind::AgmFunctionRestart, SolverKind::Agm],
            100_000,
            StepSize::Auto,
            CBound::Auto,
            &InitPoint::Auto,
            TraceStride::Off,
        );
        let inst = spec.build_instance().map_err(|e| e.to_string())?;
        let u_star = vertex_lp_optimum(&inst).map_err(|e| e.to_string())?.value;
        let table = numsolve::utility_comparison(&spec).map_err(|e| e.to_string())?;
        let (fr, agm) = (&table.rows[0], &table.rows[1]);
        let rel = fr.error.unwrap().abs() / u_star;
        ok &= rel <= 1e-3;
        lines.push(format!(
            "{name}: U*={u_star}, agm-fr rel {rel:.2e} residual {:.2e}, agm signed {:.2e}",
            fr.exact_penalty,
            agm.error.unwrap()
        ));
    }
    if ok {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn expnum_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let iterations = 10_000;
    let mut checked = 0usize;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..12 {
        let inst = random_instance(&mut rng, 20, 10, [0.0, 1.0, 2.0][i % 3]);
        let d = inst.flow_count();
        // the prescribed step, then a much more aggressive one
        for scale in [1.0, 100.0] {
            let base = SolverConfig::new(SolverKind::ExpNum, iterations).with_trace(TraceStride::Off);
            let gamma = solvers::default_step(&inst, &base).unwrap().gamma * scale;
            let cfg = base.with_step(gamma);
            let c: f64 = inst.capacities().iter().sum();
            let mut x = vec![c / (d as f64 + 1.0); d];
            let mut grad = vec![0.0; d];
            let mut eval = inst.evaluator();
            for t in 1..=iterations {
                eval.gradient(&x, &mut grad);
                grad.iter_mut().for_each(|g| *g *= gamma);
                expnum_update(&mut x, &grad, c);
                let sum: f64 = x.iter().sum();
                checked += 1;
                worst_excess = worst_excess.max(sum / c - 1.0);
                if x.iter().any(|v| v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)) || sum > c * (1.0 + 1e-12) {
                    return Err(format!("instance {i}, step x{scale}, iteration {t}: sum {sum}, C {c}"));
                }
            }
            let sol = solvers::run_expnum(&inst, &cfg).map_err(|e| e.to_string())?;
            if sol.point != x {
                return Err(format!("instance {i}: replayed iterates differ from the solver's"));
            }
        }
    }
    Ok(format!("{checked} iterates checked, max sum/C - 1 = {worst_excess:.2e}"))
}

fn qualitative_ordering() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (alpha, xi) in [(0.0, 0.0), (1.0, 0.5)] {
        let kinds = [SolverKind::PgdSmooth, SolverKind::ExpNum, SolverKind::Agm, SolverKind::AgmFunctionRestart];
        let solvers = uniform_configs(&kinds, 10_000, StepSize::Auto, CBound::Auto, &InitPoint::Auto, TraceStride::Every(1));
        let utility = UtilityParams::new(alpha, xi).unwrap();
        let spec = ExperimentSpec::new(fixture("geant_like.txt"), utility, 2.0, solvers);
        let report = run_experiment(&spec).map_err(|e| e.to_string())?;
        if report.flows != 506 || report.links != 74 {
            return Err(format!("unexpected instance size {}x{}", report.flows, report.links));
        }
        let err: Vec<f64> = report
            .runs
            .iter()
            .map(|r| r.solution.trace.records.last().unwrap().objective - report.reference.value)
            .collect();
        let (pgd, expnum, agm, fr) = (err[0], err[1], err[2], err[3]);
        let holds = agm < expnum && expnum < pgd && fr <= agm;
        ok &= holds;
        lines.push(format!(
            "alpha={alpha}: pgd {pgd:.2e}, expnum {expnum:.2e}, agm {agm:.2e}, agm-fr {fr:.2e}"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    let detail = format!("{}; {secs:.1} s", lines.join("; "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn momentum_recurrence() -> Outcome {
    let mut a = 1.0f64;
    for t in 0..=1_000_000u32 {
        let next = momentum_coeff(a);
        let weight = (a - 1.0) / next;
        if a < 1.0 + t as f64 / 2.0 || !(0.0..1.0).contains(&weight) {
            return Err(format!("t={t}: a={a}, weight={weight}"));
        }
        a = next;
    }
    Ok(format!("a_0 = 1 through t = 10^6, final a = {a:.1}"))
}

fn scaling() -> Outcome {
    let kinds = [SolverKind::PgdSmooth, SolverKind::ExpNum, SolverKind::Agm, SolverKind::AgmFunctionRestart];
    let solvers = uniform_configs(&kinds, 1000, StepSize::Auto, CBound::Auto, &InitPoint::Auto, TraceStride::Off);
    let mut spec = ExperimentSpec::new(fixture("geant_like.txt"), UtilityParams::proportional(), 2.0, solvers);
    spec.seed = 9;
    let counts = [100, 1000, 10_000];
    let rows = timing_sweep(&spec, &counts, TimingOptions::default()).map_err(|e| e.to_string())?;
    let time = |name: &str, d: usize| {
        rows.iter().find(|r| r.name == name && r.flows == d).and_then(|r| r.mean_iter_s).unwrap()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in kinds {
        let name = kind.label();
        let t: Vec<f64> = counts.iter().map(|&d| time(name, d)).collect();
        let growth = [t[1] / t[0], t[2] / t[1]];
        ok &= growth.iter().all(|g| *g <= 15.0);
        parts.push(format!(
            "{name} {:.1e}/{:.1e}/{:.1e} s (x{:.1}, x{:.1})",
            t[0], t[1], t[2], growth[0], growth[1]
        ));
    }
    for &d in &counts {
        let t: Vec<f64> = ["pgd", "expnum", "agm"].iter().map(|n| time(n, d)).collect();
        let spread = t.iter().cloned().fold(0.0, f64::max) / t.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= spread <= 2.0;
        parts.push(format!("d={d} spread x{spread:.2}"));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["numsolve"];
    full.extend_from_slice(args);
    let code = numsolve::cli::run(full, &mut out, &mut err);
    (code, out, err)
}

fn strip_wall_time(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let x = fs::read_to_string(a.join(name)).map_err(|e| e.to_string())?;
        let y = fs::read_to_string(b.join(name)).map_err(|e| e.to_string())?;
        let same = if x.starts_with("iter,") { strip_wall_time(&x) == strip_wall_time(&y) } else { x == y };
        if !same {
            return Err(format!("{name:?} differs"));
        }
    }
    Ok(names.len())
}

fn determinism() -> Outcome {
    let geant = fixture_path("geant_like.txt");
    let solve = ["solve", "--topology", &geant, "--solver", "agm-fr", "--iters", "2000", "--flows", "200", "--seed", "17"];
    let (c1, o1, e1) = run_cli(&solve);
    let (c2, o2, e2) = run_cli(&solve);
    if c1 != 0 || c2 != 0 {
        return Err(format!("solve exited {c1}/{c2}: {}", String::from_utf8_lossy(&e1)));
    }
    let (o1, o2) = (String::from_utf8(o1).unwrap(), String::from_utf8(o2).unwrap());
    if strip_wall_time(&o1) != strip_wall_time(&o2) || e1 != e2 {
        return Err("solve outputs differ".into());
    }
    for solver in ["pgd", "pgd-lipschitz", "expnum", "agm-gr"] {
        let args = ["solve", "--topology", &geant, "--solver", solver, "--iters", "300", "--flows", "50", "--seed", "3"];
        let (a, b) = (run_cli(&args), run_cli(&args));
        let text = |v: &[u8]| strip_wall_time(&String::from_utf8_lossy(v));
        if a.0 != 0 || text(&a.1) != text(&b.1) || a.2 != b.2 {
            return Err(format!("solve --solver {solver} is not reproducible"));
        }
    }

    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [d1.path(), d2.path()] {
        let args = [
            "compare", "--topology", &geant, "--iters", "1000", "--flows", "120", "--seed", "23",
            "--solvers", "pgd,expnum,agm,agm-fr,agm-gr", "--out", dir.to_str().unwrap(),
        ];
        let (code, _, err) = run_cli(&args);
        if code != 0 {
            return Err(format!("compare exited {code}: {}", String::from_utf8_lossy(&err)));
        }
    }
    let files = compare_dirs(d1.path(), d2.path())?;
    Ok(format!("5 solve configurations and a {files}-file compare report reproduced"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient oracle", gradient_oracle),
        ("smoothness certificate", smoothness_certificate),
        ("analytic stationary point", analytic_stationary_point),
        ("accelerated and smooth PGD bounds", convergence_bounds),
        ("LP agreement", lp_agreement),
        ("Exp-NUM feasible region", expnum_invariance),
        ("qualitative ordering", qualitative_ordering),
        ("momentum recurrence", momentum_recurrence),
        ("per-iteration scaling", scaling),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let secs = start.elapsed().as_secs_f64();
        let _ = writeln!(out, "criterion {:>2} {tag} {name} ({secs:.1} s): {detail}", i + 1);
        let _ = out.flush();
    }
    let _ = writeln!(out, "acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
