use numsolve_core::math::softplus;
use numsolve_core::oracle::{default_fd_steps, finite_diff_grad, grid_refine_optimum};
use numsolve_core::solvers::{self, agm_error_bound, momentum_coeff, pgd_smooth_error_bound};
use numsolve_core::topology::{build_routing_matrix, generate_flows};
use numsolve_core::{
    FlowMode, InitPoint, ProblemInstance, RoutingMatrix, SolverConfig, SolverKind, Topology,
    TraceStride, UtilityParams,
};
use proptest::prelude::*;

/// A random instance: `links x flows` 0/1 matrix where every flow uses at
/// least one link.
fn instance_strategy(max_flows: usize, max_links: usize) -> impl Strategy<Value = ProblemInstance> {
    (1..=max_flows, 1..=max_links)
        .prop_flat_map(|(d, m)| {
            (
                Just(d),
                Just(m),
                prop::collection::vec(any::<bool>(), d * m),
                prop::collection::vec(1.0f64..100.0, m),
                prop::sample::select(vec![0.0, 1.0, 2.0]),
            )
        })
        .prop_map(|(d, m, mask, caps, alpha)| {
            let mut entries = Vec::new();
            for s in 0..d {
                let mut used = false;
                for e in 0..m {
                    if mask[s * m + e] {
                        entries.push((e, s, 1.0));
                        used = true;
                    }
                }
                if !used {
                    entries.push((s % m, s, 1.0));
                }
            }
            let a = RoutingMatrix::from_entries(m, d, &entries).unwrap();
            let xi = if alpha == 0.0 { 0.0 } else { 0.5 };
            ProblemInstance::new(a, caps, UtilityParams::new(alpha, xi).unwrap(), 2.0).unwrap()
        })
}

fn point_in(inst: &ProblemInstance, unit: &[f64]) -> Vec<f64> {
    let top = 2.0 * inst.capacities().iter().copied().fold(0.0, f64::max);
    unit.iter().take(inst.flow_count()).map(|u| u * top).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softplus_bounds(z in -800.0f64..800.0) {
        let relu = z.max(0.0);
        let sp = softplus(z);
        prop_assert!(sp >= relu);
        // sp - relu cancels, so allow one ulp of the operands
        let ulp = f64::EPSILON * relu.max(1.0);
        prop_assert!(sp <= relu + std::f64::consts::LN_2 + ulp);
        prop_assert!(sp - relu <= (-z.abs()).exp() + ulp);
    }

    #[test]
    fn gradient_matches_finite_differences(
        inst in instance_strategy(20, 10),
        unit in prop::collection::vec(0.0f64..1.0, 20),
    ) {
        let x = point_in(&inst, &unit);
        let g = inst.objective_grad(&x).unwrap();
        let fd = finite_diff_grad(&inst, &x, &default_fd_steps(&x));
        for (a, b) in g.iter().zip(&fd.grad) {
            prop_assert!((a - b).abs() / a.abs().max(1.0) < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn gradient_is_lipschitz_with_certified_constant(
        inst in instance_strategy(12, 6),
        u in prop::collection::vec(0.0f64..1.0, 12),
        v in prop::collection::vec(0.0f64..1.0, 12),
    ) {
        let x = point_in(&inst, &u);
        let y = point_in(&inst, &v);
        let cert = inst.certify();
        let gx = inst.objective_grad(&x).unwrap();
        let gy = inst.objective_grad(&y).unwrap();
        let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&dg) <= cert.beta_v * norm(&dx) * (1.0 + 1e-9));
        for g in gx.iter().chain(&gy) {
            prop_assert!(g.abs() <= cert.m_bound * (1.0 + 1e-12));
        }
        let d = inst.flow_count() as f64;
        let links = inst.link_count() as f64;
        let alpha = inst.utility().alpha();
        let utility_term = if alpha == 0.0 { 0.0 } else { alpha / 0.5f64.powf(alpha + 1.0) };
        prop_assert!(cert.beta_v <= utility_term + inst.mu() * links * d / 4.0);
    }

    #[test]
    fn objective_is_midpoint_convex(
        inst in instance_strategy(12, 6),
        u in prop::collection::vec(0.0f64..1.0, 12),
        v in prop::collection::vec(0.0f64..1.0, 12),
    ) {
        let x = point_in(&inst, &u);
        let y = point_in(&inst, &v);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a + b) / 2.0).collect();
        let (vx, vy) = (inst.objective_value(&x).unwrap(), inst.objective_value(&y).unwrap());
        let vm = inst.objective_value(&mid).unwrap();
        prop_assert!(vm <= (vx + vy) / 2.0 + 1e-12 * (1.0 + vx.abs() + vy.abs()));
    }

    #[test]
    fn iterates_stay_feasible_and_best_so_far_is_monotone(
        inst in instance_strategy(8, 5),
        kind in prop::sample::select(SolverKind::ALL.to_vec()),
    ) {
        let sol = solvers::solve(&inst, &SolverConfig::new(kind, 200), &mut numsolve_core::NoClock).unwrap();
        prop_assert!(sol.point.iter().all(|v| *v >= 0.0));
        let mut best = f64::INFINITY;
        let mut last_iter = 0;
        for r in &sol.trace.records {
            prop_assert!(r.iter > last_iter);
            last_iter = r.iter;
            let next = best.min(r.objective);
            prop_assert!(next <= best);
            best = next;
        }
        let again = solvers::solve(&inst, &SolverConfig::new(kind, 200), &mut numsolve_core::NoClock).unwrap();
        prop_assert_eq!(sol, again);
    }

    #[test]
    fn expnum_stays_in_the_bounded_simplex(inst in instance_strategy(10, 6)) {
        let cfg = SolverConfig::new(SolverKind::ExpNum, 2000).with_trace(TraceStride::Off);
        let c = solvers::resolve_c_bound(&inst, &cfg).unwrap();
        let mut x = solvers::initial_point(&inst, &cfg).unwrap();
        let gamma = solvers::default_step(&inst, &cfg).unwrap().gamma;
        for _ in 0..2000 {
            let g: Vec<f64> = inst.objective_grad(&x).unwrap().iter().map(|v| v * gamma).collect();
            solvers::expnum_update(&mut x, &g, c);
            prop_assert!(x.iter().all(|v| *v > 0.0));
            prop_assert!(x.iter().sum::<f64>() <= c * (1.0 + 1e-12));
        }
    }

    #[test]
    fn routing_matrix_matches_shortest_paths(seed in any::<u64>(), count in 1usize..40) {
        let nodes = 6;
        let mut links = Vec::new();
        for i in 0..nodes {
            links.push((i, (i + 1) % nodes, 10.0));
            links.push(((i + 2) % nodes, i, 5.0 + i as f64));
        }
        let t = Topology::new(nodes, &links).unwrap();
        let flows = generate_flows(&t, FlowMode::Sampled { count, seed }).unwrap();
        let a = build_routing_matrix(&t, &flows).unwrap();
        prop_assert_eq!(&a, &build_routing_matrix(&t, &flows).unwrap());
        for e in 0..a.rows() {
            let fresh: f64 = a.row(e).map(|(_, v)| v * v).sum();
            prop_assert_eq!(a.row_norm_sq(e), fresh);
            prop_assert_eq!(a.row_norm_sq(e), a.row(e).count() as f64);
        }
        for f in &flows {
            let path = t.shortest_path(f.src, f.dst).unwrap();
            prop_assert!(path.len() < nodes);
            let mut at = f.src;
            for &l in &path {
                prop_assert_eq!(t.links()[l].src, at);
                at = t.links()[l].dst;
            }
            prop_assert_eq!(at, f.dst);
            let mut sorted = path.clone();
            sorted.sort_unstable();
            prop_assert_eq!(a.column_support(f.id), sorted);
        }
    }
}

#[test]
fn momentum_sequence_grows_at_least_linearly() {
    let mut a = 1.0;
    for t in 0..100_000u32 {
        assert!(a >= 1.0 + t as f64 / 2.0);
        let next = momentum_coeff(a);
        let weight = (a - 1.0) / next;
        assert!((0.0..1.0).contains(&weight));
        assert!(next > a);
        a = next;
    }
}

#[test]
fn accelerated_and_smooth_pgd_respect_their_bounds() {
    // 1-3 flows over up to two links, oracle by grid search
    let cases: Vec<(usize, Vec<(usize, usize, f64)>, Vec<f64>, UtilityParams)> = vec![
        (1, vec![(0, 0, 1.0)], vec![10.0], UtilityParams::throughput()),
        (2, vec![(0, 0, 1.0), (0, 1, 1.0)], vec![10.0], UtilityParams::proportional()),
        (
            3,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (1, 2, 1.0)],
            vec![8.0, 5.0],
            UtilityParams::proportional(),
        ),
        (
            2,
            vec![(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
            vec![6.0, 9.0],
            UtilityParams::new(2.0, 0.5).unwrap(),
        ),
    ];
    for (d, entries, caps, u) in cases {
        let links = caps.len();
        let a = RoutingMatrix::from_entries(links, d, &entries).unwrap();
        let inst = ProblemInstance::new(a, caps, u, 2.0).unwrap();
        let oracle = grid_refine_optimum(&inst, None, 1e-7).unwrap();
        let beta = inst.certify().beta_v;
        let radius_sq: f64 = oracle.point.iter().map(|v| v * v).sum();
        for kind in [SolverKind::Agm, SolverKind::PgdSmooth] {
            let cfg = SolverConfig::new(kind, 1000).with_init(InitPoint::Zeros);
            let sol = solvers::solve(&inst, &cfg, &mut numsolve_core::NoClock).unwrap();
            for r in &sol.trace.records {
                let bound = match kind {
                    SolverKind::Agm => agm_error_bound(beta, radius_sq, r.iter),
                    _ => pgd_smooth_error_bound(beta, radius_sq, r.iter),
                };
                let gap = r.objective - oracle.value;
                assert!(gap <= bound + oracle.tolerance, "{kind} t={} gap {gap} bound {bound}", r.iter);
                assert!(gap >= -oracle.tolerance);
            }
        }
    }
}
