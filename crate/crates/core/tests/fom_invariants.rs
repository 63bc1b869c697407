use sfrom_core::fom::{forcing_shape, vortex_merger_ic, FomConfig, FomSolver};
use sfrom_core::fv::{assemble_helmholtz_neumann, assemble_laplacian_dirichlet, stream_to_flux, FluxMode};
use sfrom_core::grid::{enstrophy, l2_norm, FieldKind, ScalarField, StructuredGrid};
use sfrom_core::linalg::{bicgstab_solve, lu_solve, DenseMatrix, SolverOptions};
use sfrom_core::NoClock;

fn merger(n: usize, t_end: f64, gamma: f64) -> FomConfig {
    FomConfig {
        t_end,
        gamma,
        ..FomConfig::vortex_merger(n).unwrap()
    }
}

#[test]
fn merger_keeps_point_symmetry_about_the_centre() {
    let cfg = merger(32, 3.0, 0.0);
    let run = FomSolver::new(cfg.clone())
        .unwrap()
        .run_from(vortex_merger_ic(&cfg.grid).unwrap(), &NoClock)
        .unwrap();
    let (nx, ny) = (cfg.grid.nx(), cfg.grid.ny());
    for s in run.omega.snapshots() {
        let w = &s.field;
        let scale = w.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..ny {
            for i in 0..nx {
                assert!((w.at(i, j) - w.at(nx - 1 - i, ny - 1 - j)).abs() <= 1e-9 * scale);
            }
        }
    }
}

#[test]
fn unforced_enstrophy_decays_and_circulation_is_kept() {
    let cfg = merger(32, 2.0, 0.0);
    let run = FomSolver::new(cfg.clone())
        .unwrap()
        .run_from(vortex_merger_ic(&cfg.grid).unwrap(), &NoClock)
        .unwrap();
    for w in run.diagnostics.windows(2) {
        assert!(w[1].enstrophy <= w[0].enstrophy * (1.0 + 1e-8));
        assert!((w[1].total_vorticity - w[0].total_vorticity).abs() <= 1e-8 * w[0].total_vorticity.abs());
    }
}

#[test]
fn forcing_with_zero_mean_keeps_circulation() {
    let cfg = merger(32, 1.0, 0.09);
    assert!(forcing_shape(&cfg.grid).integral().abs() < 1e-12);
    let run = FomSolver::new(cfg.clone())
        .unwrap()
        .run_from(vortex_merger_ic(&cfg.grid).unwrap(), &NoClock)
        .unwrap();
    let z0 = run.diagnostics[0].total_vorticity;
    for d in &run.diagnostics {
        assert!((d.total_vorticity - z0).abs() <= 1e-7 * z0);
    }
}

#[test]
fn stream_function_satisfies_poisson_after_every_step() {
    let cfg = merger(24, 0.2, 0.05);
    let solver = FomSolver::new(cfg.clone()).unwrap();
    let lap = assemble_laplacian_dirichlet(&cfg.grid);
    let mut state = solver.initial_state(vortex_merger_ic(&cfg.grid).unwrap()).unwrap();
    for _ in 0..20 {
        state = solver.step(&state).unwrap();
        let lpsi = lap.mul_vec(state.psi.values()).unwrap();
        let r: f64 = lpsi
            .iter()
            .zip(state.omega.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let b: f64 = state.omega.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r <= 1e-8 * b * (1.0 + 1e-6));
    }
}

#[test]
fn bicgstab_agrees_with_dense_lu_on_transport_matrix() {
    // the 50 x 50 transport operator of a random-ish stream function
    let g = StructuredGrid::new(10, 5, 2.0, 1.0).unwrap();
    let psi = ScalarField::sample(g, FieldKind::StreamFunction, |x, y| {
        (3.0 * x).sin() * (2.0 * y).cos() + x * y
    });
    let a = assemble_helmholtz_neumann(0.05, 10.0, &stream_to_flux(&psi, FluxMode::Linear).unwrap()).unwrap();
    let n = g.cell_count();
    let b: Vec<f64> = (0..n).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
    let x = bicgstab_solve(&a, &b, None, SolverOptions::with_tolerance(1e-12))
        .unwrap()
        .x;
    let mut dense = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            dense[r * n + c] = a.get(r, c);
        }
    }
    let x_lu = lu_solve(&DenseMatrix::from_row_major(n, n, dense).unwrap(), &b).unwrap();
    let scale = x_lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (p, q) in x.iter().zip(&x_lu) {
        assert!((p - q).abs() <= 1e-9 * scale);
    }
}

#[test]
fn poisson_solution_converges_at_second_order() {
    let mut errs = Vec::new();
    for n in [16, 32] {
        let g = StructuredGrid::periodic_box(n).unwrap();
        let cfg = FomConfig {
            poisson_solver: SolverOptions::with_tolerance(1e-12),
            ..FomConfig::vortex_merger(n).unwrap()
        };
        let omega = ScalarField::sample(g, FieldKind::Vorticity, |x, y| 2.0 * x.sin() * y.sin());
        let exact = ScalarField::sample(g, FieldKind::StreamFunction, |x, y| x.sin() * y.sin());
        let (mut psi, _) = FomSolver::new(cfg)
            .unwrap()
            .solve_stream_function(&omega, None)
            .unwrap();
        psi.axpy(-1.0, &exact).unwrap();
        errs.push(l2_norm(&psi));
    }
    assert!((errs[0] / errs[1]).log2() > 1.9);
}

#[test]
fn coarse_and_fine_runs_agree_on_enstrophy() {
    let e = |n| {
        let cfg = merger(n, 0.5, 0.0);
        let run = FomSolver::new(cfg.clone())
            .unwrap()
            .run_from(vortex_merger_ic(&cfg.grid).unwrap(), &NoClock)
            .unwrap();
        enstrophy(&run.final_state.omega)
    };
    let (e32, e64) = (e(32), e(64));
    assert!((e32 - e64).abs() / e64 < 1e-2);
}
