mod common;

use std::ops::ControlFlow;

use common::*;
use lancbio_core::bilevel::BilevelOracles;
use lancbio_core::krylov::cg_solve;
use lancbio_core::numeric::vector::{dist, dot, norm, sub};
use lancbio_core::numeric::{dense_solve, DenseMatrix};
use lancbio_core::problems::*;
use lancbio_core::solvers::*;

/// Quadratic with `ρ = 0`: `b = c` and `A = H` never change.
fn frozen_quadratic(h: DenseMatrix, seed: u64) -> QuadraticBilevel {
    let (dy, dx) = (h.rows(), 3);
    let cross = DenseMatrix::from_row_major(dy, dx, gaussian(dy * dx, seed));
    QuadraticBilevel::new(
        h,
        cross,
        gaussian(dx, seed + 1),
        vec![0.0; dy],
        gaussian(dy, seed + 2),
        0.0,
    )
    .unwrap()
}

fn cfg(m: usize, iters: usize) -> SolverConfig {
    SolverConfig {
        m,
        iters,
        ramp: DimRamp::Off,
        ..SolverConfig::default()
    }
}

fn synthetic(d: usize, seed: u64) -> (Synthetic, Vec<f64>, Vec<f64>) {
    let p = make_synthetic(SyntheticSpec::random(d, seed)).unwrap();
    let (x, y) = p.initial_point(seed);
    (p, x, y)
}

#[test]
fn lancbio_hvp_budget() {
    let (p, x, y) = synthetic(50, 1);
    let c = SolverConfig {
        lambda: 1.0,
        theta: 1e-5,
        ..cfg(10, 100)
    };
    let r = lancbio_run(&p, &c, &x, &y, &vec![0.0; 50], &mut ()).unwrap();
    assert_eq!(r.breakdowns, 0);
    assert_eq!(r.counters.n_hvp, 110);
    assert_eq!(r.counters.n_jvp, 100);
    assert_eq!(r.trace.len(), 100);
}

#[test]
fn lancbio_budget_with_ramp() {
    let (p, x, y) = synthetic(30, 2);
    let c = SolverConfig {
        lambda: 1.0,
        theta: 1e-5,
        ramp: DimRamp::Linear,
        ..cfg(4, 23)
    };
    let r = lancbio_run(&p, &c, &x, &y, &vec![0.0; 30], &mut ()).unwrap();
    // epochs of length 1, 2, 3, 4, 4, 4, 4, 1
    assert_eq!(r.breakdowns, 0);
    assert_eq!(r.counters.n_hvp, 23 + 8);
}

#[test]
fn frozen_epoch_reduces_to_conjugate_gradients() {
    let p = frozen_quadratic(spd(50, 100.0, 3), 4);
    let v0 = gaussian(50, 5);
    let (x, y) = (vec![0.3; 3], gaussian(50, 6));
    let c = SolverConfig {
        lambda: 0.0,
        ..cfg(10, 10)
    };
    let lanc = lancbio_run(&p, &c, &x, &y, &v0, &mut ()).unwrap();
    let amigo = baseline_run(
        BaselineKind::AmigoCg,
        &p,
        &SolverConfig {
            inner_iters: 10,
            ..cfg(10, 1)
        },
        &x,
        &y,
        &v0,
        &mut (),
    )
    .unwrap();
    let direct = cg_solve(p.hessian(), p.c(), &v0, 10);
    assert!(dist(&lanc.v_final, &amigo.v_final) <= 1e-8 * norm(&amigo.v_final));
    assert!(dist(&amigo.v_final, &direct) == 0.0);
}

#[test]
fn frozen_restarts_converge_to_solution() {
    let p = frozen_quadratic(spd(40, 100.0, 7), 8);
    let c = SolverConfig {
        lambda: 0.0,
        ..cfg(10, 200)
    };
    let r = lancbio_run(&p, &c, &[0.0; 3], &vec![0.0; 40], &vec![0.0; 40], &mut ()).unwrap();
    let exact = dense_solve(p.hessian(), p.c()).unwrap();
    assert!(dist(&r.v_final, &exact) <= 1e-8 * norm(&exact));
    // residual at the end of each epoch decreases
    let ends: Vec<f64> = r
        .trace
        .iter()
        .filter(|t| t.iter % 10 == 0)
        .map(|t| t.residual_norm)
        .collect();
    for w in ends.windows(2).take(5) {
        assert!(w[1] < w[0], "{ends:?}");
    }
}

#[test]
fn warm_up_steps_freeze_x() {
    let (p, x, y) = synthetic(20, 9);
    let c = SolverConfig {
        lambda: 1.0,
        theta: 1e-5,
        m0: 2,
        ..cfg(5, 5)
    };
    let mut xs = Vec::new();
    let mut obs = |view: &IterView<'_>, _: &mut TraceRecord| {
        xs.push(view.x.to_vec());
        ControlFlow::Continue(())
    };
    let r = lancbio_run(&p, &c, &x, &y, &[0.0; 20], &mut obs).unwrap();
    assert_eq!(xs[0], xs[1]);
    assert_eq!(xs[1], xs[2]);
    assert_ne!(xs[2], xs[3]);
    assert_ne!(r.x_final, xs[4]);
}

#[test]
fn identity_hessian_breaks_down_without_failing() {
    let p = frozen_quadratic(DenseMatrix::identity(6), 10);
    let c = SolverConfig {
        lambda: 0.0,
        ..cfg(3, 9)
    };
    for run in [lancbio_run::<_, ()>, lancbio_minres_run::<_, ()>] {
        let r = run(&p, &c, &[0.0; 3], &[0.0; 6], &[0.0; 6], &mut ()).unwrap();
        assert!(r.breakdowns > 0);
        assert!(r.trace.iter().any(|t| t.breakdown));
        assert!(dist(&r.v_final, p.c()) <= 1e-12 * norm(p.c()));
    }
}

#[test]
fn minres_solves_indefinite_frozen_system_in_one_epoch() {
    let d = 8;
    let h = with_spectrum(&[-4.0, -2.0, -1.0, -0.5, 0.7, 1.5, 3.0, 5.0], 11);
    let p = frozen_quadratic(h, 12);
    let c = SolverConfig {
        lambda: 0.0,
        ..cfg(d, d)
    };
    let r = lancbio_minres_run(&p, &c, &[0.0; 3], &vec![0.0; d], &vec![0.0; d], &mut ()).unwrap();
    let exact = lancbio_core::numeric::lu_solve(p.hessian(), p.c()).unwrap();
    assert!(dist(&r.v_final, &exact) <= 1e-6 * norm(&exact));
}

#[test]
fn minres_and_galerkin_agree_on_frozen_spd_system() {
    let d = 30;
    let p = frozen_quadratic(spd(d, 100.0, 40), 41);
    let c = SolverConfig {
        lambda: 0.0,
        ..cfg(d, d)
    };
    let zeros = vec![0.0; d];
    let a = lancbio_run(&p, &c, &[0.0; 3], &zeros, &zeros, &mut ()).unwrap();
    let b = lancbio_minres_run(&p, &c, &[0.0; 3], &zeros, &zeros, &mut ()).unwrap();
    assert!(dist(&a.v_final, &b.v_final) <= 1e-6 * norm(&a.v_final));
}

#[test]
fn minres_and_galerkin_track_the_same_hypergradient() {
    // On the ill-conditioned synthetic problem the 2-norm residuals of the
    // two corrections differ by an order of magnitude (the Galerkin iterate
    // minimises the A-norm error instead), but the hyper-gradient agrees.
    let (p, x, y) = synthetic(50, 13);
    let c = SolverConfig {
        lambda: 1.0,
        theta: 1e-5,
        ..cfg(10, 300)
    };
    let a = lancbio_run(&p, &c, &x, &y, &vec![0.0; 50], &mut ()).unwrap();
    let b = lancbio_minres_run(&p, &c, &x, &y, &vec![0.0; 50], &mut ()).unwrap();
    let (ga, gb) = (
        a.trace.last().unwrap().hypergrad_norm,
        b.trace.last().unwrap().hypergrad_norm,
    );
    assert!((ga - gb).abs() <= 0.1 * ga.max(gb), "{ga} vs {gb}");
    let (ra, rb) = (
        a.trace.last().unwrap().residual_norm,
        b.trace.last().unwrap().residual_norm,
    );
    assert!(rb <= ra, "{rb} > {ra}");
}

#[test]
fn subbio_rayleigh_step_from_zero() {
    let h = spd(12, 30.0, 14);
    let p = frozen_quadratic(h.clone(), 15);
    let r = subbio_run(&p, &cfg(1, 1), &[0.0; 3], &[0.0; 12], &[0.0; 12], &mut ()).unwrap();
    let b = p.c();
    let expected: Vec<f64> = b
        .iter()
        .map(|bi| bi * dot(b, b) / dot(b, &h.matvec(b)))
        .collect();
    assert!(dist(&r.v_final, &expected) <= 1e-12 * norm(&expected));
    assert_eq!(r.counters.n_hvp, 2);
}

#[test]
fn subbio_identity_hessian_returns_b() {
    let p = frozen_quadratic(DenseMatrix::identity(7), 16);
    let c = SolverConfig {
        eta: 0.5,
        ..cfg(1, 1)
    };
    let r = subbio_run(&p, &c, &[0.0; 3], &[0.0; 7], &gaussian(7, 17), &mut ()).unwrap();
    assert!(dist(&r.v_final, p.c()) <= 1e-12 * norm(p.c()));
}

#[test]
fn subbio_matches_dense_two_dimensional_minimiser() {
    let n = 30;
    let h = spd(n, 50.0, 18);
    let p = frozen_quadratic(h.clone(), 19);
    let v0 = gaussian(n, 20);
    let eta = 0.01;
    let c = SolverConfig { eta, ..cfg(1, 1) };
    let r = subbio_run(&p, &c, &[0.0; 3], &vec![0.0; n], &v0, &mut ()).unwrap();
    assert_eq!(r.counters.n_hvp, 3);

    // dense oracle on the raw columns S = [b, (I − ηA)v0]
    let b = p.c().to_vec();
    let s2 = sub(
        &v0,
        &h.matvec(&v0).iter().map(|a| eta * a).collect::<Vec<_>>(),
    );
    let cols = [b.clone(), s2];
    let a_cols: Vec<Vec<f64>> = cols.iter().map(|c| h.matvec(c)).collect();
    let m = DenseMatrix::from_row_major(
        2,
        2,
        vec![
            dot(&cols[0], &a_cols[0]),
            dot(&cols[0], &a_cols[1]),
            dot(&cols[1], &a_cols[0]),
            dot(&cols[1], &a_cols[1]),
        ],
    );
    let z = dense_solve(&m, &[dot(&cols[0], &b), dot(&cols[1], &b)]).unwrap();
    let v: Vec<f64> = cols[0]
        .iter()
        .zip(&cols[1])
        .map(|(a, b)| z[0] * a + z[1] * b)
        .collect();
    assert!(dist(&r.v_final, &v) <= 1e-9 * norm(&v));
}

#[test]
fn soba_contracts_with_spectral_factor() {
    let h = spd(20, 10.0, 21);
    let p = frozen_quadratic(h, 22);
    let eta = 0.1; // ‖I − ηA‖ = 0.9
    let c = SolverConfig {
        lambda: 0.0,
        eta,
        ..cfg(1, 30)
    };
    let exact = dense_solve(p.hessian(), p.c()).unwrap();
    let mut errs = Vec::new();
    let mut obs = |view: &IterView<'_>, _: &mut TraceRecord| {
        errs.push(dist(view.v, &exact));
        ControlFlow::Continue(())
    };
    let v0 = vec![0.0; 20];
    baseline_run(BaselineKind::Soba, &p, &c, &[0.0; 3], &v0, &v0, &mut obs).unwrap();
    let mut prev = norm(&exact);
    for e in errs {
        assert!(e <= 0.9 * prev * (1.0 + 1e-12));
        prev = e;
    }
}

#[test]
fn amigo_cg_with_full_inner_loop_is_exact() {
    let d = 15;
    let p = frozen_quadratic(spd(d, 40.0, 23), 24);
    let c = SolverConfig {
        inner_iters: d,
        ..cfg(1, 1)
    };
    let r = baseline_run(
        BaselineKind::AmigoCg,
        &p,
        &c,
        &[0.0; 3],
        &vec![0.0; d],
        &vec![0.0; d],
        &mut (),
    )
    .unwrap();
    let exact = dense_solve(p.hessian(), p.c()).unwrap();
    assert!(dist(&r.v_final, &exact) <= 1e-7 * norm(&exact));
}

#[test]
fn neumann_with_identity_returns_b() {
    let p = frozen_quadratic(DenseMatrix::identity(5), 25);
    for n in [1, 2, 7] {
        let c = SolverConfig {
            eta: 1.0,
            neumann_terms: n,
            ..cfg(1, 1)
        };
        for kind in [BaselineKind::StocBioNeumann, BaselineKind::Ttsa] {
            let r = baseline_run(kind, &p, &c, &[0.0; 3], &[0.0; 5], &[0.0; 5], &mut ()).unwrap();
            assert_eq!(r.v_final, p.c());
            assert_eq!(r.counters.n_hvp, n as u64 - 1);
        }
    }
}

#[test]
fn baseline_hvp_counts() {
    let (p, x, y) = synthetic(10, 26);
    let c = SolverConfig {
        lambda: 1.0,
        theta: 1e-5,
        inner_iters: 3,
        ..cfg(5, 10)
    };
    let v0 = vec![0.0; 10];
    let count = |kind| {
        baseline_run(kind, &p, &c, &x, &y, &v0, &mut ())
            .unwrap()
            .counters
            .n_hvp
    };
    assert_eq!(count(BaselineKind::AmigoGd), 30);
    assert_eq!(count(BaselineKind::AmigoCg), 40);
    assert_eq!(count(BaselineKind::Soba), 10);
    // v₀ = 0 makes the first subspace one-dimensional
    assert_eq!(
        subbio_run(&p, &c, &x, &y, &v0, &mut ())
            .unwrap()
            .counters
            .n_hvp,
        2 + 9 * 3
    );
}

#[test]
fn trace_residual_matches_offline_recomputation() {
    let (p, x0, y0) = synthetic(15, 27);
    let c = SolverConfig {
        lambda: 1.0,
        theta: 1e-5,
        eta: 5e-6,
        ..cfg(4, 20)
    };
    let v0 = vec![0.0; 15];
    for kind in SolverKind::ALL {
        let mut checks = Vec::new();
        let mut obs = |view: &IterView<'_>, rec: &mut TraceRecord| {
            let offline = norm(&sub(
                &p.hvp_gyy(view.x, view.y, view.v),
                &p.grad_f_y(view.x, view.y),
            ));
            checks.push((rec.residual_norm - offline).abs() / offline.max(1.0));
            ControlFlow::Continue(())
        };
        run(kind, &p, &c, &x0, &y0, &v0, &mut obs).unwrap();
        assert!(checks.iter().all(|e| *e <= 1e-12), "{kind}");
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let (p, x0, y0) = synthetic(12, 28);
    let c = SolverConfig {
        lambda: 1.0,
        theta: 1e-5,
        eta: 5e-6,
        ..cfg(3, 25)
    };
    let v0 = vec![0.0; 12];
    for kind in SolverKind::ALL {
        let a = run(kind, &p, &c, &x0, &y0, &v0, &mut ()).unwrap();
        let b = run(kind, &p, &c, &x0, &y0, &v0, &mut ()).unwrap();
        assert!(
            a.trace.iter().all(|t| t.residual_norm.is_finite()),
            "{kind}"
        );
        assert_eq!(a.trace, b.trace, "{kind}");
        assert_eq!(a.x_final, b.x_final);
    }
}

#[test]
fn observer_can_stop_a_run() {
    let (p, x0, y0) = synthetic(8, 29);
    let c = cfg(3, 50);
    let mut obs = |view: &IterView<'_>, _: &mut TraceRecord| {
        if view.k == 7 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    let r = lancbio_run(&p, &c, &x0, &y0, &[0.0; 8], &mut obs).unwrap();
    assert!(r.stopped_early);
    assert_eq!(r.trace.len(), 7);
}

#[test]
fn invalid_configs_are_rejected() {
    let (p, x0, y0) = synthetic(4, 30);
    let v0 = [0.0; 4];
    let bad = [
        SolverConfig {
            m0: 10,
            ..cfg(10, 5)
        },
        SolverConfig {
            theta: 0.0,
            ..cfg(10, 5)
        },
        SolverConfig {
            eta: -1.0,
            ..cfg(10, 5)
        },
        SolverConfig {
            lambda: f64::NAN,
            ..cfg(10, 5)
        },
        cfg(0, 5),
        cfg(3, 0),
    ];
    for c in bad {
        assert!(matches!(
            lancbio_run(&p, &c, &x0, &y0, &v0, &mut ()),
            Err(ConfigError::Invalid { .. })
        ));
    }
    assert!(matches!(
        lancbio_run(&p, &cfg(3, 5), &x0, &y0, &[0.0; 3], &mut ()),
        Err(ConfigError::DimensionMismatch { what: "v0", .. })
    ));
}

#[test]
fn solver_ids_round_trip() {
    for kind in SolverKind::ALL {
        assert_eq!(kind.id().parse::<SolverKind>().unwrap(), kind);
    }
    assert!(matches!(
        "newton".parse::<SolverKind>(),
        Err(ConfigError::UnknownSolver(_))
    ));
}

#[test]
fn ttsa_steps_decay() {
    // f = ½‖x − a‖² + …: with v fixed by the Neumann rule the x step at k is
    // exactly −λ_k ∇̃φ, so the realised step lengths reveal λ_k.
    let p = frozen_quadratic(DenseMatrix::identity(4), 42);
    let c = SolverConfig {
        lambda: 0.5,
        theta: 0.5,
        eta: 1.0,
        neumann_terms: 1,
        ..cfg(1, 5)
    };
    let mut seen = Vec::new();
    let mut obs = |view: &IterView<'_>, _: &mut TraceRecord| {
        let g = lancbio_core::bilevel::hypergrad_estimate(&p, view.x, view.y, view.v, None).grad;
        seen.push((view.x.to_vec(), g));
        ControlFlow::Continue(())
    };
    let r = baseline_run(
        BaselineKind::Ttsa,
        &p,
        &c,
        &[1.0; 3],
        &[0.0; 4],
        &[0.0; 4],
        &mut obs,
    )
    .unwrap();
    for k in 1..=4 {
        let (x, g) = &seen[k - 1];
        let next = if k < 5 { &seen[k].0 } else { &r.x_final };
        let lam = 0.5 / (k as f64).powf(0.6);
        let expected: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - lam * gi).collect();
        assert!(dist(next, &expected) <= 1e-14, "k = {k}");
    }
}
