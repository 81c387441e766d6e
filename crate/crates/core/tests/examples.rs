use approx::assert_relative_eq;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use psystem::characteristics::{integrating_factor, trace, Direction};
use psystem::config::{parse_config, RunConfig};
use psystem::field::sup_norms_on_region;
use psystem::lifespan::{domain_half_width, estimate_t_star, run_sweep, simulate, FitOptions};
use psystem::oracle::{lax_friedrichs_run, simple_wave_t_star, SimpleWaveOracle};
use psystem::quad::{integrate_to_infinity, QuadOptions};
use psystem::{
    gradient_crosscheck, region_boundaries, riccati_evolve, run_until, DampingFamily, DampingSpec,
    FieldState, GasLaw, GasState, Grid1D, HistoryRecorder, InitialData, PathTracer, Profile,
    RegionKind, RegionSpec, RegionTracker, RiccatiOptions, RiemannPair, ScalingModel, Sign,
    SolverHistory, SolverOptions, StepMonitor, StopCause, Transcription,
};

fn law(g: f64) -> GasLaw {
    GasLaw::new(g).unwrap()
}

fn spec(f: DampingFamily) -> DampingSpec {
    DampingSpec::new(f).unwrap()
}

const SUM: DampingFamily = DampingFamily::SeparatedSum {
    lambda1: 2.0,
    lambda2: 2.0,
};

fn undamped_data(eps: f64) -> InitialData {
    InitialData {
        phi: Profile::Zero,
        psi: Profile::neg_x_gauss(0.0),
        epsilon: eps,
        x0: 0.0,
        delta0: 0.1,
    }
}

fn opts() -> SolverOptions {
    SolverOptions {
        cfl: 1.0,
        ..SolverOptions::default()
    }
}

fn history_of(
    grid: Grid1D,
    data: &InitialData,
    d: &DampingSpec,
    t_stop: f64,
) -> (SolverHistory, StopCause) {
    let l = law(2.0);
    let st = FieldState::init(grid, &l, data).unwrap();
    let mut rec = HistoryRecorder::new(grid, 1);
    let out = run_until(st, &l, d, &opts(), t_stop, &mut [&mut rec]);
    (rec.finish(), out.cause)
}

#[test]
fn gas_law_values() {
    assert_relative_eq!(law(2.0).pressure(1.0).unwrap(), 0.5);
    assert_relative_eq!(
        law(1.5).pressure(4.0).unwrap(),
        1.0 / 12.0,
        max_relative = 1e-12
    );
    assert_relative_eq!(law(3.0).pressure(1.0).unwrap(), 1.0 / 3.0);
    for g in [1.4, 2.0, 3.0] {
        assert_relative_eq!(law(g).sound_speed(1.0).unwrap(), 1.0);
        assert_relative_eq!(
            law(g).eta(1.0).unwrap(),
            2.0 / (g - 1.0),
            max_relative = 1e-14
        );
    }
    assert_relative_eq!(
        law(3.0).sound_speed(4.0).unwrap(),
        1.0 / 16.0,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        law(2.0).sound_speed(0.25).unwrap(),
        8.0,
        max_relative = 1e-14
    );
    assert_relative_eq!(law(3.0).eta(2.0).unwrap(), 0.5, max_relative = 1e-14);
}

#[test]
fn eta_is_the_tail_integral_of_the_sound_speed() {
    let l = law(2.0);
    let q = integrate_to_infinity(
        |x| l.sound_speed(x).unwrap(),
        1.0,
        QuadOptions {
            abs_tol: 1e-11,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((q - 2.0).abs() < 1e-8, "{q}");
}

#[test]
fn riemann_invariant_values() {
    let rp = |g: f64, u: f64, v: f64| law(g).riemann_from_state(GasState { u, v }).unwrap();
    let p = rp(2.0, 1.0, 0.0);
    assert_eq!((p.r, p.s), (0.0, 0.0));
    let p = rp(2.0, 1.0, 0.1);
    assert_relative_eq!(p.r, 0.1, epsilon = 1e-15);
    assert_relative_eq!(p.s, 0.1, epsilon = 1e-15);
    let p = rp(3.0, 2.0, 0.0);
    assert_relative_eq!(p.r, 0.5, epsilon = 1e-15);
    assert_relative_eq!(p.s, -0.5, epsilon = 1e-15);

    let st = law(2.0)
        .state_from_riemann(RiemannPair { r: 0.0, s: 0.0 })
        .unwrap();
    assert_eq!((st.u, st.v), (1.0, 0.0));
    let st = law(3.0)
        .state_from_riemann(RiemannPair { r: 0.5, s: -0.5 })
        .unwrap();
    assert_relative_eq!(st.u, 2.0, max_relative = 1e-14);
    assert_relative_eq!(st.v, 0.0, epsilon = 1e-15);
}

#[test]
fn theta_values_and_gamma_three_limit() {
    assert_eq!(law(3.0).theta_gamma(1.0).unwrap(), 0.0);
    assert_relative_eq!(
        law(2.0).theta_gamma(16.0).unwrap(),
        4.0,
        max_relative = 1e-14
    );
    for g in [3.0 - 1e-6, 3.0 + 1e-6] {
        assert!((law(g).theta_gamma(2.0).unwrap() - 2f64.ln()).abs() < 1e-5);
    }
}

#[test]
fn damping_values() {
    assert_eq!(spec(DampingFamily::Zero).eval_a(5.0, -3.0), 0.0);
    assert_relative_eq!(spec(SUM).eval_a(0.0, 0.0), 2.0);
    let tp = spec(DampingFamily::TimePower {
        mu: 2.0,
        lambda1: 1.0,
    });
    for x in [-7.0, 0.0, 3.5] {
        assert_relative_eq!(tp.eval_a(1.0, x), 1.0);
    }
    assert_eq!(spec(DampingFamily::Zero).eval_a_x(1.0, 2.0), 0.0);
    assert_relative_eq!(spec(SUM).eval_a_x(0.0, 1.0), -0.25, max_relative = 1e-14);
}

#[test]
fn damping_derivatives_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(11);
    for f in [
        SUM,
        DampingFamily::SeparatedProduct {
            lambda1: 0.6,
            lambda2: 0.6,
        },
        DampingFamily::TimePower {
            mu: 1.5,
            lambda1: 0.7,
        },
    ] {
        let d = spec(f);
        for _ in 0..100 {
            let t = rng.random_range(0.0..20.0);
            let mut x: f64 = rng.random_range(-10.0..10.0);
            if x.abs() < 1e-3 {
                x = 0.5;
            }
            let h = 1e-6;
            let fx = (d.eval_a(t, x + h) - d.eval_a(t, x - h)) / (2.0 * h);
            let ft =
                (d.eval_a(t + h, x) - d.eval_a((t - h).max(0.0), x)) / (t + h - (t - h).max(0.0));
            assert!(
                (fx - d.eval_a_x(t, x)).abs() < 1e-6,
                "{f:?} a_x at ({t}, {x})"
            );
            assert!(
                (ft - d.eval_a_t(t, x)).abs() < 1e-6,
                "{f:?} a_t at ({t}, {x})"
            );
        }
    }
}

#[test]
fn damping_integral_and_assumptions() {
    assert!((spec(SUM).integral_c_a().unwrap() - 3.0).abs() < 1e-6);
    assert_eq!(spec(DampingFamily::Zero).integral_c_a().unwrap(), 0.0);
    let tp = spec(DampingFamily::TimePower {
        mu: 1.0,
        lambda1: 2.0,
    });
    assert!((tp.integral_c_a().unwrap() - 1.0).abs() < 1e-6);

    assert!(spec(SUM).check_assumptions(2000).is_clean());
    assert!(spec(DampingFamily::Zero).check_assumptions(2000).is_clean());
    let rising = spec(DampingFamily::SpacePower { lambda2: -0.5 }).check_assumptions(400);
    assert!(rising.violations.iter().any(|v| v.kind == "as-c"));
}

#[test]
fn initial_data_of_the_undamped_scenario() {
    let l = law(2.0);
    let grid = Grid1D::new(-6.0, 6.0, 1201).unwrap();
    let zero = FieldState::init(grid, &l, &undamped_data(0.0)).unwrap();
    assert!(zero.r.iter().chain(&zero.s).all(|&w| w == 0.0));
    assert!(zero.u.iter().all(|&u| u == 1.0));

    let data = undamped_data(0.1);
    assert_eq!(data.k_report(), 1.0);
    let st = FieldState::init(grid, &l, &data).unwrap();
    for i in (0..grid.nx).step_by(37) {
        let w = 0.1 * data.psi.value(grid.x(i));
        assert!((st.r[i] - w).abs() < 1e-15 && (st.s[i] - w).abs() < 1e-15);
    }
    let mid = grid.nearest(0.0);
    // centred difference error is sx'''·dx²/6 with |ψ'''(0)| = 6
    assert!((st.sx[mid] + 0.1).abs() <= 0.1 * grid.dx().powi(2) * 1.01);
}

#[test]
fn background_is_steady() {
    let l = law(2.0);
    let grid = Grid1D::new(-5.0, 5.0, 101).unwrap();
    let st = FieldState::init(grid, &l, &undamped_data(0.0)).unwrap();
    let next = st.step(&l, &spec(SUM), 1.0).unwrap();
    assert!(next.t > 0.0);
    assert_eq!(next.r, st.r);
    assert_eq!(next.s, st.s);

    let out = run_until(st, &l, &spec(SUM), &opts(), 10.0, &mut []);
    assert_eq!(out.cause, StopCause::Horizon);
    assert_eq!(out.state.t, 10.0);
    assert!(out
        .series
        .rows
        .iter()
        .all(|r| r.max_gradient() == 0.0 && r.max_abs_ux == 0.0 && r.max_abs_vx == 0.0));
}

#[test]
fn undamped_scenario_stops_on_the_gradient_monitor() {
    let cfg = RunConfig::from_preset("euler_undamped", 0.1).unwrap();
    let res = simulate(&cfg.simulation().unwrap()).unwrap();
    assert_eq!(res.report.stopped_cause, StopCause::Gradient);
    assert!(res.report.t_stop.is_finite() && res.report.t_stop < cfg.solver.t_max);
}

#[test]
fn constant_damping_keeps_gradients_bounded() {
    let l = law(2.0);
    let d = spec(DampingFamily::TimePower {
        mu: 1.0,
        lambda1: 0.0,
    });
    let data = undamped_data(0.01);
    let grid = Grid1D::symmetric(domain_half_width(&data, 200.0), 0.05).unwrap();
    let st = FieldState::init(grid, &l, &data).unwrap();
    let out = run_until(st, &l, &d, &opts(), 200.0, &mut []);
    assert_eq!(out.cause, StopCause::Horizon);
    let g0 = out.series.rows[0].max_abs_sx;
    assert!(out.series.rows.iter().all(|r| r.max_abs_sx <= g0));
}

#[test]
fn region_norms_at_rest_and_at_the_start() {
    let grid = Grid1D::new(-5.0, 5.0, 101).unwrap();
    let rest = FieldState::background(grid, 0.0);
    assert_eq!(
        sup_norms_on_region(&rest, &RegionSpec::whole_line()).phi(),
        0.0
    );
    let omega = RegionTracker::new(0.0).current();
    assert_eq!(omega.kind, RegionKind::Omega);
    assert!((-50..=50).all(|k| omega.contains(0.0, 0.1 * k as f64)));
}

fn max_phi_until(eps: f64, t: f64) -> f64 {
    let mut cfg = RunConfig::from_preset("separated_sum", eps).unwrap();
    cfg.solver.t_max = t;
    cfg.solver.front_cells = 0.0;
    let sim = cfg.simulation().unwrap();
    let res = simulate(&sim).unwrap();
    assert_eq!(res.report.stopped_cause, StopCause::Horizon);
    res.phi.iter().map(|p| p.1).fold(0.0, f64::max)
}

#[test]
fn sup_norm_is_linear_in_epsilon() {
    let ratio = max_phi_until(0.1, 5.0) / max_phi_until(0.05, 5.0);
    assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "{ratio}");
}

#[test]
fn characteristics_of_the_background_are_straight() {
    let grid = Grid1D::new(-20.0, 20.0, 801).unwrap();
    let (h, _) = history_of(grid, &undamped_data(0.0), &DampingSpec::zero(), 5.0);
    for x0 in [-2.0, 0.0, 3.0] {
        for sign in [Sign::Plus, Sign::Minus] {
            let p = trace(
                &h,
                &DampingSpec::zero(),
                sign,
                (0.0, x0),
                Direction::Forward,
            )
            .unwrap();
            for s in &p.samples {
                assert_relative_eq!(s.x, x0 + sign.factor() * s.t, epsilon = 1e-12);
            }
        }
    }
    let omega = region_boundaries(&h, &DampingSpec::zero(), 0.0).unwrap();
    let plus_two = region_boundaries(&h, &DampingSpec::zero(), 2.0).unwrap();
    assert_eq!(plus_two.kind, RegionKind::OmegaPlus);
    for t in [1.0, 2.5, 5.0] {
        assert!(
            omega.contains(t, 1.001 * t)
                && omega.contains(t, -1.001 * t)
                && !omega.contains(t, 0.999 * t)
        );
        assert_relative_eq!(omega.depth(t, t), 0.0, epsilon = 1e-9);
        assert!(
            plus_two.contains(t, 2.001 + t)
                && !plus_two.contains(t, 1.999 + t)
                && !plus_two.contains(t, -30.0)
        );
    }
}

#[test]
fn plus_path_outruns_a_quarter_sound_speed() {
    let cfg = RunConfig::from_preset("separated_sum", 0.1).unwrap();
    let l = cfg.law().unwrap();
    let d = cfg.damping_spec().unwrap();
    let st = FieldState::init(cfg.grid().unwrap(), &l, &cfg.initial_data()).unwrap();
    let mut tracer = PathTracer::new(Sign::Plus, 0.0);
    run_until(
        st,
        &l,
        &d,
        &cfg.solver_options(),
        cfg.solver.t_max,
        &mut [&mut tracer],
    );
    let path = tracer.into_path(&d);
    assert!(path.len() > 100);
    assert!(path.samples.iter().all(|p| p.x >= p.t / 4.0));
}

#[test]
fn backward_paths_stay_in_the_region() {
    let cfg = RunConfig::from_preset("separated_sum", 0.1).unwrap();
    let d = cfg.damping_spec().unwrap();
    let grid = Grid1D::symmetric(40.0, 0.01).unwrap();
    let (h, _) = history_of(grid, &cfg.initial_data(), &d, 8.0);
    let region = region_boundaries(&h, &d, 0.0).unwrap();
    let t = h.t_last().unwrap();
    let edge = region.plus.as_ref().unwrap().at(t);
    for depth in [0.05, 0.5, 2.0] {
        for sign in [Sign::Plus, Sign::Minus] {
            let p = trace(&h, &d, sign, (t, edge + depth), Direction::Backward).unwrap();
            assert!(!p.exited);
            for s in &p.samples {
                assert!(
                    region.depth(s.t, s.x) >= -2.0 * grid.dx(),
                    "{sign:?} from depth {depth} at t {}",
                    s.t
                );
            }
        }
    }
}

#[test]
fn region_edges_move_near_the_sound_speed() {
    let cfg = RunConfig::from_preset("separated_sum", 0.05).unwrap();
    let res = simulate(&cfg.simulation().unwrap()).unwrap();
    assert_eq!(res.boundary_paths.len(), 2);
    for p in &res.boundary_paths {
        for w in p.samples.windows(2).step_by(50) {
            let speed = ((w[1].x - w[0].x) / (w[1].t - w[0].t)).abs();
            assert!((0.25..=4.0).contains(&speed), "{speed}");
        }
    }
}

#[test]
fn integrating_factor_values() {
    let grid = Grid1D::new(-30.0, 30.0, 2401).unwrap();
    let (h, _) = history_of(grid, &undamped_data(0.0), &DampingSpec::zero(), 10.0);
    let p = trace(
        &h,
        &DampingSpec::zero(),
        Sign::Plus,
        (0.0, 0.0),
        Direction::Forward,
    )
    .unwrap();
    assert!(integrating_factor(&p, &DampingSpec::zero())
        .iter()
        .all(|&(_, a)| a == 1.0));

    let tp = spec(DampingFamily::TimePower {
        mu: 1.0,
        lambda1: 2.0,
    });
    for (x0, sign) in [(0.0, Sign::Plus), (4.0, Sign::Minus)] {
        let p = trace(&h, &tp, sign, (0.0, x0), Direction::Forward).unwrap();
        for (t, a) in integrating_factor(&p, &tp) {
            assert_relative_eq!(
                a,
                (0.5 * (1.0 - 1.0 / (1.0 + t))).exp(),
                max_relative = 1e-4
            );
        }
    }
}

#[test]
fn riccati_of_zero_data_stays_zero() {
    let grid = Grid1D::new(-10.0, 10.0, 201).unwrap();
    let (h, _) = history_of(grid, &undamped_data(0.0), &spec(SUM), 3.0);
    let p = trace(&h, &spec(SUM), Sign::Plus, (0.0, -1.0), Direction::Forward).unwrap();
    let st = riccati_evolve(&p, &law(2.0), &spec(SUM), &RiccatiOptions::default()).unwrap();
    assert!(st.history.iter().all(|&(_, q)| q == 0.0));
    assert_eq!(gradient_crosscheck(&p, &st, grid.dx()), 0.0);
}

/// Riccati deviation from the grid gradient along the plus path from the
/// steepest point, over the first half of the life-span.
fn crosscheck_with(dx: f64, transcription: Transcription) -> f64 {
    let l = law(2.0);
    let data = undamped_data(0.1);
    let grid = Grid1D::symmetric(domain_half_width(&data, 7.0), dx).unwrap();
    let st = FieldState::init(grid, &l, &data).unwrap();
    let mut tracer = PathTracer::new(Sign::Plus, 0.0);
    run_until(
        st,
        &l,
        &DampingSpec::zero(),
        &opts(),
        6.5,
        &mut [&mut tracer],
    );
    let path = tracer.into_path(&DampingSpec::zero());
    let opts = RiccatiOptions {
        transcription,
        ..RiccatiOptions::default()
    };
    let q = riccati_evolve(&path, &l, &DampingSpec::zero(), &opts).unwrap();
    gradient_crosscheck(&path, &q, dx)
}

fn crosscheck_at(dx: f64) -> f64 {
    crosscheck_with(dx, Transcription::Rederived)
}

#[test]
fn riccati_tracks_the_grid_gradient_and_converges() {
    let coarse = crosscheck_at(0.01);
    let fine = crosscheck_at(0.005);
    assert!(coarse <= 0.1 && fine <= 0.1, "{coarse} {fine}");
    assert!(fine < coarse, "{coarse} {fine}");
}

#[test]
fn printed_gradient_equations_drift_from_the_grid() {
    let rederived = crosscheck_at(0.01);
    let printed = crosscheck_with(0.01, Transcription::AsPrinted);
    assert!(
        printed > 5.0 * rederived,
        "printed {printed} vs rederived {rederived}"
    );
}

#[test]
fn synthetic_reciprocal_growth_extrapolates_exactly() {
    let rows = (0..=990)
        .map(|i| {
            let t = i as f64 / 1000.0;
            psystem::TimeSeriesRow {
                t,
                min_u: 1.0,
                max_u: 1.0,
                max_abs_rx: 0.0,
                max_abs_sx: 1.0 / (1.0 - t),
                max_abs_ux: 0.0,
                max_abs_vx: 0.0,
                phi_region: None,
            }
        })
        .collect();
    let fit = estimate_t_star(&psystem::TimeSeries { rows }, &FitOptions::default()).unwrap();
    assert!((fit.t_star - 1.0).abs() < 1e-3);
}

fn undamped_t_star(dx: f64) -> f64 {
    let mut cfg = RunConfig::from_preset("euler_undamped", 0.1).unwrap();
    // finer grids stop later, past the default horizon
    cfg.solver.t_max = 20.0;
    let half = domain_half_width(&cfg.initial_data(), cfg.solver.t_max);
    cfg.grid.x_min = -half;
    cfg.grid.x_max = half;
    cfg.grid.nx = (2.0 * half / dx).round() as usize + 1;
    cfg.validate().unwrap();
    simulate(&cfg.simulation().unwrap())
        .unwrap()
        .report
        .t_star_estimate
        .unwrap()
}

#[test]
fn undamped_life_span_matches_the_simple_wave_and_is_grid_stable() {
    let oracle = SimpleWaveOracle::new(law(2.0), Profile::neg_x_gauss(0.0), 0.1);
    let exact = simple_wave_t_star(&oracle).unwrap();
    let coarse = undamped_t_star(0.01);
    let fine = undamped_t_star(0.005);
    assert!(
        (coarse - exact).abs() / exact <= 0.05,
        "{coarse} vs {exact}"
    );
    assert!((fine - coarse).abs() / coarse < 0.02, "{coarse} -> {fine}");
}

#[test]
fn phi_is_bounded_by_its_initial_value() {
    let cfg = RunConfig::from_preset("separated_sum", 0.05).unwrap();
    let res = simulate(&cfg.simulation().unwrap()).unwrap();
    let ratio = res.report.phi_max_ratio.unwrap();
    assert!(ratio <= 10.0, "{ratio}");

    let mut zero = RunConfig::from_preset("separated_sum", 0.05).unwrap();
    zero.initial.psi = Profile::Zero;
    zero.solver.t_max = 2.0;
    let res = simulate(&zero.simulation().unwrap()).unwrap();
    assert!(res.phi.iter().all(|p| p.1 == 0.0));
}

#[test]
fn undamped_ladder_scales_inversely() {
    let cfg = RunConfig::from_preset("euler_undamped", 0.1).unwrap();
    let res = run_sweep(&cfg.sweep_plan().unwrap()).unwrap();
    let fit = res.fit.unwrap();
    assert_eq!(fit.model, ScalingModel::Power);
    assert!(
        (-1.15..=-0.85).contains(&fit.exponent_or_rate),
        "{}",
        fit.exponent_or_rate
    );
}

#[test]
fn shifted_data_blows_up_in_the_shifted_region() {
    let cfg = parse_config(
        "scenario = \"separated_sum\"\n[initial]\nepsilon = 0.1\nx0 = 2.0\n\
         psi = { kind = \"neg_x_gauss\", scale = 1.0, center = 2.0, width = 1.0 }\n",
    )
    .unwrap();
    let res = simulate(&cfg.simulation().unwrap()).unwrap();
    assert_eq!(res.region.kind, RegionKind::OmegaPlus);
    assert_eq!(res.report.stopped_cause, StopCause::Gradient);
    assert_eq!(
        res.report.inside_region,
        Some(true),
        "depth {:?}",
        res.report.region_depth
    );
}

#[test]
fn constant_damping_decays_the_velocity() {
    let data = undamped_data(0.01);
    let grid = Grid1D::symmetric(domain_half_width(&data, 50.0), 0.05).unwrap();
    let d = spec(DampingFamily::TimePower {
        mu: 1.0,
        lambda1: 0.0,
    });
    let st = lax_friedrichs_run(grid, &law(2.0), &d, &data, 50.0, 0.9).unwrap();
    let v_max = st.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(v_max < 0.001, "{v_max}");
}

#[test]
fn tracer_and_monitor_share_the_solver_levels() {
    // a tracer is an ordinary monitor: two identical tracers give identical paths
    let cfg = RunConfig::from_preset("separated_sum", 0.2).unwrap();
    let l = cfg.law().unwrap();
    let d = cfg.damping_spec().unwrap();
    let st = FieldState::init(cfg.grid().unwrap(), &l, &cfg.initial_data()).unwrap();
    let (mut a, mut b) = (
        PathTracer::new(Sign::Minus, 1.0),
        PathTracer::new(Sign::Minus, 1.0),
    );
    {
        let mut ms: Vec<&mut dyn StepMonitor> = vec![&mut a, &mut b];
        run_until(st, &l, &d, &cfg.solver_options(), 5.0, &mut ms);
    }
    assert_eq!(a.into_path(&d), b.into_path(&d));
}
