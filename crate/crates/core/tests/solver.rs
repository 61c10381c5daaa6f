use proptest::prelude::*;
use stacked_minimal::config::{catalog, catalog_with};
use stacked_minimal::opening::{GluingState, TorusParams};
use stacked_minimal::solver::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unknown_vector_round_trip(k in -4i64..4, d in prop::array::uniform8(-0.01f64..0.01)) {
        let cfg = catalog("twin-rPD").unwrap();
        let p = TorusParams::central(k, cfg.q(k), cfg.tau).unwrap();
        let mut x = unknowns_of(&p).unwrap();
        for j in 0..8 {
            x[j] += d[j];
        }
        let q = params_from(&x).unwrap();
        let y = unknowns_of(&q).unwrap();
        for j in 0..8 {
            prop_assert!((x[j] - y[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn auto_schedule_ends_at_target(t in 1e-4f64..0.1) {
        let s = auto_schedule(t);
        prop_assert!(s.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(*s.last().unwrap(), t);
    }
}

#[test]
fn central_state_solves_at_zero() {
    for name in ["rPD", "H", "tP"] {
        let cfg = catalog(name).unwrap();
        let n = cyclic_length(cfg.period().unwrap()) as i64;
        let sys = System::new(&cfg, GluingState::central(&cfg, 0, n - 1, true).unwrap(), &SolverOptions::default()).unwrap();
        let (res, _) = sys.residual().unwrap();
        assert!(res.sup_norm < 1e-10, "{name}: {}", res.sup_norm);
    }
}

#[test]
fn cyclic_matches_windowed_periodic_solve() {
    let t = 0.01;
    let opts = SolverOptions::default();
    let cfg = catalog_with("rPD", None, 3).unwrap();
    let cyc = newton_continuation(&cfg, t, None, &opts).unwrap();
    let win = solve_window(&cfg, &auto_schedule(t), &opts).unwrap();
    assert!(cyc.cyclic && !win.cyclic);
    let n = cyc.state.len() as i64;
    for i in 1..win.state.len() - 1 {
        let k = win.state.k_of(i);
        let j = k.rem_euclid(n) as usize;
        let a = unknowns_of(&win.state.tori[i]).unwrap();
        let b = unknowns_of(&cyc.state.tori[j]).unwrap();
        let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-8, "k = {k}: {d:e}");
    }
}

#[test]
fn negative_t_rejected() {
    let cfg = catalog("rPD").unwrap();
    assert!(newton_continuation(&cfg, -0.1, None, &SolverOptions::default()).is_err());
    assert!(newton_continuation(&cfg, 0.02, Some(&[0.01]), &SolverOptions::default()).is_err());
}
