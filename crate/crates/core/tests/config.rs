use num_complex::Complex64 as C64;
use proptest::prelude::*;
use stacked_minimal::config::*;

#[test]
fn catalog_round_trips_through_json() {
    for name in CATALOG_NAMES {
        let cfg = catalog(name).unwrap();
        let back = Configuration::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back, "{name}");
    }
}

#[test]
fn every_catalog_entry_is_balanced() {
    for name in CATALOG_NAMES {
        let rep = balance_report(&catalog(name).unwrap()).unwrap();
        assert!(rep.balanced && rep.max_force < BALANCE_TOL, "{name}: {}", rep.max_force);
    }
}

#[test]
fn unknown_name_lists_catalog() {
    let msg = catalog("gyroid").unwrap_err().to_string();
    for name in CATALOG_NAMES {
        assert!(msg.contains(name));
    }
}

#[test]
fn schema_errors() {
    assert!(Configuration::from_json("{}").is_err());
    assert!(Configuration::from_json(r#"{"tau":[0,-1],"window":[],"left_tail":[[0.5,0]],"right_tail":[[0.5,0]]}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn half_width_keeps_the_sequence(idx in 0usize..CATALOG_NAMES.len(), k1 in 2usize..10, k2 in 2usize..10) {
        let name = CATALOG_NAMES[idx];
        let a = catalog_with(name, None, k1).unwrap();
        let b = catalog_with(name, None, k2).unwrap();
        for k in -12i64..=12 {
            prop_assert!((a.q(k) - b.q(k)).norm() < 1e-14, "{} at {}", name, k);
        }
    }

    #[test]
    fn rectangular_half_period_stacks_are_balanced(h in 0.7f64..2.5, n in 1usize..4) {
        let tau = C64::new(0.0, h);
        let half = [C64::new(0.5, 0.0), tau / 2.0, (1.0 + tau) / 2.0];
        let pattern: Vec<C64> = (0..n).map(|i| half[i % 3]).collect();
        let cfg = Configuration::periodic(tau, &pattern, 4).unwrap();
        let rep = balance_report(&cfg).unwrap();
        prop_assert!(rep.balanced, "max force {}", rep.max_force);
    }
}
