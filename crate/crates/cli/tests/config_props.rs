use proptest::prelude::*;
use twistlab_cli::{resolve, Command, SweepSpec};

fn flags(pairs: Vec<(&str, String)>) -> Vec<(String, String)> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

proptest! {
    #[test]
    fn echo_config_round_trips(
        n in 1usize..100_000,
        q_min in 1e-6f64..10.0,
        span in 1.0f64..1e4,
        points in 1usize..5000,
        log in any::<bool>(),
        r_det in 0.0f64..1.0,
    ) {
        let spec = resolve(Command::EchoSweep, &[], &flags(vec![
            ("n", n.to_string()),
            ("q-min", format!("{q_min:?}")),
            ("q-max", format!("{:?}", q_min * span)),
            ("points", points.to_string()),
            ("scale", if log { "log" } else { "lin" }.to_string()),
            ("r-det", format!("{r_det:?}")),
        ])).unwrap();
        let again = SweepSpec::from_config_text(Command::EchoSweep, &spec.to_config_text()).unwrap();
        prop_assert_eq!(again, spec);
    }

    #[test]
    fn grid_flags_round_trip(lo in 1e-3f64..1.0, ratio in 1.0f64..1e6, points in 1usize..300, log in any::<bool>()) {
        let grid = format!("{lo:?}:{:?}:{points}:{}", lo * ratio, if log { "log" } else { "lin" });
        let spec = resolve(Command::CavityMap, &[], &flags(vec![("photons", grid)])).unwrap();
        let values = spec.grid("photons").unwrap();
        prop_assert_eq!(values.len(), points);
        prop_assert!((values[0] - lo).abs() <= 1e-12 * lo);
        let again = SweepSpec::from_config_text(Command::CavityMap, &spec.to_config_text()).unwrap();
        prop_assert_eq!(again.grid("photons").unwrap(), values);
    }
}
