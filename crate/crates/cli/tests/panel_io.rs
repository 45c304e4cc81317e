//! Panel CSV invariants.

use proptest::prelude::*;
use state_lp::panel_io::{load_panel, write_panel, PanelSchema};
use state_lp_core::monte_carlo::{simulate_dgp, DgpSpec};

fn csv_text(seed: u64, n: usize, t: usize) -> String {
    let spec = DgpSpec {
        burn_in: 10,
        ..DgpSpec::default()
    };
    let panel = simulate_dgp(&spec, n, t, seed).unwrap();
    let mut buf = Vec::new();
    write_panel(&mut buf, &panel).unwrap();
    String::from_utf8(buf).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn row_order_does_not_matter(seed in 0u64..1000, n in 2usize..6, t in 2usize..8, rot in 0usize..50) {
        let text = csv_text(seed, n, t);
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        let k = rot % lines.len();
        lines.rotate_left(k);
        lines.reverse();
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let a = load_panel(text.as_bytes(), &PanelSchema::default()).unwrap();
        let b = load_panel(shuffled.as_bytes(), &PanelSchema::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn emitted_panels_load_back_exactly(seed in 0u64..1000, n in 1usize..5, t in 2usize..6) {
        let spec = DgpSpec { burn_in: 10, ..DgpSpec::default() };
        let panel = simulate_dgp(&spec, n, t, seed).unwrap();
        let text = csv_text(seed, n, t);
        prop_assert_eq!(load_panel(text.as_bytes(), &PanelSchema::default()).unwrap(), panel);
    }
}
