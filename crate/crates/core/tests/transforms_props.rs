use cminet::corr::{correlation_matrix, kendall_tau_b, latent_correlation, tau_to_latent, CorrelationKind};
use cminet::data::{
    clr_transform, filter_taxa, format_count_table, mclr_transform, parse_count_table, to_composition, CountTable,
    Orientation, ShiftPolicy,
};
use cminet::linalg;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

/// Count tables with at least one nonzero per sample.
fn counts(max_n: usize, max_p: usize, zero_rate: f64) -> impl Strategy<Value = CountTable> {
    (4..=max_n, 2..=max_p).prop_flat_map(move |(n, p)| {
        proptest::collection::vec((0.0f64..1.0, 1u32..500), n * p).prop_map(move |cells| {
            let mut v = Array2::from_shape_vec(
                (n, p),
                cells
                    .iter()
                    .map(|&(u, c)| if u < zero_rate { 0.0 } else { c as f64 })
                    .collect(),
            )
            .unwrap();
            for mut row in v.axis_iter_mut(Axis(0)) {
                if row.iter().all(|&x| x == 0.0) {
                    row[0] = 1.0;
                }
            }
            CountTable::from_matrix(v).unwrap()
        })
    })
}

fn non_constant(t: &CountTable) -> bool {
    t.values().axis_iter(Axis(1)).all(|c| c.iter().any(|&v| v != c[0]))
}

const KINDS: [CorrelationKind; 4] = [
    CorrelationKind::Pearson,
    CorrelationKind::Spearman,
    CorrelationKind::Bicor,
    CorrelationKind::Kendall,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn delimited_round_trip(t in counts(12, 6, 0.3)) {
        for delim in [',', '\t'] {
            let back = parse_count_table(&format_count_table(&t, delim), Orientation::SamplesInRows).unwrap();
            prop_assert_eq!(&back, &t);
        }
    }

    #[test]
    fn transposed_text_loads_the_same(t in counts(8, 5, 0.2)) {
        let mut text = String::from("taxon");
        for s in t.samples() { text.push(','); text.push_str(s); }
        text.push('\n');
        for (j, name) in t.taxa().iter().enumerate() {
            text.push_str(name);
            for i in 0..t.n_samples() { text.push_str(&format!(",{}", t.values()[[i, j]])); }
            text.push('\n');
        }
        prop_assert_eq!(parse_count_table(&text, Orientation::TaxaInRows).unwrap(), t);
    }

    #[test]
    fn filter_is_idempotent(t in counts(12, 8, 0.4), prev in 0.0f64..1.0, total in 0.0f64..800.0) {
        prop_assert_eq!(filter_taxa(&t, 0.0, 0.0).unwrap(), t.clone());
        if let Ok(once) = filter_taxa(&t, prev, total) {
            prop_assert_eq!(filter_taxa(&once, prev, total).unwrap(), once.clone());
            for col in once.values().axis_iter(Axis(1)) {
                let present = col.iter().filter(|&&v| v > 0.0).count() as f64;
                prop_assert!(present >= prev * t.n_samples() as f64);
                prop_assert!(col.sum() >= total);
            }
        }
    }

    #[test]
    fn composition_rows_are_simplex_points(t in counts(10, 6, 0.3), pseudo in 0.01f64..2.0) {
        let c = to_composition(&t, pseudo).unwrap();
        for row in c.values.axis_iter(Axis(0)) {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn clr_rows_sum_to_zero_and_ignore_scale(t in counts(10, 6, 0.0), scale in 0.01f64..100.0) {
        let a = clr_transform(&to_composition(&t, 0.0).unwrap()).unwrap();
        for row in a.values.axis_iter(Axis(0)) {
            prop_assert!(row.sum().abs() < 1e-8);
        }
        let scaled = CountTable::new(t.values().mapv(|v| v * scale), t.taxa().to_vec(), t.samples().to_vec()).unwrap();
        let b = clr_transform(&to_composition(&scaled, 0.0).unwrap()).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn mclr_keeps_zeros_and_log_ratios(t in counts(10, 6, 0.4)) {
        let m = mclr_transform(&t, ShiftPolicy::Auto).unwrap();
        let mut min_nonzero = f64::INFINITY;
        for ((i, j), &raw) in t.values().indexed_iter() {
            if raw == 0.0 {
                prop_assert_eq!(m.values[[i, j]], 0.0);
            } else {
                prop_assert!(m.values[[i, j]] > 0.0);
                min_nonzero = min_nonzero.min(m.values[[i, j]]);
                // differences within a row are log ratios
                if let Some(k) = (0..t.n_taxa()).find(|&k| k != j && t.values()[[i, k]] > 0.0) {
                    let expect = (raw / t.values()[[i, k]]).ln();
                    prop_assert!((m.values[[i, j]] - m.values[[i, k]] - expect).abs() < 1e-9);
                }
            }
        }
        prop_assert!((min_nonzero - 1.0).abs() < 1e-9);
    }

    #[test]
    fn correlations_are_valid_and_permutation_equivariant(t in counts(14, 6, 0.1), seed in 0u64..1000) {
        prop_assume!(non_constant(&t));
        let p = t.n_taxa();
        let mut perm: Vec<usize> = (0..p).collect();
        perm.rotate_left((seed as usize) % p);
        let tp = t.select_taxa(&perm);
        for kind in KINDS {
            let r = correlation_matrix(&t, kind).unwrap().values;
            let rp = correlation_matrix(&tp, kind).unwrap().values;
            for i in 0..p {
                prop_assert!((r[[i, i]] - 1.0).abs() < 1e-12);
                for j in 0..p {
                    prop_assert!(r[[i, j]].abs() <= 1.0 + 1e-12);
                    prop_assert!((r[[i, j]] - r[[j, i]]).abs() < 1e-12);
                    prop_assert!((rp[[i, j]] - r[[perm[i], perm[j]]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rank_methods_ignore_monotone_maps(t in counts(14, 5, 0.1)) {
        prop_assume!(non_constant(&t));
        let warped = CountTable::new(
            t.values().mapv(|v| v.powi(3) + (v + 1.0).ln()),
            t.taxa().to_vec(),
            t.samples().to_vec(),
        ).unwrap();
        for kind in [CorrelationKind::Spearman, CorrelationKind::Kendall] {
            let a = correlation_matrix(&t, kind).unwrap().values;
            let b = correlation_matrix(&warped, kind).unwrap().values;
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kendall_is_symmetric_and_odd(x in proptest::collection::vec(-5i32..5, 6..20), seed in 0u64..100) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| ((i as u64 * 7 + seed) % 5) as f64 - v).collect();
        if let (Some(a), Some(b)) = (kendall_tau_b(&x, &y), kendall_tau_b(&y, &x)) {
            prop_assert!((a - b).abs() < 1e-12);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            prop_assert!((kendall_tau_b(&x, &neg).unwrap() + a).abs() < 1e-12);
            prop_assert!(a.abs() <= 1.0);
        }
    }

    #[test]
    fn latent_correlation_is_psd(t in counts(16, 6, 0.3)) {
        prop_assume!(non_constant(&t));
        if let Ok(r) = latent_correlation(&t) {
            prop_assert!(linalg::min_eigenvalue(r.values.view()).unwrap() > -1e-8);
            for i in 0..r.dim() {
                prop_assert!((r.values[[i, i]] - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn bridge_endpoints_and_monotonicity() {
    assert_eq!(tau_to_latent(0.0), 0.0);
    assert!((tau_to_latent(1.0) - 1.0).abs() < 1e-15);
    assert!((tau_to_latent(-1.0) + 1.0).abs() < 1e-15);
    let grid: Vec<f64> = (0..=40).map(|k| -1.0 + k as f64 / 20.0).collect();
    for w in grid.windows(2) {
        assert!(tau_to_latent(w[1]) > tau_to_latent(w[0]));
    }
}
