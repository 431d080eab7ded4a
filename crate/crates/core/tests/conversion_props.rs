mod common;

use common::random_ported_network;
use pdnpulse_core::sparams::{s_to_z_matrix, z_to_s_matrix};
use pdnpulse_core::touchstone::{DataFormat, FreqUnit, ParamKind};
use pdnpulse_core::{
    parse_touchstone, s_to_z, solve_z, write_touchstone, z_to_s, CMatrix, Complex64, FrequencyGrid, Provenance,
    TouchstoneDocument, TouchstoneOptions,
};
use proptest::prelude::*;

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(f64::MIN_POSITIVE)
}

fn matrices_close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    // entries far below the matrix scale are compared against that scale
    let floor = b.max_abs() * 1e-6;
    (0..b.dim()).all(|x| (0..b.dim()).all(|y| (a[(x, y)] - b[(x, y)]).norm() <= tol * b[(x, y)].norm().max(floor)))
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64, -6i32..=4).prop_map(|(re, im, e)| Complex64::new(re, im) * 10f64.powi(e))
}

fn document() -> impl Strategy<Value = TouchstoneDocument> {
    let unit = prop_oneof![Just(FreqUnit::Hz), Just(FreqUnit::KHz), Just(FreqUnit::MHz), Just(FreqUnit::GHz)];
    let format = prop_oneof![Just(DataFormat::Ri), Just(DataFormat::Ma), Just(DataFormat::Db)];
    let kind = prop_oneof![Just(ParamKind::S), Just(ParamKind::Z)];
    (1usize..=5, 1usize..=6, unit, format, kind, 1.0..200.0f64).prop_flat_map(|(n, f, unit, format, kind, reference)| {
        (
            prop::collection::vec(1e3..1e9f64, f),
            prop::collection::vec(complex(), n * n * f),
        )
            .prop_map(move |(steps, values)| {
                let mut freq = 0.0;
                let freqs: Vec<f64> = steps
                    .iter()
                    .map(|s| {
                        freq += s;
                        freq
                    })
                    .collect();
                let data = values.chunks(n * n).map(|c| CMatrix::from_row_major(n, c.to_vec())).collect();
                TouchstoneDocument {
                    options: TouchstoneOptions { unit, kind, format, reference },
                    n_ports: n,
                    freqs,
                    data,
                    comments: vec!["roundtrip".into()],
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn touchstone_roundtrip(doc in document()) {
        let text = write_touchstone(&doc);
        let back = parse_touchstone(&text, doc.n_ports).unwrap();
        prop_assert_eq!(back.options, doc.options);
        prop_assert_eq!(&back.comments, &doc.comments);
        for (a, b) in back.freqs.iter().zip(&doc.freqs) {
            prop_assert!((a - b).abs() <= 1e-9 * b);
        }
        for (a, b) in back.data.iter().zip(&doc.data) {
            for x in 0..doc.n_ports {
                for y in 0..doc.n_ports {
                    prop_assert!(close(a[(x, y)], b[(x, y)], 1e-9), "{} vs {}", a[(x, y)], b[(x, y)]);
                }
            }
        }
    }

    #[test]
    fn z_s_z_roundtrip_on_solved_networks(seed in any::<u64>(), nodes in 1usize..7, ports in 1usize..5, z0 in 5.0..100.0f64) {
        let mut net = random_ported_network(seed, nodes, ports);
        for p in &mut net.ports {
            p.z0 = z0 * (1.0 + p.index as f64 / 10.0);
        }
        let sig = solve_z(&net, &FrequencyGrid::log(3e5, 3e9, 32).unwrap()).unwrap();
        let back = s_to_z(&z_to_s(&sig).unwrap(), Provenance::Simulated).unwrap();
        for (a, b) in back.z.iter().zip(&sig.z) {
            prop_assert!(matrices_close(a, b, 1e-9));
        }
    }

    #[test]
    fn s_z_s_roundtrip(values in prop::collection::vec(complex(), 9), z0 in prop::collection::vec(1.0..100.0f64, 3)) {
        // scale into a passive-looking reflection matrix away from I
        let s = CMatrix::from_row_major(3, values).scale(0.3 / 1e4);
        let z = s_to_z_matrix(&s, &z0, 1e6).unwrap();
        let back = z_to_s_matrix(&z, &z0, 1e6).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                prop_assert!((back[(x, y)] - s[(x, y)]).norm() <= 1e-9 * s.max_abs().max(1e-300));
            }
        }
    }

    #[test]
    fn touchstone_signature_roundtrip(seed in any::<u64>(), nodes in 2usize..6, ports in 1usize..4, as_s in any::<bool>()) {
        let net = random_ported_network(seed, nodes, ports);
        let sig = solve_z(&net, &FrequencyGrid::log(3e5, 3e9, 16).unwrap()).unwrap();
        let options = TouchstoneOptions {
            kind: if as_s { ParamKind::S } else { ParamKind::Z },
            format: DataFormat::Ri,
            unit: FreqUnit::Hz,
            reference: 50.0,
        };
        let doc = TouchstoneDocument::from_signature(&sig, options, vec![]).unwrap();
        let back = parse_touchstone(&write_touchstone(&doc), sig.n_ports()).unwrap().to_signature("b").unwrap();
        for (a, b) in back.z.iter().zip(&sig.z) {
            prop_assert!(matrices_close(a, b, 1e-9));
        }
    }
}

#[test]
fn version_two_keywords_are_rejected() {
    let err = parse_touchstone("[Version] 2.0\n# HZ S RI R 50\n1 0 0\n", 1).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
}
