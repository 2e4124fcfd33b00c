//! Values frozen from an independent implementation (NumPy SVD superposition
//! and a separate varint encoder) for fixed inputs.

use trajbench::model::Vec3;
use trajbench::rmsd::{rmsd_kabsch_oracle, rmsd_qcp};
use trajbench::trjio::codec::{decode_positions, encode_positions};

fn set_a(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            [
                ((i * 7 % 11) as f64) * 0.25,
                ((i * 5 % 13) as f64) * 0.5 - 2.0,
                ((i * 3 % 7) as f64) * 0.75,
            ]
        })
        .collect()
}

fn set_b(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            [
                ((i * 11 % 17) as f64) * 0.3,
                ((i * 2 % 9) as f64) * 0.4,
                ((i * 13 % 19) as f64) * 0.2 - 1.0,
            ]
        })
        .collect()
}

fn reversed(v: &[Vec3]) -> Vec<Vec3> {
    v.iter().rev().copied().collect()
}

#[test]
fn rmsd_matches_frozen_values() {
    let cases = [
        (set_a(12), set_b(12), 2.565440880019314),
        (set_a(12), reversed(&set_a(12)), 2.6737917095159913),
        (set_a(146), set_b(146), 3.1694172033052186),
        (set_a(146), reversed(&set_a(146)), 3.248417264376507),
    ];
    for (a, b, expected) in cases {
        let q = rmsd_qcp(&a, &b).unwrap();
        let o = rmsd_kabsch_oracle(&a, &b).unwrap();
        assert!((q - expected).abs() <= 1e-12, "qcp {q} vs {expected}");
        assert!((o - expected).abs() <= 1e-12, "svd {o} vs {expected}");
    }
}

#[test]
fn payload_matches_frozen_bytes() {
    let positions = [[1.234, -0.5, 7.0], [1.2345678, -0.501, 6.9], [-3.3, 0.0, 100.25]];
    let mut payload = Vec::new();
    encode_positions(&positions, 1000.0, &mut payload).unwrap();
    let hex: String = payload.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, "a413e707b06d0201c701ed46ea07ccb20b");
    let back = decode_positions(&payload, 3, 1000.0).unwrap();
    assert_eq!(back[0], [1.234, -0.5, 7.0]);
    assert_eq!(back[2], [-3.3, 0.0, 100.25]);
}
