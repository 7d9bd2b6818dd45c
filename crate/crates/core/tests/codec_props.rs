use depthflow::fields::{FlowField, PixelGrid, ScalarField};
use depthflow::io::{
    decode_flo, decode_kitti_png, decode_pfm, encode_flo, encode_kitti_png, encode_pfm,
};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..12, 1usize..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flo_round_trip_is_bit_exact((w, h) in dims(), seed in prop::collection::vec((any::<f32>(), any::<f32>(), any::<bool>()), 144)) {
        let g = PixelGrid::new(w, h);
        let flow = FlowField::from_fn(g, |x, y| {
            let (u, v, keep) = seed[y as usize * 12 + x as usize];
            let ok = keep && u.is_finite() && v.is_finite() && u.abs() <= 1e9 && v.abs() <= 1e9;
            ok.then_some((u as f64, v as f64))
        });
        let back = decode_flo(&encode_flo(&flow).unwrap()).unwrap();
        prop_assert_eq!(back.valid(), flow.valid());
        for i in 0..g.len() {
            if let (Some(a), Some(b)) = (flow.get_index(i), back.get_index(i)) {
                prop_assert_eq!(a.0.to_bits(), b.0.to_bits());
                prop_assert_eq!(a.1.to_bits(), b.1.to_bits());
            }
        }
    }

    #[test]
    fn kitti_round_trip_within_half_step((w, h) in dims(), vals in prop::collection::vec((-511.9f64..511.9, -511.9f64..511.9, any::<bool>()), 144)) {
        let g = PixelGrid::new(w, h);
        let flow = FlowField::from_fn(g, |x, y| {
            let (u, v, keep) = vals[y as usize * 12 + x as usize];
            keep.then_some((u, v))
        });
        let back = decode_kitti_png(&encode_kitti_png(&flow).unwrap()).unwrap();
        prop_assert_eq!(back.valid(), flow.valid());
        for i in 0..g.len() {
            if let (Some(a), Some(b)) = (flow.get_index(i), back.get_index(i)) {
                prop_assert!((a.0 - b.0).abs() <= 1.0 / 128.0 && (a.1 - b.1).abs() <= 1.0 / 128.0);
            }
        }
    }

    #[test]
    fn pfm_round_trip_is_bit_exact((w, h) in dims(), vals in prop::collection::vec(prop::option::weighted(0.8, 1e-6f32..1e6), 144)) {
        let g = PixelGrid::new(w, h);
        let field = ScalarField::from_fn(g, |x, y| vals[y * 12 + x].map(f64::from));
        let back = decode_pfm(&encode_pfm(&field)).unwrap();
        prop_assert_eq!(back, field);
    }
}
