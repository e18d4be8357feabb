use cloudprint::PointCloud;
use cloudprint_cli::csvio;
use cloudprint_cli::ecf::{self, EcfError};
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = PointCloud> {
    (1usize..6, 2usize..6).prop_flat_map(|(count, dim)| {
        prop::collection::vec(
            prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
            count * dim,
        )
        .prop_map(move |data| PointCloud::from_flat(count, dim, data).unwrap())
    })
}

proptest! {
    #[test]
    fn ecf_round_trips_bits(c in cloud()) {
        let bytes = ecf::encode(&c).unwrap();
        prop_assert_eq!(bytes.len(), ecf::HEADER_LEN + 8 * c.as_slice().len());
        let back = ecf::decode(&bytes).unwrap();
        for (a, b) in back.as_slice().iter().zip(c.as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ecf_detects_any_length_change(c in cloud(), cut in 1usize..8, pad in 1usize..8) {
        let bytes = ecf::encode(&c).unwrap();
        let short = &bytes[..bytes.len() - cut];
        prop_assert!(
            matches!(ecf::decode(short), Err(EcfError::Truncated { .. })),
            "truncated by {} not detected",
            cut
        );
        let mut long = bytes.clone();
        long.extend(std::iter::repeat_n(0u8, pad));
        prop_assert!(
            matches!(ecf::decode(&long), Err(EcfError::TrailingBytes { .. })),
            "padding not detected"
        );
    }

    #[test]
    fn csv_round_trips_bits(c in cloud(), header in any::<bool>()) {
        let mut buf = Vec::new();
        csvio::render(&c, &mut buf, header).unwrap();
        let back = csvio::parse(buf.as_slice()).unwrap();
        prop_assert_eq!(back.count(), c.count());
        for (a, b) in back.as_slice().iter().zip(c.as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
