use proptest::prelude::*;

use tadil::domain::{normalize_rows, Ingestor};
use tadil::Error;

proptest! {
    #[test]
    fn normalization_is_idempotent(dim in 1usize..16, raw in prop::collection::vec(-100.0f64..100.0, 1..128)) {
        let n = raw.len() / dim;
        prop_assume!(n > 0);
        let mut data = raw[..n * dim].to_vec();
        prop_assume!(data.chunks(dim).all(|r| r.iter().any(|&x| x != 0.0)));
        normalize_rows(dim, &mut data).unwrap();
        for row in data.chunks(dim) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-12);
        }
        let once: Vec<u64> = data.iter().map(|x| x.to_bits()).collect();
        normalize_rows(dim, &mut data).unwrap();
        prop_assert_eq!(once, data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn ingestor_numbers_batches_and_rejects_bad_rows() {
    let mut ing = Ingestor::new(2);
    let a = ing.normalize_batch(vec![3.0, 4.0], None).unwrap();
    let b = ing.normalize_batch(vec![0.0, 2.0, 1.0, 0.0], Some(vec![4, 4])).unwrap();
    assert_eq!((a.batch_id(), b.batch_id()), (0, 1));
    assert_eq!(a.row(0), &[0.6, 0.8]);
    assert_eq!(b.true_task(), Some(4));
    assert!(matches!(
        ing.normalize_batch(vec![1.0, 0.0, 0.0, 0.0], None),
        Err(Error::ZeroVector { row: 1 })
    ));
    assert!(matches!(
        ing.normalize_batch(vec![f64::INFINITY, 0.0], None),
        Err(Error::NonFinite { row: 0, col: 0 })
    ));
    assert!(matches!(
        ing.normalize_batch(vec![1.0, 0.0, 1.0], None),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(matches!(ing.normalize_batch(vec![], None), Err(Error::EmptyBatch)));
}
