use chn_core::data::Scale;
use chn_core::harness::{auroc, rmse};
use chn_core::Error;
use proptest::prelude::*;

fn pair_count(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (s_pos, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        for (s_neg, _) in scores.iter().zip(labels).filter(|(_, &l)| !l) {
            pairs += 1.0;
            wins += match s_pos.partial_cmp(s_neg).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    wins / pairs
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..300).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..12).prop_map(|v| f64::from(v) / 4.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn auroc_equals_pair_counting((scores, mut labels) in scored_labels()) {
        labels[0] = true;
        labels[1] = false;
        let x: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
        prop_assert_eq!(auroc(&scores, &x).unwrap(), pair_count(&scores, &labels));
    }

    #[test]
    fn auroc_is_rank_based((scores, mut labels) in scored_labels(), shift in -3.0f64..3.0) {
        labels[0] = true;
        labels[1] = false;
        let x: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
        let moved: Vec<f64> = scores.iter().map(|s| (s * 2.0 + shift).exp()).collect();
        prop_assert_eq!(auroc(&scores, &x).unwrap(), auroc(&moved, &x).unwrap());
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = auroc(&scores, &x).unwrap() + auroc(&flipped, &x).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rmse_scales_with_the_span(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..50),
        lo in -5.0f64..5.0,
        span in 0.5f64..20.0,
    ) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let unit = rmse(&p, &t, Scale { min: 0.0, max: 1.0 }).unwrap();
        let wide = rmse(&p, &t, Scale { min: lo, max: lo + span }).unwrap();
        prop_assert!((wide - span * unit).abs() <= 1e-12 * span.max(1.0));
    }
}

#[test]
fn single_class_is_undefined() {
    assert!(matches!(auroc(&[0.1, 0.9], &[1.0, 1.0]), Err(Error::UndefinedMetric(_))));
}
