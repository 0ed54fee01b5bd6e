#![allow(dead_code)]

use musiclab_core::{AttractionVector, Market};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct Instance {
    pub a: AttractionVector,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl Instance {
    pub fn market(&self) -> Market {
        Market::with_defaults(self.a.values().to_vec(), self.q.clone(), self.v.clone()).unwrap()
    }
}

/// Random attraction, quality and visibility. Visibility is sorted
/// (most visible first) when `sorted` is set.
pub fn instance(sizes: std::ops::RangeInclusive<usize>, sorted: bool) -> impl Strategy<Value = Instance> {
    sizes.prop_flat_map(move |n| {
        (
            prop::collection::vec(0.01f64..50.0, n),
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0.01f64..1.0, n),
        )
            .prop_map(move |(a, q, mut v)| {
                if sorted {
                    v.sort_by(|x, y| y.total_cmp(x));
                }
                Instance {
                    a: AttractionVector::new(a).unwrap(),
                    q,
                    v,
                }
            })
    })
}
