use std::path::Path;

use lexspec::checkpoint::{read_mlp, write_mlp};
use lexspec::config::PipelineConfig;
use lexspec::formats::{read_embeddings, read_constraint_pairs, write_embeddings, HeaderPolicy};
use lexspec_core::constraints::{Relation, SourceTag};
use lexspec_core::nn::{Activation, Mlp, MlpSpec};
use lexspec_core::VectorSpace;
use proptest::prelude::*;
use rand::SeedableRng;

fn space_strategy() -> impl Strategy<Value = VectorSpace> {
    (1usize..12, 1usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-100.0f64..100.0, d), n).prop_map(|rows| {
            let records = rows.into_iter().enumerate().map(|(i, r)| (format!("tok{i}"), r));
            VectorSpace::from_records(records).unwrap().0
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embeddings_round_trip_to_six_decimals(space in space_strategy(), header in any::<bool>()) {
        let mut buf = Vec::new();
        write_embeddings(&space, &mut buf, header).unwrap();
        let policy = if header { HeaderPolicy::Require } else { HeaderPolicy::Forbid };
        let (back, stats) = read_embeddings(buf.as_slice(), policy, Path::new("mem")).unwrap();
        prop_assert_eq!(back.words(), space.words());
        prop_assert_eq!(stats.duplicates, 0);
        prop_assert!(back.matrix().max_abs_diff(space.matrix()) <= 5e-7 + 1e-12);
    }

    #[test]
    fn checkpoints_round_trip_exactly(seed in any::<u64>(), input in 1usize..6, hidden in prop::collection::vec(1usize..8, 0..3)) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let spec = MlpSpec::new(input, &hidden, Activation::LeakyRelu(0.2), input, Activation::Identity);
        let m = Mlp::init(&spec, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&m, &mut buf).unwrap();
        let back = read_mlp(buf.as_slice(), Path::new("mem")).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn config_render_is_a_fixed_point(seed in any::<u64>(), epochs in 0usize..100, lr in 1e-6f64..1.0, overlap in any::<bool>()) {
        let mut c = PipelineConfig::default();
        c.apply_override(&format!("run.seed={seed}")).unwrap();
        c.apply_override(&format!("ar.epochs={epochs}")).unwrap();
        c.apply_override(&format!("postspec.critic_lr={lr}")).unwrap();
        if overlap {
            c.apply_override("protocol.setting=overlap").unwrap();
        }
        let back = PipelineConfig::parse_str(&c.render(), Path::new(""), Path::new("mem")).unwrap();
        prop_assert_eq!(back.render(), c.render());
        prop_assert_eq!(back.sha256(), c.sha256());
    }
}

#[test]
fn constraint_file_is_canonicalized() {
    let text = "b a\na b\nen_x en_y\n";
    let (cs, stats) =
        read_constraint_pairs(text.as_bytes(), Relation::Antonym, SourceTag::Babelnet, true, Path::new("mem"))
            .unwrap();
    let pairs: Vec<(&str, &str)> = cs.antonyms().iter().map(|p| (p.first(), p.second())).collect();
    assert_eq!(pairs, [("a", "b"), ("x", "y")]);
    assert_eq!(stats.duplicates, 1);
}
