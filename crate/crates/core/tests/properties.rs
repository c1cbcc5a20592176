mod common;

use proptest::prelude::*;

use metaspec_core::checker::{plain_run, separated, Region};
use metaspec_core::minic::{parse_program, typecheck};
use metaspec_core::normalize::normalize_program;
use metaspec_core::spec::{parse_meta_block, ContextKind};
use metaspec_core::transform::{apply_all, emit_annotated_source};

fn region() -> impl Strategy<Value = Region> {
    (0usize..3, 0i64..64, 0i64..16).prop_map(|(object, offset, length)| Region {
        object,
        offset,
        length,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>()) {
        let np = common::generate(seed).normalized();
        let again = normalize_program(&np.typed);
        prop_assert_eq!(again.program().without_locs(), np.program().without_locs());
    }

    #[test]
    fn transformation_is_deterministic(seed in any::<u64>()) {
        let g = common::generate(seed);
        let np = g.normalized();
        let metas = g.metas();
        let a = apply_all(&np, &metas).unwrap();
        let b = apply_all(&np, &metas).unwrap();
        prop_assert_eq!(&a.annotations, &b.annotations);
        prop_assert_eq!(emit_annotated_source(&a), emit_annotated_source(&b));
    }

    #[test]
    fn plain_runs_depend_only_on_the_seed(seed in any::<u64>()) {
        let tp = typecheck(&common::generate(seed).program()).unwrap();
        prop_assert_eq!(plain_run(&tp, "main", seed).unwrap(), plain_run(&tp, "main", seed).unwrap());
    }

    /// Every point a weak invariant checks is also checked by the strong one.
    #[test]
    fn weak_points_are_strong_points(seed in any::<u64>()) {
        let np = common::generate(seed).normalized();
        let mk = |ctx: &str| parse_meta_block(&format!("meta P: \\forall function f; \\{ctx}(f), g0 + ga[0] >= p0->a0;")).unwrap();
        let weak = apply_all(&np, &mk("weak_invariant")).unwrap().annotations;
        let strong = apply_all(&np, &mk("strong_invariant")).unwrap().annotations;
        prop_assert_eq!(mk("weak_invariant")[0].context, ContextKind::WeakInvariant);
        for (f, c) in &weak.contracts {
            prop_assert_eq!(Some(c), strong.contracts.get(f));
        }
        prop_assert!(weak.point_asserts.is_empty());
    }

    #[test]
    fn separation_is_symmetric(a in prop::collection::vec(region(), 0..4), b in prop::collection::vec(region(), 0..4)) {
        prop_assert_eq!(separated(&a, &b), separated(&b, &a));
    }

    #[test]
    fn parser_never_panics(src in "[a-z0-9 ;{}()\\[\\]*&=<>!+\\-/@.,\n]{0,120}") {
        let _ = parse_program(&src);
        let _ = parse_program(&format!("int g; void main() {{ {src} }}"));
    }
}
