//! Property tests over random inputs.

use embsr::data::{make_macro_view, MicroBehavior, SessionRecord};
use embsr::graph::{dyadic_index, RelationMatrix, SessionMultigraph};
use embsr::metrics::{rank_of_target, EvalReport, DEFAULT_KS};
use proptest::prelude::*;

fn events() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..5, 0usize..3), 2..25)
}

fn record(ev: &[(usize, usize)]) -> SessionRecord {
    SessionRecord {
        id: "p".into(),
        events: ev.iter().enumerate().map(|(t, &(item, op))| MicroBehavior { item, op, timestamp: t as i64 }).collect(),
    }
}

proptest! {
    #[test]
    fn merging_round_trips(ev in events()) {
        let Ok(view) = make_macro_view(&record(&ev)) else {
            // only sessions of a single item are rejected
            prop_assert!(ev.iter().all(|e| e.0 == ev[0].0));
            return Ok(());
        };
        prop_assert!(view.items.windows(2).all(|w| w[0] != w[1]));
        prop_assert_ne!(Some(&view.target_item), view.items.last());
        let mut flat: Vec<(usize, usize)> = view.micro_behaviors().map(|(_, i, o)| (i, o)).collect();
        let tail = ev.iter().rev().take_while(|e| e.0 == view.target_item).count();
        prop_assert_eq!(view.target_op, Some(ev[ev.len() - tail].1));
        flat.extend(ev[ev.len() - tail..].iter().copied());
        prop_assert_eq!(flat, ev);
    }

    #[test]
    fn multigraph_has_one_edge_per_transition(items in prop::collection::vec(0usize..6, 1..20)) {
        let mut items = items;
        items.dedup();
        let g = SessionMultigraph::from_items(&items);
        let mut distinct = items.clone();
        distinct.sort_unstable();
        distinct.dedup();
        prop_assert_eq!(g.node_count(), distinct.len());
        prop_assert_eq!(g.edges().len(), items.len() - 1);
        for (k, e) in g.edges().iter().enumerate() {
            prop_assert_eq!(e.order, k + 1);
            prop_assert_eq!((g.nodes()[e.src], g.nodes()[e.dst]), (items[k], items[k + 1]));
            prop_assert_eq!((e.src_pos, e.dst_pos), (k, k + 1));
        }
        // in-degree summed over nodes equals the edge count; same for out-degree
        let ins: usize = (0..g.node_count()).map(|n| g.incoming(n).count()).sum();
        let outs: usize = (0..g.node_count()).map(|n| g.outgoing(n).count()).sum();
        prop_assert_eq!((ins, outs), (items.len() - 1, items.len() - 1));
    }

    #[test]
    fn reversed_session_reverses_edges(items in prop::collection::vec(0usize..6, 2..15)) {
        let mut items = items;
        items.dedup();
        let rev: Vec<usize> = items.iter().rev().copied().collect();
        let pairs = |g: &SessionMultigraph| {
            let mut p: Vec<(usize, usize)> = g.edges().iter().map(|e| (g.nodes()[e.src], g.nodes()[e.dst])).collect();
            p.sort_unstable();
            p
        };
        let forward = pairs(&SessionMultigraph::from_items(&items));
        let mut backward: Vec<(usize, usize)> = pairs(&SessionMultigraph::from_items(&rev)).into_iter().map(|(a, b)| (b, a)).collect();
        backward.sort_unstable();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn relation_matrix_depends_only_on_operation_pairs(ops in prop::collection::vec(0usize..4, 1..12)) {
        let r = RelationMatrix::build(&ops, 4).unwrap();
        for i in 0..ops.len() {
            for j in 0..ops.len() {
                prop_assert_eq!(r.get(i, j), dyadic_index(ops[i], ops[j], 4).unwrap());
                prop_assert!(r.get(i, j) < 16);
            }
        }
    }

    #[test]
    fn rank_matches_sort_oracle(scores in prop::collection::vec(-3i32..3, 1..30), t in 0usize..30) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let target = t % scores.len();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // stable sort keeps lower indices first among ties
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let oracle = order.iter().position(|&i| i == target).unwrap() + 1;
        prop_assert_eq!(rank_of_target(&scores, target), oracle);
    }

    #[test]
    fn reports_are_monotone_and_bounded(ranks in prop::collection::vec(1usize..40, 1..50)) {
        let r = EvalReport::from_ranks(ranks, &DEFAULT_KS).unwrap();
        for i in 0..r.ks.len() {
            prop_assert!(r.mrr[i] <= r.hit[i] + 1e-12);
            prop_assert!((0.0..=100.0).contains(&r.hit[i]) && (0.0..=100.0).contains(&r.mrr[i]));
            if i > 0 {
                prop_assert!(r.hit[i] >= r.hit[i - 1] && r.mrr[i] >= r.mrr[i - 1]);
            }
        }
        prop_assert_eq!(r.hit[0], r.mrr[0]);
    }
}
