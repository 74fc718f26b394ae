//! Builds the multigraph and the dyadic relation matrix for a small session
//! with repeated items.

use embsr::data::{make_macro_view, MicroBehavior, SessionRecord};
use embsr::graph::{RelationMatrix, SessionMultigraph};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // (item, op): v1 v2 v3 v2 v3 v4 with operations 0=click, 1=cart, 2=buy; v4 is the target
    let events = [(0, 0), (1, 0), (2, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0)];
    let record = SessionRecord {
        id: "demo".into(),
        events: events
            .iter()
            .enumerate()
            .map(|(t, &(item, op))| MicroBehavior { item, op, timestamp: t as i64 })
            .collect(),
    };
    let view = make_macro_view(&record)?;
    println!("macro items {:?}, op groups {:?}, target {}", view.items, view.op_seqs, view.target_item);

    let g = SessionMultigraph::build(&view);
    print!("{}", g.to_edge_list());
    for n in 0..g.node_count() {
        println!("node {n}: in-degree {}, out-degree {}", g.incoming(n).count(), g.outgoing(n).count());
    }

    // three real operations plus the target-operation token on the star slot
    let n_ops_aug = 4;
    let mut ops = view.flat_ops();
    ops.push(n_ops_aug - 1);
    let rel = RelationMatrix::build(&ops, n_ops_aug)?;
    println!("relation indices ({0}x{0}):", rel.size());
    for i in 0..rel.size() {
        let row: Vec<String> = (0..rel.size()).map(|j| format!("{:2}", rel.get(i, j))).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
