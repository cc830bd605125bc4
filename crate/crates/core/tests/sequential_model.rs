//! Without preemption the queue must behave exactly like a FIFO.

use std::collections::VecDeque;

use irqueue_core::{
    check_consistency, dequeue, enqueue, peek_n, CheckContext, NodeId, SharedMemory,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    /// Enqueue a fresh chain of this many nodes at this level.
    Enqueue { level: usize, len: usize },
    Dequeue,
    Peek(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0usize..4, 1usize..4).prop_map(|(level, len)| Op::Enqueue { level, len }),
        2 => Just(Op::Dequeue),
        1 => (1usize..6).prop_map(Op::Peek),
    ]
}

proptest! {
    #[test]
    fn serial_operations_match_a_fifo(ops in prop::collection::vec(op(), 0..40), self_sentinel in any::<bool>()) {
        let mut mem = SharedMemory::new(4, 200);
        let q = mem.init_queue(self_sentinel).unwrap();
        let mut model: VecDeque<NodeId> = VecDeque::new();
        for op in ops {
            match op {
                Op::Enqueue { level, len } => {
                    let chain: Vec<NodeId> = (0..len).map(|_| mem.alloc_node().unwrap()).collect();
                    for pair in chain.windows(2) {
                        mem.set_next(pair[0], Some(pair[1]));
                    }
                    enqueue(&mut mem, q, level, chain[0]).unwrap();
                    model.extend(chain);
                }
                Op::Dequeue => {
                    let got = dequeue(&mut mem, q).unwrap();
                    prop_assert_eq!(got, model.pop_front());
                    if let Some(n) = got {
                        prop_assert_eq!(mem.next(n), None);
                    }
                }
                Op::Peek(limit) => {
                    let before = mem.clone();
                    prop_assert_eq!(peek_n(&mut mem, q, limit).unwrap(), model.len().min(limit));
                    prop_assert_eq!(&mem, &before);
                }
            }
            let violations = check_consistency(&mem, &CheckContext::quiescent());
            prop_assert!(violations.is_empty(), "{:?}", violations);
        }
    }
}
