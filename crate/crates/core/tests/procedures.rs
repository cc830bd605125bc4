use irqueue_core::memory::Bus;
use irqueue_core::{
    find_anchor, follow, previous_interrupt_level, Cell, FindAnchor, Follow, NodeId, Poll, QueueId,
    SharedMemory, Word,
};

fn domain(nodes: usize) -> (SharedMemory, QueueId, Vec<NodeId>) {
    let mut mem = SharedMemory::new(8, nodes + 2);
    let q = mem.init_queue(false).unwrap();
    let ids = (0..nodes).map(|_| mem.alloc_node().unwrap()).collect();
    (mem, q, ids)
}

fn link(mem: &mut SharedMemory, chain: &[NodeId]) {
    for pair in chain.windows(2) {
        mem.set_next(pair[0], Some(pair[1]));
    }
}

#[test]
fn follow_single_node_is_itself() {
    let (mut mem, _, n) = domain(1);
    assert_eq!(follow(&mut mem, n[0]).unwrap(), n[0]);
}

#[test]
fn follow_walks_to_the_end() {
    let (mut mem, _, n) = domain(3);
    link(&mut mem, &n);
    assert_eq!(follow(&mut mem, n[0]).unwrap(), n[2]);
}

#[test]
fn follow_sees_nodes_appended_between_steps() {
    let (mut mem, _, n) = domain(3);
    let (a, b, c) = (n[0], n[1], n[2]);
    link(&mut mem, &[a, b]);
    let mut machine = Follow::new(Some(a));
    let resume = |mem: &mut SharedMemory, m: &mut Follow| {
        let mut bus = Bus::new(mem);
        let poll = m.resume(&mut bus).unwrap();
        assert!(bus.into_access().is_some());
        poll
    };
    assert_eq!(resume(&mut mem, &mut machine), Poll::Pending); // a.next != none
    assert_eq!(resume(&mut mem, &mut machine), Poll::Pending); // cursor := b
    // an interrupt appends c behind b
    mem.set_next(b, Some(c));
    assert_eq!(resume(&mut mem, &mut machine), Poll::Pending);
    assert_eq!(resume(&mut mem, &mut machine), Poll::Pending);
    assert_eq!(resume(&mut mem, &mut machine), Poll::Ready(c));
}

#[test]
fn previous_level_on_empty_table_is_none() {
    let (mut mem, q, _) = domain(0);
    assert_eq!(previous_interrupt_level(&mut mem, 5, q), None);
    assert_eq!(previous_interrupt_level(&mut mem, 0, q), None);
}

#[test]
fn previous_level_finds_own_queue() {
    let (mut mem, q, _) = domain(0);
    mem.poke(Cell::TableQueue(1), Word::Queue(q));
    assert_eq!(previous_interrupt_level(&mut mem, 3, q), Some(1));
    assert_eq!(previous_interrupt_level(&mut mem, 1, q), None);
}

#[test]
fn previous_level_skips_foreign_queues() {
    let mut mem = SharedMemory::new(8, 2);
    let q = mem.init_queue(false).unwrap();
    let other = mem.init_queue(false).unwrap();
    mem.poke(Cell::TableQueue(2), Word::Queue(other));
    mem.poke(Cell::TableQueue(0), Word::Queue(q));
    assert_eq!(previous_interrupt_level(&mut mem, 3, q), Some(0));
    assert_eq!(previous_interrupt_level(&mut mem, 3, other), Some(2));
}

/// Every node whose `next` is `target`, by brute force over all cells.
fn referrers(mem: &SharedMemory, target: NodeId) -> Vec<NodeId> {
    mem.nodes().filter(|&n| mem.next(n) == Some(target)).collect()
}

#[test]
fn anchor_at_tail() {
    let (mut mem, q, n) = domain(1);
    let s = mem.queue(q).sentinel;
    mem.set_next(s, Some(n[0]));
    assert_eq!(find_anchor(&mut mem, 1, n[0], q).unwrap(), Some(s));
    assert_eq!(referrers(&mem, n[0]), vec![s]);
}

#[test]
fn unlinked_node_has_no_anchor() {
    let (mut mem, q, n) = domain(1);
    mem.poke(Cell::TableQueue(1), Word::Queue(q));
    mem.poke(Cell::TableNode(1), Word::Node(n[0]));
    assert_eq!(find_anchor(&mut mem, 1, n[0], q).unwrap(), None);
    assert!(referrers(&mem, n[0]).is_empty());
}

#[test]
fn anchor_inside_a_lower_level_chain() {
    let (mut mem, q, n) = domain(3);
    let (t, m, node) = (n[0], n[1], n[2]);
    link(&mut mem, &[t, m, node]);
    // level 0 is working on this queue with chain t -> m -> node
    mem.poke(Cell::TableQueue(0), Word::Queue(q));
    mem.poke(Cell::TableNode(0), Word::Node(t));
    assert_eq!(find_anchor(&mut mem, 2, node, q).unwrap(), Some(m));
    assert_eq!(referrers(&mem, node), vec![m]);
}

#[test]
fn anchor_search_falls_back_to_tail_chain() {
    let (mut mem, q, n) = domain(3);
    let s = mem.queue(q).sentinel;
    // level 0 chain does not contain the target; the tail chain does
    mem.poke(Cell::TableQueue(0), Word::Queue(q));
    mem.poke(Cell::TableNode(0), Word::Node(n[0]));
    link(&mut mem, &[s, n[1], n[2]]);
    assert_eq!(find_anchor(&mut mem, 1, n[2], q).unwrap(), Some(n[1]));
}

#[test]
fn find_anchor_machine_reads_one_cell_per_step() {
    let (mut mem, q, n) = domain(2);
    let s = mem.queue(q).sentinel;
    link(&mut mem, &[s, n[0], n[1]]);
    let mut machine = FindAnchor::new(2, Some(n[1]), q);
    let mut cells = Vec::new();
    let result = loop {
        let mut bus = Bus::new(&mut mem);
        let poll = machine.resume(&mut bus).unwrap();
        cells.push(bus.into_access().unwrap().cell);
        if let Poll::Ready(r) = poll {
            break r;
        }
    };
    assert_eq!(result, Some(n[0]));
    assert_eq!(
        cells,
        vec![
            Cell::TableQueue(1),
            Cell::TableQueue(0),
            Cell::Tail(q),
            Cell::Next(s),
            Cell::Next(s),
            Cell::Next(n[0]),
        ]
    );
}
