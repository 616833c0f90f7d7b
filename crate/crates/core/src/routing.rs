//! Node buffers with drop-head FIFO overflow, summary-vector exchange, and
//! the two admission policies: plain epidemic and CARE (detector-gated).

use std::collections::{BTreeSet, VecDeque};

use crate::config::MessageRecord;

/// FIFO message store; `queue` front is the oldest admitted message.
#[derive(Debug, Clone)]
pub struct NodeBuffer {
    pub capacity: u64,
    queue: VecDeque<MessageRecord>,
    ids: BTreeSet<u64>,
    occupied: u64,
    version: u64,
}

impl NodeBuffer {
    pub fn new(capacity: u64) -> Self {
        NodeBuffer { capacity, queue: VecDeque::new(), ids: BTreeSet::new(), occupied: 0, version: 0 }
    }

    /// Bumped on every mutation; lets callers skip rescans of an unchanged
    /// buffer.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn occupied(&self) -> u64 {
        self.occupied
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn contains(&self, msg_id: u64) -> bool {
        self.ids.contains(&msg_id)
    }

    /// Oldest-first view of the buffered messages.
    pub fn iter(&self) -> impl Iterator<Item = &MessageRecord> {
        self.queue.iter()
    }

    pub fn remove(&mut self, msg_id: u64) -> Option<MessageRecord> {
        let idx = self.queue.iter().position(|m| m.msg_id == msg_id)?;
        let msg = self.queue.remove(idx).unwrap();
        self.ids.remove(&msg_id);
        self.occupied -= msg.size;
        self.version += 1;
        Some(msg)
    }

    fn push(&mut self, msg: MessageRecord) {
        self.occupied += msg.size;
        self.ids.insert(msg.msg_id);
        self.queue.push_back(msg);
        self.version += 1;
    }

    fn pop_head(&mut self) -> Option<MessageRecord> {
        let msg = self.queue.pop_front()?;
        self.ids.remove(&msg.msg_id);
        self.occupied -= msg.size;
        self.version += 1;
        Some(msg)
    }
}

/// Outcome of offering one message to a buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum Admission {
    Accepted,
    /// Accepted after evicting these messages from the queue head.
    AcceptedWithDrops(Vec<MessageRecord>),
    RejectedDuplicate,
    /// CARE: detector said Similar and the pair really shares a cluster.
    RejectedRedundant,
    /// CARE: detector said Similar but the pair is actually dissimilar.
    RejectedFalsePositive,
    /// Message larger than the whole buffer; counts as a drop of itself.
    RejectedTooLarge,
}

/// Plain epidemic admission: exact-id dedup, then drop-head until it fits.
pub fn admit_epidemic(buffer: &mut NodeBuffer, msg: MessageRecord) -> Admission {
    if buffer.contains(msg.msg_id) {
        return Admission::RejectedDuplicate;
    }
    if msg.size > buffer.capacity {
        return Admission::RejectedTooLarge;
    }
    let mut dropped = Vec::new();
    while buffer.occupied + msg.size > buffer.capacity {
        dropped.push(buffer.pop_head().expect("occupied > 0 while over capacity"));
    }
    buffer.push(msg);
    if dropped.is_empty() {
        Admission::Accepted
    } else {
        Admission::AcceptedWithDrops(dropped)
    }
}

/// CARE admission: exact-id dedup, then the detector compares the incoming
/// message against every buffered one (oldest first); any Similar verdict
/// rejects it. Otherwise identical to `admit_epidemic`.
pub fn admit_care(
    buffer: &mut NodeBuffer,
    msg: MessageRecord,
    mut similar: impl FnMut(&MessageRecord, &MessageRecord) -> bool,
) -> Admission {
    if buffer.contains(msg.msg_id) {
        return Admission::RejectedDuplicate;
    }
    for held in buffer.iter() {
        if similar(held, &msg) {
            return if held.cluster_id == msg.cluster_id {
                Admission::RejectedRedundant
            } else {
                Admission::RejectedFalsePositive
            };
        }
    }
    admit_epidemic(buffer, msg)
}

/// Messages in `a` absent from `b`, oldest first — the a→b send list.
pub fn summary_exchange(a: &NodeBuffer, b: &NodeBuffer) -> Vec<u64> {
    a.iter().filter(|m| !b.contains(m.msg_id)).map(|m| m.msg_id).collect()
}

/// One in-flight message on a directed link. The message is cloned into the
/// session so a sender-side drop cannot corrupt the transfer.
#[derive(Debug, Clone)]
pub struct TransferSession {
    pub sender: usize,
    pub receiver: usize,
    pub message: MessageRecord,
    pub bytes_sent: f64,
    /// bits/second
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransferStatus {
    InProgress,
    Delivered,
    Aborted,
}

impl TransferSession {
    pub fn new(sender: usize, receiver: usize, message: MessageRecord, rate: f64) -> Self {
        TransferSession { sender, receiver, message, bytes_sent: 0.0, rate }
    }

    /// Advances the transfer by `dt` seconds. An ended contact discards the
    /// partial transfer entirely; the receiver never sees a partial message.
    pub fn tick(&mut self, dt: f64, contact_alive: bool) -> TransferStatus {
        if !contact_alive {
            return TransferStatus::Aborted;
        }
        self.bytes_sent = (self.bytes_sent + self.rate * dt / 8.0).min(self.message.size as f64);
        if self.bytes_sent >= self.message.size as f64 {
            TransferStatus::Delivered
        } else {
            TransferStatus::InProgress
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(msg_id: u64, cluster_id: u64, size: u64) -> MessageRecord {
        MessageRecord { msg_id, cluster_id, owner: 0, created_at: 0.0, size }
    }

    #[test]
    fn duplicate_rejected_unchanged() {
        let mut buf = NodeBuffer::new(1_000);
        assert_eq!(admit_epidemic(&mut buf, msg(1, 1, 100)), Admission::Accepted);
        let occupied = buf.occupied();
        assert_eq!(admit_epidemic(&mut buf, msg(1, 9, 100)), Admission::RejectedDuplicate);
        assert_eq!(buf.occupied(), occupied);
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn drop_head_on_overflow() {
        // capacity of exactly two messages
        let mut buf = NodeBuffer::new(200);
        admit_epidemic(&mut buf, msg(1, 1, 100));
        admit_epidemic(&mut buf, msg(2, 2, 100));
        match admit_epidemic(&mut buf, msg(3, 3, 100)) {
            Admission::AcceptedWithDrops(d) => {
                assert_eq!(d.iter().map(|m| m.msg_id).collect::<Vec<_>>(), vec![1]);
            }
            other => panic!("expected drop of head, got {other:?}"),
        }
        assert_eq!(buf.iter().map(|m| m.msg_id).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn oversized_message_rejected() {
        let mut buf = NodeBuffer::new(50);
        assert_eq!(admit_epidemic(&mut buf, msg(1, 1, 100)), Admission::RejectedTooLarge);
        assert!(buf.is_empty());
    }

    #[test]
    fn summary_exchange_order_and_filter() {
        let mut a = NodeBuffer::new(1_000);
        let mut b = NodeBuffer::new(1_000);
        for id in [1, 2, 3] {
            admit_epidemic(&mut a, msg(id, id, 100));
        }
        admit_epidemic(&mut b, msg(2, 2, 100));
        assert_eq!(summary_exchange(&a, &b), vec![1, 3]);
        assert_eq!(summary_exchange(&b, &a), Vec::<u64>::new());
        assert_eq!(summary_exchange(&a, &a.clone()), Vec::<u64>::new());
    }

    #[test]
    fn care_rejects_same_cluster_with_perfect_detector() {
        let mut buf = NodeBuffer::new(1_000);
        let perfect = |a: &MessageRecord, b: &MessageRecord| a.cluster_id == b.cluster_id;
        assert_eq!(admit_care(&mut buf, msg(1, 7, 100), perfect), Admission::Accepted);
        assert_eq!(admit_care(&mut buf, msg(2, 7, 100), perfect), Admission::RejectedRedundant);
        assert_eq!(admit_care(&mut buf, msg(3, 8, 100), perfect), Admission::Accepted);
        assert_eq!(buf.len(), 2);
    }

    #[test]
    fn care_fp_every_pair_keeps_one() {
        let mut buf = NodeBuffer::new(10_000);
        let always = |_: &MessageRecord, _: &MessageRecord| true;
        assert_eq!(admit_care(&mut buf, msg(1, 1, 100), always), Admission::Accepted);
        for id in 2..20 {
            let got = admit_care(&mut buf, msg(id, id, 100), always);
            assert_eq!(got, Admission::RejectedFalsePositive);
        }
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn care_never_similar_matches_epidemic() {
        let mut care = NodeBuffer::new(250);
        let mut epi = NodeBuffer::new(250);
        for id in 0..10u64 {
            let a = admit_care(&mut care, msg(id, id, 100), |_, _| false);
            let b = admit_epidemic(&mut epi, msg(id, id, 100));
            assert_eq!(a, b);
        }
        let ids = |b: &NodeBuffer| b.iter().map(|m| m.msg_id).collect::<Vec<_>>();
        assert_eq!(ids(&care), ids(&epi));
    }

    #[test]
    fn transfer_timing_examples() {
        // 300 kB at 10 Mbit/s completes on the 0.24 s boundary
        let mut s = TransferSession::new(0, 1, msg(1, 1, 300_000), 1e7);
        for _ in 0..23 {
            assert_eq!(s.tick(0.01, true), TransferStatus::InProgress);
        }
        assert_eq!(s.tick(0.01, true), TransferStatus::Delivered);

        // with 1 s ticks the same message finishes in the first tick
        let mut s = TransferSession::new(0, 1, msg(1, 1, 300_000), 1e7);
        assert_eq!(s.tick(1.0, true), TransferStatus::Delivered);

        // 100 messages at 100 Mbit/s drain in 2.4 s of link time
        let per_msg: f64 = 300_000.0 * 8.0 / 1e8;
        assert!((per_msg * 100.0 - 2.4).abs() < 1e-12);
    }

    #[test]
    fn transfer_abort_discards_partial() {
        let mut s = TransferSession::new(0, 1, msg(1, 1, 300_000), 1e7);
        assert_eq!(s.tick(0.1, true), TransferStatus::InProgress);
        assert_eq!(s.tick(0.1, false), TransferStatus::Aborted);
    }
}
