//! Context windows and the replay buffer.

use std::collections::VecDeque;

use rand::Rng;

use crate::Real;

/// Fixed-capacity queue of the last `L` (state, action, reward) triples.
///
/// The window always holds exactly `L` slots; slots not yet filled by the
/// current episode are zero triples. Pushing appends the newest triple and
/// evicts the oldest.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindow {
    len: usize,
    state_dim: usize,
    action_dim: usize,
    slots: VecDeque<(Vec<Real>, Vec<Real>, Real)>,
}

impl ContextWindow {
    pub fn new(len: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(len >= 1, "context window needs at least 1 slot");
        let mut w = Self {
            len,
            state_dim,
            action_dim,
            slots: VecDeque::with_capacity(len),
        };
        w.reset();
        w
    }

    /// Zero every slot, as at the start of an episode.
    pub fn reset(&mut self) {
        self.slots.clear();
        for _ in 0..self.len {
            self.slots.push_back((
                vec![0.0; self.state_dim],
                vec![0.0; self.action_dim],
                0.0,
            ));
        }
    }

    pub fn push(&mut self, state: &[Real], action: &[Real], reward: Real) {
        assert_eq!(state.len(), self.state_dim, "window state dim mismatch");
        assert_eq!(action.len(), self.action_dim, "window action dim mismatch");
        self.slots.pop_front();
        self.slots.push_back((state.to_vec(), action.to_vec(), reward));
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-slot input dimension when the window feeds a recurrent encoder.
    pub fn slot_dim(&self) -> usize {
        self.state_dim + self.action_dim + 1
    }

    /// Slots flattened oldest-first into recurrent-encoder inputs.
    pub fn as_inputs(&self) -> Vec<Vec<Real>> {
        self.slots
            .iter()
            .map(|(s, a, r)| {
                let mut x = Vec::with_capacity(self.slot_dim());
                x.extend_from_slice(s);
                x.extend_from_slice(a);
                x.push(*r);
                x
            })
            .collect()
    }

    pub fn slots(&self) -> impl Iterator<Item = &(Vec<Real>, Vec<Real>, Real)> {
        self.slots.iter()
    }
}

/// One stored transition together with the context windows around it:
/// `window_before` is the window when the action was selected, `window_after`
/// equals `window_before` pushed with this transition's (s, a, r).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub state: Vec<Real>,
    pub action: Vec<Real>,
    pub reward: Real,
    pub next_state: Vec<Real>,
    /// True terminal (the value of the successor state is zero); horizon
    /// timeouts are stored as false so bootstrapping is not masked.
    pub done: bool,
    pub window_before: ContextWindow,
    pub window_after: ContextWindow,
}

impl ReplayRecord {
    /// The defining relation between the two stored windows.
    pub fn windows_consistent(&self) -> bool {
        let mut w = self.window_before.clone();
        w.push(&self.state, &self.action, self.reward);
        w == self.window_after
    }
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<ReplayRecord>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            data: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, record: ReplayRecord) {
        debug_assert!(record.windows_consistent(), "inconsistent replay windows");
        if self.data.len() < self.capacity {
            self.data.push(record);
        } else {
            self.data[self.next] = record;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> &ReplayRecord {
        &self.data[i]
    }

    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.gen_range(0..self.data.len())).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayRecord> {
        self.data.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(s: Real, done: bool) -> ReplayRecord {
        let before = ContextWindow::new(3, 1, 1);
        let mut after = before.clone();
        after.push(&[s], &[0.0], 0.0);
        ReplayRecord {
            state: vec![s],
            action: vec![0.0],
            reward: 0.0,
            next_state: vec![s + 1.0],
            done,
            window_before: before,
            window_after: after,
        }
    }

    #[test]
    fn fresh_window_is_all_zero_slots() {
        let w = ContextWindow::new(3, 2, 1);
        assert_eq!(w.as_inputs(), vec![vec![0.0; 4]; 3]);
    }

    #[test]
    fn push_evicts_oldest() {
        let mut w = ContextWindow::new(3, 1, 1);
        w.push(&[1.0], &[0.1], 10.0);
        w.push(&[2.0], &[0.2], 20.0);
        // two zero-padded? no: one zero slot left, oldest first
        let inputs = w.as_inputs();
        assert_eq!(inputs[0], vec![0.0, 0.0, 0.0]);
        assert_eq!(inputs[1], vec![1.0, 0.1, 10.0]);
        assert_eq!(inputs[2], vec![2.0, 0.2, 20.0]);
        w.push(&[3.0], &[0.3], 30.0);
        w.push(&[4.0], &[0.4], 40.0);
        let inputs = w.as_inputs();
        assert_eq!(inputs[0], vec![2.0, 0.2, 20.0]);
        assert_eq!(inputs[2], vec![4.0, 0.4, 40.0]);
    }

    #[test]
    fn record_windows_are_consistent_by_construction() {
        assert!(rec(1.0, false).windows_consistent());
        let mut bad = rec(1.0, false);
        bad.reward = 5.0; // breaks the relation
        assert!(!bad.windows_consistent());
    }

    #[test]
    fn ring_overwrites_oldest_at_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(rec(i as Real, false));
        }
        assert_eq!(buf.len(), 3);
        let states: Vec<Real> = buf.iter().map(|r| r.state[0]).collect();
        // slots 0 and 1 were overwritten by records 3 and 4
        assert_eq!(states, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn sampling_stays_in_range() {
        use rand::SeedableRng;
        let mut buf = ReplayBuffer::new(10);
        for i in 0..4 {
            buf.push(rec(i as Real, false));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for idx in buf.sample_indices(100, &mut rng) {
            assert!(idx < 4);
        }
    }
}
