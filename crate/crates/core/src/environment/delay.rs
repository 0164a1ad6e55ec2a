use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// FIFO that holds back each outcome until `d` further selections were made.
///
/// Push the outcome of every selection as it is made; `push` hands back the
/// outcome that becomes visible to the learner at that point, if any. With
/// `d = 0` every outcome is handed back immediately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedFeedback<T> {
    delay: usize,
    queue: VecDeque<T>,
}

impl<T> DelayedFeedback<T> {
    pub fn new(delay: usize) -> Self {
        DelayedFeedback { delay, queue: VecDeque::with_capacity(delay + 1) }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn push(&mut self, item: T) -> Option<T> {
        self.queue.push_back(item);
        if self.queue.len() > self.delay {
            self.queue.pop_front()
        } else {
            None
        }
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Releases everything still held back, oldest first.
    pub fn drain(&mut self) -> impl Iterator<Item = T> + '_ {
        self.queue.drain(..)
    }
}
