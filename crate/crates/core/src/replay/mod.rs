//! Demonstration and online replay buffers.
//!
//! All sampling is uniform with replacement and fully determined by the
//! caller's generator.

use std::cell::Cell;
use std::collections::VecDeque;
use std::ops::Range;

use rand::Rng;

use crate::diffcore::Tensor;
use crate::envs::{Trajectory, Transition};
use crate::{Error, Result};

/// A minibatch of transitions as `[B, dim]` matrices; `e` is `[B, 1]` of 0/1.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub s: Tensor,
    pub a: Tensor,
    pub s_next: Tensor,
    pub e: Tensor,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Empty("batch has no transitions".into()));
        }
        let s: Vec<&[f64]> = items.iter().map(|t| t.s.as_slice()).collect();
        let a: Vec<&[f64]> = items.iter().map(|t| t.a.as_slice()).collect();
        let sn: Vec<&[f64]> = items.iter().map(|t| t.s_next.as_slice()).collect();
        let e = items.iter().map(|t| if t.e { 1.0 } else { 0.0 }).collect();
        Ok(Self {
            s: Tensor::from_rows(&s)?,
            a: Tensor::from_rows(&a)?,
            s_next: Tensor::from_rows(&sn)?,
            e: Tensor::matrix(items.len(), 1, e)?,
        })
    }

    pub fn len(&self) -> usize {
        self.s.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_batch_size(batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::Empty("batch size must be at least 1".into()));
    }
    Ok(())
}

/// Expert transitions with a per-trajectory index.
#[derive(Debug, Clone)]
pub struct DemoBuffer {
    transitions: Vec<Transition>,
    trajectories: Vec<Range<usize>>,
    state_dim: usize,
    action_dim: usize,
}

impl DemoBuffer {
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self> {
        let first = trajs
            .iter()
            .flat_map(|t| t.transitions.first())
            .next()
            .ok_or_else(|| Error::Empty("demo buffer needs at least one transition".into()))?;
        let (state_dim, action_dim) = (first.s.len(), first.a.len());
        let mut transitions = Vec::new();
        let mut ranges = Vec::new();
        for traj in trajs {
            let start = transitions.len();
            for tr in &traj.transitions {
                if tr.s.len() != state_dim || tr.s_next.len() != state_dim || tr.a.len() != action_dim {
                    return Err(Error::Shape(format!(
                        "trajectory {} mixes dimensions: expected state {state_dim}, action {action_dim}",
                        traj.id
                    )));
                }
                transitions.push(tr.clone());
            }
            if transitions.len() > start {
                ranges.push(start..transitions.len());
            }
        }
        Ok(Self { transitions, trajectories: ranges, state_dim, action_dim })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn trajectory(&self, i: usize) -> &[Transition] {
        &self.transitions[self.trajectories[i].clone()]
    }

    /// Keeps `n` trajectories chosen uniformly without replacement, in stored order.
    pub fn subsample_trajectories<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > self.n_trajectories() {
            return Err(Error::InvalidConfig(format!(
                "cannot keep {n} of {} trajectories",
                self.n_trajectories()
            )));
        }
        let mut keep = rand::seq::index::sample(rng, self.n_trajectories(), n).into_vec();
        keep.sort_unstable();
        let mut transitions = Vec::new();
        let mut ranges = Vec::new();
        for i in keep {
            let start = transitions.len();
            transitions.extend_from_slice(self.trajectory(i));
            ranges.push(start..transitions.len());
        }
        Ok(Self { transitions, trajectories: ranges, ..*self })
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        check_batch_size(batch_size)?;
        let n = self.len();
        Ok((0..batch_size).map(|_| rng.random_range(0..n)).collect())
    }

    pub fn sample_transitions<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(batch_size, rng)?;
        let items: Vec<&Transition> = idx.iter().map(|&i| &self.transitions[i]).collect();
        Batch::from_transitions(&items)
    }

    /// Virtual initial states: uniform over the `s` field of every stored transition.
    pub fn sample_initial_states<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Tensor> {
        let idx = self.sample_indices(batch_size, rng)?;
        let rows: Vec<&[f64]> = idx.iter().map(|&i| self.transitions[i].s.as_slice()).collect();
        Ok(Tensor::from_rows(&rows)?)
    }
}

/// Fixed-capacity FIFO buffer of on-policy transitions.
#[derive(Debug)]
pub struct OnlineBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    inserted: u64,
    reads: Cell<u64>,
}

impl OnlineBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("online buffer capacity must be positive".into()));
        }
        Ok(Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)), inserted: 0, reads: Cell::new(0) })
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes, including evicted transitions.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Number of transitions handed out by sampling so far.
    pub fn reads(&self) -> u64 {
        self.reads.get()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> &Transition {
        self.reads.set(self.reads.get() + 1);
        &self.items[rng.random_range(0..self.items.len())]
    }

    pub fn sample_transitions<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        check_batch_size(batch_size)?;
        if self.is_empty() {
            return Err(Error::Empty("online buffer is empty".into()));
        }
        let items: Vec<&Transition> = (0..batch_size).map(|_| self.draw(rng)).collect();
        Batch::from_transitions(&items)
    }
}

/// A batch drawn from the expert/online mixture; `from_online[i]` tags row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    pub batch: Batch,
    pub from_online: Vec<bool>,
}

impl MixedBatch {
    pub fn online_count(&self) -> usize {
        self.from_online.iter().filter(|&&b| b).count()
    }
}

/// Draws each row from `online` with probability `alpha`, else from `demo`.
///
/// With `alpha == 0` the online buffer is never read and may be absent.
pub fn mix_sample<R: Rng + ?Sized>(
    demo: &DemoBuffer,
    online: Option<&OnlineBuffer>,
    alpha: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<MixedBatch> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
    }
    check_batch_size(batch_size)?;
    if demo.is_empty() {
        return Err(Error::Empty("demo buffer is empty".into()));
    }
    let online = match online {
        Some(b) if !b.is_empty() => Some(b),
        _ if alpha > 0.0 => {
            return Err(Error::Empty(format!("alpha = {alpha} requires a non-empty online buffer")))
        }
        _ => None,
    };
    let mut items = Vec::with_capacity(batch_size);
    let mut tags = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let use_online = alpha > 0.0 && rng.random::<f64>() < alpha;
        match (use_online, online) {
            (true, Some(buf)) => items.push(buf.draw(rng)),
            _ => items.push(&demo.transitions[rng.random_range(0..demo.len())]),
        }
        tags.push(use_online);
    }
    Ok(MixedBatch { batch: Batch::from_transitions(&items)?, from_online: tags })
}
