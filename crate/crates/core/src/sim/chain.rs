use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::sampler::LinkSampler;
use super::{Setup, SimError, SimPolicy};
use crate::params::ProtocolParams;

/// Links present at each nesting level while a trial runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// `links[i][j]` holds the creation time of level-`i` link `j`, if present.
    links: Vec<Vec<Option<f64>>>,
    clock: f64,
}

impl ChainState {
    pub fn new(n: u32) -> Self {
        let links = (0..=n).map(|i| vec![None; 1usize << (n - i)]).collect();
        Self { links, clock: 0.0 }
    }

    pub fn levels(&self) -> usize {
        self.links.len()
    }

    pub fn segments(&self, level: usize) -> usize {
        self.links[level].len()
    }

    pub fn link(&self, level: usize, segment: usize) -> Option<f64> {
        self.links[level][segment]
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }
}

/// One end-to-end distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub total_time: f64,
    /// Source pulses over all sites.
    pub local_prep_attempts: u128,
    /// Heralding attempts over all elementary links.
    pub link_attempts: u128,
    /// `swap_attempts[i]` counts swaps creating level-`i + 1` links.
    pub swap_attempts: Vec<u128>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    level: u32,
    segment: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.level.cmp(&other.level))
            .then(self.segment.cmp(&other.segment))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Seed of trial `index` under `root`: the first word of ChaCha stream `index`.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng.gen()
}

/// Runs one trial. Deterministic in `(params, policy, seed)`.
pub fn simulate_trial(params: &ProtocolParams, policy: &SimPolicy, seed: u64) -> Result<TrialResult, SimError> {
    let setup = Setup::new(params, policy)?;
    Ok(run(&setup, seed, |_| {}))
}

/// As [`simulate_trial`], calling `observe` after every processed event.
pub fn simulate_trial_observed(
    params: &ProtocolParams,
    policy: &SimPolicy,
    seed: u64,
    observe: impl FnMut(&ChainState),
) -> Result<TrialResult, SimError> {
    let setup = Setup::new(params, policy)?;
    Ok(run(&setup, seed, observe))
}

pub(crate) fn run(setup: &Setup, seed: u64, mut observe: impl FnMut(&ChainState)) -> TrialResult {
    let n = setup.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = LinkSampler::new(setup.p_l, setup.p0, setup.r_hz, setup.tau_s);
    let mut state = ChainState::new(n);
    let mut queue = BinaryHeap::new();
    let mut prep = 0.0f64;
    let mut link = 0.0f64;
    let mut swaps = vec![0u128; n as usize];

    let mut start_links = |first: usize, count: usize, t0: f64, queue: &mut BinaryHeap<Reverse<Event>>, rng: &mut ChaCha8Rng| {
        for segment in first..first + count {
            let d = sampler.draw(rng);
            prep += d.prep_attempts;
            link += d.link_attempts;
            queue.push(Reverse(Event { time: t0 + d.duration_s, level: 0, segment }));
        }
    };
    start_links(0, 1 << n, 0.0, &mut queue, &mut rng);

    let total_time = loop {
        let Reverse(ev) = queue.pop().expect("a pending link always exists until the chain completes");
        state.clock = ev.time;
        let level = ev.level as usize;
        if ev.level == n {
            state.links[level][ev.segment] = Some(ev.time);
            observe(&state);
            break ev.time;
        }
        let sibling = ev.segment ^ 1;
        if state.links[level][sibling].is_none() {
            state.links[level][ev.segment] = Some(ev.time);
            observe(&state);
            continue;
        }
        // Both children present: swap into the parent.
        state.links[level][sibling] = None;
        swaps[level] += 1;
        let done = ev.time + setup.swap_delay_s(level as u32);
        let parent = ev.segment / 2;
        if rng.gen::<f64>() < setup.p_swap {
            queue.push(Reverse(Event { time: done, level: ev.level + 1, segment: parent }));
        } else {
            let width = 1usize << (level + 1);
            start_links(parent * width, width, done, &mut queue, &mut rng);
        }
        observe(&state);
    };

    TrialResult {
        total_time,
        local_prep_attempts: prep as u128,
        link_attempts: link as u128,
        swap_attempts: swaps,
        seed,
    }
}
