use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Envelope, Phase, ProtocolError};

/// Message delivery between participants.
///
/// `collect` is a barrier: it returns every message addressed to `receiver` for
/// the given phase and iteration that has been sent so far.
pub trait Transport {
    fn send(&mut self, envelope: &Envelope) -> Result<(), ProtocolError>;
    fn collect(&mut self, receiver: u32, phase: Phase, iteration: u32) -> Result<Vec<Envelope>, ProtocolError>;
}

/// Predicate selecting messages the bus silently loses.
pub type DropRule = Box<dyn Fn(&Envelope) -> bool + Send>;

/// Synchronous in-memory bus. Messages travel as encoded bytes so every run
/// exercises the wire format.
#[derive(Default)]
pub struct InProcessBus {
    queue: Vec<Vec<u8>>,
    shuffle: Option<ChaCha8Rng>,
    drop_rule: Option<DropRule>,
    dropped: usize,
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Delivers collected messages in a seeded random order.
    pub fn with_shuffle(mut self, seed: u64) -> Self {
        self.shuffle = Some(ChaCha8Rng::seed_from_u64(seed));
        self
    }

    pub fn with_drop_rule(mut self, rule: DropRule) -> Self {
        self.drop_rule = Some(rule);
        self
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

impl Transport for InProcessBus {
    fn send(&mut self, envelope: &Envelope) -> Result<(), ProtocolError> {
        if self.drop_rule.as_ref().is_some_and(|rule| rule(envelope)) {
            self.dropped += 1;
            return Ok(());
        }
        self.queue.push(envelope.encode());
        Ok(())
    }

    fn collect(&mut self, receiver: u32, phase: Phase, iteration: u32) -> Result<Vec<Envelope>, ProtocolError> {
        let mut keep = Vec::with_capacity(self.queue.len());
        let mut out = Vec::new();
        for bytes in self.queue.drain(..) {
            let env = Envelope::decode(&bytes)?;
            if env.receiver == receiver && env.phase == phase && env.iteration == iteration {
                out.push(env);
            } else {
                keep.push(bytes);
            }
        }
        self.queue = keep;
        if let Some(rng) = self.shuffle.as_mut() {
            out.shuffle(rng);
        }
        Ok(out)
    }
}
