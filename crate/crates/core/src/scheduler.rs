//! Hash-defined schedulers and the basic simulation function.
//!
//! A scheduler is named by a 64-bit integer seed. At every step of a
//! simulation the seed is hashed together with the bit encoding of the trace
//! so far (history-dependent) or of the current state alone (memoryless),
//! and the hash seeds a PRNG whose first draw resolves the nondeterministic
//! choice. The scheduler's infinite decision table thus needs O(1) memory,
//! and distinct runs under the same seed make consistent choices.

use crate::model::{Mdp, ModelError, State};
use crate::property::{eval_at, BoundProperty, FlatGrid, PropertyError, Trace};
use serde::Serialize;
use thiserror::Error;

/// Modulus of the incremental trace-vector hash: a prime between 2^60 and
/// 2^61, roughly 1.5 * 2^60, so doubling a residue never overflows u64 and
/// the value is far from any power of two. Echoed in all result metadata.
pub const HASH_MODULUS: u64 = 1_729_382_256_910_270_481;

/// Identifier naming the PRNG recurrence, echoed in result metadata.
pub const PRNG_ID: &str = "splitmix64";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Property(#[from] PropertyError),
}

/// Integer seed naming one deterministic scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SchedulerId(pub u64);

/// Which scheduler function the seed encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SchedulerClass {
    /// Action depends on the whole state sequence so far.
    History,
    /// Action depends on the current state alone.
    Memoryless,
}

/// Running Horner hash of the scheduler id and trace vector, modulo
/// [`HASH_MODULUS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashState {
    h: u64,
}

/// `(h * 2^j) mod m` by `j` doublings with reduction, never exceeding
/// `2(m-1)` before each reduction.
pub fn shift_mod(mut h: u64, j: u32, m: u64) -> u64 {
    debug_assert!(h < m);
    for _ in 0..j {
        h += h;
        debug_assert!(h <= 2 * (m - 1));
        if h >= m {
            h -= m;
        }
    }
    h
}

impl HashState {
    /// h_0 = sigma mod m.
    pub fn init(sigma: SchedulerId) -> Self {
        HashState { h: sigma.0 % HASH_MODULUS }
    }

    /// Appends a `bits`-wide value to the hashed trace vector:
    /// h' = ((h * 2^bits) mod m + v mod m) mod m.
    pub fn update(self, value: u64, bits: u32) -> Self {
        debug_assert!(bits >= 64 || value < (1u64 << bits));
        let mut h = shift_mod(self.h, bits, HASH_MODULUS);
        h += value % HASH_MODULUS;
        if h >= HASH_MODULUS {
            h -= HASH_MODULUS;
        }
        HashState { h }
    }

    /// Appends the encoding of every variable of `state`, declaration order.
    pub fn extend_with_state(self, mdp: &Mdp, state: &State) -> Self {
        let mut hs = self;
        for (value, bits) in mdp.encode_state(state) {
            hs = hs.update(value, bits);
        }
        hs
    }

    pub fn value(&self) -> u64 {
        self.h
    }
}

/// splitmix64: the fixed 64-bit mixing recurrence used for every PRNG in
/// the artifact, pinned for cross-platform bit reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrngState {
    s: u64,
}

impl PrngState {
    pub fn new(seed: u64) -> Self {
        PrngState { s: seed }
    }

    /// Next 64-bit output and successor state.
    pub fn next(self) -> (u64, Self) {
        let s = self.s.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        (z ^ (z >> 31), PrngState { s })
    }

    /// Next draw mapped to [0, 1) with 53-bit precision (value / 2^64 with
    /// the low 11 bits dropped, so the result never rounds up to 1.0).
    pub fn next_unit(self) -> (f64, Self) {
        let (v, next) = self.next();
        ((v >> 11) as f64 * (1.0 / (1u64 << 53) as f64), next)
    }

    /// Exactly uniform index in [0, n) by rejection: draws whose value falls
    /// in the final partial block of size 2^64 mod n are discarded.
    pub fn choose_uniform(self, n: usize) -> (usize, Self) {
        debug_assert!(n >= 1);
        let n64 = n as u64;
        // 2^64 mod n computed in native arithmetic: (2^64 - n) mod n.
        let reject_below = 0u64.wrapping_sub(n64) % n64;
        let threshold = 0u64.wrapping_sub(reject_below); // 2^64 - (2^64 mod n)
        let mut p = self;
        loop {
            let (r, next) = p.next();
            p = next;
            if reject_below == 0 || r < threshold {
                return ((r % n64) as usize, p);
            }
        }
    }
}

/// Deterministically folds seed components into one 64-bit seed using the
/// splitmix64 output function. Used to derive per-simulation probabilistic
/// seeds from (master seed, context, scheduler, replicate).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3u64; // arbitrary nonzero start
    for &p in parts {
        acc = PrngState::new(acc ^ p).next().0;
    }
    acc
}

/// Outcome of evaluating the property on one simulated trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub satisfied: bool,
    /// Transitions taken; the trace holds `steps + 1` states.
    pub steps: usize,
    /// True when some visited state had no enabled command and the run
    /// self-looped to fill the horizon.
    pub deadlocked: bool,
}

/// Action index for the scheduler whose extended hash is `hash`, over `n`
/// enabled commands: seed a fresh PRNG from the hash and draw once.
pub fn action_choice(hash: HashState, n: usize) -> usize {
    PrngState::new(hash.value()).choose_uniform(n).0
}

/// Reusable buffers for tight simulation loops; one per worker.
#[derive(Debug, Default)]
pub struct SimScratch {
    /// Row-major trace values, horizon+1 rows of one value per variable.
    rows: Vec<i64>,
    enabled: Vec<usize>,
}

impl SimScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Runs one simulation of exactly `horizon + 1` states (Algorithm 1 with a
/// fixed trace length), evaluates the property once on the result, and
/// leaves the visited states in `scratch`. Allocation-free after warmup.
///
/// Nondeterminism is resolved per step from the hash of `sigma` and the
/// trace vector (or current state in memoryless mode); probabilistic
/// branches are resolved by an independent PRNG stream seeded once from
/// `prob_seed`. Deadlocked states repeat forever.
pub fn simulate_verdict(
    mdp: &Mdp,
    prop: &BoundProperty,
    sigma: SchedulerId,
    prob_seed: u64,
    class: SchedulerClass,
    scratch: &mut SimScratch,
) -> Result<Verdict, SimError> {
    let horizon = prop.horizon();
    let width = mdp.variables.len();
    scratch.rows.clear();
    scratch.rows.reserve((horizon + 1) * width);
    for v in &mdp.variables {
        scratch.rows.push(v.init);
    }
    let mut hash = HashState::init(sigma);
    let mut u_prob = PrngState::new(prob_seed);
    let mut deadlocked = false;

    for step in 0..horizon {
        let row = step * width;
        scratch.rows.resize(row + 2 * width, 0);
        let (head, next_row) = scratch.rows.split_at_mut(row + width);
        let current = &head[row..];
        next_row.copy_from_slice(current);
        mdp.enabled_into(current, &mut scratch.enabled);
        if scratch.enabled.is_empty() {
            deadlocked = true;
            continue;
        }
        let step_hash = match class {
            SchedulerClass::History => {
                for (value, bits) in mdp.encode_values(current) {
                    hash = hash.update(value, bits);
                }
                hash
            }
            SchedulerClass::Memoryless => {
                let mut h = HashState::init(sigma);
                for (value, bits) in mdp.encode_values(current) {
                    h = h.update(value, bits);
                }
                h
            }
        };
        let k = action_choice(step_hash, scratch.enabled.len());
        let cmd = scratch.enabled[k];
        let (u, next_prob) = u_prob.next_unit();
        u_prob = next_prob;
        let branch = mdp.select_branch(cmd, u);
        mdp.apply_branch_flat(current, cmd, branch, next_row)?;
    }

    let satisfied = eval_at(prop, FlatGrid { data: &scratch.rows, width }, 0);
    Ok(Verdict { satisfied, steps: horizon, deadlocked })
}

/// As [`simulate_verdict`], returning the visited trace as well.
pub fn simulate(
    mdp: &Mdp,
    prop: &BoundProperty,
    sigma: SchedulerId,
    prob_seed: u64,
    class: SchedulerClass,
) -> Result<(Trace, Verdict), SimError> {
    let mut scratch = SimScratch::new();
    let verdict = simulate_verdict(mdp, prop, sigma, prob_seed, class, &mut scratch)?;
    let width = mdp.variables.len();
    let states = scratch
        .rows
        .chunks(width)
        .map(|row| State { values: row.to_vec() })
        .collect();
    Ok((Trace { states }, verdict))
}
