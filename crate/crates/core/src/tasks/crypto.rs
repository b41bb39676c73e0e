//! The FHE-augmented circle task: an equal mixture of clear labeled circle
//! points and encrypted ones.
//!
//! A sample is a triple `(flag, payload, pk)`. Flag 0 carries a clear circle
//! point labeled by `h_w`; flag 1 carries `Enc(pk, x)` labeled `Enc(pk,
//! h_w(x))`. The error oracle holds the secret key: it decrypts flagged
//! pairs before comparing, and counts an undecryptable answer to an
//! encrypted query as an error.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Label, LabeledSample, LearningTask, OracleVerdict, Sign, TaskDescriptor};
use crate::fhe::{Ciphertext, CircuitDescription, FheBackend, Gate, KeyPair, PublicKey};
use crate::rng::Seed;
use crate::tasks::circle::{CirclePoint, HalfplaneHypothesis, FRACTIONAL_BITS, QUARTER, TURN};

/// Clear or encrypted circle point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Payload {
    Clear(CirclePoint),
    Cipher(Ciphertext),
}

/// One input of the crypto task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CryptoSample {
    /// 0 = clear, 1 = encrypted.
    pub flag: bool,
    pub payload: Payload,
    pub pk: PublicKey,
}

/// Handle bundling the task with the public FHE surface players may touch:
/// the backend (for `encrypt`/`eval` under `pk`) and the public key. The
/// secret key lives only inside the task's oracle closure.
#[derive(Clone)]
pub struct CryptoTask {
    task: LearningTask<CryptoSample>,
    backend: Arc<FheBackend>,
    pk: PublicKey,
    lambda: u32,
}

impl CryptoTask {
    pub fn task(&self) -> &LearningTask<CryptoSample> {
        &self.task
    }

    pub fn backend(&self) -> &Arc<FheBackend> {
        &self.backend
    }

    pub fn pk(&self) -> PublicKey {
        self.pk
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }
}

/// Build the crypto task for ground truth `h_w` under a fresh key pair.
///
/// `key_seed` drives key generation and is recorded in the descriptor so an
/// experiment can be replayed.
pub fn crypto_task(lambda: u32, w: CirclePoint, key_seed: Seed) -> CryptoTask {
    let backend = Arc::new(FheBackend::new());
    let mut krng = key_seed.stream("crypto-keygen", u64::from(lambda));
    let keys: KeyPair = backend.keygen(lambda, &mut krng);
    let h = HalfplaneHypothesis::new(w);
    let pk = keys.public;
    let sk = keys.secret;

    let sampler = {
        let backend = Arc::clone(&backend);
        Arc::new(move |rng: &mut ChaCha12Rng| {
            let x = CirclePoint::uniform(rng);
            let y = h.label(x);
            if rng.random::<bool>() {
                let (ct_x, _) = backend
                    .encrypt(pk, &x.to_bits(), rng)
                    .expect("task key is live");
                let (ct_y, _) = backend
                    .encrypt(pk, &[y.is_plus()], rng)
                    .expect("task key is live");
                LabeledSample {
                    x: CryptoSample {
                        flag: true,
                        payload: Payload::Cipher(ct_x),
                        pk,
                    },
                    y: Label::Cipher(ct_y),
                }
            } else {
                LabeledSample {
                    x: CryptoSample {
                        flag: false,
                        payload: Payload::Clear(x),
                        pk,
                    },
                    y: Label::Clear(y),
                }
            }
        })
    };

    let oracle = {
        let backend = Arc::clone(&backend);
        Arc::new(move |x: &CryptoSample, y: &Label| {
            match (x.flag, &x.payload) {
                (false, Payload::Clear(pt)) => match y {
                    Label::Clear(s) if *s == h.label(*pt) => OracleVerdict::Correct,
                    _ => OracleVerdict::Error,
                },
                (true, Payload::Cipher(ct_x)) => {
                    let x_dec = backend
                        .decrypt(&sk, ct_x)
                        .and_then(|bits| CirclePoint::from_bits(&bits));
                    let y_dec = match y {
                        Label::Cipher(ct_y) => backend.decrypt(&sk, ct_y),
                        Label::Clear(_) => None,
                    };
                    match (x_dec, y_dec) {
                        (Some(pt), Some(bits)) if bits.len() == 1 => {
                            if Sign::from_bool(bits[0]) == h.label(pt) {
                                OracleVerdict::Correct
                            } else {
                                OracleVerdict::Error
                            }
                        }
                        // failed decryption of either side counts as an
                        // error, per the error-indicator convention
                        _ => OracleVerdict::Error,
                    }
                }
                // malformed flag/payload combination: not a distribution
                // point, treat the answer as wrong
                _ => OracleVerdict::Error,
            }
        })
    };

    let task = LearningTask::new(
        "lines-on-circle-crypto",
        TaskDescriptor::Crypto {
            w_hex: w.to_hex(),
            lambda,
            key_seed: key_seed.0,
        },
        sampler,
        oracle,
    );
    CryptoTask {
        task,
        backend,
        pk,
        lambda,
    }
}

/// Comparison circuit computing `h_w` on an encrypted angle.
///
/// Positive iff `(x + (¼ − w)) mod 1 < ½`, i.e. iff the top bit of the
/// 62-bit sum `x + c` is 0. The constant is folded into the gates of a
/// ripple-carry adder, and the output bit is 1 for label +1.
pub fn halfplane_circuit(w: CirclePoint) -> CircuitDescription {
    let c = QUARTER.wrapping_sub(w.raw()) & (TURN - 1);
    let n = FRACTIONAL_BITS;
    let mut gates = Vec::new();
    let mut wire = n; // next wire index
    // carry starts at constant 0
    gates.push(Gate::Const(false));
    let mut carry = wire;
    wire += 1;
    let mut top_sum = 0u32;
    for i in 0..n {
        let c_i = (c >> i) & 1 == 1;
        let x_i = i;
        if i == n - 1 {
            // only the top sum bit is needed
            if c_i {
                gates.push(Gate::Xor(x_i, carry));
                let t = wire;
                wire += 1;
                gates.push(Gate::Not(t));
                top_sum = wire;
                wire += 1;
            } else {
                gates.push(Gate::Xor(x_i, carry));
                top_sum = wire;
                wire += 1;
            }
            let _ = wire;
            break;
        }
        // sum bit not needed below the top; only propagate the carry
        if c_i {
            gates.push(Gate::Or(x_i, carry));
        } else {
            gates.push(Gate::And(x_i, carry));
        }
        carry = wire;
        wire += 1;
    }
    // label bit: +1 iff top sum bit is 0
    gates.push(Gate::Not(top_sum));
    let out = wire;
    CircuitDescription {
        inputs: n,
        gates,
        outputs: vec![out],
    }
}
