//! Homomorphic-encryption quadruple (`keygen` / `encrypt` / `decrypt` /
//! `eval`) behind a sealed-oracle reference backend.
//!
//! Ciphertexts are fixed-length uniform nonces; the plaintexts live in a
//! broker table reachable only through this module. Player code holds
//! handles and the public key, so the only information a bounded
//! distinguisher can extract from a ciphertext is its (uniform) bytes. A
//! lattice-based backend could be slotted in behind the same four calls.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Byte length of every ciphertext handle.
pub const HANDLE_LEN: usize = 16;

/// Operation cost charged per circuit gate in [`FheBackend::eval`].
///
/// Homomorphic evaluation has to be costlier than clear evaluation for the
/// games' budget asymmetry to mean anything; the reference backend charges a
/// flat multiplier per gate.
pub const EVAL_OPS_PER_GATE: u64 = 16;

/// Operation cost charged per plaintext bit in [`FheBackend::encrypt`].
pub const ENCRYPT_OPS_PER_BIT: u64 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FheError {
    #[error("unknown public key {0:?}")]
    UnknownKey(PublicKey),
    #[error("circuit expects {expected} input bits, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("unknown ciphertext handle")]
    UnknownHandle,
    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),
}

/// Identifier of a key pair within one backend instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicKey(u64);

/// Secret half of a key pair. Deliberately not serializable: transcripts and
/// verdicts can never leak it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecretKey {
    id: u64,
    token: u64,
}

/// Key pair plus the security parameter it was generated for.
#[derive(Debug, Clone, Copy)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
    pub lambda: u32,
}

/// Opaque ciphertext: a fresh uniform nonce, independent of the plaintext.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ciphertext {
    handle: [u8; HANDLE_LEN],
    key: PublicKey,
}

impl Ciphertext {
    pub fn handle(&self) -> &[u8; HANDLE_LEN] {
        &self.handle
    }

    pub fn key(&self) -> PublicKey {
        self.key
    }

    /// Hex rendering of the handle, the only form that may appear in
    /// serialized transcripts.
    pub fn handle_hex(&self) -> String {
        let mut s = String::with_capacity(2 * HANDLE_LEN);
        for b in self.handle {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

/// One gate of a [`CircuitDescription`]. Operands are wire indices that must
/// point at earlier wires, so circuits are acyclic by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    And(u32, u32),
    Or(u32, u32),
    Xor(u32, u32),
    Not(u32),
    Const(bool),
}

/// Boolean circuit over the fixed gate set. Wires `0..inputs` carry the
/// inputs; every gate appends one wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitDescription {
    pub inputs: u32,
    pub gates: Vec<Gate>,
    pub outputs: Vec<u32>,
}

impl CircuitDescription {
    /// Check arities and wire references.
    pub fn validate(&self) -> Result<(), FheError> {
        let mut wires = self.inputs;
        for (i, g) in self.gates.iter().enumerate() {
            let ok = match *g {
                Gate::And(a, b) | Gate::Or(a, b) | Gate::Xor(a, b) => a < wires && b < wires,
                Gate::Not(a) => a < wires,
                Gate::Const(_) => true,
            };
            if !ok {
                return Err(FheError::MalformedCircuit(format!(
                    "gate {i} references a wire that does not exist yet"
                )));
            }
            wires += 1;
        }
        if self.outputs.is_empty() {
            return Err(FheError::MalformedCircuit("no output wires".into()));
        }
        for &o in &self.outputs {
            if o >= wires {
                return Err(FheError::MalformedCircuit(format!(
                    "output wire {o} out of range"
                )));
            }
        }
        Ok(())
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Clear-text execution, the oracle against which homomorphic evaluation
    /// is checked.
    pub fn run(&self, input: &[bool]) -> Result<Vec<bool>, FheError> {
        if input.len() != self.inputs as usize {
            return Err(FheError::ArityMismatch {
                expected: self.inputs as usize,
                got: input.len(),
            });
        }
        let mut wires = Vec::with_capacity(input.len() + self.gates.len());
        wires.extend_from_slice(input);
        for g in &self.gates {
            let v = match *g {
                Gate::And(a, b) => wires[a as usize] && wires[b as usize],
                Gate::Or(a, b) => wires[a as usize] || wires[b as usize],
                Gate::Xor(a, b) => wires[a as usize] ^ wires[b as usize],
                Gate::Not(a) => !wires[a as usize],
                Gate::Const(c) => c,
            };
            wires.push(v);
        }
        Ok(self.outputs.iter().map(|&o| wires[o as usize]).collect())
    }

    /// Identity circuit on `n` bits.
    pub fn identity(n: u32) -> Self {
        CircuitDescription {
            inputs: n,
            gates: Vec::new(),
            outputs: (0..n).collect(),
        }
    }

    /// Single XOR of two input bits.
    pub fn xor2() -> Self {
        CircuitDescription {
            inputs: 2,
            gates: vec![Gate::Xor(0, 1)],
            outputs: vec![2],
        }
    }
}

struct KeyTable {
    lambda: u32,
    token: u64,
    entries: HashMap<[u8; HANDLE_LEN], Vec<bool>>,
}

/// Sealed-oracle backend: the broker holding every hidden plaintext.
///
/// Reads (`decrypt`) take the shared lock; writes (`encrypt`, `eval`,
/// `keygen`) take the exclusive lock. Game code normally creates one backend
/// per trial, so contention never matters in practice.
pub struct FheBackend {
    tables: RwLock<HashMap<u64, KeyTable>>,
    next_key: AtomicU64,
}

impl Default for FheBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl FheBackend {
    pub fn new() -> Self {
        FheBackend {
            tables: RwLock::new(HashMap::new()),
            next_key: AtomicU64::new(0),
        }
    }

    /// Generate a fresh key pair for security parameter `lambda`.
    pub fn keygen(&self, lambda: u32, rng: &mut ChaCha12Rng) -> KeyPair {
        // The id is sequential; the token is random so a secret key cannot
        // be forged from the public handle alone.
        let id = self.next_key.fetch_add(1, Ordering::Relaxed);
        let token = rng.random::<u64>();
        let mut tables = self.tables.write().expect("fhe table poisoned");
        tables.insert(
            id,
            KeyTable {
                lambda,
                token,
                entries: HashMap::new(),
            },
        );
        KeyPair {
            public: PublicKey(id),
            secret: SecretKey { id, token },
            lambda,
        }
    }

    /// Encrypt `bits` under `pk`. Returns a fresh uniform handle; the
    /// operation cost is [`ENCRYPT_OPS_PER_BIT`] per bit.
    pub fn encrypt(
        &self,
        pk: PublicKey,
        bits: &[bool],
        rng: &mut ChaCha12Rng,
    ) -> Result<(Ciphertext, u64), FheError> {
        let mut tables = self.tables.write().expect("fhe table poisoned");
        let table = tables.get_mut(&pk.0).ok_or(FheError::UnknownKey(pk))?;
        let mut handle = [0u8; HANDLE_LEN];
        loop {
            rng.fill(&mut handle);
            if !table.entries.contains_key(&handle) {
                break;
            }
        }
        table.entries.insert(handle, bits.to_vec());
        Ok((
            Ciphertext { handle, key: pk },
            ENCRYPT_OPS_PER_BIT * bits.len() as u64,
        ))
    }

    /// Decrypt `ct`. Returns `None` (⊥) for an unknown handle or a secret
    /// key that does not match the ciphertext's key pair.
    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Option<Vec<bool>> {
        if sk.id != ct.key.0 {
            return None;
        }
        let tables = self.tables.read().expect("fhe table poisoned");
        let table = tables.get(&sk.id)?;
        if table.token != sk.token {
            return None;
        }
        table.entries.get(&ct.handle).cloned()
    }

    /// Homomorphically evaluate `circuit` on the concatenated plaintexts of
    /// `cts` and return a fresh ciphertext holding the output bits, plus the
    /// operation cost charged ([`EVAL_OPS_PER_GATE`] per gate).
    pub fn eval(
        &self,
        pk: PublicKey,
        circuit: &CircuitDescription,
        cts: &[Ciphertext],
        rng: &mut ChaCha12Rng,
    ) -> Result<(Ciphertext, u64), FheError> {
        circuit.validate()?;
        let input = {
            let tables = self.tables.read().expect("fhe table poisoned");
            let table = tables.get(&pk.0).ok_or(FheError::UnknownKey(pk))?;
            let mut input = Vec::with_capacity(circuit.inputs as usize);
            for ct in cts {
                if ct.key != pk {
                    return Err(FheError::UnknownHandle);
                }
                let bits = table.entries.get(&ct.handle).ok_or(FheError::UnknownHandle)?;
                input.extend_from_slice(bits);
            }
            input
        };
        if input.len() != circuit.inputs as usize {
            return Err(FheError::ArityMismatch {
                expected: circuit.inputs as usize,
                got: input.len(),
            });
        }
        let output = circuit.run(&input)?;
        let (ct, _) = self.encrypt(pk, &output, rng)?;
        Ok((ct, EVAL_OPS_PER_GATE * circuit.gate_count() as u64))
    }

    /// Security parameter recorded at keygen time.
    pub fn lambda_of(&self, pk: PublicKey) -> Option<u32> {
        self.tables
            .read()
            .expect("fhe table poisoned")
            .get(&pk.0)
            .map(|t| t.lambda)
    }
}
