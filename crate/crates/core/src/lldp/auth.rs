use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;
use thiserror::Error;

use super::{signed_bytes, HmacTag, LldpFrame, TAG_LEN};

type HmacSha256 = Hmac<Sha256>;

pub const MIN_KEY_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HmacKeyError {
    #[error("HMAC key must be at least {MIN_KEY_LEN} bytes, got {0}")]
    TooShort(usize),
    #[error("HMAC key is not valid hex: {0}")]
    BadHex(String),
}

/// Shared secret between controller and verifier.
///
/// In nonce mode each signed frame carries a fresh nonce and is tagged under
/// `HMAC(key, nonce)` instead of the raw key.
pub struct HmacKey {
    key: Vec<u8>,
    nonce_mode: bool,
    next_nonce: AtomicU64,
}

impl HmacKey {
    pub fn new(key: impl Into<Vec<u8>>) -> Result<Self, HmacKeyError> {
        let key = key.into();
        if key.len() < MIN_KEY_LEN {
            return Err(HmacKeyError::TooShort(key.len()));
        }
        Ok(HmacKey {
            key,
            nonce_mode: false,
            next_nonce: AtomicU64::new(1),
        })
    }

    pub fn from_hex(s: &str) -> Result<Self, HmacKeyError> {
        let key = hex::decode(s).map_err(|e| HmacKeyError::BadHex(e.to_string()))?;
        Self::new(key)
    }

    pub fn with_nonce_mode(mut self, on: bool) -> Self {
        self.nonce_mode = on;
        self
    }

    pub fn nonce_mode(&self) -> bool {
        self.nonce_mode
    }

    fn fresh_nonce(&self) -> u64 {
        self.next_nonce.fetch_add(1, Ordering::Relaxed)
    }

    fn signing_key(&self, nonce: Option<u64>) -> Vec<u8> {
        match nonce {
            None => self.key.clone(),
            Some(n) => {
                let mut mac = HmacSha256::new_from_slice(&self.key).expect("any key length");
                mac.update(&n.to_be_bytes());
                mac.finalize().into_bytes().to_vec()
            }
        }
    }

    fn tag(&self, nonce: Option<u64>, data: &[u8]) -> [u8; TAG_LEN] {
        let mut mac = HmacSha256::new_from_slice(&self.signing_key(nonce)).expect("any key length");
        mac.update(data);
        mac.finalize().into_bytes().into()
    }
}

impl Clone for HmacKey {
    fn clone(&self) -> Self {
        HmacKey {
            key: self.key.clone(),
            nonce_mode: self.nonce_mode,
            next_nonce: AtomicU64::new(self.next_nonce.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for HmacKey {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.nonce_mode == other.nonce_mode
    }
}

impl fmt::Debug for HmacKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HmacKey")
            .field("key", &"<redacted>")
            .field("nonce_mode", &self.nonce_mode)
            .finish()
    }
}

/// Signs `f`, replacing any tag it already had. Nonce-mode keys draw the next
/// nonce from their internal counter.
pub fn attach_hmac(f: &LldpFrame, k: &HmacKey) -> LldpFrame {
    let nonce = k.nonce_mode.then(|| k.fresh_nonce());
    sign(f, k, nonce)
}

/// Signs with an explicit nonce, regardless of the key's mode.
pub fn attach_hmac_with_nonce(f: &LldpFrame, k: &HmacKey, nonce: u64) -> LldpFrame {
    sign(f, k, Some(nonce))
}

fn sign(f: &LldpFrame, k: &HmacKey, nonce: Option<u64>) -> LldpFrame {
    let mut out = f.without_hmac();
    let tag = k.tag(nonce, &signed_bytes(&out));
    out.hmac = Some(HmacTag { nonce, tag });
    out
}

/// True iff the frame carries a tag matching a recomputation under `k`.
///
/// Location-independent: a byte-identical copy captured anywhere verifies.
pub fn verify_hmac(f: &LldpFrame, k: &HmacKey) -> bool {
    let Some(t) = &f.hmac else {
        return false;
    };
    if t.nonce.is_some() != k.nonce_mode {
        return false;
    }
    let key = k.signing_key(t.nonce);
    let mut mac = HmacSha256::new_from_slice(&key).expect("any key length");
    mac.update(&signed_bytes(f));
    mac.verify_slice(&t.tag).is_ok()
}
