//! Identities: Ed25519 key pairs, addresses and signer-attached signatures.

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::hash::{digest, hex_newtype, Digest};

/// Raw Ed25519 verification key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

hex_newtype!(PublicKey, 32);

/// 20-byte account identifier: the trailing 20 bytes of the digest of the public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

hex_newtype!(Address, 20);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub fn from_public_key(key: &PublicKey) -> Self {
        let d = digest(&key.0);
        let mut out = [0u8; 20];
        out.copy_from_slice(&d.0[12..]);
        Address(out)
    }

    /// Well-known address with `n` in the last byte, used for built-in contracts.
    pub const fn well_known(n: u8) -> Self {
        let mut out = [0u8; 20];
        out[19] = n;
        Address(out)
    }
}

/// Identifies the signature algorithm inside encoded signatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureScheme {
    Ed25519,
}

impl SignatureScheme {
    pub fn tag(self) -> u8 {
        match self {
            SignatureScheme::Ed25519 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        match tag {
            1 => Ok(SignatureScheme::Ed25519),
            tag => Err(DecodeError::InvalidTag {
                what: "signature scheme",
                tag,
            }),
        }
    }
}

/// A signature over a [`Digest`], carrying the signer's public key so the
/// signer address can be recovered and checked.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub scheme: SignatureScheme,
    pub public_key: PublicKey,
    #[serde(with = "sig_hex")]
    pub bytes: [u8; 64],
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Signature({}, {})",
            self.signer(),
            &hex::encode(self.bytes)[..12]
        )
    }
}

impl Signature {
    pub fn signer(&self) -> Address {
        Address::from_public_key(&self.public_key)
    }

    pub fn verify(&self, message: &Digest) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.public_key.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&self.bytes);
        key.verify(&message.0, &sig).is_ok()
    }

    /// Verifies the signature and that it was produced by `expected`.
    pub fn verify_by(&self, expected: &Address, message: &Digest) -> bool {
        self.signer() == *expected && self.verify(message)
    }
}

impl Encode for Signature {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u8(self.scheme.tag());
        enc.put_fixed(&self.public_key.0);
        enc.put_fixed(&self.bytes);
    }
}

impl Decode for Signature {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let scheme = SignatureScheme::from_tag(dec.get_u8("signature scheme")?)?;
        Ok(Signature {
            scheme,
            public_key: PublicKey(dec.get_array("public key")?),
            bytes: dec.get_array("signature")?,
        })
    }
}

mod sig_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 64], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 64], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 64];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

/// An Ed25519 signing key with its derived public key and address.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: PublicKey,
    address: Address,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("address", &self.address)
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let signing = SigningKey::from_bytes(&secret);
        let public = PublicKey(signing.verifying_key().to_bytes());
        let address = Address::from_public_key(&public);
        Self {
            signing,
            public,
            address,
        }
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        Self::from_secret(secret)
    }

    /// Deterministic key derived from a label; for simulations and fixtures.
    pub fn from_label(label: &str) -> Self {
        Self::from_secret(digest(label.as_bytes()).0)
    }

    pub fn secret(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        self.public
    }

    pub fn address(&self) -> Address {
        self.address
    }

    /// Ed25519 signing is deterministic: the same digest always yields the same signature.
    pub fn sign(&self, message: &Digest) -> Signature {
        Signature {
            scheme: SignatureScheme::Ed25519,
            public_key: self.public,
            bytes: self.signing.sign(&message.0).to_bytes(),
        }
    }
}
