use serde::{Deserialize, Serialize};

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::tx::{Transaction, TxKind};

/// Gas prices in LOCETH-wei (the gas price itself is fixed at 1 wei per gas).
///
/// View queries are not transactions and are never metered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSchedule {
    pub transfer: u64,
    pub mint: u64,
    pub endow: u64,
    pub contract_call: u64,
    pub governance: u64,
    pub per_payload_byte: u64,
    pub per_storage_write: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self {
            transfer: 21,
            mint: 21,
            endow: 21,
            contract_call: 30,
            governance: 50,
            per_payload_byte: 1,
            per_storage_write: 20,
        }
    }
}

impl GasSchedule {
    pub fn is_valid(&self) -> bool {
        [
            self.transfer,
            self.mint,
            self.endow,
            self.contract_call,
            self.governance,
            self.per_payload_byte,
            self.per_storage_write,
        ]
        .iter()
        .all(|&c| c > 0)
    }

    pub fn base_cost(&self, kind: &TxKind) -> u64 {
        match kind {
            TxKind::Transfer { .. } => self.transfer,
            TxKind::Mint { .. } => self.mint,
            TxKind::Endow { .. } => self.endow,
            TxKind::ContractCall { .. } => self.contract_call,
            TxKind::Governance { .. } => self.governance,
        }
    }

    /// Gas charged before any storage writes: base cost plus payload bytes.
    pub fn intrinsic_gas(&self, tx: &Transaction) -> u64 {
        let bytes = tx.kind.payload_len() as u64;
        self.base_cost(&tx.kind)
            .saturating_add(bytes.saturating_mul(self.per_payload_byte))
    }
}

impl Encode for GasSchedule {
    fn encode(&self, enc: &mut Encoder) {
        for v in [
            self.transfer,
            self.mint,
            self.endow,
            self.contract_call,
            self.governance,
            self.per_payload_byte,
            self.per_storage_write,
        ] {
            enc.put_u64(v);
        }
    }
}

impl Decode for GasSchedule {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            transfer: dec.get_u64("gas.transfer")?,
            mint: dec.get_u64("gas.mint")?,
            endow: dec.get_u64("gas.endow")?,
            contract_call: dec.get_u64("gas.contract_call")?,
            governance: dec.get_u64("gas.governance")?,
            per_payload_byte: dec.get_u64("gas.per_payload_byte")?,
            per_storage_write: dec.get_u64("gas.per_storage_write")?,
        })
    }
}
