//! The deterministic transaction state machine.
//!
//! A transaction either fails with a [`TxError`] and leaves the state
//! untouched (such a transaction can never appear in a valid block), or it is
//! applied and yields a [`Receipt`]. Applied transactions always bump the
//! sender nonce and move `gas_used` LOCETH-wei from sender to block proposer;
//! a built-in contract rejecting its input is reported as a reverted receipt
//! with the fee still charged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Decode;
use crate::contracts::{
    self, CallOutcome, DocumentRecord, DOCUMENT_REGISTRY, VALIDATOR_GOVERNANCE,
};
use crate::gas::GasSchedule;
use crate::hash::Digest;
use crate::keys::Address;
use crate::serde_util::hex_bytes;
use crate::state::{Role, WorldState};
use crate::tx::{GovernanceAction, Transaction, TxKind};
use crate::validators::ValidatorSet;

/// Per-block execution parameters, fixed from the parent state at block start.
#[derive(Clone, Debug)]
pub struct BlockContext {
    pub height: u64,
    pub timestamp: u64,
    pub proposer: Address,
    pub validators: ValidatorSet,
    pub schedule: GasSchedule,
}

impl BlockContext {
    pub fn new(parent_state: &WorldState, height: u64, timestamp: u64, proposer: Address) -> Self {
        Self {
            height,
            timestamp,
            proposer,
            validators: parent_state.validators().clone(),
            schedule: *parent_state.gas_schedule(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub contract: Address,
    pub topic: String,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReceiptStatus {
    Success,
    Reverted { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx: Digest,
    #[serde(flatten)]
    pub status: ReceiptStatus,
    pub gas_used: u64,
    pub events: Vec<Event>,
}

impl Receipt {
    pub fn succeeded(&self) -> bool {
        self.status == ReceiptStatus::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("signature does not verify against sender")]
    InvalidSignature,
    #[error("bad nonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("insufficient gas funds: balance {balance}, required {required}")]
    InsufficientGasFunds { balance: u128, required: u128 },
    #[error("gas limit {limit} below intrinsic cost {intrinsic}")]
    GasLimitTooLow { limit: u64, intrinsic: u64 },
    #[error("{kind} not allowed for role {role:?}")]
    Unauthorized { role: Role, kind: &'static str },
    #[error("insufficient balance: balance {balance}, required {required}")]
    InsufficientBalance { balance: u128, required: u128 },
    #[error("amount overflows LOCETH supply")]
    AmountOverflow,
    #[error("insufficient approvals: {got} valid of {needed} needed")]
    InsufficientApprovals { got: usize, needed: usize },
    #[error("duplicate approval from {0}")]
    DuplicateApproval(Address),
    #[error("invalid governance action: {0}")]
    InvalidGovernance(String),
}

impl TxError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            TxError::InvalidSignature => "InvalidSignature",
            TxError::BadNonce { .. } => "BadNonce",
            TxError::InsufficientGasFunds { .. } => "InsufficientGasFunds",
            TxError::GasLimitTooLow { .. } => "GasLimitTooLow",
            TxError::Unauthorized { .. } => "Unauthorized",
            TxError::InsufficientBalance { .. } => "InsufficientBalance",
            TxError::AmountOverflow => "AmountOverflow",
            TxError::InsufficientApprovals { .. } => "InsufficientApprovals",
            TxError::DuplicateApproval(_) => "DuplicateApproval",
            TxError::InvalidGovernance(_) => "InvalidGovernance",
        }
    }

    /// A nonce ahead of the account may become valid after earlier transactions land.
    pub fn is_future_nonce(&self) -> bool {
        matches!(self, TxError::BadNonce { expected, got } if got > expected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("unknown contract {0}")]
    UnknownContract(Address),
}

fn role_allows(role: Role, kind: &TxKind) -> bool {
    match kind {
        TxKind::Transfer { .. } | TxKind::ContractCall { .. } => {
            matches!(role, Role::Validator | Role::Operator)
        }
        TxKind::Mint { .. } | TxKind::Endow { .. } | TxKind::Governance { .. } => {
            role == Role::Validator
        }
    }
}

/// Applies `tx` to `state` within the block described by `ctx`.
///
/// Checks run in order: signature, nonce, gas funds (balance must cover both
/// `gas_limit` and the intrinsic cost), gas limit, sender role, then the
/// kind-specific rules.
pub fn apply_transaction(
    state: &mut WorldState,
    tx: &Transaction,
    ctx: &BlockContext,
) -> Result<Receipt, TxError> {
    if !tx.verify_signature() {
        return Err(TxError::InvalidSignature);
    }
    let sender = state.account(&tx.sender);
    if tx.nonce != sender.nonce {
        return Err(TxError::BadNonce {
            expected: sender.nonce,
            got: tx.nonce,
        });
    }
    let intrinsic = ctx.schedule.intrinsic_gas(tx);
    let required = tx.gas_limit.max(intrinsic) as u128;
    if sender.balance < required {
        return Err(TxError::InsufficientGasFunds {
            balance: sender.balance,
            required,
        });
    }
    if tx.gas_limit < intrinsic {
        return Err(TxError::GasLimitTooLow {
            limit: tx.gas_limit,
            intrinsic,
        });
    }
    if !role_allows(sender.role, &tx.kind) {
        return Err(TxError::Unauthorized {
            role: sender.role,
            kind: tx.kind.name(),
        });
    }

    let digest = tx.digest();
    let mut receipt = Receipt {
        tx: digest,
        status: ReceiptStatus::Success,
        gas_used: intrinsic,
        events: vec![],
    };
    match &tx.kind {
        TxKind::Transfer { to, amount } => {
            let need = amount
                .checked_add(intrinsic as u128)
                .ok_or(TxError::AmountOverflow)?;
            if sender.balance < need {
                return Err(TxError::InsufficientBalance {
                    balance: sender.balance,
                    required: need,
                });
            }
            state.account_mut(&tx.sender).balance -= amount;
            state.account_mut(to).balance += amount;
        }
        TxKind::Mint {
            beneficiary,
            amount,
        } => {
            let total = state
                .total_minted
                .checked_add(*amount)
                .ok_or(TxError::AmountOverflow)?;
            state.total_minted = total;
            state.account_mut(beneficiary).balance += amount;
        }
        TxKind::Endow { operator, amount } => {
            let need = amount
                .checked_add(intrinsic as u128)
                .ok_or(TxError::AmountOverflow)?;
            if sender.balance < need {
                return Err(TxError::InsufficientBalance {
                    balance: sender.balance,
                    required: need,
                });
            }
            state.account_mut(&tx.sender).balance -= amount;
            let target = state.account_mut(operator);
            target.balance += amount;
            if target.role == Role::External {
                target.role = Role::Operator;
            }
        }
        TxKind::ContractCall { contract, call } => {
            let outcome = match state.contract(contract) {
                Some(c) => contracts::execute_call(c, call, &tx.sender, ctx),
                None => Err(format!("unknown contract {contract}")),
            };
            match outcome {
                Ok(outcome) => {
                    let write_gas = (outcome.writes.len() as u64)
                        .saturating_mul(ctx.schedule.per_storage_write);
                    let total = intrinsic.saturating_add(write_gas);
                    if total > tx.gas_limit {
                        receipt.gas_used = tx.gas_limit;
                        receipt.status = ReceiptStatus::Reverted {
                            reason: "out of gas".into(),
                        };
                    } else {
                        receipt.gas_used = total;
                        receipt.events = commit(state, contract, outcome);
                    }
                }
                Err(reason) => receipt.status = ReceiptStatus::Reverted { reason },
            }
        }
        TxKind::Governance { action, approvals } => {
            check_approvals(action, approvals, tx, ctx)?;
            apply_governance(state, action, ctx.height)?;
            let gov = state
                .contract(&VALIDATOR_GOVERNANCE)
                .expect("governance contract deployed");
            let outcome = contracts::governance_record(gov, action, ctx.height);
            receipt.events = commit(state, &VALIDATOR_GOVERNANCE, outcome);
        }
    }

    let fee = receipt.gas_used as u128;
    let acct = state.account_mut(&tx.sender);
    acct.balance -= fee;
    acct.nonce += 1;
    state.account_mut(&ctx.proposer).balance += fee;
    Ok(receipt)
}

fn commit(
    state: &mut WorldState,
    contract: &Address,
    outcome: CallOutcome,
) -> Vec<crate::execution::Event> {
    let c = state.contracts.get_mut(contract).expect("contract exists");
    for (k, v) in outcome.writes {
        c.storage.insert(k, v);
    }
    outcome.events
}

fn check_approvals(
    action: &GovernanceAction,
    approvals: &[crate::keys::Signature],
    tx: &Transaction,
    ctx: &BlockContext,
) -> Result<(), TxError> {
    let message = action.approval_digest(&tx.sender, tx.nonce);
    let mut seen = std::collections::BTreeSet::new();
    let mut valid = 0;
    for approval in approvals {
        let signer = approval.signer();
        if !seen.insert(signer) {
            return Err(TxError::DuplicateApproval(signer));
        }
        if ctx.validators.contains(&signer) && approval.verify(&message) {
            valid += 1;
        }
    }
    let needed = ctx.validators.majority();
    if valid < needed {
        return Err(TxError::InsufficientApprovals { got: valid, needed });
    }
    Ok(())
}

fn apply_governance(
    state: &mut WorldState,
    action: &GovernanceAction,
    height: u64,
) -> Result<(), TxError> {
    let effective = height + 1;
    match action {
        GovernanceAction::AddValidator(addr) => {
            if state.validators.contains(addr) {
                return Err(TxError::InvalidGovernance(format!(
                    "{addr} is already a validator"
                )));
            }
            state.validators = state
                .validators
                .with_added(*addr, effective)
                .map_err(|e| TxError::InvalidGovernance(e.to_string()))?;
            state.account_mut(addr).role = Role::Validator;
        }
        GovernanceAction::RemoveValidator(addr) => {
            if !state.validators.contains(addr) {
                return Err(TxError::InvalidGovernance(format!(
                    "{addr} is not a validator"
                )));
            }
            state.validators = state
                .validators
                .with_removed(addr, effective)
                .map_err(|e| TxError::InvalidGovernance(e.to_string()))?;
            state.account_mut(addr).role = Role::Operator;
        }
        GovernanceAction::UpdateGasSchedule(schedule) => {
            if !schedule.is_valid() {
                return Err(TxError::InvalidGovernance(
                    "gas costs must be positive".into(),
                ));
            }
            state.gas_schedule = *schedule;
        }
    }
    Ok(())
}

/// Applies every transaction of a block in order, stopping at the first failure.
pub fn apply_transactions(
    state: &mut WorldState,
    txs: &[Transaction],
    ctx: &BlockContext,
) -> Result<Vec<Receipt>, (usize, TxError)> {
    txs.iter()
        .enumerate()
        .map(|(i, tx)| apply_transaction(state, tx, ctx).map_err(|e| (i, e)))
        .collect()
}

/// Free, unsigned read of contract storage. Takes the state by shared
/// reference, so it cannot change the state root.
pub fn view_query(
    state: &WorldState,
    contract: &Address,
    key: &[u8],
) -> Result<Option<Vec<u8>>, ViewError> {
    let c = state
        .contract(contract)
        .ok_or(ViewError::UnknownContract(*contract))?;
    Ok(c.storage.get(key).cloned())
}

/// Typed view of the document registry entry for `digest`.
pub fn document_record(state: &WorldState, digest: &Digest) -> Option<DocumentRecord> {
    view_query(state, &DOCUMENT_REGISTRY, &digest.0)
        .ok()
        .flatten()
        .and_then(|bytes| DocumentRecord::from_bytes(&bytes).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::EVENT_LOG;
    use crate::keys::KeyPair;
    use crate::tx::ContractCall;

    struct Fixture {
        validators: Vec<KeyPair>,
        state: WorldState,
    }

    fn fixture(n: usize) -> Fixture {
        let validators: Vec<KeyPair> = (0..n)
            .map(|i| KeyPair::from_label(&format!("val-{i}")))
            .collect();
        let set = ValidatorSet::new(validators.iter().map(KeyPair::address).collect(), 0).unwrap();
        let mut state = WorldState::new(set, GasSchedule::default());
        for v in &validators {
            state.allocate(&v.address(), 1_000_000);
        }
        Fixture { validators, state }
    }

    fn ctx(state: &WorldState, proposer: Address) -> BlockContext {
        BlockContext::new(state, 1, 5, proposer)
    }

    fn conserved(state: &WorldState) -> bool {
        state.balance_sum() == state.total_minted()
    }

    #[test]
    fn transfer_moves_amount_and_fee() {
        let mut f = fixture(1);
        let a = KeyPair::from_label("A");
        let b = KeyPair::from_label("B");
        let proposer = f.validators[0].address();
        f.state.allocate(&a.address(), 100);
        f.state.allocate(&b.address(), 100);
        f.state.account_mut(&a.address()).role = Role::Operator;
        let before = f.state.account(&proposer).balance;
        let tx = Transaction::signed(
            &a,
            0,
            21,
            TxKind::Transfer {
                to: b.address(),
                amount: 10,
            },
        );
        let c = ctx(&f.state, proposer);
        let r = apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert!(r.succeeded());
        assert_eq!(r.gas_used, 21);
        assert_eq!(f.state.account(&a.address()).balance, 69);
        assert_eq!(f.state.account(&b.address()).balance, 110);
        assert_eq!(f.state.account(&proposer).balance, before + 21);
        assert_eq!(f.state.account(&a.address()).nonce, 1);
        assert!(conserved(&f.state));
    }

    #[test]
    fn unfunded_external_user_rejected_without_state_change() {
        let mut f = fixture(1);
        let e = KeyPair::from_label("E");
        let root = f.state.state_root();
        let tx = Transaction::signed(
            &e,
            0,
            0,
            TxKind::Transfer {
                to: Address::ZERO,
                amount: 0,
            },
        );
        let c = ctx(&f.state, f.validators[0].address());
        let err = apply_transaction(&mut f.state, &tx, &c).unwrap_err();
        assert!(matches!(err, TxError::InsufficientGasFunds { .. }));
        assert_eq!(err.code(), "InsufficientGasFunds");
        assert_eq!(f.state.state_root(), root);
    }

    #[test]
    fn replay_rejected_with_bad_nonce() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let tx = Transaction::signed(
            &v,
            0,
            21,
            TxKind::Mint {
                beneficiary: v.address(),
                amount: 1,
            },
        );
        let c = ctx(&f.state, v.address());
        apply_transaction(&mut f.state, &tx, &c).unwrap();
        let root = f.state.state_root();
        let err = apply_transaction(&mut f.state, &tx, &c).unwrap_err();
        assert_eq!(
            err,
            TxError::BadNonce {
                expected: 1,
                got: 0
            }
        );
        assert_eq!(f.state.state_root(), root);
    }

    #[test]
    fn tampered_signature_rejected() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let mut tx = Transaction::signed(
            &v,
            0,
            21,
            TxKind::Mint {
                beneficiary: v.address(),
                amount: 1,
            },
        );
        tx.kind = TxKind::Mint {
            beneficiary: v.address(),
            amount: 2,
        };
        let c = ctx(&f.state, v.address());
        assert_eq!(
            apply_transaction(&mut f.state, &tx, &c),
            Err(TxError::InvalidSignature)
        );
    }

    #[test]
    fn validator_mint_increases_supply() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let before = f.state.total_minted();
        let tx = Transaction::signed(
            &v,
            0,
            21,
            TxKind::Mint {
                beneficiary: v.address(),
                amount: 10u128.pow(18),
            },
        );
        let c = ctx(&f.state, v.address());
        apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert_eq!(f.state.total_minted() - before, 10u128.pow(18));
        assert!(conserved(&f.state));
    }

    #[test]
    fn two_mints_conserve() {
        let mut f = fixture(2);
        let v = f.validators[0].clone();
        let proposer = f.validators[1].address();
        let (m0, s0) = (f.state.total_minted(), f.state.balance_sum());
        for (nonce, amount) in [(0, 5), (1, 7)] {
            let tx = Transaction::signed(
                &v,
                nonce,
                21,
                TxKind::Mint {
                    beneficiary: Address::well_known(77),
                    amount,
                },
            );
            let c = ctx(&f.state, proposer);
            apply_transaction(&mut f.state, &tx, &c).unwrap();
        }
        assert_eq!(f.state.total_minted() - m0, 12);
        assert_eq!(f.state.balance_sum() - s0, 12);
    }

    #[test]
    fn operator_cannot_mint_or_endow() {
        let mut f = fixture(1);
        let op = KeyPair::from_label("op");
        f.state.allocate(&op.address(), 1000);
        f.state.account_mut(&op.address()).role = Role::Operator;
        let c = ctx(&f.state, f.validators[0].address());
        let mint = Transaction::signed(
            &op,
            0,
            21,
            TxKind::Mint {
                beneficiary: op.address(),
                amount: 1,
            },
        );
        assert!(matches!(
            apply_transaction(&mut f.state, &mint, &c),
            Err(TxError::Unauthorized { .. })
        ));
        let endow = Transaction::signed(
            &op,
            0,
            21,
            TxKind::Endow {
                operator: Address::ZERO,
                amount: 1,
            },
        );
        assert!(matches!(
            apply_transaction(&mut f.state, &endow, &c),
            Err(TxError::Unauthorized { .. })
        ));
    }

    #[test]
    fn endowment_promotes_and_enables_sender() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let e = KeyPair::from_label("E");
        let c = ctx(&f.state, v.address());

        let first = Transaction::signed(
            &e,
            0,
            21,
            TxKind::Transfer {
                to: v.address(),
                amount: 1,
            },
        );
        assert!(matches!(
            apply_transaction(&mut f.state.clone(), &first, &c),
            Err(TxError::InsufficientGasFunds { .. })
        ));

        let endow = Transaction::signed(
            &v,
            0,
            21,
            TxKind::Endow {
                operator: e.address(),
                amount: 1000,
            },
        );
        apply_transaction(&mut f.state, &endow, &c).unwrap();
        let acct = f.state.account(&e.address());
        assert_eq!((acct.role, acct.balance), (Role::Operator, 1000));

        let r = apply_transaction(&mut f.state, &first, &c).unwrap();
        assert!(r.succeeded());
        assert!(conserved(&f.state));
    }

    #[test]
    fn endow_requires_balance() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let c = ctx(&f.state, v.address());
        let endow = Transaction::signed(
            &v,
            0,
            21,
            TxKind::Endow {
                operator: Address::ZERO,
                amount: 10_000_000,
            },
        );
        assert!(matches!(
            apply_transaction(&mut f.state, &endow, &c),
            Err(TxError::InsufficientBalance { .. })
        ));
    }

    #[test]
    fn gas_limit_below_intrinsic_rejected() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let c = ctx(&f.state, v.address());
        let tx = Transaction::signed(
            &v,
            0,
            20,
            TxKind::Mint {
                beneficiary: v.address(),
                amount: 1,
            },
        );
        assert_eq!(
            apply_transaction(&mut f.state, &tx, &c),
            Err(TxError::GasLimitTooLow {
                limit: 20,
                intrinsic: 21
            })
        );
    }

    #[test]
    fn contract_revert_still_charges_fee() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let proposer = KeyPair::from_label("other-proposer").address();
        let call = ContractCall::RegisterDocument {
            digest: Digest::ZERO,
            link: "http://bad".into(),
        };
        let tx = Transaction::signed(
            &v,
            0,
            1000,
            TxKind::ContractCall {
                contract: DOCUMENT_REGISTRY,
                call,
            },
        );
        let c = ctx(&f.state, proposer);
        let before = f.state.account(&v.address()).balance;
        let r = apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert!(matches!(r.status, ReceiptStatus::Reverted { .. }));
        assert!(r.gas_used > 0);
        assert_eq!(
            f.state.account(&v.address()).balance,
            before - r.gas_used as u128
        );
        assert_eq!(f.state.account(&v.address()).nonce, 1);
        assert!(document_record(&f.state, &Digest::ZERO).is_none());
    }

    #[test]
    fn out_of_gas_reverts_writes() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let call = ContractCall::LogEvent {
            topic: "t".into(),
            data: vec![],
        };
        let probe = Transaction::signed(
            &v,
            0,
            1000,
            TxKind::ContractCall {
                contract: EVENT_LOG,
                call: call.clone(),
            },
        );
        let intrinsic = f.state.gas_schedule().intrinsic_gas(&probe);
        let tx = Transaction::signed(
            &v,
            0,
            intrinsic + 1,
            TxKind::ContractCall {
                contract: EVENT_LOG,
                call,
            },
        );
        let c = ctx(&f.state, v.address());
        let r = apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert_eq!(
            r.status,
            ReceiptStatus::Reverted {
                reason: "out of gas".into()
            }
        );
        assert_eq!(r.gas_used, intrinsic + 1);
        assert_eq!(view_query(&f.state, &EVENT_LOG, b"count").unwrap(), None);
    }

    #[test]
    fn view_query_reads_without_mutation() {
        let mut f = fixture(1);
        let v = f.validators[0].clone();
        let d = crate::hash::digest(b"doc");
        let call = ContractCall::RegisterDocument {
            digest: d,
            link: format!("store://{d}"),
        };
        let tx = Transaction::signed(
            &v,
            0,
            1000,
            TxKind::ContractCall {
                contract: DOCUMENT_REGISTRY,
                call,
            },
        );
        let c = ctx(&f.state, v.address());
        apply_transaction(&mut f.state, &tx, &c).unwrap();
        let root = f.state.state_root();
        let rec = document_record(&f.state, &d).unwrap();
        assert_eq!(
            (rec.registrant, rec.height, rec.timestamp),
            (v.address(), 1, 5)
        );
        assert_eq!(
            view_query(&f.state, &DOCUMENT_REGISTRY, b"absent").unwrap(),
            None
        );
        assert_eq!(
            view_query(&f.state, &Address::well_known(99), b"k"),
            Err(ViewError::UnknownContract(Address::well_known(99)))
        );
        assert_eq!(f.state.state_root(), root);
    }

    fn governance_tx(
        f: &Fixture,
        sender: usize,
        nonce: u64,
        action: GovernanceAction,
        approvers: &[usize],
    ) -> Transaction {
        let proposer = &f.validators[sender];
        let msg = action.approval_digest(&proposer.address(), nonce);
        let approvals = approvers
            .iter()
            .map(|&i| f.validators[i].sign(&msg))
            .collect();
        Transaction::signed(
            proposer,
            nonce,
            100,
            TxKind::Governance { action, approvals },
        )
    }

    #[test]
    fn majority_adds_validator_effective_next_height() {
        let mut f = fixture(7);
        let new = KeyPair::from_label("val-7").address();
        let tx = governance_tx(&f, 0, 0, GovernanceAction::AddValidator(new), &[0, 1, 2, 3]);
        let c = ctx(&f.state, f.validators[0].address());
        let r = apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert_eq!(r.events[0].topic, "GovernanceChange");
        assert_eq!(f.state.validators().len(), 8);
        assert_eq!(f.state.validators().effective_from(), 2);
        assert_eq!(f.state.account(&new).role, Role::Validator);
        assert_eq!(c.validators.len(), 7);
    }

    #[test]
    fn minority_approvals_rejected() {
        let mut f = fixture(7);
        let tx = governance_tx(
            &f,
            0,
            0,
            GovernanceAction::AddValidator(Address::ZERO),
            &[0, 1, 2],
        );
        let c = ctx(&f.state, f.validators[0].address());
        assert_eq!(
            apply_transaction(&mut f.state, &tx, &c),
            Err(TxError::InsufficientApprovals { got: 3, needed: 4 })
        );
    }

    #[test]
    fn duplicate_approval_rejected() {
        let mut f = fixture(7);
        let tx = governance_tx(
            &f,
            0,
            0,
            GovernanceAction::AddValidator(Address::ZERO),
            &[0, 1, 1, 2, 3],
        );
        let c = ctx(&f.state, f.validators[0].address());
        assert_eq!(
            apply_transaction(&mut f.state, &tx, &c),
            Err(TxError::DuplicateApproval(f.validators[1].address()))
        );
    }

    #[test]
    fn non_member_approvals_do_not_count() {
        let mut f = fixture(7);
        let action = GovernanceAction::AddValidator(Address::ZERO);
        let msg = action.approval_digest(&f.validators[0].address(), 0);
        let mut approvals: Vec<_> = (0..3).map(|i| f.validators[i].sign(&msg)).collect();
        approvals.push(KeyPair::from_label("outsider").sign(&msg));
        let tx = Transaction::signed(
            &f.validators[0],
            0,
            100,
            TxKind::Governance { action, approvals },
        );
        let c = ctx(&f.state, f.validators[0].address());
        assert!(matches!(
            apply_transaction(&mut f.state, &tx, &c),
            Err(TxError::InsufficientApprovals { got: 3, .. })
        ));
    }

    #[test]
    fn remove_then_readd_restores_membership() {
        let mut f = fixture(7);
        let original = f.state.validators().members().to_vec();
        let target = f.validators[6].address();
        let tx = governance_tx(
            &f,
            0,
            0,
            GovernanceAction::RemoveValidator(target),
            &[0, 1, 2, 3],
        );
        let c = ctx(&f.state, f.validators[0].address());
        apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert_eq!(f.state.validators().len(), 6);
        assert_eq!(f.state.account(&target).role, Role::Operator);

        let c = BlockContext::new(&f.state, 2, 10, f.validators[0].address());
        let tx = governance_tx(
            &f,
            0,
            1,
            GovernanceAction::AddValidator(target),
            &[0, 1, 2, 3],
        );
        apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert_eq!(f.state.validators().members(), &original[..]);
        assert_eq!(f.state.account(&target).role, Role::Validator);
    }

    #[test]
    fn gas_schedule_update_applies() {
        let mut f = fixture(1);
        let schedule = GasSchedule {
            transfer: 42,
            ..GasSchedule::default()
        };
        let tx = governance_tx(
            &f,
            0,
            0,
            GovernanceAction::UpdateGasSchedule(schedule),
            &[0],
        );
        let c = ctx(&f.state, f.validators[0].address());
        apply_transaction(&mut f.state, &tx, &c).unwrap();
        assert_eq!(f.state.gas_schedule().transfer, 42);

        let bad = GasSchedule {
            mint: 0,
            ..GasSchedule::default()
        };
        let tx = governance_tx(&f, 0, 1, GovernanceAction::UpdateGasSchedule(bad), &[0]);
        assert!(matches!(
            apply_transaction(&mut f.state, &tx, &c),
            Err(TxError::InvalidGovernance(_))
        ));
    }
}
