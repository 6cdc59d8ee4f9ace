use poa_core::block::BlockHeader;
use poa_core::consensus::{
    proposal_slot, propose_block, propose_on, scheduled_proposer, Acceptance, BlockError, ChainView,
};
use poa_core::devnet::{dev_genesis, validator_keys, DevNet};
use poa_core::{Block, GovernanceAction, KeyPair, Transaction, TxKind};

fn key_for(keys: &[KeyPair], addr: &poa_core::Address) -> KeyPair {
    keys.iter().find(|k| k.address() == *addr).unwrap().clone()
}

#[test]
fn in_turn_chain_beats_out_of_turn_chain() {
    let keys = validator_keys(4);
    let genesis = dev_genesis(&keys, 0, 0);
    let mut view = ChainView::new(&genesis);
    let set = view.head_state().validators().clone();
    let slot = view.config().slot_seconds;
    let delay = view.config().out_of_turn_delay;

    // Branch A: in-turn at heights 1 and 2 (weight 2 + 2).
    let p1 = key_for(&keys, &scheduled_proposer(1, &set));
    let a1 = propose_block(&view, &p1, &[], slot).unwrap().block;
    // Branch B: in-turn at 1 is shared, then out-of-turn at 2 (2 + 1).
    assert!(matches!(
        view.accept_block(a1.clone()),
        Acceptance::Accepted { .. }
    ));
    let p2 = key_for(&keys, &scheduled_proposer(2, &set));
    let a2 = propose_block(&view, &p2, &[], 2 * slot).unwrap().block;
    let other = keys
        .iter()
        .find(|k| k.address() != p1.address() && k.address() != p2.address())
        .unwrap();
    let b2 = propose_on(&view, &a1.digest(), other, &[], 2 * slot + delay + 5)
        .unwrap()
        .block;
    assert_eq!(b2.header.weight, 1);

    let acc = view.accept_block(b2.clone());
    assert!(matches!(
        acc,
        Acceptance::Accepted {
            head_change: Some(_),
            ..
        }
    ));
    assert_eq!(view.head(), b2.digest());
    let acc = view.accept_block(a2.clone());
    let Acceptance::Accepted {
        head_change: Some(hc),
        ..
    } = acc
    else {
        panic!("{acc:?}")
    };
    assert_eq!(hc.fork_height, 2);
    assert_eq!(view.head(), a2.digest());
    assert_eq!(view.head_block().cumulative_weight, 4);
    assert_eq!(view.fork_choice(), view.head());
    assert_eq!(view.competing_tips().len(), 1);
}

#[test]
fn accepting_twice_is_idempotent() {
    let mut net = DevNet::new(3, 0);
    let block = net.produce(&[]).block;
    let mut view = ChainView::new(net.genesis());
    assert!(matches!(
        view.accept_block(block.clone()),
        Acceptance::Accepted { .. }
    ));
    let head = view.head();
    assert_eq!(view.accept_block(block), Acceptance::Known);
    assert_eq!(view.head(), head);
    assert_eq!(view.len(), 2);
}

#[test]
fn non_member_proposer_rejected() {
    let net = DevNet::new(3, 0);
    let outsider = KeyPair::from_label("outsider");
    let view = ChainView::new(net.genesis());
    assert_eq!(proposal_slot(&view, &outsider.address()), None);
    // Forge a block by hand with a correct signature from a non-member.
    let genesis = view.head_block();
    let mut header = BlockHeader {
        height: 1,
        parent: genesis.digest,
        state_root: genesis.state.state_root(),
        tx_root: poa_core::merkle::merkle_root(&[]),
        proposer: outsider.address(),
        timestamp: 100,
        weight: 2,
        signature: None,
    };
    header.sign(&outsider);
    let mut view = view;
    let acc = view.accept_block(Block {
        header,
        txs: vec![],
    });
    let Acceptance::Rejected(err) = acc else {
        panic!("{acc:?}")
    };
    assert!(matches!(err, BlockError::UnauthorizedProposer(_)));
    assert_eq!(err.reason(), "unauthorized-proposer");
}

#[test]
fn bad_nonce_tx_is_left_out() {
    let mut net = DevNet::new(3, 1_000_000);
    let k = net.keys()[0].clone();
    let to = net.keys()[1].address();
    let mut txs: Vec<Transaction> = (0..4)
        .map(|n| Transaction::signed(&k, n, 21, TxKind::Transfer { to, amount: 1 }))
        .collect();
    txs.insert(
        2,
        Transaction::signed(&k, 0, 21, TxKind::Transfer { to, amount: 2 }),
    );
    let p = net.produce(&txs);
    assert_eq!(p.block.txs.len(), 4);
    assert_eq!(p.dropped.len(), 1);
    assert_eq!(p.dropped[0].0, txs[2].digest());
}

#[test]
fn future_nonce_is_deferred() {
    let mut net = DevNet::new(3, 1_000_000);
    let k = net.keys()[0].clone();
    let to = net.keys()[1].address();
    let tx = Transaction::signed(&k, 5, 21, TxKind::Transfer { to, amount: 1 });
    let p = net.produce(std::slice::from_ref(&tx));
    assert!(p.block.txs.is_empty());
    assert_eq!(p.deferred, vec![tx.digest()]);
}

#[test]
fn out_of_turn_waits_for_delay() {
    let net = DevNet::new(5, 0);
    let view = net.view();
    let cfg = *view.config();
    let scheduled = scheduled_proposer(1, view.head_state().validators());
    let set = view.head_state().validators().members().to_vec();
    let idx = set.iter().position(|a| *a == scheduled).unwrap();
    let next = net.key_of(&set[(idx + 4) % 5]).unwrap().clone();
    let due = cfg.slot_seconds;
    assert!(propose_block(view, &next, &[], due).is_none());
    assert!(propose_block(view, &next, &[], due + cfg.out_of_turn_delay - 1).is_none());
    let p = propose_block(view, &next, &[], due + cfg.out_of_turn_delay).unwrap();
    assert_eq!(p.block.header.weight, 1);
    // Stand-ins go in reverse schedule order; the scheduled proposer's
    // successor waits longest.
    for (k, steps) in [(3, 1), (2, 2), (1, 3)] {
        let key = net.key_of(&set[(idx + k) % 5]).unwrap().clone();
        let (earliest, _) = proposal_slot(view, &key.address()).unwrap();
        assert_eq!(
            earliest,
            due + cfg.out_of_turn_delay + steps * cfg.out_of_turn_stagger
        );
    }
}

/// Simulates every validator sealing at its earliest moment, except
/// the validator scheduled at each height in `absent`.
fn race(n: usize, heights: u64, absent: &[u64]) -> ChainView {
    let net = DevNet::new(n, 0);
    let mut view = net.view().clone();
    for h in 1..=heights {
        let winner = net
            .keys()
            .iter()
            .filter(|k| {
                !absent.contains(&h)
                    || k.address() != scheduled_proposer(h, view.head_state().validators())
            })
            .filter_map(|k| proposal_slot(&view, &k.address()).map(|(t, _)| (t, k)))
            .min_by_key(|(t, _)| *t)
            .unwrap();
        let block = propose_block(&view, winner.1, &[], winner.0).unwrap().block;
        assert!(matches!(
            view.accept_block(block),
            Acceptance::Accepted { .. }
        ));
    }
    view
}

#[test]
fn rotation_realigns_after_a_missed_turn() {
    for n in [3usize, 4, 5, 6, 7] {
        let missed = 5u64;
        let view = race(n, 20, &[missed]);
        let weights: Vec<u8> = view
            .canonical()
            .iter()
            .skip(1)
            .map(|d| view.get(d).unwrap().block.header.weight)
            .collect();
        let out_of_turn: Vec<usize> = (0..weights.len())
            .filter(|&i| weights[i] == 1)
            .map(|i| i + 1)
            .collect();
        // The stand-in is still a recent signer when its own turn comes, so
        // that turn is taken out of turn as well. After that the rotation is
        // back in step.
        let window = n / 2;
        let expected = vec![missed as usize, missed as usize + n - window - 1];
        assert_eq!(out_of_turn, expected, "n = {n}");
    }
}

#[test]
fn early_out_of_turn_block_rejected() {
    let net = DevNet::new(3, 0);
    let mut view = net.view().clone();
    let scheduled = scheduled_proposer(1, view.head_state().validators());
    let other = net
        .keys()
        .iter()
        .find(|k| k.address() != scheduled)
        .unwrap()
        .clone();
    let mut block = propose_on(&view, &view.head(), &other, &[], 100)
        .unwrap()
        .block;
    block.header.timestamp = 6;
    block.header.sign(&other);
    let Acceptance::Rejected(err) = view.accept_block(block) else {
        panic!()
    };
    assert_eq!(err.reason(), "out-of-turn-too-early");
}

#[test]
fn recent_signer_cannot_seal_again() {
    let mut net = DevNet::new(4, 0);
    let p1 = net.produce(&[]).block.header.proposer;
    let view = net.view();
    // With four validators the last signer is barred for one block.
    assert_eq!(proposal_slot(view, &p1), None);
    let k = net.key_of(&p1).unwrap().clone();
    assert!(propose_block(view, &k, &[], 1_000).is_none());
}

#[test]
fn equivocation_recorded_and_flagged() {
    let net = DevNet::new(3, 0);
    let mut view = net.view().clone();
    let scheduled = scheduled_proposer(1, view.head_state().validators());
    let k = net.key_of(&scheduled).unwrap().clone();
    let a = propose_block(&view, &k, &[], 5).unwrap().block;
    let b = propose_block(&view, &k, &[], 6).unwrap().block;
    assert_ne!(a.digest(), b.digest());
    assert!(matches!(
        view.accept_block(a.clone()),
        Acceptance::Accepted { .. }
    ));
    assert!(matches!(
        view.accept_block(b.clone()),
        Acceptance::Accepted { .. }
    ));
    assert_eq!(view.equivocations().len(), 1);
    let ev = &view.equivocations()[0];
    assert_eq!(
        (ev.proposer, ev.height, ev.first, ev.second),
        (scheduled, 1, a.digest(), b.digest())
    );
    assert!(view.flagged().contains(&scheduled));
    // Both blocks stay known; the tie goes to the lower digest.
    assert!(view.contains(&a.digest()) && view.contains(&b.digest()));
    assert_eq!(view.head(), a.digest().min(b.digest()));
}

#[test]
fn orphans_connect_when_parent_arrives() {
    let mut net = DevNet::new(3, 0);
    net.produce_empty(5);
    let blocks = net.blocks();
    let mut view = ChainView::new(net.genesis());
    for b in blocks[2..].iter().rev() {
        assert!(matches!(
            view.accept_block(b.clone()),
            Acceptance::Orphan { .. }
        ));
    }
    let Acceptance::Accepted { connected, .. } = view.accept_block(blocks[1].clone()) else {
        panic!()
    };
    assert_eq!(connected.len(), 4);
    assert_eq!(view.head(), blocks[5].digest());
    assert_eq!(view.orphan_count(), 0);
}

#[test]
fn governance_change_applies_from_next_height() {
    let mut net = DevNet::new(7, 1_000_000);
    let keys = net.keys().to_vec();
    let newcomer = KeyPair::from_label("newcomer");
    let proposer = &keys[0];
    let nonce = net.next_nonce(&proposer.address());
    let action = GovernanceAction::AddValidator(newcomer.address());
    let msg = action.approval_digest(&proposer.address(), nonce);
    let approvals = keys[..4].iter().map(|k| k.sign(&msg)).collect();
    let tx = Transaction::signed(
        proposer,
        nonce,
        1_000,
        TxKind::Governance { action, approvals },
    );
    let p = net.produce(&[tx]);
    assert_eq!(p.block.txs.len(), 1);
    let h = p.block.header.height;
    let state = net.view().head_state();
    assert!(state.validators().contains(&newcomer.address()));
    assert_eq!(state.validators().effective_from(), h + 1);
    assert_eq!(state.validators().len(), 8);
    // The enlarged set drives the schedule from the next block on.
    net.add_key(newcomer.clone());
    net.produce_empty(16);
    let blocks = net.blocks();
    assert!(blocks
        .iter()
        .any(|b| b.header.proposer == newcomer.address()));
    assert!(poa_core::validation::validate_chain(&blocks, net.genesis()).is_ok());
}

#[test]
fn finality_depth_is_validator_count() {
    let mut net = DevNet::new(7, 0);
    net.produce_empty(10);
    let view = net.view();
    assert_eq!(view.finality_depth(), 7);
    assert_eq!(view.final_height(), Some(3));
    assert!(view.is_final(&view.canonical()[3]));
    assert!(!view.is_final(&view.canonical()[4]));
}
