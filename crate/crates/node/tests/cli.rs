use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, Output};

use poa_core::anchoring::{AnchorAgent, AnchorPolicy, FileWitness};
use poa_core::devnet::{rewrite_suffix, DevNet};
use poa_core::export::write_export;
use poa_core::keys::PublicKey;
use poa_core::{Address, Transaction, TxKind};
use poa_node::keyfile::{generate, read_key};
use poa_node::NodeConfig;
use serde_json::Value;

fn poa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poa"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn keygen_writes_private_key_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let out_a = stdout_json(&poa(&["keygen", "--out", p(&a)]));
    let out_b = stdout_json(&poa(&["keygen", "--out", p(&b)]));
    assert_ne!(out_a["address"], out_b["address"]);

    let file: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    let pk: [u8; 32] = hex::decode(file["public_key"].as_str().unwrap())
        .unwrap()
        .try_into()
        .unwrap();
    let derived = Address::from_public_key(&PublicKey(pk));
    assert_eq!(out_a["address"].as_str().unwrap(), derived.to_string());
    assert_eq!(read_key(&a).unwrap().address(), derived);

    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        assert_eq!(
            std::fs::metadata(&a).unwrap().permissions().mode() & 0o777,
            0o600
        );
    }

    let err = stderr_json(&poa(&["keygen", "--out", p(&a)]));
    assert_eq!(err["error"], "KeyFileExists");
}

#[test]
fn thousand_keys_no_collision() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = HashSet::new();
    for i in 0..1000 {
        let key = generate(&dir.path().join(format!("k{i}.json"))).unwrap();
        assert!(seen.insert(key.address()));
    }
}

#[test]
fn tampered_key_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    generate(&path).unwrap();
    let mut file: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    file["address"] = Value::String("00".repeat(20));
    std::fs::write(&path, file.to_string()).unwrap();
    let err = read_key(&path).unwrap_err();
    assert_eq!(err.code(), "KeyFileInvalid");
}

#[test]
fn config_print_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&poa(&[
        "testnet",
        "init",
        "--validators",
        "3",
        "--dir",
        p(dir.path()),
        "--base-port",
        "45000",
    ]));
    let cfg_path = dir.path().join("node-1/config.json");
    let printed = poa(&["config", "print", "--config", p(&cfg_path)]);
    let reprinted_path = dir.path().join("printed.json");
    std::fs::write(&reprinted_path, &printed.stdout).unwrap();
    assert_eq!(
        NodeConfig::load(&reprinted_path).unwrap(),
        NodeConfig::load(&cfg_path).unwrap()
    );

    let mut raw: Value = serde_json::from_slice(&std::fs::read(&cfg_path).unwrap()).unwrap();
    raw["explorer_port"] = 8080.into();
    std::fs::write(&cfg_path, raw.to_string()).unwrap();
    let err = stderr_json(&poa(&["config", "print", "--config", p(&cfg_path)]));
    assert_eq!(err["error"], "ConfigInvalid");
    assert!(err["message"].as_str().unwrap().contains("explorer_port"));
}

#[test]
fn genesis_new_validates() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("v.json");
    let addr = stdout_json(&poa(&["keygen", "--out", p(&key)]))["address"]
        .as_str()
        .unwrap()
        .to_string();
    let out = dir.path().join("genesis.json");
    let alloc = format!("{addr}=5000");
    let res = stdout_json(&poa(&[
        "genesis",
        "new",
        "--validator-key",
        p(&key),
        "--alloc",
        &alloc,
        "--timestamp",
        "1000",
        "--out",
        p(&out),
    ]));
    let genesis = poa_core::Genesis::load(&out).unwrap();
    assert_eq!(genesis.validators, vec![addr.parse().unwrap()]);
    assert_eq!(
        res["digest"].as_str().unwrap(),
        genesis.block().digest().to_string()
    );

    let err = stderr_json(&poa(&[
        "genesis",
        "new",
        "--out",
        p(&dir.path().join("empty.json")),
    ]));
    assert_eq!(err["error"], "GenesisInvalid");
}

#[test]
fn usage_errors_are_json() {
    let out = poa(&["tx", "send", "--amount", "ten"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "UsageError");
    assert!(poa(&["--help"]).status.success());
}

#[test]
fn missing_files_report_io_error() {
    let err = stderr_json(&poa(&[
        "config",
        "print",
        "--config",
        "/nonexistent/config.json",
    ]));
    assert_eq!(err["error"], "IoError");
    let err = stderr_json(&poa(&[
        "anchor",
        "verify",
        "--chain",
        "/nonexistent.bin",
        "--witness",
        "/nonexistent.json",
    ]));
    assert_eq!(err["error"], "IoError");
}

/// A 60-block chain anchored every 10 blocks into a file witness.
fn anchored_fixture(dir: &Path) -> (DevNet, std::path::PathBuf) {
    let mut net = DevNet::new(4, 1_000_000);
    let witness_path = dir.join("witness.json");
    let mut witness = FileWitness::open(&witness_path).unwrap();
    let policy = AnchorPolicy {
        block_interval: Some(10),
        ..AnchorPolicy::default()
    };
    let mut agent = AnchorAgent::new(policy, 0);
    let k = net.keys()[0].clone();
    let to = net.keys()[1].address();
    for _ in 0..60 {
        let nonce = net.next_nonce(&k.address());
        net.produce(&[Transaction::signed(
            &k,
            nonce,
            21,
            TxKind::Transfer { to, amount: 1 },
        )]);
        let now = net.view().head_block().block.header.timestamp;
        agent.maybe_anchor(net.view(), now, &mut witness).unwrap();
    }
    assert!(agent.log().len() >= 4);
    (net, witness_path)
}

fn write_chain(path: &Path, blocks: &[poa_core::Block]) {
    write_export(std::fs::File::create(path).unwrap(), blocks).unwrap();
}

#[test]
fn anchor_verify_detects_rewritten_history() {
    let dir = tempfile::tempdir().unwrap();
    let (net, witness) = anchored_fixture(dir.path());
    let genesis = dir.path().join("genesis.json");
    std::fs::write(&genesis, serde_json::to_vec(net.genesis()).unwrap()).unwrap();

    let good = dir.path().join("good.bin");
    write_chain(&good, &net.blocks());
    let ok = stdout_json(&poa(&[
        "anchor",
        "verify",
        "--chain",
        p(&good),
        "--witness",
        p(&witness),
        "--genesis",
        p(&genesis),
    ]));
    assert_eq!(ok["ok"], true);

    // Colluding validators drop a transfer at height 25 and re-sign everything after it.
    let rewritten = rewrite_suffix(net.genesis(), net.keys(), &net.blocks(), 25, |h, txs| {
        if h == 25 {
            vec![]
        } else {
            txs
        }
    });
    let bad = dir.path().join("bad.bin");
    write_chain(&bad, &rewritten);
    let err = stderr_json(&poa(&[
        "anchor",
        "verify",
        "--chain",
        p(&bad),
        "--witness",
        p(&witness),
        "--genesis",
        p(&genesis),
    ]));
    assert_eq!(err["error"], "AnchorMismatch");
    let anchored: Vec<u64> = poa_core::anchoring::load_witness_dump(&witness)
        .unwrap()
        .iter()
        .map(|r| r.height)
        .collect();
    let first_above = *anchored.iter().find(|&&h| h >= 25).unwrap();
    assert_eq!(err["earliest_mismatch"], first_above);

    // A plain byte flip fails structural validation first.
    let mut bytes = std::fs::read(&good).unwrap();
    let at = bytes.len() / 2;
    bytes[at] ^= 0x40;
    let flipped = dir.path().join("flipped.bin");
    std::fs::write(&flipped, bytes).unwrap();
    let err = stderr_json(&poa(&[
        "anchor",
        "verify",
        "--chain",
        p(&flipped),
        "--witness",
        p(&witness),
        "--genesis",
        p(&genesis),
    ]));
    assert!(
        ["ChainInvalid", "ExportMalformed"].contains(&err["error"].as_str().unwrap()),
        "{err}"
    );
}

#[test]
fn simnet_run_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/honest.json");
    let out = dir.path().join("trace.json");
    let res = stdout_json(&poa(&[
        "simnet",
        "run",
        "--config",
        p(&scenario),
        "--duration",
        "100",
        "--out",
        p(&out),
    ]));
    assert_eq!(res["metrics"]["canonical_height"], 20);
    let trace = poa_simnet::SimTrace::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(trace.canonical.len(), 20);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n_validators": 7, "validators": 3}"#).unwrap();
    let err = stderr_json(&poa(&[
        "simnet",
        "run",
        "--config",
        p(&bad),
        "--duration",
        "10",
        "--out",
        p(&out),
    ]));
    assert_eq!(err["error"], "ConfigInvalid");
}
