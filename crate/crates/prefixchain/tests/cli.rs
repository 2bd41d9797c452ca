//! End-to-end CLI tests: real daemon processes on loopback ports, driven
//! through the `prefixchain` binary exactly as an operator would.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use prefixchain::overlay::http::HttpPeerClient;
use prefixchain::overlay::PeerClient;

const BIN: &str = env!("CARGO_BIN_EXE_prefixchain");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

/// Kills the daemon when the test ends, pass or fail.
struct Daemon {
    child: Child,
    pub endpoint: String,
}

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn spawn_daemon(args: &[&str], port: u16) -> Daemon {
    let child = Command::new(BIN)
        .arg("node")
        .args(args)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .expect("daemon spawns");
    let endpoint = format!("127.0.0.1:{port}");
    let daemon = Daemon { child, endpoint };
    let client = HttpPeerClient::new();
    let deadline = Instant::now() + Duration::from_secs(15);
    loop {
        if client.ping(&daemon.endpoint).is_ok() {
            return daemon;
        }
        assert!(Instant::now() < deadline, "daemon never came up");
        std::thread::sleep(Duration::from_millis(100));
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn keygen_refuses_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("node.key");
    let first = run(&["keygen", "--out", out.to_str().unwrap()]);
    assert!(first.status.success());
    let pubkey = stdout(&first);
    assert_eq!(pubkey.trim().len(), 64, "prints the public key hex");
    assert!(out.exists());

    let again = run(&["keygen", "--out", out.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(1));

    let forced = run(&["keygen", "--out", out.to_str().unwrap(), "--force"]);
    assert!(forced.status.success());
    assert_ne!(stdout(&forced), pubkey, "new key material");
}

#[test]
fn node_without_required_flags_is_a_usage_error() {
    let out = run(&["node", "--listen", "127.0.0.1:1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["attack", "--node", "127.0.0.1:1", "--scenario", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn two_daemon_replay_attack_inspect_flow() {
    let dir = tempfile::tempdir().unwrap();
    let key_a = write_keypair(dir.path(), "a.key");
    let key_b = write_keypair(dir.path(), "b.key");
    let genesis = write_file(
        dir.path(),
        "genesis.csv",
        "10.0.0.0/8,65010\n172.16.0.0/12,65011\n",
    );
    // 65012 advertises onward to 65013, then withdraws: 65013 loses its
    // only path and gets pruned, while 65012 keeps its own learning edge.
    let updates = write_file(
        dir.path(),
        "updates.log",
        "\
1000|A|10.0.0.0/8|65012 65010
1001|A|10.0.0.0/8|65013 65012 65010
1002|A|172.16.0.0/12|65012 65011
1003|W|10.0.0.0/8|65012
",
    );

    let port_a = free_port();
    let port_b = free_port();
    let listen_a = format!("127.0.0.1:{port_a}");
    let listen_b = format!("127.0.0.1:{port_b}");

    let a = spawn_daemon(
        &[
            "--listen",
            &listen_a,
            "--asn",
            "64512",
            "--key",
            key_a.to_str().unwrap(),
            "--difficulty",
            "1",
            "--mine",
            "--genesis",
            genesis.to_str().unwrap(),
        ],
        port_a,
    );
    let b = spawn_daemon(
        &[
            "--listen",
            &listen_b,
            "--asn",
            "64513",
            "--key",
            key_b.to_str().unwrap(),
            "--difficulty",
            "1",
            "--genesis",
            genesis.to_str().unwrap(),
            "--bootstrap",
            &listen_a,
        ],
        port_b,
    );

    // B joined via A; both should know each other shortly.
    let client = HttpPeerClient::new();
    wait_until("mutual peering", || {
        client.peers(&a.endpoint).map(|p| p.len()).unwrap_or(0) >= 1
            && client.peers(&b.endpoint).map(|p| p.len()).unwrap_or(0) >= 1
    });

    // Replay the update log into A: consistent stream, zero rejections.
    let replay = run(&[
        "replay",
        "--node",
        &a.endpoint,
        "--updates",
        updates.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(replay.status.success(), "{replay:?}");
    let summary: serde_json::Value = serde_json::from_str(&stdout(&replay)).unwrap();
    assert_eq!(summary["rejected"], 0, "{summary}");
    assert!(summary["accepted"].as_u64().unwrap() >= 3);

    // A mines them; B adopts via block notify.
    wait_until("mining and convergence", || {
        let ha = client.ping(&a.endpoint).ok();
        let hb = client.ping(&b.endpoint).ok();
        match (ha, hb) {
            (Some(ha), Some(hb)) => ha.head_index >= 1 && ha.head_hash == hb.head_hash,
            _ => false,
        }
    });

    // Inspect: chain summary from B, state and graph from A.
    let chain = run(&["inspect", "--node", &b.endpoint, "chain"]);
    assert!(chain.status.success());
    assert!(stdout(&chain).lines().count() >= 2);

    let ipstate = run(&["inspect", "--node", &a.endpoint, "ipstate"]);
    assert!(stdout(&ipstate).contains("10.0.0.0/8\t65010"));

    let graph = run(&["inspect", "--node", &a.endpoint, "graph", "10.0.0.0/8"]);
    assert!(graph.status.success());
    let dot = stdout(&graph);
    assert!(dot.contains("\"AS65012\" -> \"AS65010\""), "{dot}");
    // AS65013 withdrew and was pruned.
    assert!(!dot.contains("AS65013"), "{dot}");

    let missing = run(&["inspect", "--node", &a.endpoint, "graph", "203.0.113.0/24"]);
    assert_eq!(missing.status.code(), Some(1));

    // A hijack-style stream: 65099 falsely originates 10.0.0.0/8 and
    // "advertises" it to 65098.
    let hijack = write_file(dir.path(), "hijack.log", "2000|A|10.0.0.0/8|65098 65099\n");
    let replay = run(&[
        "replay",
        "--node",
        &a.endpoint,
        "--updates",
        hijack.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(replay.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&replay)).unwrap();
    assert!(summary["rejected"].as_u64().unwrap() >= 1, "{summary}");
    assert!(
        summary["rejection_reasons"]["invalid_origin"].as_u64().unwrap() >= 1,
        "{summary}"
    );

    // All five attack scenarios are rejected and logged.
    for scenario in [
        "fake-creator",
        "non-owner-assign",
        "non-assigner-update",
        "bogus-origin-announce",
        "no-path-withdraw",
    ] {
        let attack = run(&["attack", "--node", &a.endpoint, "--scenario", scenario]);
        assert!(
            attack.status.success(),
            "{scenario}: {:?} {:?}",
            stdout(&attack),
            String::from_utf8_lossy(&attack.stderr)
        );
    }
    let log = run(&["inspect", "--node", &a.endpoint, "log"]);
    assert!(stdout(&log).lines().count() >= 6, "{}", stdout(&log));

    drop(a);
    drop(b);
}

fn write_keypair(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    let out = run(&["keygen", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    path
}

fn wait_until(what: &str, mut check: impl FnMut() -> bool) {
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        if check() {
            return;
        }
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
        std::thread::sleep(Duration::from_millis(150));
    }
}

#[test]
fn config_file_supplies_missing_options() {
    // A config file alone (no flags, no env) must fully configure a node;
    // a bad key path then fails operationally (exit 1), proving the file
    // was read and merged.
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(
        dir.path(),
        "node.toml",
        &format!(
            "listen = \"127.0.0.1:{}\"\nasn = 64512\nkey = \"{}\"\n",
            free_port(),
            dir.path().join("missing.key").display()
        ),
    );
    let out = run(&["node", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "{err}");
}
