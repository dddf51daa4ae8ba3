mod common;

use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use proofseek::backends::{serve, BackendError, MockProver, MockRules, Prover, ProverConfig, TcpProver};
use proofseek::engine::{Engine, Stage};

use common::scenarios;

fn served(rules: MockRules, pool_size: usize) -> (Arc<MockProver>, TcpProver) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mock = Arc::new(MockProver::new(rules));
    serve(listener, mock.clone());
    let config = ProverConfig { endpoint: addr.to_string(), pool_size, ..Default::default() };
    (mock, TcpProver::new(config).unwrap())
}

#[test]
fn engine_over_tcp_matches_direct() {
    let direct = scenarios::init_proof();
    let engine = Engine::new(&direct.model, &direct.prover, direct.budget.clone()).unwrap();
    let want = engine.prove("ec2", &direct.statement).unwrap();

    let sc = scenarios::init_proof();
    let (mock, tcp) = served(MockRules::accept_all(), 2);
    let engine = Engine::new(&sc.model, &tcp, sc.budget.clone()).unwrap();
    let got = engine.prove("ec2", &sc.statement).unwrap();

    assert_eq!(got.success_stage, Stage::InitProof);
    assert_eq!((got.success, got.i_try, got.extra_calls, got.has_sc), (want.success, want.i_try, want.extra_calls, want.has_sc));
    assert_eq!(got.final_script, want.final_script);
    let applies = mock.applies();
    assert_eq!(applies.len(), direct.prover.applies().len());
    assert!(applies.iter().all(|c| c.timeout_s == Some(10.0)));
    assert_eq!(mock.log().last().unwrap().command, "close");
}

#[test]
fn repair_paths_survive_the_wire() {
    for sc in [scenarios::atp(), scenarios::erp(true)] {
        let want = sc.expect;
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        serve(listener, Arc::new(sc.prover));
        let tcp = TcpProver::new(ProverConfig { endpoint: addr.to_string(), ..Default::default() }).unwrap();
        let engine = Engine::new(&sc.model, &tcp, sc.budget.clone()).unwrap();
        let r = engine.prove(sc.name, &sc.statement).unwrap();
        assert_eq!(Some(r.success_stage), want, "{}", sc.name);
    }
}

#[test]
fn theory_load_failures_cross_the_wire() {
    let rules = MockRules { reject_theory: Some("False".into()), ..MockRules::accept_all() };
    let (_, tcp) = served(rules, 1);
    match tcp.init_session("theory T imports Main begin lemma x: False oops end") {
        Err(BackendError::TheoryLoad(_)) => {}
        other => panic!("expected a load failure, got {other:?}"),
    }
    // The failed init released its slot.
    let s = tcp.init_session("theory T imports Main begin end").unwrap();
    tcp.close(&s).unwrap();
}

#[test]
fn pool_limits_open_sessions() {
    let (_, tcp) = served(MockRules::accept_all(), 2);
    let tcp = Arc::new(tcp);
    let a = tcp.init_session("theory A imports Main begin end").unwrap();
    let _b = tcp.init_session("theory B imports Main begin end").unwrap();

    let opened = Arc::new(AtomicBool::new(false));
    let waiter = {
        let (tcp, opened) = (Arc::clone(&tcp), Arc::clone(&opened));
        std::thread::spawn(move || {
            let c = tcp.init_session("theory C imports Main begin end").unwrap();
            opened.store(true, Ordering::SeqCst);
            c
        })
    };
    std::thread::sleep(Duration::from_millis(150));
    assert!(!opened.load(Ordering::SeqCst), "third session opened past the pool limit");
    tcp.close(&a).unwrap();
    let c = waiter.join().unwrap();
    assert!(opened.load(Ordering::SeqCst));
    let r = tcp.apply(&c, &c.initial_state, "by simp", Duration::from_secs(10)).unwrap();
    assert!(r.is_done);
}

#[test]
fn closed_sessions_are_rejected() {
    let (_, tcp) = served(MockRules::accept_all(), 1);
    let s = tcp.init_session("theory A imports Main begin end").unwrap();
    tcp.close(&s).unwrap();
    assert!(matches!(
        tcp.apply(&s, &s.initial_state, "by simp", Duration::from_secs(1)),
        Err(BackendError::SessionClosed(_))
    ));
}

#[test]
fn refused_connection_is_infrastructure() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let tcp = TcpProver::new(ProverConfig { endpoint: format!("127.0.0.1:{port}"), ..Default::default() }).unwrap();
    let e = tcp.init_session("theory A imports Main begin end").unwrap_err();
    assert!(matches!(e, BackendError::Connection(_)));
    assert!(e.is_infrastructure());
}
