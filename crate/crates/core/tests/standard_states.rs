use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use hsm_core::states::{
    build_primitive, remote_call_state, LoopbackTransport, PrimitiveRegistry, PrimitiveSpec, RemoteEndpoint,
    StatesError,
};
use hsm_core::{outcome_set, Blackboard, CancelToken, Outcome, StateHandle, Value};
use hsm_testkit::fixtures::{BlackHoleTransport, DownTransport, LatchTransport};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn run(state: &StateHandle, bb: &Blackboard) -> Outcome {
    state.execute(bb, &CancelToken::new()).unwrap()
}

fn echo_state(transport: Arc<dyn hsm_core::states::Transport>, timeout_ms: u64) -> StateHandle {
    let endpoint = RemoteEndpoint::new(transport, "svc", Duration::from_millis(timeout_ms)).unwrap();
    remote_call_state(
        endpoint,
        |bb: &Blackboard| bb.get("req").unwrap_or(Value::Int(0)),
        |reply: Value, bb: &Blackboard| {
            bb.set("reply", reply).unwrap();
            Outcome::from_static("succeeded")
        },
        outcome_set(["succeeded"]).unwrap(),
    )
    .unwrap()
}

#[test]
fn remote_call_loopback_echoes() {
    let state = echo_state(Arc::new(LoopbackTransport), 1000);
    assert!(state.outcomes().contains("aborted"));
    assert!(state.outcomes().contains("canceled"));
    let bb = Blackboard::new();
    bb.set("req", "ping").unwrap();
    assert_eq!(run(&state, &bb), "succeeded");
    assert_eq!(bb.get("reply").unwrap(), Value::from("ping"));
}

#[test]
fn remote_call_times_out_as_aborted() {
    let state = echo_state(Arc::new(BlackHoleTransport::default()), 100);
    let start = Instant::now();
    assert_eq!(run(&state, &Blackboard::new()), "aborted");
    let elapsed = start.elapsed();
    assert!(
        elapsed >= Duration::from_millis(100) && elapsed <= Duration::from_millis(200),
        "{elapsed:?}"
    );
}

#[test]
fn remote_call_transport_failure_is_aborted() {
    let state = echo_state(Arc::new(DownTransport), 1000);
    assert_eq!(run(&state, &Blackboard::new()), "aborted");
}

#[test]
fn remote_call_cancel_mid_call() {
    let latch = Arc::new(LatchTransport::default());
    let state = echo_state(latch.clone(), 10_000);
    let token = CancelToken::new();
    let t2 = token.clone();
    let handle = thread::spawn(move || state.execute(&Blackboard::new(), &t2).unwrap());
    thread::sleep(Duration::from_millis(50));
    token.cancel();
    let start = Instant::now();
    assert!(handle.join().unwrap().is_canceled());
    assert!(start.elapsed() < Duration::from_millis(100));
    assert_eq!(latch.cancel_count(), 1);
    // a late reply has nowhere to go and must not panic
    latch.release();
}

#[test]
fn remote_call_latch_release_succeeds() {
    let latch = Arc::new(LatchTransport::default());
    let state = echo_state(latch.clone(), 10_000);
    let handle = thread::spawn(move || {
        let bb = Blackboard::new();
        bb.set("req", 7i64).unwrap();
        (state.execute(&bb, &CancelToken::new()).unwrap(), bb.get("reply").unwrap())
    });
    thread::sleep(Duration::from_millis(50));
    latch.release();
    let (outcome, reply) = handle.join().unwrap();
    assert_eq!(outcome, "succeeded");
    assert_eq!(reply, Value::Int(7));
    assert_eq!(latch.cancel_count(), 0);
}

#[test]
fn zero_timeout_endpoint_is_rejected() {
    assert!(matches!(
        RemoteEndpoint::new(Arc::new(LoopbackTransport), "svc", Duration::ZERO),
        Err(StatesError::InvalidTimeout)
    ));
}

#[test]
fn set_then_branch_on_goal() {
    let set = build_primitive(
        &PrimitiveSpec::new("set_key")
            .param("key", "goal")
            .param("value", "check waypoint one"),
    )
    .unwrap();
    let cases = BTreeMap::from([("check waypoint one".to_owned(), Value::from("go"))]);
    let branch = build_primitive(
        &PrimitiveSpec::new("branch_on_key")
            .param("key", "goal")
            .param("cases", Value::Map(cases))
            .param("default", "skip"),
    )
    .unwrap();
    let bb = Blackboard::new();
    assert_eq!(run(&set, &bb), "done");
    assert_eq!(run(&branch, &bb), "go");
}

#[test]
fn counter_hand_trace() {
    let counter = build_primitive(&PrimitiveSpec::new("counter").param("key", "i").param("limit", 3i64)).unwrap();
    let bb = Blackboard::new();
    let seen: Vec<Outcome> = (0..3).map(|_| run(&counter, &bb)).collect();
    assert_eq!(seen, ["below", "below", "reached"]);
}

#[test]
fn fail_n_times_is_exact() {
    let flaky = build_primitive(&PrimitiveSpec::new("fail_n_times").param("key", "f").param("n", 3i64)).unwrap();
    let bb = Blackboard::new();
    let seen: Vec<Outcome> = (0..6).map(|_| run(&flaky, &bb)).collect();
    assert_eq!(seen, ["failed", "failed", "failed", "succeeded", "succeeded", "succeeded"]);
}

#[test]
fn unknown_primitive_names_itself() {
    let err = build_primitive(&PrimitiveSpec::new("teleport")).unwrap_err();
    assert!(matches!(&err, StatesError::UnknownPrimitive(n) if n == "teleport"));
    assert!(err.to_string().contains("teleport"));
}

#[test]
fn bad_params_are_reported() {
    let cases = [
        PrimitiveSpec::new("set_key").param("key", "k"),
        PrimitiveSpec::new("counter").param("key", "k").param("limit", "three"),
        PrimitiveSpec::new("wait_ms").param("ms", -1i64),
        PrimitiveSpec::new("log").param("message", "m").param("level", "x"),
    ];
    for spec in cases {
        assert!(
            matches!(build_primitive(&spec), Err(StatesError::BadParams { .. })),
            "{spec:?} was accepted"
        );
    }
}

fn random_value(rng: &mut StdRng) -> Value {
    match rng.gen_range(0..6) {
        0 => Value::Bool(rng.gen()),
        1 => Value::Int(rng.gen_range(-3..5)),
        2 => Value::Real(rng.gen()),
        3 => Value::Str(["a", "b", "go"][rng.gen_range(0..3)].to_owned()),
        4 => Value::List(vec![Value::Int(1)]),
        _ => Value::Map(BTreeMap::new()),
    }
}

fn standard_specs() -> Vec<PrimitiveSpec> {
    vec![
        PrimitiveSpec::new("set_key").param("key", "k").param("value", 1i64),
        PrimitiveSpec::new("wait_ms").param("ms", 0i64),
        PrimitiveSpec::new("branch_on_key")
            .param("key", "k")
            .param("cases", Value::List(vec![Value::List(vec![Value::Int(1), "one".into()])]))
            .param("default", "other"),
        PrimitiveSpec::new("counter").param("key", "k").param("limit", 2i64),
        PrimitiveSpec::new("log").param("message", "hello"),
        PrimitiveSpec::new("fail_n_times").param("key", "k").param("n", 1i64),
    ]
}

#[test]
fn runtime_outcomes_stay_declared_under_random_blackboards() {
    let mut rng = StdRng::seed_from_u64(7);
    let registry = PrimitiveRegistry::standard();
    for spec in standard_specs() {
        let state = registry.build(&spec).unwrap();
        for _ in 0..200 {
            let bb = Blackboard::new();
            if rng.gen_bool(0.8) {
                bb.set("k", random_value(&mut rng)).unwrap();
            }
            // execute checks the contract and errors on an undeclared outcome
            state.execute(&bb, &CancelToken::new()).unwrap();
        }
    }
}

#[test]
fn canceled_token_prevents_side_effects() {
    let token = CancelToken::new();
    token.cancel();
    for spec in standard_specs() {
        let state = build_primitive(&spec).unwrap();
        let bb = Blackboard::new();
        let out = state.execute(&bb, &token).unwrap();
        if spec.name == "log" {
            assert_eq!(out, "done");
        } else {
            assert!(out.is_canceled(), "{} returned {out}", spec.name);
            assert!(bb.is_empty(), "{} wrote to the blackboard", spec.name);
        }
    }
}
