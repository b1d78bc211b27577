use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use hsm_core::states::{callback_state, wait_state};
use hsm_core::{
    outcome_set, Blackboard, CancelToken, ExecutionStatus, FsmError, IssueCode, Outcome, StateHandle, StateMachine,
    VisitRecorder,
};
use hsm_testkit::fixtures::{polling_state, rendezvous_machine};
use parking_lot::Mutex;

fn returns(outcome: &'static str, declared: &[&'static str]) -> StateHandle {
    callback_state(outcome_set(declared.iter().copied()).unwrap(), move |_| Outcome::from_static(outcome)).unwrap()
}

fn chain() -> StateMachine {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("ok", &["ok"]), [("ok", "B")]).unwrap();
    m.add_state("B", returns("ok", &["ok"]), [("ok", "succeeded")]).unwrap();
    m
}

#[test]
fn new_machine_is_empty_and_idle() {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    assert!(m.state_names().is_empty());
    assert_eq!(m.status(), ExecutionStatus::Idle);
    assert_eq!(m.initial(), None);

    let nav = StateMachine::new("NAVIGATION", ["succeeded", "aborted", "canceled"]).unwrap();
    assert_eq!(nav.name(), "NAVIGATION");
    assert_eq!(nav.outcomes().len(), 3);
}

#[test]
fn new_machine_rejects_bad_input() {
    let none: [&str; 0] = [];
    assert!(matches!(StateMachine::new("M", none), Err(FsmError::EmptyOutcomeSet)));
    assert!(matches!(StateMachine::new("", ["succeeded"]), Err(FsmError::EmptyName)));
    assert!(matches!(StateMachine::new("M", ["  "]), Err(FsmError::InvalidOutcome(_))));
}

#[test]
fn first_added_state_becomes_initial() {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("CHECK_WP", returns("done", &["done"]), [("done", "succeeded")]).unwrap();
    assert_eq!(m.initial().as_deref(), Some("CHECK_WP"));
    assert!(m.validate().is_empty());
}

#[test]
fn add_state_errors() {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("ok", &["ok"]), [("ok", "succeeded")]).unwrap();
    assert!(matches!(
        m.add_state("A", returns("ok", &["ok"]), [("ok", "succeeded")]),
        Err(FsmError::DuplicateStateName(n)) if n == "A"
    ));
    assert!(matches!(
        m.add_state("succeeded", returns("ok", &["ok"]), [("ok", "succeeded")]),
        Err(FsmError::NameShadowsOutcome(_))
    ));
    assert!(matches!(
        m.add_state("canceled", returns("ok", &["ok"]), [("ok", "succeeded")]),
        Err(FsmError::NameShadowsOutcome(_))
    ));
    assert!(matches!(
        m.add_state("C", returns("ok", &["ok"]), [("fail", "aborted")]),
        Err(FsmError::UndeclaredOutcomeInMap { state, outcome }) if state == "C" && outcome == "fail"
    ));
    // the reserved outcome may always be mapped
    m.add_state("D", returns("ok", &["ok"]), [("ok", "succeeded"), ("canceled", "succeeded")])
        .unwrap();
}

#[test]
fn set_initial_requires_known_state() {
    let m = chain();
    m.set_initial("B").unwrap();
    assert_eq!(m.initial().as_deref(), Some("B"));
    assert!(matches!(m.set_initial("Z"), Err(FsmError::UnknownState(z)) if z == "Z"));
}

#[test]
fn machine_cannot_nest_itself() {
    let outer = Arc::new(StateMachine::new("OUTER", ["succeeded"]).unwrap());
    let inner = Arc::new(StateMachine::new("INNER", ["succeeded"]).unwrap());
    inner
        .add_state("X", returns("ok", &["ok"]), [("ok", "succeeded")])
        .unwrap();
    outer
        .add_state("IN", StateHandle::machine(Arc::clone(&inner)), [("succeeded", "succeeded")])
        .unwrap();
    assert!(matches!(
        inner.add_state("LOOP", StateHandle::machine(Arc::clone(&outer)), [("succeeded", "succeeded")]),
        Err(FsmError::CyclicNesting(_))
    ));
}

#[test]
fn machine_handle_mirrors_machine_outcomes() {
    let inner = Arc::new(StateMachine::new("INNER", ["succeeded", "aborted"]).unwrap());
    let handle = StateHandle::machine(Arc::clone(&inner));
    assert!(handle.is_machine());
    assert_eq!(handle.outcomes(), inner.outcomes());
}

#[test]
fn validate_reports_codes() {
    assert!(chain().validate().is_empty());

    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("ok", &["ok"]), [("ok", "NEXXT")]).unwrap();
    let issues = m.validate();
    assert_eq!(issues.len(), 1, "{issues:?}");
    assert_eq!(issues[0].code, IssueCode::UnknownTarget);
    assert_eq!(issues[0].location(), "A:ok");

    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("ok", &["ok"]), [("ok", "succeeded")]).unwrap();
    m.add_state("B", returns("ok", &["ok"]), [("ok", "succeeded")]).unwrap();
    let issues = m.validate();
    assert_eq!(issues.len(), 1, "{issues:?}");
    assert_eq!(issues[0].code, IssueCode::UnreachableState);
    assert_eq!(issues[0].location(), "B");

    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("ok", &["ok", "bad"]), [("ok", "succeeded")]).unwrap();
    let issues = m.validate();
    assert_eq!(issues.len(), 1, "{issues:?}");
    assert_eq!(issues[0].code, IssueCode::UnmappedOutcome);
    assert_eq!(issues[0].location(), "A:bad");

    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("ok", &["ok"]), [("ok", "B")]).unwrap();
    m.add_state("B", returns("ok", &["ok"]), [("ok", "A")]).unwrap();
    let codes: Vec<_> = m.validate().iter().map(|i| i.code).collect();
    assert_eq!(codes, [IssueCode::NoPathToOutcome, IssueCode::NoPathToOutcome]);

    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    let issues = m.validate();
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].code, IssueCode::NoInitial);
}

#[test]
fn validate_prefixes_nested_locations() {
    let inner = Arc::new(StateMachine::new("INNER", ["succeeded"]).unwrap());
    inner.add_state("X", returns("ok", &["ok"]), [("ok", "GONE")]).unwrap();
    let outer = StateMachine::new("OUTER", ["succeeded"]).unwrap();
    outer
        .add_state("WRAP", StateHandle::machine(inner), [("succeeded", "succeeded")])
        .unwrap();
    let issues = outer.validate();
    assert_eq!(issues.len(), 1, "{issues:?}");
    assert_eq!(issues[0].location(), "WRAP/X:ok");
    assert_eq!(issues[0].code, IssueCode::UnknownTarget);
}

#[test]
fn single_step_machine() {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("done", &["done"]), [("done", "succeeded")]).unwrap();
    let out = m.execute(&Blackboard::new(), &CancelToken::new()).unwrap();
    assert_eq!(out, "succeeded");
    assert_eq!(m.status(), ExecutionStatus::Finished(Outcome::from_static("succeeded")));
}

#[test]
fn chain_visits_in_order() {
    let m = chain();
    let mut rec = VisitRecorder::default();
    let out = m
        .execute_observed(&Blackboard::new(), &CancelToken::new(), &mut rec)
        .unwrap();
    assert_eq!(out, "succeeded");
    assert_eq!(rec.visits, ["A", "B"]);
}

#[test]
fn execute_refuses_invalid_machine() {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    m.add_state("A", returns("ok", &["ok"]), [("ok", "NEXXT")]).unwrap();
    match m.execute(&Blackboard::new(), &CancelToken::new()) {
        Err(FsmError::ValidationFailed(issues)) => assert_eq!(issues.len(), 1),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(m.status(), ExecutionStatus::Idle);
}

#[test]
fn contract_violation_surfaces_and_resets_status() {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    let liar = callback_state(outcome_set(["done"]).unwrap(), |_| Outcome::from_static("oops")).unwrap();
    m.add_state("A", liar, [("done", "succeeded")]).unwrap();
    match m.execute(&Blackboard::new(), &CancelToken::new()) {
        Err(FsmError::StateContractViolation { path, outcome }) => {
            assert_eq!(path, ["A"]);
            assert_eq!(outcome, "oops");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(m.status(), ExecutionStatus::Idle);
}

#[test]
fn unmapped_canceled_routes_to_machine_outcome() {
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    let quitter = StateHandle::new(outcome_set(["done"]).unwrap(), |_: &Blackboard, _: &CancelToken| Outcome::canceled()).unwrap();
    m.add_state("A", quitter, [("done", "succeeded")]).unwrap();
    let out = m.execute(&Blackboard::new(), &CancelToken::new()).unwrap();
    assert!(out.is_canceled());
    assert_eq!(m.status(), ExecutionStatus::Canceled);
}

#[test]
fn mapped_canceled_follows_the_map() {
    let m = StateMachine::new("M", ["succeeded", "aborted"]).unwrap();
    let quitter = StateHandle::new(outcome_set(["done"]).unwrap(), |_: &Blackboard, _: &CancelToken| Outcome::canceled()).unwrap();
    m.add_state("A", quitter, [("done", "succeeded"), ("canceled", "aborted")]).unwrap();
    assert_eq!(m.execute(&Blackboard::new(), &CancelToken::new()).unwrap(), "aborted");
}

#[test]
fn wait_state_canceled_mid_wait() {
    let m = Arc::new(StateMachine::new("M", ["succeeded"]).unwrap());
    m.add_state("WAIT", wait_state(10_000, 100).unwrap(), [("done", "succeeded")])
        .unwrap();
    let token = CancelToken::new();
    let t2 = token.clone();
    let canceller = thread::spawn(move || {
        thread::sleep(Duration::from_millis(300));
        t2.cancel();
        Instant::now()
    });
    let out = m.execute(&Blackboard::new(), &token).unwrap();
    let returned = Instant::now();
    let canceled_at = canceller.join().unwrap();
    assert!(out.is_canceled());
    assert!(returned.duration_since(canceled_at) <= Duration::from_millis(250));
}

#[test]
fn pre_set_token_cancels_before_first_state() {
    let runs = Arc::new(AtomicUsize::new(0));
    let r = Arc::clone(&runs);
    let m = StateMachine::new("M", ["succeeded"]).unwrap();
    let body = StateHandle::new(outcome_set(["done"]).unwrap(), move |_: &Blackboard, _: &CancelToken| {
        r.fetch_add(1, Ordering::SeqCst);
        Outcome::from_static("done")
    })
    .unwrap();
    m.add_state("A", body, [("done", "succeeded")]).unwrap();
    let token = CancelToken::new();
    token.cancel();
    assert!(m.execute(&Blackboard::new(), &token).unwrap().is_canceled());
    assert_eq!(runs.load(Ordering::SeqCst), 0);
}

#[test]
fn cancel_is_idempotent_and_shared() {
    let token = CancelToken::new();
    let copies: Vec<_> = (0..4).map(|_| token.clone()).collect();
    assert!(!token.is_canceled());
    token.cancel();
    token.cancel();
    assert!(copies.iter().all(CancelToken::is_canceled));
    let seen = thread::spawn(move || copies[0].is_canceled()).join().unwrap();
    assert!(seen);
}

#[test]
fn nested_state_observes_cancel_on_next_poll() {
    let observations = Arc::new(Mutex::new(Vec::new()));
    let inner = Arc::new(StateMachine::new("INNER", ["succeeded"]).unwrap());
    inner
        .add_state("POLL", polling_state(Duration::from_millis(20), Arc::clone(&observations)), [("done", "succeeded")])
        .unwrap();
    let middle = Arc::new(StateMachine::new("MIDDLE", ["succeeded"]).unwrap());
    middle
        .add_state("IN", StateHandle::machine(inner), [("succeeded", "succeeded")])
        .unwrap();
    let outer = StateMachine::new("OUTER", ["succeeded"]).unwrap();
    outer
        .add_state("MID", StateHandle::machine(middle), [("succeeded", "succeeded")])
        .unwrap();

    let token = CancelToken::new();
    let t2 = token.clone();
    let obs = Arc::clone(&observations);
    let canceller = thread::spawn(move || {
        while obs.lock().len() < 5 {
            thread::sleep(Duration::from_millis(5));
        }
        t2.cancel();
        obs.lock().len()
    });
    let out = outer.execute(&Blackboard::new(), &token).unwrap();
    let polls_before_cancel = canceller.join().unwrap();
    assert!(out.is_canceled());
    assert_eq!(outer.status(), ExecutionStatus::Canceled);

    let seen = observations.lock().clone();
    let first_set = seen.iter().position(|s| *s).expect("cancel never observed");
    assert!(seen[..first_set].iter().all(|s| !s));
    // at most one poll may have been in flight when the flag flipped
    assert!(first_set <= polls_before_cancel + 1, "{first_set} vs {polls_before_cancel}");
    assert_eq!(first_set, seen.len() - 1);
}

#[test]
fn current_path_at_rendezvous() {
    let (outer, inner, rv) = rendezvous_machine();
    assert!(outer.current_path().is_empty());
    let runner = {
        let outer = Arc::clone(&outer);
        thread::spawn(move || outer.execute(&Blackboard::new(), &CancelToken::new()))
    };
    rv.wait_reached();
    assert_eq!(outer.current_path(), ["MOVE", "ROTATE"]);
    assert_eq!(inner.current_path(), ["ROTATE"]);
    assert!(outer.status().is_running());

    assert!(matches!(outer.set_initial("MOVE"), Err(FsmError::MachineRunning)));
    assert!(matches!(
        outer.add_state("LATE", returns("ok", &["ok"]), [("ok", "succeeded")]),
        Err(FsmError::MachineRunning)
    ));
    assert!(matches!(
        outer.execute(&Blackboard::new(), &CancelToken::new()),
        Err(FsmError::MachineRunning)
    ));

    rv.release.send(()).unwrap();
    assert_eq!(runner.join().unwrap().unwrap(), "succeeded");
    assert!(outer.current_path().is_empty());
    assert_eq!(outer.status(), ExecutionStatus::Finished(Outcome::from_static("succeeded")));
}

#[test]
fn current_path_is_never_torn() {
    // Outer alternates between two nested machines; every observed path must
    // be one of the legal shapes.
    let mut legal = BTreeSet::new();
    let outer = Arc::new(StateMachine::new("OUTER", ["succeeded"]).unwrap());
    for (i, name) in ["LEFT", "RIGHT"].iter().enumerate() {
        let inner = Arc::new(StateMachine::new(format!("IN{i}"), ["succeeded"]).unwrap());
        inner
            .add_state("STEP", returns("done", &["done"]), [("done", "SPIN")])
            .unwrap();
        inner
            .add_state("SPIN", wait_state(1, 1).unwrap(), [("done", "succeeded")])
            .unwrap();
        let next = if i == 0 { "RIGHT" } else { "COUNT" };
        outer
            .add_state(*name, StateHandle::machine(inner), [("succeeded", next)])
            .unwrap();
        for leaf in ["STEP", "SPIN"] {
            legal.insert(vec![name.to_string(), leaf.to_string()]);
        }
        legal.insert(vec![name.to_string()]);
    }
    let counter = hsm_core::states::build_primitive(
        &hsm_core::states::PrimitiveSpec::new("counter").param("key", "i").param("limit", 200i64),
    )
    .unwrap();
    outer
        .add_state("COUNT", counter, [("below", "LEFT"), ("reached", "succeeded")])
        .unwrap();
    legal.insert(vec!["COUNT".to_owned()]);

    let runner = {
        let outer = Arc::clone(&outer);
        thread::spawn(move || outer.execute(&Blackboard::new(), &CancelToken::new()).unwrap())
    };
    let mut samples = 0;
    while !runner.is_finished() {
        let path = outer.current_path();
        if !path.is_empty() {
            assert!(legal.contains(&path), "torn path {path:?}");
            samples += 1;
        }
    }
    assert_eq!(runner.join().unwrap(), "succeeded");
    assert!(samples > 0);
}

#[test]
fn status_lifecycle_is_idle_running_final() {
    let (outer, _inner, rv) = rendezvous_machine();
    let history = Arc::new(Mutex::new(vec![outer.status()]));
    let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let sampler = {
        let outer = Arc::clone(&outer);
        let history = Arc::clone(&history);
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                let s = outer.status();
                let mut h = history.lock();
                if h.last() != Some(&s) {
                    h.push(s);
                }
            }
        })
    };
    let runner = {
        let outer = Arc::clone(&outer);
        thread::spawn(move || outer.execute(&Blackboard::new(), &CancelToken::new()))
    };
    rv.wait_reached();
    thread::sleep(Duration::from_millis(20));
    rv.release.send(()).unwrap();
    runner.join().unwrap().unwrap();
    thread::sleep(Duration::from_millis(20));
    stop.store(true, Ordering::SeqCst);
    sampler.join().unwrap();

    let kinds: Vec<&str> = history
        .lock()
        .iter()
        .map(|s| match s {
            ExecutionStatus::Idle => "idle",
            ExecutionStatus::Running(_) => "running",
            ExecutionStatus::Finished(_) => "finished",
            ExecutionStatus::Canceled => "canceled",
        })
        .collect();
    let mut collapsed = kinds.clone();
    collapsed.dedup();
    assert_eq!(collapsed, ["idle", "running", "finished"], "{kinds:?}");
}

#[test]
fn re_execution_repeats_the_visit_sequence() {
    let m = StateMachine::new("M", ["succeeded", "aborted"]).unwrap();
    let registry = hsm_core::states::PrimitiveRegistry::standard();
    let spec = |name: &str| hsm_core::states::PrimitiveSpec::new(name);
    m.add_state(
        "COUNT",
        registry.build(&spec("counter").param("key", "i").param("limit", 3i64)).unwrap(),
        [("below", "COUNT"), ("reached", "FLAKY")],
    )
    .unwrap();
    m.add_state(
        "FLAKY",
        registry.build(&spec("fail_n_times").param("key", "f").param("n", 2i64)).unwrap(),
        [("failed", "FLAKY"), ("succeeded", "succeeded")],
    )
    .unwrap();

    let run = || {
        let mut rec = VisitRecorder::default();
        let out = m.execute_observed(&Blackboard::new(), &CancelToken::new(), &mut rec).unwrap();
        (out, rec.visits)
    };
    let first = run();
    assert_eq!(first.1, ["COUNT", "COUNT", "COUNT", "FLAKY", "FLAKY", "FLAKY"]);
    assert_eq!(run(), first);
}
