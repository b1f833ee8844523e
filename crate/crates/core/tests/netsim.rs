mod common;

use common::{corpus, pair_schedule_random, quadratic_case};
use gossipgd::algorithm::{centralized_gd, initial_states, run};
use gossipgd::netsim::{locality_audit, run_netsim, NetsimOptions, Tamper};
use gossipgd::{Error, GossipMatrix64, GossipSchedule};

#[test]
fn message_passing_matches_vectorised_path() {
    for case in corpus() {
        let vec_trace = run(&case.problem, &case.schedule, &case.params, case.initial.clone(), case.iters).unwrap();
        let net = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), case.iters, &NetsimOptions::default())
            .unwrap();
        let diff = net.trace.max_abs_difference(&vec_trace).unwrap();
        assert!(diff <= 1e-12, "{}: {diff}", case.name);
        assert_eq!(net.trace.gradient_evals, vec_trace.gradient_evals);
        assert_eq!(net.trace.row_communications, vec_trace.row_communications);

        let audit = locality_audit(&net.ledger, &case.schedule, case.params.m);
        assert!(audit.passed(), "{}", case.name);

        // m · nnz messages per iteration, nnz taken from the matrix of each round
        let m = case.params.m;
        let expected: usize = (0..case.iters)
            .flat_map(|k| (1..=m).map(move |l| (k, l)))
            .map(|(k, l)| case.schedule.matrix_at(k, l, m).off_diagonal_nnz())
            .sum();
        assert_eq!(net.trace.messages, expected, "{}", case.name);
        assert_eq!(audit.deliveries, expected);
    }
}

#[test]
fn message_counts_on_fixed_graphs() {
    let (a, _) = gossipgd::localization::five_agent_gossip_pair_as::<f64>();
    assert_eq!(a.off_diagonal_nnz(), 12);
    let case = quadratic_case("first-only", 5, 3, 1.0, 3.0, GossipSchedule::constant(a).unwrap(), 2, 10);
    let net = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 10, &NetsimOptions::default())
        .unwrap();
    assert_eq!(net.trace.messages, 10 * case.params.m * 12);

    let complete = quadratic_case("complete", 6, 2, 1.0, 3.0, GossipSchedule::constant(GossipMatrix64::complete(6).unwrap()).unwrap(), 3, 7);
    let net = run_netsim(&complete.problem, &complete.schedule, &complete.params, complete.initial.clone(), 7, &NetsimOptions::default())
        .unwrap();
    assert_eq!(net.trace.messages, 7 * complete.params.m * 6 * 5);
}

#[test]
fn single_agent_sends_nothing() {
    let case = quadratic_case("single", 1, 2, 1.0, 3.0, GossipSchedule::constant(GossipMatrix64::identity(1).unwrap()).unwrap(), 5, 50);
    let x0 = case.initial[0].x.clone();
    let net = run_netsim(&case.problem, &case.schedule, &case.params, initial_states(vec![x0.clone()]), 50, &NetsimOptions::default())
        .unwrap();
    assert_eq!(net.trace.messages, 0);
    assert!(net.ledger.deliveries.is_empty());
    let gd = centralized_gd(&case.problem, case.params.alpha, x0, 50).unwrap();
    for (k, s) in net.trace.states.iter().enumerate() {
        for (a, b) in s[0].x.iter().zip(&gd[k]) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn agent_order_does_not_change_the_trace() {
    let case = quadratic_case("order", 5, 3, 1.0, 5.0, pair_schedule_random(8), 8, 40);
    let base = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 40, &NetsimOptions::default())
        .unwrap();
    for order in [vec![4, 3, 2, 1, 0], vec![2, 0, 4, 1, 3]] {
        let opts = NetsimOptions { agent_order: Some(order), tamper: None };
        let other = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 40, &opts).unwrap();
        assert_eq!(other.trace, base.trace);
    }
    let bad = NetsimOptions { agent_order: Some(vec![0, 0, 1, 2, 3]), tamper: None };
    assert!(matches!(
        run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 1, &bad),
        Err(Error::Config(_))
    ));
}

#[test]
fn wrong_row_breaks_equivalence_and_audit() {
    let case = quadratic_case("tamper", 5, 3, 1.0, 3.0, pair_schedule_random(0), 0, 20);
    let reference = run(&case.problem, &case.schedule, &case.params, case.initial.clone(), 20).unwrap();
    // row 3 draws only on agents 0 and 4, both of which message agent 4
    let opts = NetsimOptions { agent_order: None, tamper: Some(Tamper::WrongRow { agent: 4, row_index: 3 }) };
    let net = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 20, &opts).unwrap();
    assert!(net.trace.max_abs_difference(&reference).unwrap() > 1e-6);
    let audit = locality_audit(&net.ledger, &case.schedule, case.params.m);
    assert!(!audit.passed());
    assert!(!audit.foreign_row_reads.is_empty());
    assert!(audit.foreign_row_reads.iter().all(|r| r.agent == 4 && r.row_index == 3));
}

#[test]
fn wrong_row_needing_absent_neighbour_is_a_locality_error() {
    let case = quadratic_case("tamper", 5, 3, 1.0, 3.0, pair_schedule_random(0), 0, 3);
    // row 1 needs agent 3, which never messages agent 0
    let opts = NetsimOptions { agent_order: None, tamper: Some(Tamper::WrongRow { agent: 0, row_index: 1 }) };
    let r = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 3, &opts);
    assert!(matches!(r, Err(Error::Locality(_))));
}

#[test]
fn extra_delivery_fails_the_audit() {
    let case = quadratic_case("extra", 5, 3, 1.0, 3.0, pair_schedule_random(0), 0, 5);
    // agent 3 never sends to agent 0 in either matrix
    let opts = NetsimOptions {
        agent_order: None,
        tamper: Some(Tamper::ExtraDelivery { iteration: 1, round: 2, sender: 3, receiver: 0 }),
    };
    let net = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 5, &opts).unwrap();
    let audit = locality_audit(&net.ledger, &case.schedule, case.params.m);
    assert!(!audit.passed());
    assert_eq!(audit.zero_weight_deliveries.len(), 1);
    assert!(audit.foreign_row_reads.is_empty());
}

#[test]
fn dropped_delivery_stalls_the_barrier() {
    let case = quadratic_case("drop", 5, 3, 1.0, 3.0, pair_schedule_random(0), 0, 5);
    // agent 0 sends to agent 4 under both matrices
    let opts = NetsimOptions {
        agent_order: None,
        tamper: Some(Tamper::DropDelivery { iteration: 2, round: 1, sender: 0, receiver: 4 }),
    };
    let r = run_netsim(&case.problem, &case.schedule, &case.params, case.initial.clone(), 5, &opts);
    assert!(matches!(r, Err(Error::Protocol(_))));
}
