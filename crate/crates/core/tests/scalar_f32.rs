use gossipgd::algorithm::{initial_states, run, AlgorithmParams};
use gossipgd::analysis::fit_rate;
use gossipgd::localization::five_agent_gossip_pair_as;
use gossipgd::netsim::{run_netsim, NetsimOptions};
use gossipgd::objective::{params_from_one_point_convexity, seeded_quadratic_problem, StrongSmoothParams};
use gossipgd::{GossipMatrix32, GossipSchedule, Problem32, RunTrace32};

#[test]
fn single_precision_run_converges() {
    let sp = StrongSmoothParams::new(1.0_f32, 3.0).unwrap();
    let problem: Problem32 = seeded_quadratic_problem(5, 3, &sp, 1).unwrap();
    let (a, b): (GossipMatrix32, GossipMatrix32) = five_agent_gossip_pair_as();
    let schedule = GossipSchedule::seeded_random(vec![a, b], 5).unwrap();
    let cp = params_from_one_point_convexity(&sp);
    let params = AlgorithmParams::from_contraction(&cp, schedule.max_gap()).unwrap();
    assert_eq!(params.m, 6);
    let init = initial_states((0..5).map(|i| vec![i as f32, -1.0, 2.0]).collect());
    let trace: RunTrace32 = run(&problem, &schedule, &params, init.clone(), 25).unwrap();
    let xstar = problem.optimizer().unwrap();
    let errs = trace.max_errors(xstar);
    assert!(errs[25] < 1e-4 * errs[0], "{errs:?}");
    assert!(fit_rate(&errs[..18], 0.5).unwrap() <= 0.52);

    let net = run_netsim(&problem, &schedule, &params, init, 25, &NetsimOptions::default()).unwrap();
    assert!(net.trace.max_abs_difference(&trace).unwrap() <= 1e-5);
}
