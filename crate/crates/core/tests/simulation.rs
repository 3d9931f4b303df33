use synccount::sim::{detect_stabilization, run, Adversary, AdversaryKind, FaultSet};
use synccount::{base_plan, realize, trivial_counter};

#[test]
fn trace_csv_masks_faulty_nodes() {
    let alg = realize(&base_plan(1, 3).unwrap()).unwrap();
    let faults = FaultSet::new(4, [1]);
    let trace = run(&alg, &faults, &mut Adversary::new(AdversaryKind::Random, 3), &[0, 0, 0, 0], 5, 3).unwrap();
    let mut csv = Vec::new();
    trace.write_csv(&alg, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "round,node,output,state_rank,is_faulty");
    assert_eq!(lines.len(), 1 + 5 * 4);
    assert_eq!(lines[2], "0,1,*,*,true");
    assert!(lines[1].ends_with(",false"));
}

#[test]
fn fault_free_base_counter_from_zero_state() {
    let alg = realize(&base_plan(1, 3).unwrap()).unwrap();
    let horizon = alg.stabilization_bound() as usize + 10;
    let trace = run(&alg, &FaultSet::none(4), &mut Adversary::new(AdversaryKind::Crash, 0), &[0; 4], horizon, 0).unwrap();
    let report = detect_stabilization(&trace, 3);
    assert!(report.within_bound, "{report}");
}

#[test]
fn fault_set_enumeration() {
    let sets = FaultSet::all_up_to(4, 1);
    assert_eq!(sets.len(), 5);
    assert_eq!(sets[0].to_string(), "{}");
    assert_eq!(sets[4].to_string(), "{3}");
    assert_eq!(FaultSet::all_up_to(12, 3).len(), 1 + 12 + 66 + 220);
}

#[test]
fn run_rejects_bad_inputs() {
    let alg = trivial_counter(5).unwrap();
    let mut adv = Adversary::new(AdversaryKind::Crash, 0);
    assert!(run(&alg, &FaultSet::none(1), &mut adv, &[7], 3, 0).is_err());
    assert!(run(&alg, &FaultSet::none(1), &mut adv, &[1, 2], 3, 0).is_err());
    assert!(run(&alg, &FaultSet::none(1), &mut adv, &[1], 0, 0).is_err());
}

#[test]
fn adversaries_never_break_a_stabilised_base_counter() {
    let alg = realize(&base_plan(1, 3).unwrap()).unwrap();
    let horizon = alg.stabilization_bound() as usize + 200;
    for kind in AdversaryKind::CATALOG {
        for faulty in 0..4 {
            let mut adv = Adversary::new(kind, faulty as u64);
            let trace = run(&alg, &FaultSet::new(4, [faulty]), &mut adv, &[1, 2, 3, 4], horizon, 9).unwrap();
            let report = detect_stabilization(&trace, 3);
            assert!(report.within_bound, "{kind} with node {faulty} faulty: {report}");
        }
    }
}
