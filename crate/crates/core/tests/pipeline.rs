use std::path::Path;

use proptest::prelude::*;
use tetracomm::partition::{pad_dimension, TetraPartition, VectorLayout};
use tetracomm::report::render_checks;
use tetracomm::schedule::{alltoall_cost, build_demands, build_schedule, validate};
use tetracomm::simulator::{compute_report, simulate_with, verify_run, Mode};
use tetracomm::tensor::{random_vector, read_vector, sttsv_symmetric, write_vector};
use tetracomm::{Exec, PackedSymTensor, SteinerSystem};

fn fixture(name: &str) -> SteinerSystem {
    SteinerSystem::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)).unwrap()
}

#[test]
fn fixture_10_4_3_runs_like_the_construction() {
    let part = TetraPartition::build(&fixture("steiner_10_4_3.txt")).unwrap();
    let layout = VectorLayout::new(120, &part).unwrap();
    let a = PackedSymTensor::random(120, 3);
    let x = random_vector(120, 4);
    let verdict = verify_run(&a, &x, &part, &layout, Mode::P2p, Exec::default());
    assert!(verdict.passed(), "{}", render_checks(&verdict.checks));
    let report = verdict.report.unwrap();
    assert_eq!(report.steps, 52);
    assert!(report.processors.iter().all(|c| c.words_sent == 88));
}

#[test]
fn design_8_4_3_end_to_end() {
    let part = TetraPartition::build(&fixture("steiner_8_4_3.txt")).unwrap();
    assert_eq!(part.q, None);
    // Every point lies in 7 blocks, so n must be a multiple of 8·7.
    assert_eq!(pad_dimension(50, &part).unwrap(), 56);
    let layout = VectorLayout::new(56, &part).unwrap();
    let a = PackedSymTensor::random(56, 8);
    let x = random_vector(56, 9);
    for mode in [Mode::P2p, Mode::AllToAll] {
        let verdict = verify_run(&a, &x, &part, &layout, mode, Exec::default());
        assert!(verdict.passed(), "{}", render_checks(&verdict.checks));
    }
    let pred = compute_report(&part, &layout);
    // Each of the 4 rows is shared with 6 others at one word per chunk.
    assert!(pred.processors.iter().all(|p| p.p2p_per_vector == 24));
    assert_eq!(alltoall_cost(&part, layout.chunk).per_vector, 2 * 13);
}

#[test]
fn inputs_survive_files() {
    let dir = tempfile::tempdir().unwrap();
    let part = TetraPartition::build(&SteinerSystem::construct_spherical(2).unwrap()).unwrap();
    let layout = VectorLayout::new(30, &part).unwrap();

    let design = dir.path().join("d.txt");
    SteinerSystem::construct_spherical(2).unwrap().save(&design).unwrap();
    assert_eq!(TetraPartition::build(&SteinerSystem::load(&design).unwrap()).unwrap(), part);

    let tpath = dir.path().join("a.pst");
    let vpath = dir.path().join("x.vec");
    let a = PackedSymTensor::random(30, 1);
    let x = random_vector(30, 2);
    a.save(&tpath).unwrap();
    write_vector(&x, std::fs::File::create(&vpath).unwrap()).unwrap();
    let a2 = PackedSymTensor::load(&tpath).unwrap();
    let x2 = read_vector(std::fs::File::open(&vpath).unwrap()).unwrap();
    let r1 = simulate_with(&a, &x, &part, &layout, Mode::P2p, Exec::Sequential, None).unwrap();
    let r2 = simulate_with(&a2, &x2, &part, &layout, Mode::P2p, Exec::Sequential, None).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn q4_schedule_and_volume() {
    let part = TetraPartition::build(&SteinerSystem::construct_spherical(4).unwrap()).unwrap();
    assert_eq!(part.processors(), 68);
    let demands = build_demands(&part);
    let sched = build_schedule(&demands, part.processors()).unwrap();
    assert_eq!(sched.step_count(), 55);
    // n = 17·20: b = 20, |Q_i| = 20, chunk = 1.
    let layout = VectorLayout::new(340, &part).unwrap();
    let report = validate(&sched, &demands, layout.chunk);
    assert!(report.passed());
    // 340·5/17 − 340/68 = 95
    assert!(report.send_volume.iter().all(|&v| v == 95));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulation_matches_kernel(q in prop::sample::select(vec![2u64, 3]), mult in 1usize..3, seed in any::<u64>()) {
        let part = TetraPartition::build(&SteinerSystem::construct_spherical(q).unwrap()).unwrap();
        let unit = pad_dimension(1, &part).unwrap();
        let n = unit * mult;
        let layout = VectorLayout::new(n, &part).unwrap();
        let a = PackedSymTensor::random(n, seed);
        let x = random_vector(n, seed ^ 0x5eed);
        let want = sttsv_symmetric(&a, &x).unwrap();
        for mode in [Mode::P2p, Mode::AllToAll] {
            let report = simulate_with(&a, &x, &part, &layout, mode, Exec::default(), None).unwrap();
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = report.y.iter().zip(&want).fold(0.0f64, |m, (y, w)| m.max((y - w).abs()));
            prop_assert!(err <= 1e-12 * scale);
            prop_assert_eq!(report.total_sent, report.total_received);
        }
    }
}
