use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use trajbench::engine::{
    generate_synthetic, run_parallel, run_serial, EngineOptions, OutputFormat, StrategyConfig, SyntheticSpec,
};
use trajbench::model::Strategy;
use trajbench::trjio::seq::{index_path, seq_load_index};
use trajbench::trjio::split_trajectory;
use trajbench::trjio::topology::topology_path;
use trajbench::Error;

fn engine() -> EngineOptions {
    let mut e = EngineOptions::new(env!("CARGO_BIN_EXE_trajbench"));
    e.timeout = Duration::from_secs(60);
    e
}

fn trajectory(dir: &Path, frames: usize) -> (PathBuf, PathBuf) {
    let spec = SyntheticSpec::new(frames, 60, 21);
    let path = dir.join("traj.seq");
    generate_synthetic(&spec, &path, OutputFormat::Seq, 1000.0).unwrap();
    (path.clone(), topology_path(&path))
}

#[test]
fn shared_file_matches_serial_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (traj, top) = trajectory(dir.path(), 23);
    let base = StrategyConfig::new(Strategy::SharedSeq, vec![traj], Some(top));
    let serial = run_serial(&base).unwrap();
    for n in [1, 2, 5, 23] {
        let out = run_parallel(&base.clone().with_workers(n), &engine()).unwrap();
        assert_eq!(out.rmsd, serial.rmsd, "N={n}");
        assert_eq!(out.times, serial.times);
        assert_eq!(out.timings.len(), n);
        for (rank, t) in out.timings.iter().enumerate() {
            assert_eq!(t.rank, rank);
            t.check_identities().unwrap();
        }
    }
}

#[test]
fn more_workers_than_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (traj, top) = trajectory(dir.path(), 3);
    let config = StrategyConfig::new(Strategy::SharedSeq, vec![traj], Some(top)).with_workers(5);
    let out = run_parallel(&config, &engine()).unwrap();
    assert_eq!(out.rmsd.len(), 3);
    assert_eq!(out.timings.len(), 5);
    assert_eq!(out.timings[4].n_frames_processed, 0);
}

#[test]
fn subfile_rejects_mismatched_segments() {
    let dir = tempfile::tempdir().unwrap();
    let (traj, top) = trajectory(dir.path(), 10);
    let split = split_trajectory(&traj, 3, dir.path()).unwrap();
    // Segments hold 4/3/3 frames; swapping the first two misaligns them with
    // the rank blocks.
    let mut segments = split.segments.clone();
    segments.swap(0, 1);
    let config = StrategyConfig::new(Strategy::Subfile, segments, Some(top)).with_workers(3);
    assert!(run_parallel(&config, &engine()).is_err());
}

#[test]
fn corrupt_frame_fails_with_rank_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let (traj, top) = trajectory(dir.path(), 20);
    let config = StrategyConfig::new(Strategy::SharedSeq, vec![traj.clone()], Some(top)).with_workers(4);
    run_parallel(&config, &engine()).unwrap();

    // Break the magic of frame 12 in place, keeping size and mtime so the
    // index stays valid; rank 2 owns frames 10..15.
    let index = seq_load_index(&traj).unwrap().unwrap();
    let mtime = fs::metadata(&traj).unwrap().modified().unwrap();
    let mut bytes = fs::read(&traj).unwrap();
    bytes[index.offsets[12] as usize] ^= 0xff;
    fs::write(&traj, &bytes).unwrap();
    fs::OpenOptions::new().write(true).open(&traj).unwrap().set_modified(mtime).unwrap();
    assert!(index_path(&traj).exists());

    match run_parallel(&config, &engine()) {
        Err(Error::Worker { rank, cause }) => {
            assert_eq!(rank, 2);
            assert!(cause.contains("frame 12"), "{cause}");
        }
        other => panic!("expected a worker failure, got {other:?}"),
    }
}

#[cfg(unix)]
#[test]
fn hung_worker_times_out() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let (traj, top) = trajectory(dir.path(), 4);
    let script = dir.path().join("sleepy.sh");
    fs::write(&script, "#!/bin/sh\nsleep 30\n").unwrap();
    fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();
    let mut options = EngineOptions::new(&script);
    options.timeout = Duration::from_millis(500);
    let config = StrategyConfig::new(Strategy::SharedSeq, vec![traj], Some(top)).with_workers(2);
    let started = std::time::Instant::now();
    assert!(matches!(run_parallel(&config, &options), Err(Error::Timeout(_))));
    assert!(started.elapsed() < Duration::from_secs(20));
}

#[test]
fn missing_worker_executable() {
    let dir = tempfile::tempdir().unwrap();
    let (traj, top) = trajectory(dir.path(), 4);
    let config = StrategyConfig::new(Strategy::SharedSeq, vec![traj], Some(top)).with_workers(2);
    let options = EngineOptions::new(dir.path().join("no-such-binary"));
    assert!(run_parallel(&config, &options).is_err());
}
