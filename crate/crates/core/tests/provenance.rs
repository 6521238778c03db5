use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use behavio_core::provenance::*;
use chrono::{DateTime, Duration, FixedOffset, NaiveDate, TimeZone};
use proptest::prelude::*;

fn at(y: i32, m: u32, d: u32) -> DateTime<FixedOffset> {
    FixedOffset::east_opt(-5 * 3600)
        .unwrap()
        .with_ymd_and_hms(y, m, d, 9, 0, 0)
        .unwrap()
}

fn produce(dir: &Path, input_bytes: &[u8], when: DateTime<FixedOffset>) -> (std::path::PathBuf, String) {
    let input = dir.join("video.mp4");
    fs::write(&input, input_bytes).unwrap();
    let out = dir.join("rects.csv");
    fs::write(&out, "x").unwrap();
    let hash = hash_input(&input).unwrap();
    let meta = SidecarMetadata::new("test", "run", input.to_str().unwrap(), &hash, dir.to_str().unwrap(), when);
    write_sidecar(&meta, &out).unwrap();
    (out, hash)
}

#[test]
fn reuse_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let made = at(2025, 1, 1);
    let (out, hash) = produce(dir.path(), b"frames", made);
    let six_months = RetentionPeriod::default();

    let d = should_reuse(&out, &six_months, &hash, made + Duration::days(1));
    assert_eq!((d.reuse, d.reason.clone()), (true, ReuseReason::Fresh));

    let d = should_reuse(&out, &six_months, &hash, made + Duration::days(200));
    assert!(!d.reuse);
    assert_eq!(d.reason.to_string(), "retention expired");

    let d = should_reuse(&out, &six_months, &hash_bytes(b"other"), made + Duration::days(1));
    assert_eq!(d.reason.to_string(), "input changed");

    let d = should_reuse(&dir.path().join("nope.csv"), &six_months, &hash, made);
    assert_eq!(d.reason, ReuseReason::OutputMissing);

    // exactly at the boundary still counts as fresh
    let d = should_reuse(&out, &six_months, &hash, made + Duration::seconds(15_552_000));
    assert!(d.reuse);

    fs::write(sidecar_path(&out).unwrap(), "{ not json").unwrap();
    let d = should_reuse(&out, &six_months, &hash, made);
    assert!(matches!(d.reason, ReuseReason::SidecarUnreadable(_)));

    fs::remove_file(sidecar_path(&out).unwrap()).unwrap();
    let d = should_reuse(&out, &six_months, &hash, made);
    assert_eq!(d.reason, ReuseReason::SidecarMissing);
}

#[test]
fn reuse_across_time_zones() {
    let dir = tempfile::tempdir().unwrap();
    let made = at(2025, 3, 1);
    let (out, hash) = produce(dir.path(), b"frames", made);
    let three_minutes = parse_retention("3 minutes").unwrap();
    let utc_now = (made + Duration::minutes(2)).with_timezone(&FixedOffset::east_opt(0).unwrap());
    assert!(should_reuse(&out, &three_minutes, &hash, utc_now).reuse);
    let later = (made + Duration::minutes(4)).with_timezone(&FixedOffset::east_opt(3600).unwrap());
    assert!(!should_reuse(&out, &three_minutes, &hash, later).reuse);
}

#[test]
fn crash_before_rename_keeps_previous_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = produce(dir.path(), b"frames", at(2025, 1, 1));
    let before = fs::read(sidecar_path(&out).unwrap()).unwrap();
    let mut meta = read_sidecar(&out).unwrap();
    meta.cmd = "a different command".into();
    let err = write_sidecar_with(&meta, &out, |_| Err(io::Error::other("killed"))).unwrap_err();
    assert!(err.to_string().contains("killed"));
    assert_eq!(fs::read(sidecar_path(&out).unwrap()).unwrap(), before);
    assert_eq!(read_sidecar(&out).unwrap().cmd, "run");
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.starts_with(".tmp")), "{names:?}");
}

#[test]
fn hashes_depend_on_content_only() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c, e) = (
        dir.path().join("a.bin"),
        dir.path().join("b.bin"),
        dir.path().join("c.bin"),
        dir.path().join("e.bin"),
    );
    let bytes: Vec<u8> = (0..100_000u32).map(|i| (i * 31 % 251) as u8).collect();
    fs::write(&a, &bytes).unwrap();
    fs::write(&b, &bytes).unwrap();
    let mut flipped = bytes.clone();
    flipped[5_000] ^= 1;
    fs::write(&c, &flipped).unwrap();
    fs::write(&e, b"").unwrap();
    assert_eq!(hash_input(&a).unwrap(), hash_input(&b).unwrap());
    assert_ne!(hash_input(&a).unwrap(), hash_input(&c).unwrap());
    assert_eq!(hash_input(&a).unwrap(), hash_bytes(&bytes));
    assert_eq!(
        hash_input(&e).unwrap(),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
    let missing = hash_input(&dir.path().join("missing")).unwrap_err();
    assert!(missing.to_string().contains("missing"));
}

fn spec(dir: &Path, template: &str) -> BackendSpec {
    let input = dir.join("in put.txt");
    fs::write(&input, "payload").unwrap();
    let out_dir = dir.join("out");
    fs::create_dir_all(&out_dir).unwrap();
    let output = out_dir.join("copy.txt");
    let bindings: BTreeMap<String, String> = [
        ("input".to_string(), input.display().to_string()),
        ("output".to_string(), output.display().to_string()),
    ]
    .into();
    BackendSpec {
        backend: "copier".into(),
        template: CommandTemplate::parse(template).unwrap(),
        bindings,
        input,
        output_dir: out_dir,
        outputs: vec![output],
        extra: [("fast".to_string(), serde_json::Value::Bool(false))].into(),
    }
}

#[test]
fn dry_run_matches_recorded_command_and_cache_skips_spawn() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), "cp {input} {output}");
    let runner = Runner::default();
    let dry = runner.run(&s, true).unwrap();
    assert_eq!(dry.status, RunStatus::DryRun);
    assert_eq!(runner.spawn_count(), 0);

    let real = runner.run(&s, false).unwrap();
    assert_eq!(real.status, RunStatus::Executed);
    assert_eq!(runner.spawn_count(), 1);
    assert_eq!(fs::read_to_string(&s.outputs[0]).unwrap(), "payload");
    let meta = read_sidecar(&s.outputs[0]).unwrap();
    assert_eq!(meta.cmd.as_bytes(), dry.cmd.as_bytes());
    assert_eq!(meta.backend, "copier");
    assert_eq!(meta.extra["fast"], serde_json::Value::Bool(false));
    assert!(Path::new(&meta.input).is_absolute());

    let again = runner.run(&s, false).unwrap();
    assert_eq!(again.status, RunStatus::Reused);
    assert_eq!(runner.spawn_count(), 1);

    fs::write(&s.input, "edited").unwrap();
    assert_eq!(runner.run(&s, false).unwrap().status, RunStatus::Executed);
    assert_eq!(runner.spawn_count(), 2);
}

#[test]
fn expired_cache_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), "cp {input} {output}");
    let made = at(2025, 1, 1);
    Runner::with_clock(RetentionPeriod::default(), Box::new(FixedClock(made)))
        .run(&s, false)
        .unwrap();
    let later = Runner::with_clock(parse_retention("7 seconds").unwrap(), Box::new(FixedClock(made + Duration::seconds(8))));
    assert_eq!(later.run(&s, false).unwrap().status, RunStatus::Executed);
    let soon = Runner::with_clock(parse_retention("7 seconds").unwrap(), Box::new(FixedClock(made + Duration::seconds(10))));
    assert_eq!(soon.run(&s, false).unwrap().status, RunStatus::Reused);
    assert_eq!(soon.spawn_count(), 0);
}

#[test]
fn unbound_placeholder_fails_before_spawn() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), "tool {input} --cfg {config}");
    let runner = Runner::default();
    assert!(matches!(runner.run(&s, false), Err(ProvenanceError::Unbound(_))));
    assert_eq!(runner.spawn_count(), 0);
}

#[test]
fn failing_backend_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), "echo broken >&2; exit 3");
    let err = Runner::default().run(&s, false).unwrap_err();
    match err {
        ProvenanceError::BackendFailed { stderr, status, .. } => {
            assert!(stderr.contains("broken"));
            assert!(status.contains('3'));
        }
        other => panic!("{other:?}"),
    }
    assert!(!sidecar_path(&s.outputs[0]).unwrap().exists());

    let s = spec(dir.path(), "true");
    assert!(matches!(Runner::default().run(&s, false), Err(ProvenanceError::MissingOutput(_))));
}

#[test]
fn runtime_prefix_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), "{runtime} {input}");
    std::env::set_var(RUNTIME_ENV, "docker run --rm img");
    let cmd = Runner::default().materialize(&s).unwrap();
    std::env::remove_var(RUNTIME_ENV);
    assert_eq!(cmd, format!("docker run --rm img '{}'", s.input.display()));
}

fn text() -> impl Strategy<Value = String> {
    "[ -~]{0,40}"
}

proptest! {
    #[test]
    fn sidecar_round_trip(
        backend in text(), cmd in text(), input in text(), output in text(),
        hash in "[0-9a-f]{64}",
        secs in 0i64..4_000_000_000,
        offset_min in -720i32..840,
        extras in prop::collection::btree_map("[a-z]{1,8}", (any::<i32>(), text()), 0..5),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o.csv");
        let offset = FixedOffset::east_opt(offset_min * 60).unwrap();
        let naive = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap() + Duration::seconds(secs);
        let when = offset.from_local_datetime(&naive).unwrap();
        let mut meta = SidecarMetadata::new(&backend, &cmd, &input, &hash, &output, when);
        for (k, (n, s)) in extras {
            let key = format!("x_{k}");
            let value = if n % 2 == 0 { serde_json::json!(n) } else { serde_json::json!(s) };
            meta.extra.insert(key, value);
        }
        write_sidecar(&meta, &out).unwrap();
        let back = read_sidecar(&out).unwrap();
        prop_assert_eq!(&back, &meta);
        prop_assert_eq!(back.created_at(FixedOffset::east_opt(0).unwrap()), when);
    }

    #[test]
    fn retention_phrases_round_trip(n in 0u64..10_000, unit in 0usize..7) {
        let units = ["second", "minute", "hour", "day", "week", "month", "year"];
        let phrase = if n == 1 { format!("1 {}", units[unit]) } else { format!("{n} {}s", units[unit]) };
        let parsed = parse_retention(&phrase).unwrap();
        let canonical = format_retention(parsed.seconds());
        prop_assert_eq!(parse_retention(&canonical).unwrap().seconds(), parsed.seconds());
        prop_assert_eq!(format_retention(parse_retention(&canonical).unwrap().seconds()), canonical);
    }
}
