//! Fixture tracks and a wrapper around the built binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use behavio_core::ingest::write_track;
use behavio_core::model::{
    ExpressionTrack, LandmarkTrack, MirrorTemplate, PoseTrack, RectTrack, Signal,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FPS: f64 = 30.0;
pub const NOW: &str = "2025-06-01T12:00:00+02:00";

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn lines(&self, verb: &str) -> usize {
        self.stdout.lines().filter(|l| l.starts_with(verb)).count()
    }
}

pub fn behavio_at(cwd: &Path, now: &str, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_behavio"))
        .args(args)
        .current_dir(cwd)
        .env("BEHAVIO_NOW", now)
        .env_remove("BEHAVIO_RUNTIME")
        .output()
        .expect("spawn behavio");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn behavio(cwd: &Path, args: &[&str]) -> Run {
    behavio_at(cwd, NOW, args)
}

fn save(dir: &Path, name: &str, s: &Signal) -> PathBuf {
    let path = dir.join(name);
    write_track(s, &path).unwrap();
    path
}

/// Slow head turns, nods and drifts, in radians and millimetres.
pub fn pose(frames: usize, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..6)
        .map(|c| {
            let amp = if c < 3 { 0.2 } else { 15.0 };
            (rng.gen_range(0.1..0.8), rng.gen_range(0.0..6.0), amp)
        })
        .collect();
    let rows: Vec<[f64; 6]> = (0..frames)
        .map(|f| {
            let t = f as f64 / FPS;
            std::array::from_fn(|c| {
                let (hz, ph, amp) = waves[c];
                amp * (std::f64::consts::TAU * hz * t + ph).sin() + if c == 5 { 600.0 } else { 0.0 }
            })
        })
        .collect();
    PoseTrack::from_rows(&rows, FPS).unwrap().signal().clone()
}

/// Sparse positive bursts on top of a slow drift, one column per coefficient.
pub fn expressions(frames: usize, coefficients: usize, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::zeros((frames, coefficients));
    for c in 0..coefficients {
        let drift = rng.gen_range(0.05..0.2);
        for f in 0..frames {
            data[[f, c]] = drift * (f as f64 / frames as f64 * 3.0).sin();
        }
        for _ in 0..frames / 60 {
            let centre = rng.gen_range(0..frames) as f64;
            let (amp, width) = (rng.gen_range(0.5..2.0), rng.gen_range(2.0..8.0));
            for f in 0..frames {
                data[[f, c]] += amp * (-((f as f64 - centre) / width).powi(2)).exp();
            }
        }
    }
    ExpressionTrack::from_matrix(data, FPS).unwrap().signal().clone()
}

/// A 51-point face, mirror-symmetric about x = 0, with a smile that grows
/// on one side only.
pub fn landmarks(frames: usize, seed: u64) -> Signal {
    let m = MirrorTemplate::builtin("ibug51").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut face = vec![[0.0f64; 3]; m.points];
    for &i in &m.midline {
        face[i] = [0.0, rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)];
    }
    for &(l, r) in &m.pairs {
        let (a, y, z) = (rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
        face[l] = [-a, y, z];
        face[r] = [a, y, z];
    }
    let corner = m.pairs.last().unwrap().0;
    let data = Array2::from_shape_fn((frames, m.points * 3), |(f, c)| {
        let (p, axis) = (c / 3, c % 3);
        let lift = if p == corner && axis == 1 { 0.002 * f as f64 } else { 0.0 };
        face[p][axis] + lift
    });
    LandmarkTrack::from_matrix(data, 3, FPS, Some("ibug51"), false)
        .unwrap()
        .signal()
        .clone()
}

pub fn rects(frames: usize) -> Signal {
    let boxes: Vec<[f64; 4]> = (0..frames)
        .map(|f| {
            let t = f as f64 / FPS;
            [100.0 + 20.0 * t.sin(), 80.0 + 5.0 * (2.0 * t).cos(), 120.0, 140.0]
        })
        .collect();
    RectTrack::from_boxes(&boxes, FPS).unwrap().signal().clone()
}

pub struct Fixtures {
    pub pose: PathBuf,
    pub partner_pose: PathBuf,
    pub expressions: PathBuf,
    pub partner_expressions: PathBuf,
    pub landmarks: PathBuf,
    pub rects: PathBuf,
}

pub fn write_fixtures(dir: &Path) -> Fixtures {
    Fixtures {
        pose: save(dir, "pose.bbx.csv", &pose(300, 1)),
        partner_pose: save(dir, "partner_pose.bbx.csv", &pose(300, 2)),
        expressions: save(dir, "expr.bbx.csv", &expressions(600, 8, 3)),
        partner_expressions: save(dir, "partner_expr.bbx.csv", &expressions(600, 8, 4)),
        landmarks: save(dir, "lands.bbx.csv", &landmarks(60, 5)),
        rects: save(dir, "rects.bbx.csv", &rects(60)),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Files in `dir` that should carry sidecars.
pub fn outputs(dir: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if path.is_dir() || name.ends_with(".json") || name.starts_with('.') {
            continue;
        }
        found.push(path);
    }
    found.sort();
    found
}
