use behavio_core::expressions::*;
use behavio_core::model::{ExpressionTrack, LandmarkTrack, MirrorTemplate, Signal};
use nalgebra::{Rotation3, Vector3};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A face symmetric about the plane x = 0.
fn symmetric_face(m: &MirrorTemplate, rng: &mut impl Rng) -> Vec<Vector3<f64>> {
    let mut pts = vec![Vector3::zeros(); m.points];
    for &i in &m.midline {
        pts[i] = Vector3::new(0.0, rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
    }
    for &(l, r) in &m.pairs {
        let (a, y, z) = (rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
        pts[l] = Vector3::new(-a, y, z);
        pts[r] = Vector3::new(a, y, z);
    }
    pts
}

fn random_pose(rng: &mut impl Rng) -> (Rotation3<f64>, Vector3<f64>) {
    let r = Rotation3::from_euler_angles(
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-3.0..3.0),
    );
    let t = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    (r, t)
}

fn track(frames: &[Vec<Vector3<f64>>]) -> LandmarkTrack {
    let points = frames[0].len();
    let data = Array2::from_shape_fn((frames.len(), points * 3), |(f, c)| frames[f][c / 3][c % 3]);
    LandmarkTrack::from_matrix(data, 3, 30.0, Some("ibug51"), false).unwrap()
}

/// Mirror distance computed against a plane given explicitly by a point and
/// a unit normal.
fn oracle_score(pts: &[Vector3<f64>], m: &MirrorTemplate, c: Vector3<f64>, n: Vector3<f64>) -> f64 {
    let iod = (pts[m.interocular.1] - pts[m.interocular.0]).norm();
    let sum: f64 = m
        .pairs
        .iter()
        .map(|&(l, r)| {
            let p = pts[l];
            let mirrored = p - n * (2.0 * (p - c).dot(&n));
            (mirrored - pts[r]).norm()
        })
        .sum();
    sum / m.pairs.len() as f64 / iod
}

#[test]
fn symmetric_faces_score_zero_in_any_pose() {
    let m = MirrorTemplate::builtin("ibug51").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let face = symmetric_face(&m, &mut rng);
    let frames: Vec<Vec<Vector3<f64>>> = (0..50)
        .map(|_| {
            let (r, t) = random_pose(&mut rng);
            face.iter().map(|p| r * p + t).collect()
        })
        .collect();
    let s = asymmetry(&track(&frames), &m).unwrap();
    for v in s.scores.channel(0) {
        assert!(v.abs() <= 1e-9, "{v}");
    }
}

#[test]
fn perturbed_brow_matches_explicit_plane() {
    let m = MirrorTemplate::builtin("ibug51").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut face = symmetric_face(&m, &mut rng);
    let iod = (face[m.interocular.1] - face[m.interocular.0]).norm();
    let delta = 0.02 * iod;
    // left brow of the 51-point layout
    for i in 0..5 {
        face[i].y += delta;
    }
    let mut frames = Vec::new();
    let mut expected = Vec::new();
    for _ in 0..20 {
        let (r, t) = random_pose(&mut rng);
        let posed: Vec<Vector3<f64>> = face.iter().map(|p| r * p + t).collect();
        expected.push(oracle_score(&posed, &m, t, r * Vector3::x()));
        frames.push(posed);
    }
    let s = asymmetry(&track(&frames), &m).unwrap();
    for (got, want) in s.scores.channel(0).iter().zip(&expected) {
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
        assert!((want - 5.0 * 0.02 / m.pairs.len() as f64).abs() <= 1e-9);
    }
}

#[test]
fn planar_faces_use_interocular_bisector() {
    let m = MirrorTemplate::builtin("ibug51").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let face = symmetric_face(&m, &mut rng);
    let data = Array2::from_shape_fn((1, m.points * 2), |(_, c)| face[c / 2][c % 2]);
    let l = LandmarkTrack::from_matrix(data, 2, 30.0, Some("ibug51"), false).unwrap();
    let s = asymmetry(&l, &m).unwrap();
    assert!(s.caution_2d);
    assert!(s.scores.channel(0)[0].abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn asymmetry_invariant_to_rigid_motion_and_relabeling(seed in any::<u64>()) {
        let m = MirrorTemplate::builtin("ibug51").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut face = symmetric_face(&m, &mut rng);
        for p in &mut face {
            *p += Vector3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
        }
        let (r, t) = random_pose(&mut rng);
        let moved: Vec<Vector3<f64>> = face.iter().map(|p| r * p + t).collect();
        let mut swapped = face.clone();
        for &(a, b) in &m.pairs {
            swapped.swap(a, b);
        }
        let s = asymmetry(&track(&[face, moved, swapped]), &m).unwrap();
        let v = s.scores.channel(0);
        prop_assert!((v[0] - v[1]).abs() <= 1e-9);
        prop_assert!((v[0] - v[2]).abs() <= 1e-9);
    }

    #[test]
    fn decomposition_reconstructs_input(
        seed in any::<u64>(),
        frames in 200usize..800,
        channels in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((frames, channels), |_| rng.gen_range(-10.0..10.0));
        let s = Signal::new(data.clone(), 30.0, (0..channels).map(|c| format!("e{c}")).collect(), behavio_core::model::Modality::Expressions).unwrap();
        let d = multiscale_decompose(&s, &ScaleSet::Dyadic(3)).unwrap();
        let back = d.reconstruct();
        for (a, b) in back.iter().zip(data.iter()) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn expressivity_scales_with_amplitude(seed in any::<u64>(), alpha in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((240, 2), |_| rng.gen_range(-1.0..1.0));
        let e = ExpressionTrack::from_matrix(data.clone(), 30.0).unwrap();
        let scaled = ExpressionTrack::from_matrix(data * alpha, 30.0).unwrap();
        let scales = ScaleSet::seconds(&[0.2, 0.5]).unwrap();
        let a = expressivity(&e, &scales).unwrap();
        let b = expressivity(&scaled, &scales).unwrap();
        for (sa, sb) in a.scales.iter().zip(&b.scales) {
            for (ca, cb) in sa.per_coefficient.iter().zip(&sb.per_coefficient) {
                prop_assert_eq!(ca.peaks, cb.peaks);
                prop_assert!((cb.intensity - alpha * ca.intensity).abs() <= 1e-9 * (1.0 + cb.intensity));
                prop_assert!((cb.variability - alpha * ca.variability).abs() <= 1e-9 * (1.0 + cb.variability));
                prop_assert_eq!(ca.peak_rate, cb.peak_rate);
                prop_assert!(ca.intensity >= 0.0 && ca.variability >= 0.0 && ca.peak_rate >= 0.0);
            }
        }
    }

    #[test]
    fn merging_labels_never_raises_entropy(counts in prop::collection::vec(0usize..50, 3..8), i in 0usize..8, j in 0usize..8) {
        let e = counts.len();
        let (i, j) = (i % e, j % e);
        prop_assume!(i != j);
        let mut merged = counts.clone();
        merged[i] += merged[j];
        merged[j] = 0;
        let h = normalized_entropy(&counts, e);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&h));
        prop_assert!(normalized_entropy(&merged, e) <= h + 1e-12);
    }

    #[test]
    fn diversity_is_bounded(seed in any::<u64>(), coefficients in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((300, coefficients), |_| rng.gen_range(-1.0..1.0));
        let e = ExpressionTrack::from_matrix(data, 30.0).unwrap();
        let d = diversity(&e, &ScaleSet::seconds(&[0.5, 1.0, 1.5, 2.0]).unwrap()).unwrap();
        for p in &d.per_scale {
            prop_assert!((0.0..=1.0).contains(&p.entropy));
            prop_assert!(p.distinct_dominant_count <= coefficients);
        }
    }
}

fn naive_moving_average(x: &[f64], w: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let start = i as isize - (w / 2) as isize;
            let window: Vec<f64> = (start..start + w as isize)
                .filter_map(|j| usize::try_from(j).ok().and_then(|j| x.get(j).copied()))
                .collect();
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect()
}

/// Per-scale component energies from an independent moving-average pyramid.
fn oracle_energies(x: &[f64], windows: &[usize]) -> Vec<f64> {
    let mut previous = x.to_vec();
    windows
        .iter()
        .map(|&w| {
            let level = naive_moving_average(x, w);
            let e = previous.iter().zip(&level).map(|(a, b)| (a - b).powi(2)).sum();
            previous = level;
            e
        })
        .collect()
}

#[test]
fn impulse_energy_concentrates_in_finest_scale() {
    let mut x = vec![0.0; 400];
    x[200] = 1.0;
    let s = Signal::from_channel(&x, 30.0, "e").unwrap();
    let d = multiscale_decompose(&s, &ScaleSet::seconds(&[0.5, 1.0, 1.5, 2.0]).unwrap()).unwrap();
    let energies: Vec<f64> = d.components.iter().map(|c| c.channel(0).iter().map(|v| v * v).sum()).collect();
    let oracle = oracle_energies(&x, &[15, 30, 45, 60]);
    for (a, b) in energies.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12);
    }
    let share = energies[0] / energies.iter().sum::<f64>();
    assert!(share >= 0.9, "finest-scale share {share}");
}

#[test]
fn gaussian_bump_intensity_near_amplitude() {
    let fps = 30.0;
    let amplitude = 2.5;
    let sigma = 0.2 * fps;
    let n = 600;
    let bump: Vec<f64> = (0..n)
        .map(|f| amplitude * (-((f as f64 - 300.0) / sigma).powi(2) / 2.0).exp())
        .collect();
    let data = Array2::from_shape_fn((n, 3), |(f, c)| if c == 1 { bump[f] } else { 0.0 });
    let e = ExpressionTrack::from_matrix(data, fps).unwrap();
    let stats = expressivity(&e, &ScaleSet::seconds(&[0.1, 4.0]).unwrap()).unwrap();

    // oracle: peak of the independently computed band containing the bump
    let fine = naive_moving_average(&bump, 3);
    let coarse = naive_moving_average(&bump, 120);
    let oracle_peak = fine
        .iter()
        .zip(&coarse)
        .map(|(a, b)| a - b)
        .fold(f64::MIN, f64::max);

    let best = stats
        .scales
        .iter()
        .max_by(|a, b| a.per_coefficient[1].intensity.total_cmp(&b.per_coefficient[1].intensity))
        .unwrap();
    let intensity = best.per_coefficient[1].intensity;
    assert_eq!(best.per_coefficient[1].peaks, 1);
    assert!((intensity - oracle_peak).abs() < 1e-12);
    assert!((intensity - amplitude).abs() <= 0.15 * amplitude, "{intensity}");
    for sc in &stats.scales {
        for c in [0, 2] {
            assert_eq!(sc.per_coefficient[c], CoefficientStats::default());
        }
    }
}

#[test]
fn six_dyadic_scales_give_six_blocks() {
    let e = ExpressionTrack::from_matrix(Array2::zeros((400, 2)), 30.0).unwrap();
    let stats = expressivity(&e, &ScaleSet::Dyadic(6)).unwrap();
    assert_eq!(stats.scales.len(), 6);
    assert_eq!(expressivity_table(&stats).unwrap().frames(), 6 * 3);
}

fn dominance_track(dominant: &[usize], coefficients: usize, w: usize) -> ExpressionTrack {
    let data = Array2::from_shape_fn((dominant.len() * w, coefficients), |(f, c)| {
        if dominant[f / w] == c { 1.0 } else { 0.1 }
    });
    ExpressionTrack::from_matrix(data, 10.0).unwrap()
}

#[test]
fn diversity_analytic_cases() {
    let scales = ScaleSet::seconds(&[1.0]).unwrap();
    let one = dominance_track(&[0; 8], 4, 10);
    let d = diversity(&one, &scales).unwrap();
    assert_eq!(d.per_scale[0].entropy, 0.0);

    let uniform = dominance_track(&[0, 1, 2, 3, 3, 2, 1, 0], 4, 10);
    let d = diversity(&uniform, &scales).unwrap();
    assert!((d.per_scale[0].entropy - 1.0).abs() <= 1e-12);
    assert_eq!(d.per_scale[0].distinct_dominant_count, 4);

    let half = dominance_track(&[1, 3, 1, 3, 3, 1, 1, 3], 4, 10);
    let d = diversity(&half, &scales).unwrap();
    assert!((d.per_scale[0].entropy - 0.5).abs() <= 1e-12);
    assert_eq!(d.estimator, DIVERSITY_ESTIMATOR);
}

#[test]
fn single_active_coefficient_has_zero_diversity_at_every_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = Array2::from_shape_fn((600, 4), |(_, c)| if c == 0 { rng.gen_range(0.1..1.0) } else { 0.0 });
    let e = ExpressionTrack::from_matrix(data, 30.0).unwrap();
    let d = diversity(&e, &ScaleSet::Dyadic(5)).unwrap();
    assert!(d.per_scale.iter().all(|p| p.entropy == 0.0));
}
