//! Acceptance suite: one PASS/FAIL line per criterion, each timed against
//! its runtime budget. Exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p omnipose --test acceptance`.

mod tolerances;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use omnipose::cli::{self, Cli};
use omnipose_core::consistency::{align_depth, cross_frame_mask, pairwise_consistency, ConsistencyThresholds};
use omnipose_core::dataset::Dataset;
use omnipose_core::pano::{DepthPano, MaskPano, Pano};
use omnipose_core::pipeline::{eval_render, eval_trajectory, run_incremental, track_correspondences, PipelineConfig};
use omnipose_core::pose::{build_correspondences, solve_pose, Correspondence2D3D, CorrespondenceOptions, MatchSet, SolverConfig};
use omnipose_core::sim::{generate_scene, raycast_pano, simulate, DepthRegime, ScenePreset, SimConfig, TrajectoryMode};
use omnipose_core::sphere::{polar_weight, tangent_error, EquirectGrid, PixelCoord, Point3, PoseSE3, UnitDir, Vec3};
use omnipose_core::splat::{init_from_depth, render, MaskChannel, PruneThresholds, Surfel, SurfelMap, INITIAL_OPACITY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tolerances::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn run(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let t0 = Instant::now();
    let v = f();
    let dt = t0.elapsed();
    let in_time = dt < budget;
    let pass = v.pass && in_time;
    println!(
        "{} [{id}] {name}: {} | {:.2} s (budget {} s){}",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        dt.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { " OVER BUDGET" }
    );
    pass
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_vec(rng: &mut impl Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

// ---------------------------------------------------------------- 1

fn geometry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_tan = 0f64;
    let mut n = 0;
    while n < TANGENT_SAMPLES {
        let u = random_unit(&mut rng);
        // Half the pairs are uniform, half are small angles down to 1e-5 rad.
        let v = if n % 2 == 0 {
            random_unit(&mut rng)
        } else {
            let axis = u.cross(&random_unit(&mut rng)).normalize();
            let angle = 10f64.powf(rng.random_range(-5.0..-1.0));
            PoseSE3::from_rotation_vector(axis * angle, Vec3::zeros()).rotate(&u)
        };
        let (u, v) = (UnitDir::normalize(u).unwrap(), UnitDir::normalize(v).unwrap());
        if u.dot(&v) < ORACLE_MIN_DOT {
            continue;
        }
        let theta = u.dot(&v).clamp(-1.0, 1.0).acos();
        let oracle = 2.0 * (theta / 2.0).tan();
        worst_tan = worst_tan.max((tangent_error(&u, &v).unwrap() - oracle).abs());
        n += 1;
    }

    let mut worst_px = 0f64;
    for h in [32usize, 64, 512, 2048] {
        let g = EquirectGrid::with_height(h).unwrap();
        let w = g.width() as f64;
        for _ in 0..2_500 {
            let p = PixelCoord::new(rng.random_range(1.0..(h - 2) as f64), rng.random_range(0.0..w));
            let d = g.pixel_to_dir(&p).unwrap();
            let back = g.dir_to_pixel(d.as_vec()).unwrap();
            let dc = (back.pixel.col - p.col).abs();
            let dc = dc.min(w - dc);
            worst_px = worst_px.max((back.pixel.row - p.row).abs()).max(dc);
            assert!(!back.at_pole);
        }
    }
    verdict(
        worst_tan <= TANGENT_VS_ARCCOS && worst_px <= ROUND_TRIP_PX,
        format!(
            "max |tangent - arccos oracle| {worst_tan:.2e} (tol {TANGENT_VS_ARCCOS:e}) over {TANGENT_SAMPLES}; max round trip {worst_px:.2e} px (tol {ROUND_TRIP_PX:e})"
        ),
    )
}

// ---------------------------------------------------------------- 2

fn consistency_unit() -> Verdict {
    let th = ConsistencyThresholds::default();
    let defaults = th.tangent == EPS_TAN && th.depth == EPS_DEP;
    let scene = generate_scene(ScenePreset::Room, 0);
    let g = EquirectGrid::with_height(64).unwrap();
    let pose = PoseSE3::from_rotation_vector(Vec3::new(0.0, 0.1, 0.4), Vec3::new(0.3, -0.2, 0.1));
    let (_, d) = raycast_pano(&scene, &pose, &g);
    let all = |m: &MaskPano| m.data().iter().all(|v| *v);
    let none = |m: &MaskPano| m.data().iter().all(|v| !*v);

    let identical = all(&pairwise_consistency(&d, &pose, &d, &pose, &th).unwrap());
    let scaled = d.map(|v| v * DEPTH_SCALING);
    let scaled_rejected = none(&pairwise_consistency(&scaled, &pose, &d, &pose, &th).unwrap())
        && none(&pairwise_consistency(&d, &pose, &scaled, &pose, &th).unwrap());

    // Relative depth error of exactly EPS_DEP: source 1/(1 - eps) against reference 1.
    let one = Pano::filled(g, 1.0);
    let at_dep = Pano::filled(g, 1.0 / (1.0 - EPS_DEP));
    let past_dep = Pano::filled(g, 1.0 / (1.0 - EPS_DEP * 1.001));
    let id = PoseSE3::identity();
    let depth_boundary = all(&pairwise_consistency(&at_dep, &id, &one, &id, &th).unwrap())
        && none(&pairwise_consistency(&past_dep, &id, &one, &id, &th).unwrap());
    let inclusive = th.accepts(EPS_TAN, EPS_DEP)
        && th.accepts(EPS_TAN, 0.0)
        && th.accepts(0.0, EPS_DEP)
        && !th.accepts(EPS_TAN * (1.0 + 1e-6), 0.0)
        && !th.accepts(0.0, EPS_DEP * (1.0 + 1e-6));
    verdict(
        defaults && identical && scaled_rejected && depth_boundary && inclusive,
        format!(
            "defaults {defaults}; identical -> all 1: {identical}; {:.0}% scaling -> all 0: {scaled_rejected}; boundary {EPS_TAN}/{EPS_DEP} inclusive: {}",
            (DEPTH_SCALING - 1.0) * 100.0,
            depth_boundary && inclusive
        ),
    )
}

// ---------------------------------------------------------------- 3

fn synthetic_set(rng: &mut impl Rng, outlier_fraction: f64) -> (Vec<Correspondence2D3D>, PoseSE3, PoseSE3) {
    let gt = PoseSE3::from_rotation_vector(random_vec(rng, 0.5), random_vec(rng, 1.0));
    let n = 80;
    let n_out = (n as f64 * outlier_fraction).round() as usize;
    let corr = (0..n)
        .map(|i| {
            let dir = random_unit(rng);
            let point = gt.transform(&Point3::from(dir * rng.random_range(1.0..8.0)));
            let observed = UnitDir::normalize(if i < n_out { random_unit(rng) } else { dir }).unwrap();
            Correspondence2D3D {
                point,
                observed,
                weight: polar_weight(&observed),
                source_frame: 0,
            }
        })
        .collect();
    let init = gt.compose(&PoseSE3::from_rotation_vector(random_vec(rng, 0.05), random_vec(rng, 0.1)));
    (corr, gt, init)
}

fn solver_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SolverConfig::default();
    let (mut clean_r, mut clean_t, mut out_r, mut out_t) = (0f64, 0f64, 0f64, 0f64);
    let mut failures = 0;
    for _ in 0..SOLVER_SETS {
        for (frac, r_max, t_max) in [(0.0, &mut clean_r, &mut clean_t), (OUTLIER_FRACTION, &mut out_r, &mut out_t)] {
            let (corr, gt, init) = synthetic_set(&mut rng, frac);
            match solve_pose(&corr, &init, &cfg) {
                Ok(est) => {
                    *r_max = r_max.max(est.pose.rotation_angle_to(&gt));
                    *t_max = t_max.max(est.pose.translation_distance_to(&gt));
                }
                Err(_) => failures += 1,
            }
        }
    }
    verdict(
        failures == 0 && clean_r <= NOISELESS_ROT && clean_t <= NOISELESS_TRANS && out_r <= OUTLIER_ROT && out_t <= OUTLIER_TRANS,
        format!(
            "{SOLVER_SETS} noiseless sets: max {clean_r:.1e} rad / {clean_t:.1e} (tol {NOISELESS_ROT:e}); {:.0}% outliers + RANSAC: max {out_r:.1e} rad / {out_t:.1e} (tol {OUTLIER_ROT:e}); failures {failures}",
            OUTLIER_FRACTION * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 4

/// Scales blobs of pixels by factors well outside the depth threshold until
/// exactly `fraction` of the valid pixels are corrupted.
fn corrupt_blobs(d: &DepthPano, rng: &mut impl Rng, fraction: f64) -> DepthPano {
    let g = *d.grid();
    let (h, w) = (g.height() as i64, g.width() as i64);
    let target = (d.valid_count() as f64 * fraction).round() as usize;
    let mut out = d.clone();
    let mut hit = vec![false; g.len()];
    let mut count = 0;
    while count < target {
        let (r0, c0) = (rng.random_range(0..h), rng.random_range(0..w));
        let radius: f64 = rng.random_range(2.0..6.0);
        let factor = if rng.random_bool(0.5) {
            rng.random_range(1.2..1.5)
        } else {
            rng.random_range(0.6..0.8)
        };
        let ri = radius.ceil() as i64;
        for dr in -ri..=ri {
            for dc in -ri..=ri {
                let r = r0 + dr;
                if r < 0 || r >= h || ((dr * dr + dc * dc) as f64) > radius * radius || count == target {
                    continue;
                }
                let c = (c0 + dc).rem_euclid(w);
                let i = g.index(r as usize, c as usize);
                if !hit[i] && d.is_valid(r as usize, c as usize) {
                    hit[i] = true;
                    out.data_mut()[i] *= factor;
                    count += 1;
                }
            }
        }
    }
    out
}

fn ablation_trial(seed: u64) -> (f64, f64) {
    let t = 4;
    let ds = simulate(&SimConfig::new(
        ScenePreset::Room,
        TrajectoryMode::EgocentricOrbit,
        DepthRegime::Absolute,
        t + 1,
        seed,
    ))
    .unwrap();
    let gt = ds.gt_poses.as_ref().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xab1a ^ seed);
    let depths: Vec<DepthPano> = ds.gt_depths.as_ref().unwrap()[..t]
        .iter()
        .map(|d| corrupt_blobs(d, &mut rng, CORRUPTED_PIXEL_FRACTION))
        .collect();
    let poses = &gt[..t];
    let th = ConsistencyThresholds::default();
    // Cross-frame masks against the latest visited frame; that frame itself is
    // checked against its predecessor.
    let masks: Vec<MaskPano> = (0..t)
        .map(|k| {
            if k < t - 1 {
                cross_frame_mask(k, t - 1, &depths, poses, &th).unwrap()
            } else {
                pairwise_consistency(&depths[k], &poses[k], &depths[k - 1], &poses[k - 1], &th).unwrap()
            }
        })
        .collect();
    let sets: Vec<MatchSet<'_>> = (0..t)
        .map(|k| MatchSet {
            frame: k,
            matches: ds.matches_between(k, t),
        })
        .collect();
    let no_ransac = SolverConfig {
        ransac_rounds: 0,
        ..SolverConfig::default()
    };
    let weighted = build_correspondences(&sets, &depths, &masks, poses, &CorrespondenceOptions::default()).unwrap();
    let plain_opts = CorrespondenceOptions {
        use_mask: false,
        polar_weighting: false,
    };
    let plain = build_correspondences(&sets, &depths, &[], poses, &plain_opts).unwrap();
    let plain_cfg = SolverConfig {
        polar_weighting: false,
        ..no_ransac.clone()
    };
    let init = gt[t - 1];
    let ew = solve_pose(&weighted, &init, &no_ransac).unwrap().pose.rotation_angle_to(&gt[t]);
    let eu = solve_pose(&plain, &init, &plain_cfg).unwrap().pose.rotation_angle_to(&gt[t]);
    (ew, eu)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mask_ablation() -> Verdict {
    let (mut w, mut u): (Vec<f64>, Vec<f64>) = (0..ABLATION_SEEDS).map(ablation_trial).unzip();
    let (mw, mu) = (median(&mut w), median(&mut u));
    verdict(
        mw < mu,
        format!(
            "median rotation error over {ABLATION_SEEDS} seeds with {:.0}% corrupted depth: weighted {:.4} deg vs unweighted {:.4} deg",
            CORRUPTED_PIXEL_FRACTION * 100.0,
            mw.to_degrees(),
            mu.to_degrees()
        ),
    )
}

// ---------------------------------------------------------------- 5

fn depth_alignment() -> Verdict {
    let scene = generate_scene(ScenePreset::Room, 5);
    let g = EquirectGrid::with_height(64).unwrap();
    let (_, d_r) = raycast_pano(&scene, &PoseSE3::identity(), &g);
    // Monocular depth that the affine map (0.5, -1.0) takes back onto d_r.
    let d_m = d_r.map(|d| (d - AFFINE_SHIFT) / AFFINE_SCALE);
    let all = MaskPano::filled(g, true);
    let (fit, d_a) = align_depth(&d_m, &d_r, &all).unwrap();
    let exact_err = (fit.scale - AFFINE_SCALE).abs().max((fit.shift - AFFINE_SHIFT).abs());
    let exact_depth = d_a.data().iter().zip(d_r.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut worst = 0f64;
    for seed in 0..3 {
        let mut sc = SimConfig::new(
            ScenePreset::Room,
            TrajectoryMode::NonEgocentricSweep,
            DepthRegime::AffineInvariant,
            4,
            seed,
        );
        sc.corruption.lowfreq_amplitude = 0.0;
        sc.corruption.edge_radius = 0;
        let ds = simulate(&sc).unwrap();
        for (f, gt) in ds.frames.iter().zip(ds.gt_depths.as_ref().unwrap()) {
            let (_, aligned) = align_depth(&f.mono_depth, gt, &all).unwrap();
            for (a, b) in aligned.data().iter().zip(gt.data()) {
                if a.is_finite() && b.is_finite() {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    verdict(
        exact_err <= AFFINE_EXACT && exact_depth <= AFFINE_EXACT && worst <= AFFINE_SIM_ROUND_TRIP,
        format!(
            "({AFFINE_SCALE}, {AFFINE_SHIFT}) recovered to {exact_err:.1e}, depth to {exact_depth:.1e} (tol {AFFINE_EXACT:e}); simulator affine round trip max {worst:.1e} (tol {AFFINE_SIM_ROUND_TRIP:e})"
        ),
    )
}

// ---------------------------------------------------------------- 6

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Pruned,
    Reset,
    Kept,
}

fn table(inlier: Option<f64>, inconsistent: Option<f64>) -> Fate {
    if inlier.unwrap_or(0.0) > PRUNE_INLIER {
        Fate::Pruned
    } else if inconsistent.is_some_and(|v| v > RESET_INCONSISTENT) {
        Fate::Reset
    } else {
        Fate::Kept
    }
}

/// Map whose surfels remember their index in `source_frame` and start at a
/// non-default opacity, so resets are visible.
fn tagged_map(seed: u64) -> (SurfelMap, EquirectGrid) {
    let scene = generate_scene(ScenePreset::Room, seed);
    let g = EquirectGrid::with_height(32).unwrap();
    let (color, depth) = raycast_pano(&scene, &PoseSE3::identity(), &g);
    let mut map = init_from_depth(&color, &depth, &PoseSE3::identity(), 1).unwrap();
    for (i, s) in map.surfels_mut().iter_mut().enumerate() {
        s.source_frame = i;
        s.opacity = 0.3;
    }
    (map, g)
}

/// Applies the prune and checks every surfel against the expected fate.
fn prune_matches(map: &mut SurfelMap, expected: &[Fate], th: &PruneThresholds) -> bool {
    let stats = map.prune_and_reset(th);
    let mut seen = vec![false; expected.len()];
    for s in map.surfels() {
        seen[s.source_frame] = true;
        let want_reset = expected[s.source_frame] == Fate::Reset;
        if expected[s.source_frame] == Fate::Pruned || (s.opacity == INITIAL_OPACITY) != want_reset {
            return false;
        }
    }
    let pruned = expected.iter().filter(|f| **f == Fate::Pruned).count();
    let reset = expected.iter().filter(|f| **f == Fate::Reset).count();
    seen.iter().zip(expected).all(|(s, f)| *s == (*f != Fate::Pruned)) && stats.pruned == pruned && stats.reset == reset
}

fn accumulation() -> Verdict {
    let th = PruneThresholds::default();
    let defaults = th.inlier == PRUNE_INLIER && th.inconsistent == RESET_INCONSISTENT;

    // Randomized sequences: accumulators stay within [0, 1].
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bounded = true;
    let mut random_table = true;
    for seed in 0..3 {
        let (mut map, g) = tagged_map(seed);
        for _ in 0..20 {
            let pose = PoseSE3::from_rotation_vector(random_vec(&mut rng, 0.3), random_vec(&mut rng, 0.3));
            let out = render(&map, &pose, &g);
            let p: f64 = rng.random_range(0.0..1.0);
            let mask = Pano::from_fn(g, |_, _| rng.random_bool(p));
            let ch = if rng.random_bool(0.5) {
                MaskChannel::Inlier
            } else {
                MaskChannel::Inconsistent
            };
            map.accumulate_mask(&out, &mask, ch).unwrap();
            for a in map.accumulators() {
                for (s, w) in [(a.inlier_sum, a.inlier_weight), (a.inconsistent_sum, a.inconsistent_weight)] {
                    bounded &= s >= 0.0 && w >= 0.0 && s <= w;
                    if w > 0.0 {
                        bounded &= (0.0..=1.0).contains(&(s / w));
                    }
                }
            }
        }
        let expected: Vec<Fate> = map.accumulators().iter().map(|a| table(a.inlier(), a.inconsistent())).collect();
        random_table &= prune_matches(&mut map, &expected, &th);
    }

    // Constructed cases: surfel class = id % 6, six rounds per channel, and
    // the number of rounds in which the class is masked on.
    const ROUNDS: [(usize, usize); 6] = [(6, 0), (5, 6), (4, 6), (4, 5), (4, 4), (0, 0)];
    let (mut map, g) = tagged_map(9);
    let out = render(&map, &PoseSE3::identity(), &g);
    for round in 0..6 {
        let on = |ch: usize| {
            Pano::from_fn(g, |r, c| {
                out.winner.get(r, c).is_some_and(|id| {
                    let k = ROUNDS[id % 6];
                    round < if ch == 0 { k.0 } else { k.1 }
                })
            })
        };
        map.accumulate_mask(&out, &on(0), MaskChannel::Inlier).unwrap();
        map.accumulate_mask(&out, &on(1), MaskChannel::Inconsistent).unwrap();
    }
    let won: Vec<bool> = {
        let mut v = vec![false; map.len()];
        out.winner.data().iter().flatten().for_each(|id| v[*id] = true);
        v
    };
    let by_class = [Fate::Pruned, Fate::Pruned, Fate::Reset, Fate::Reset, Fate::Kept, Fate::Kept];
    let expected: Vec<Fate> = (0..map.len()).map(|i| if won[i] { by_class[i % 6] } else { Fate::Kept }).collect();
    let constructed = prune_matches(&mut map, &expected, &th);

    // Exact boundaries: a value equal to the threshold neither prunes nor resets.
    let single = || {
        let s = Surfel::disk(Point3::new(2.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), 0.3, [0.5; 3], 0);
        let mut map = SurfelMap::from_surfels(vec![s]);
        map.surfels_mut()[0].opacity = 0.3;
        let g = EquirectGrid::with_height(64).unwrap();
        let out = render(&map, &PoseSE3::identity(), &g);
        for round in 0..5 {
            map.accumulate_mask(&out, &MaskPano::filled(g, round < 4), MaskChannel::Inlier)
                .unwrap();
            map.accumulate_mask(&out, &MaskPano::filled(g, round < 3), MaskChannel::Inconsistent)
                .unwrap();
        }
        map
    };
    let probe = single();
    let (a_inl, a_inc) = (
        probe.accumulators()[0].inlier().unwrap(),
        probe.accumulators()[0].inconsistent().unwrap(),
    );
    let fate = |th: PruneThresholds| {
        let mut m = single();
        let s = m.prune_and_reset(&th);
        match (s.pruned, s.reset) {
            (1, 0) => Fate::Pruned,
            (0, 1) => Fate::Reset,
            _ => Fate::Kept,
        }
    };
    let boundary = fate(PruneThresholds {
        inlier: a_inl,
        inconsistent: a_inc,
    }) == Fate::Kept
        && fate(PruneThresholds {
            inlier: a_inl.next_down(),
            inconsistent: a_inc,
        }) == Fate::Pruned
        && fate(PruneThresholds {
            inlier: a_inl,
            inconsistent: a_inc.next_down(),
        }) == Fate::Reset;

    verdict(
        defaults && bounded && random_table && constructed && boundary,
        format!(
            "defaults ({PRUNE_INLIER}, {RESET_INCONSISTENT}) {defaults}; A in [0,1] over random sequences: {bounded}; table on random {random_table}, constructed {constructed}, at boundary {boundary}"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn bench_dataset(mode: TrajectoryMode, frames: usize, seed: u64) -> (Dataset, f64) {
    let sc = SimConfig::new(ScenePreset::Room, mode, DepthRegime::Absolute, frames, seed);
    assert_eq!(sc.corruption.scale_sigma, ABSOLUTE_SCALE_SIGMA);
    (simulate(&sc).unwrap(), generate_scene(sc.preset, sc.scene_seed).diameter)
}

struct TrajErr {
    ate_frac: f64,
    rpe_r_med: f64,
}

fn traj_err(est: &[PoseSE3], gt: &[PoseSE3], diameter: f64) -> TrajErr {
    let (m, _) = eval_trajectory(est, gt).unwrap();
    TrajErr {
        ate_frac: m.ate_rmse / diameter,
        rpe_r_med: m.rpe_r_deg.map_or(f64::NAN, |s| s.median),
    }
}

/// Truncated least squares in the tangent error: `sum w * min(L, gate)^2`.
/// Written from the public geometry only, independent of the solver.
fn truncated_cost(corr: &[Correspondence2D3D], pose: &PoseSE3, gate: f64) -> f64 {
    corr.iter()
        .map(|c| {
            let v = pose.inverse_transform(&c.point).coords;
            let l = UnitDir::normalize(v)
                .and_then(|u| tangent_error(&c.observed, &u).ok())
                .unwrap_or(gate);
            c.weight * l.min(gate).powi(2)
        })
        .sum()
}

/// Coarse-to-fine exhaustive search over right perturbations of `center`.
fn grid_oracle(corr: &[Correspondence2D3D], center: &PoseSE3, gate: f64) -> PoseSE3 {
    let at = |x: &[f64; 6]| {
        center.compose(&PoseSE3::from_rotation_vector(
            Vec3::new(x[0], x[1], x[2]),
            Vec3::new(x[3], x[4], x[5]),
        ))
    };
    let mut best = [0.0; 6];
    let mut best_f = truncated_cost(corr, center, gate);
    let (mut hr, mut ht) = (ORACLE_ROT_STEP, ORACLE_TRANS_STEP);
    for level in 0..ORACLE_LEVELS {
        let half = if level == 0 { ORACLE_FIRST_LEVEL } else { ORACLE_LEVEL };
        let side = (2 * half + 1) as usize;
        let base = best;
        for code in 0..side.pow(6) {
            let mut x = base;
            let mut c = code;
            for (i, xi) in x.iter_mut().enumerate() {
                let step = (c % side) as i32 - half;
                c /= side;
                *xi += step as f64 * if i < 3 { hr } else { ht };
            }
            let f = truncated_cost(corr, &at(&x), gate);
            if f < best_f {
                best_f = f;
                best = x;
            }
        }
        hr *= 0.5;
        ht *= 0.5;
    }
    at(&best)
}

fn prefix(ds: &Dataset, n: usize) -> Dataset {
    Dataset {
        grid: ds.grid,
        frames: ds.frames[..n].to_vec(),
        matches: ds
            .matches
            .iter()
            .filter(|((_, t), _)| *t < n)
            .map(|(k, v)| (*k, v.clone()))
            .collect(),
        gt_poses: ds.gt_poses.as_ref().map(|p| p[..n].to_vec()),
        gt_depths: ds.gt_depths.as_ref().map(|d| d[..n].to_vec()),
    }
}

fn end_to_end() -> Verdict {
    let cfg = PipelineConfig::default();

    // Oracle on a 3-frame instance: the pipeline's frame-2 correspondences,
    // fitted by grid search on a truncated cost instead of the solver.
    let (ds3, diam3) = bench_dataset(TrajectoryMode::EgocentricOrbit, 3, 0);
    let gt3 = ds3.gt_poses.clone().unwrap();
    let two = run_incremental(&prefix(&ds3, 2), &cfg).unwrap();
    let track = track_correspondences(&two.map, &ds3, &two.poses, 2, &cfg).unwrap();
    let corr = track.correspondences.unwrap();
    let gate = cfg.solver.refit_gate * cfg.solver.inlier_threshold;
    let oracle_pose = grid_oracle(&corr, &two.poses[1], gate);
    let oracle = traj_err(&[two.poses[0], two.poses[1], oracle_pose], &gt3, diam3);
    let full3 = run_incremental(&ds3, &cfg).unwrap();
    let pipe3 = traj_err(&full3.poses, &gt3, diam3);
    let solver_pose = solve_pose(&corr, &two.poses[1], &cfg.solver).unwrap().pose;
    let gap_deg = solver_pose.rotation_angle_to(&oracle_pose).to_degrees();
    let gap_t = solver_pose.translation_distance_to(&oracle_pose) / diam3;
    let oracle_ok = oracle.ate_frac < EGO_ATE_OF_DIAMETER
        && oracle.rpe_r_med < EGO_RPE_R_MEDIAN_DEG
        && pipe3.ate_frac < EGO_ATE_OF_DIAMETER
        && pipe3.rpe_r_med < EGO_RPE_R_MEDIAN_DEG
        && gap_deg < EGO_RPE_R_MEDIAN_DEG
        && gap_t < EGO_ATE_OF_DIAMETER;

    let (ego_ds, ego_diam) = bench_dataset(TrajectoryMode::EgocentricOrbit, BENCH_FRAMES, 0);
    let ego_run = run_incremental(&ego_ds, &cfg).unwrap();
    let ego = traj_err(&ego_run.poses, ego_ds.gt_poses.as_ref().unwrap(), ego_diam);
    let (sweep_ds, sweep_diam) = bench_dataset(TrajectoryMode::NonEgocentricSweep, BENCH_FRAMES, 0);
    let sweep_run = run_incremental(&sweep_ds, &cfg).unwrap();
    let sweep = traj_err(&sweep_run.poses, sweep_ds.gt_poses.as_ref().unwrap(), sweep_diam);

    let pass = oracle_ok
        && !ego_run.failed
        && !sweep_run.failed
        && ego.ate_frac < EGO_ATE_OF_DIAMETER
        && ego.rpe_r_med < EGO_RPE_R_MEDIAN_DEG
        && sweep.ate_frac < NONEGO_ATE_OF_DIAMETER;
    verdict(
        pass,
        format!(
            "ego ATE {:.4}% of diameter (< {}%), RPE_r median {:.4} deg (< {}); nonego ATE {:.4}% (< {}%); 3-frame oracle ATE {:.4}% / RPE_r {:.4} deg, pipeline {:.4}% / {:.4} deg, solver-oracle gap {:.2e} deg / {:.2e}",
            ego.ate_frac * 100.0,
            EGO_ATE_OF_DIAMETER * 100.0,
            ego.rpe_r_med,
            EGO_RPE_R_MEDIAN_DEG,
            sweep.ate_frac * 100.0,
            NONEGO_ATE_OF_DIAMETER * 100.0,
            oracle.ate_frac * 100.0,
            oracle.rpe_r_med,
            pipe3.ate_frac * 100.0,
            pipe3.rpe_r_med,
            gap_deg,
            gap_t
        ),
    )
}

// ---------------------------------------------------------------- 8

fn dia_efficacy() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 0..DIA_SEEDS {
        let (ds, _) = bench_dataset(TrajectoryMode::NonEgocentricSweep, BENCH_FRAMES, seed);
        let held = PipelineConfig::default().held_out_frames(ds.len());
        let images: Vec<_> = ds.frames.iter().map(|f| &f.color).collect();
        let eval = |densify: bool| {
            let cfg = PipelineConfig {
                densify,
                ..PipelineConfig::default()
            };
            let r = run_incremental(&ds, &cfg).unwrap();
            eval_render(&r.map, &r.poses, &images, &held).unwrap()
        };
        let (on, off) = (eval(true), eval(false));
        ok &= on.invalid_fraction < off.invalid_fraction && on.psnr >= off.psnr;
        parts.push(format!(
            "seed {seed}: invalid {:.4} vs {:.4}, PSNR {:.2} vs {:.2} dB",
            on.invalid_fraction, off.invalid_fraction, on.psnr, off.psnr
        ));
    }
    verdict(ok, format!("densify on vs off, held-out views: {}", parts.join("; ")))
}

// ---------------------------------------------------------------- 9

fn files_equal(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for n in names {
        let (x, y) = (fs::read(a.join(n)), fs::read(b.join(n)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            (Ok(_), Ok(_)) => return Err(format!("{n} differs")),
            _ => return Err(format!("{n} missing")),
        }
    }
    Ok(())
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s);
    let cli = |args: &[&str]| -> anyhow::Result<()> {
        let mut v = vec!["omnipose"];
        v.extend_from_slice(args);
        cli::execute(<Cli as clap::Parser>::try_parse_from(v)?)
    };
    fs::write(p("config.toml"), omnipose::config::DEFAULT_CONFIG).unwrap();
    let sim = |out: &str| {
        cli(&[
            "simulate",
            "--preset",
            "room",
            "--frames",
            "9",
            "--trajectory",
            "ego",
            "--corruption",
            "absolute",
            "--height",
            "32",
            "--seed",
            "7",
            "--out",
            p(out).to_str().unwrap(),
        ])
    };
    let run = |out: &str| {
        cli(&[
            "run",
            "--dataset",
            p("ds_a").to_str().unwrap(),
            "--config",
            p("config.toml").to_str().unwrap(),
            "--out",
            p(out).to_str().unwrap(),
        ])
    };
    let outcome = (|| -> Result<(), String> {
        sim("ds_a").map_err(|e| e.to_string())?;
        sim("ds_b").map_err(|e| e.to_string())?;
        files_equal(
            &p("ds_a"),
            &p("ds_b"),
            &[
                "gt_trajectory.txt",
                "frames/00004.color.png",
                "frames/00004.mono.pfm",
                "matches/00003_00004.csv",
            ],
        )?;
        run("out_a").map_err(|e| e.to_string())?;
        run("out_b").map_err(|e| e.to_string())?;
        files_equal(
            &p("out_a"),
            &p("out_b"),
            &[
                cli::TRAJECTORY_FILE,
                cli::METRICS_FILE,
                cli::MAP_FILE,
                cli::LOG_FILE,
                cli::FRAME_ERRORS_FILE,
            ],
        )
    })();
    verdict(
        outcome.is_ok(),
        match outcome {
            Ok(()) => "two simulate + run passes: dataset, trajectory, metrics, map and log files byte-identical".into(),
            Err(e) => e,
        },
    )
}

fn main() -> ExitCode {
    let results = [
        run(1, "geometry exactness", GEOMETRY_BUDGET, geometry),
        run(2, "consistency unit behavior", CONSISTENCY_BUDGET, consistency_unit),
        run(3, "solver exactness", SOLVER_BUDGET, solver_exactness),
        run(4, "mask ablation", ABLATION_BUDGET, mask_ablation),
        run(5, "depth alignment", ALIGNMENT_BUDGET, depth_alignment),
        run(6, "accumulation and pruning", ACCUMULATION_BUDGET, accumulation),
        run(7, "end-to-end benchmark", BENCH_BUDGET, end_to_end),
        run(8, "densification efficacy", DIA_BUDGET, dia_efficacy),
        run(9, "determinism", DETERMINISM_BUDGET, determinism),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
