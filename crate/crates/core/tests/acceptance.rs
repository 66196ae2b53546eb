//! Acceptance criteria 1-9. Prints one PASS/FAIL/SKIP line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Criterion 9 reads MOT17 training data from the directory named by
//! `TRACKKIT_MOT17_DIR` (containing `MOT17-04-*`, ... sequence folders) and
//! is skipped when the variable is unset.

#![allow(clippy::too_many_arguments, clippy::type_complexity)]

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use nalgebra::{SMatrix, SVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trackkit::association::solve_assignment;
use trackkit::consistency::{pyramid_consistency_loss, FeaturePyramidSet};
use trackkit::ensemble::{wbf, WbfParams};
use trackkit::geom::{iou, BBox, SceneKind, Trajectory};
use trackkit::metrics::{evaluate, EvalOptions, ALPHAS};
use trackkit::moio::{self, PipelineConfig};
use trackkit::motion::{KalmanFilter, KalmanState};
use trackkit::pipeline::{
    evaluate_sequence, format_ablation, run_ablation, run_sequence, Components, LabelledSequence, SequenceInput,
};
use trackkit::search::{search, SearchConfig};
use trackkit::sim::{generate, Occlusion, SimConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within_budget(t: Duration, limit_s: f64) -> (bool, String) {
    let s = t.as_secs_f64();
    (s < limit_s, format!("{s:.2}s (limit {limit_s}s)"))
}

// ---------------------------------------------------------------- 1: Kalman

type V8 = SVector<f64, 8>;
type M8 = SMatrix<f64, 8, 8>;
type V4 = SVector<f64, 4>;
type M4 = SMatrix<f64, 4, 4>;
type M48 = SMatrix<f64, 4, 8>;

fn to_na(s: &KalmanState<f64>) -> (V8, M8) {
    (V8::from_row_slice(&s.mean), M8::from_fn(|i, j| s.cov[i][j]))
}

fn diag_sq8(v: [f64; 8]) -> M8 {
    M8::from_diagonal(&V8::from_row_slice(&v.map(|x| x * x)))
}

fn ref_predict(x: &V8, p: &M8) -> (V8, M8) {
    let mut f = M8::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    let (sp, sv) = (x[3] / 20.0, x[3] / 160.0);
    let q = diag_sq8([sp, sp, 1e-2, sp, sv, sv, 1e-5, sv]);
    (f * x, f * p * f.transpose() + q)
}

fn ref_update(x: &V8, p: &M8, z: &[f64; 4], score: f64, nsa: bool) -> (V8, M8) {
    let mut hm = M48::zeros();
    for i in 0..4 {
        hm[(i, i)] = 1.0;
    }
    let sp = x[3] / 20.0;
    let mut r = M4::from_diagonal(&V4::new(sp * sp, sp * sp, 0.1 * 0.1, sp * sp));
    if nsa {
        r *= 1.0 - score;
    }
    let s = hm * p * hm.transpose() + r;
    let k = p * hm.transpose() * s.try_inverse().expect("innovation covariance invertible");
    let innov = V4::from_row_slice(z) - hm * x;
    (x + k * innov, p - k * s * k.transpose())
}

fn max_rel_diff(ours: &KalmanState<f64>, x: &V8, p: &M8) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        worst = worst.max((ours.mean[i] - x[i]).abs() / x[i].abs().max(1.0));
        for j in 0..8 {
            worst = worst.max((ours.cov[i][j] - p[(i, j)]).abs() / p[(i, j)].abs().max(1.0));
        }
    }
    worst
}

fn random_measurement(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [
        rng.random_range(0.0..1920.0),
        rng.random_range(0.0..1080.0),
        rng.random_range(0.25..0.6),
        rng.random_range(20.0..400.0),
    ]
}

fn criterion_kalman() -> Outcome {
    let start = Instant::now();
    let kf = KalmanFilter::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for _ in 0..1000 {
        // a state with some history: initiate, then a few predict/update cycles
        let z0 = random_measurement(&mut rng);
        let mut s = kf.initiate(&z0).unwrap();
        for _ in 0..rng.random_range(0..6) {
            s = kf.predict(&s);
            let z: [f64; 4] = std::array::from_fn(|i| s.mean[i] + rng.random_range(-2.0..2.0) * if i == 2 { 0.01 } else { 1.0 });
            s = kf.update(&s, &z, rng.random_range(0.0..1.0), rng.random_bool(0.5)).unwrap();
        }
        s.mean[4] = rng.random_range(-5.0..5.0);
        s.mean[5] = rng.random_range(-5.0..5.0);
        let (x, p) = to_na(&s);

        let pred = kf.predict(&s);
        let (rx, rp) = ref_predict(&x, &p);
        worst = worst.max(max_rel_diff(&pred, &rx, &rp));

        let z: [f64; 4] = std::array::from_fn(|i| pred.mean[i] + rng.random_range(-3.0..3.0) * if i == 2 { 0.01 } else { 1.0 });
        let (px, pp) = to_na(&pred);
        let plain = kf.update(&pred, &z, 0.7, false).unwrap();
        let (ux, up) = ref_update(&px, &pp, &z, 0.7, false);
        worst = worst.max(max_rel_diff(&plain, &ux, &up));

        let score = rng.random_range(0.0..0.95);
        let nsa = kf.update(&pred, &z, score, true).unwrap();
        let (nx, np) = ref_update(&px, &pp, &z, score, true);
        worst = worst.max(max_rel_diff(&nsa, &nx, &np));

        let full = kf.update(&pred, &z, 1.0, true).unwrap();
        exact &= full.measurement() == z;
    }
    let (fast, time) = within_budget(start.elapsed(), 5.0);
    verdict(
        worst <= 1e-9 && exact && fast,
        format!("max relative deviation {worst:.2e} (tol 1e-9), NSA score 1 exact: {exact}, {time}"),
    )
}

// ------------------------------------------------------------ 2: assignment

/// Best total gain `sum(max_cost - c)` over partial matchings using only
/// pairs with `c <= max_cost`, by exhaustive enumeration.
fn brute_assignment(cost: &[f64], n: usize, m: usize, max_cost: f64) -> (f64, Vec<Vec<(usize, usize)>>) {
    fn rec(
        r: usize,
        cost: &[f64],
        n: usize,
        m: usize,
        gate: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        gain: f64,
        best: &mut (f64, Vec<Vec<(usize, usize)>>),
    ) {
        if r == n {
            if gain > best.0 + 1e-12 {
                *best = (gain, vec![cur.clone()]);
            } else if (gain - best.0).abs() <= 1e-12 {
                best.1.push(cur.clone());
            }
            return;
        }
        rec(r + 1, cost, n, m, gate, used, cur, gain, best);
        for c in 0..m {
            let v = cost[r * m + c];
            if !used[c] && v <= gate {
                used[c] = true;
                cur.push((r, c));
                rec(r + 1, cost, n, m, gate, used, cur, gain + (gate - v), best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    rec(0, cost, n, m, max_cost, &mut vec![false; m], &mut Vec::new(), 0.0, &mut best);
    best
}

fn criterion_assignment() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    for case in 0..500 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let cost: Vec<f64> = (0..n * m).map(|_| rng.random_range(0.0..1.0)).collect();
        let gate = rng.random_range(0.1..1.0);
        let a = solve_assignment(&cost, n, m, gate);
        let (best, optima) = brute_assignment(&cost, n, m, gate);
        let gain: f64 = a.matches.iter().map(|&(r, c)| gate - cost[r * m + c]).sum();
        let gated = a.matches.iter().all(|&(r, c)| cost[r * m + c] <= gate);
        let mut covered = vec![0; n + m];
        for &(r, c) in &a.matches {
            covered[r] += 1;
            covered[n + c] += 1;
        }
        a.unmatched_rows.iter().for_each(|&r| covered[r] += 1);
        a.unmatched_cols.iter().for_each(|&c| covered[n + c] += 1);
        let partition = covered.iter().all(|&k| k == 1);
        let mut sorted = a.matches.clone();
        sorted.sort();
        let same_matching = optima.len() > 1 || optima[0] == sorted;
        if (gain - best).abs() > 1e-9 || !gated || !partition || !same_matching {
            failures.push(case);
        }
    }
    let (fast, time) = within_budget(start.elapsed(), 10.0);
    verdict(
        failures.is_empty() && fast,
        format!("500 cases up to 6x6, {} mismatches, {time}", failures.len()),
    )
}

// ------------------------------------------------------------------- 3: WBF

#[derive(Clone, Copy)]
struct RawBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    score: f64,
    weight: f64,
}

fn raw_iou(a: &[f64; 4], b: &RawBox) -> f64 {
    let iw = a[2].min(b.x1) - a[0].max(b.x0);
    let ih = a[3].min(b.y1) - a[1].max(b.y0);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter)
}

/// Cluster-then-average: members are kept and the fused box is recomputed
/// from scratch after each insertion.
fn oracle_wbf(sets: &[Vec<BBox<f64>>], weights: &[f64], thr: f64, skip: f64) -> Vec<[f64; 5]> {
    let mut all: Vec<RawBox> = Vec::new();
    for (set, &w) in sets.iter().zip(weights) {
        for b in set {
            all.push(RawBox {
                x0: b.x,
                y0: b.y,
                x1: b.x + b.w,
                y1: b.y + b.h,
                score: b.score,
                weight: w,
            });
        }
    }
    all.sort_by(|a, b| (b.score * b.weight).partial_cmp(&(a.score * a.weight)).unwrap());
    let fuse = |members: &[RawBox]| -> [f64; 4] {
        let t: f64 = members.iter().map(|m| m.score * m.weight).sum();
        let avg = |f: fn(&RawBox) -> f64| members.iter().map(|m| m.score * m.weight * f(m)).sum::<f64>() / t;
        [avg(|m| m.x0), avg(|m| m.y0), avg(|m| m.x1), avg(|m| m.y1)]
    };
    let mut clusters: Vec<Vec<RawBox>> = Vec::new();
    for b in all {
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in clusters.iter().enumerate() {
            let v = raw_iou(&fuse(c), &b);
            if v >= thr && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((k, v));
            }
        }
        match best {
            Some((k, _)) => clusters[k].push(b),
            None => clusters.push(vec![b]),
        }
    }
    let n = sets.len() as f64;
    let wsum: f64 = weights.iter().sum();
    let mut out: Vec<[f64; 5]> = clusters
        .iter()
        .map(|c| {
            let f = fuse(c);
            let t = c.len() as f64;
            let mean = c.iter().map(|m| m.score * m.weight).sum::<f64>() / t;
            [f[0], f[1], f[2], f[3], (mean * t.min(n) / wsum).min(1.0)]
        })
        .filter(|o| o[4] >= skip)
        .collect();
    out.sort_by(|a, b| b[4].partial_cmp(&a[4]).unwrap().then(a[0].partial_cmp(&b[0]).unwrap()));
    out
}

fn criterion_wbf() -> Outcome {
    let p = WbfParams::<f64>::default();
    let b = |x: f64, y: f64, s: f64| BBox::new(x, y, 10.0, 10.0, s, 1);
    let mut hand = true;
    let single = vec![b(0.0, 0.0, 0.9), b(40.0, 40.0, 0.3)];
    hand &= wbf(std::slice::from_ref(&single), &p).unwrap() == single;
    let same = wbf(&[vec![b(0.0, 0.0, 0.8)], vec![b(0.0, 0.0, 0.8)]], &p).unwrap();
    hand &= same.len() == 1 && (same[0].x).abs() < 1e-12 && (same[0].w - 10.0).abs() < 1e-12 && (same[0].score - 0.8).abs() < 1e-12;
    let p04 = WbfParams { iou_thresh: 0.4, ..p.clone() };
    let ab = wbf(&[vec![b(0.0, 0.0, 0.8)], vec![b(2.0, 2.0, 0.4)]], &p04).unwrap();
    hand &= ab.len() == 1
        && (ab[0].x - 2.0 / 3.0).abs() < 1e-9
        && (ab[0].y - 2.0 / 3.0).abs() < 1e-9
        && (ab[0].score - 0.6).abs() < 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut count_mismatch = 0;
    for _ in 0..200 {
        let models = rng.random_range(1..=3);
        let centers: Vec<(f64, f64)> = (0..rng.random_range(1..=3))
            .map(|_| (rng.random_range(0.0..60.0), rng.random_range(0.0..60.0)))
            .collect();
        let sets: Vec<Vec<BBox<f64>>> = (0..models)
            .map(|_| {
                (0..rng.random_range(0..=5))
                    .map(|_| {
                        let (cx, cy) = centers[rng.random_range(0..centers.len())];
                        BBox::new(
                            cx + rng.random_range(-4.0..4.0),
                            cy + rng.random_range(-4.0..4.0),
                            rng.random_range(15.0..25.0),
                            rng.random_range(15.0..25.0),
                            rng.random_range(0.05..1.0),
                            1,
                        )
                    })
                    .collect()
            })
            .collect();
        let weights: Vec<f64> = (0..models).map(|_| rng.random_range(0.5..2.0)).collect();
        let params = WbfParams {
            iou_thresh: rng.random_range(0.3..0.7),
            score_thresh: 0.05,
            weights: weights.clone(),
            rescale: true,
        };
        let mut ours: Vec<[f64; 5]> = wbf(&sets, &params)
            .unwrap()
            .iter()
            .map(|f| [f.x, f.y, f.right(), f.bottom(), f.score])
            .collect();
        ours.sort_by(|a, b| b[4].partial_cmp(&a[4]).unwrap().then(a[0].partial_cmp(&b[0]).unwrap()));
        let reference = oracle_wbf(&sets, &weights, params.iou_thresh, params.score_thresh);
        if ours.len() != reference.len() {
            count_mismatch += 1;
            continue;
        }
        for (o, r) in ours.iter().zip(&reference) {
            for k in 0..5 {
                worst = worst.max((o[k] - r[k]).abs());
            }
        }
    }
    verdict(
        hand && count_mismatch == 0 && worst <= 1e-9,
        format!("hand examples ok: {hand}, 200 random cases: {count_mismatch} cluster-count mismatches, max deviation {worst:.2e} (tol 1e-9)"),
    )
}

// --------------------------------------------------------------- 4: metrics

type Frames = BTreeMap<u32, Vec<(u64, BBox<f64>)>>;

fn frames_of(tracks: &[Trajectory<f64>]) -> Frames {
    let mut out: Frames = BTreeMap::new();
    for t in tracks {
        for (&f, b) in &t.boxes {
            out.entry(f).or_default().push((t.id, *b));
        }
    }
    out
}

/// All partial matchings between `n` rows and `m` columns restricted to
/// pairs with positive score, maximizing the total score.
fn brute_matching(score: &dyn Fn(usize, usize) -> f64, n: usize, m: usize) -> Vec<(usize, usize)> {
    fn rec(
        r: usize,
        n: usize,
        m: usize,
        score: &dyn Fn(usize, usize) -> f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        total: f64,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if r == n {
            if total > best.0 {
                *best = (total, cur.clone());
            }
            return;
        }
        rec(r + 1, n, m, score, used, cur, total, best);
        for c in 0..m {
            let s = score(r, c);
            if !used[c] && s > 0.0 {
                used[c] = true;
                cur.push((r, c));
                rec(r + 1, n, m, score, used, cur, total + s, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    rec(0, n, m, score, &mut vec![false; m], &mut Vec::new(), 0.0, &mut best);
    best.1
}

struct OracleScores {
    mota: f64,
    idf1: f64,
    hota: f64,
}

fn oracle_metrics(pred: &[Trajectory<f64>], gt: &[Trajectory<f64>]) -> OracleScores {
    let gf = frames_of(gt);
    let pf = frames_of(pred);
    let frames: Vec<u32> = gf.keys().chain(pf.keys()).copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let empty = Vec::new();
    let num_gt: usize = gf.values().map(|v| v.len()).sum();
    let num_pred: usize = pf.values().map(|v| v.len()).sum();

    // CLEAR
    let (mut tp, mut fp, mut fneg, mut idsw) = (0usize, 0usize, 0usize, 0usize);
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let mut prev_step: HashMap<u64, u64> = HashMap::new();
    for f in &frames {
        let g = gf.get(f).unwrap_or(&empty);
        let p = pf.get(f).unwrap_or(&empty);
        if g.is_empty() {
            fp += p.len();
            continue;
        }
        if p.is_empty() {
            fneg += g.len();
            continue;
        }
        let score = |r: usize, c: usize| {
            let v = iou(&g[r].1, &p[c].1);
            if v < 0.5 - f64::EPSILON {
                0.0
            } else {
                v + if prev_step.get(&g[r].0) == Some(&p[c].0) { 1000.0 } else { 0.0 }
            }
        };
        let matches = brute_matching(&score, g.len(), p.len());
        prev_step.clear();
        for &(r, c) in &matches {
            if last_match.get(&g[r].0).is_some_and(|&q| q != p[c].0) {
                idsw += 1;
            }
            last_match.insert(g[r].0, p[c].0);
            prev_step.insert(g[r].0, p[c].0);
        }
        tp += matches.len();
        fneg += g.len() - matches.len();
        fp += p.len() - matches.len();
    }
    let _ = tp;
    let mota = 1.0 - (fneg + fp + idsw) as f64 / num_gt.max(1) as f64;

    // IDF1: exhaustive over identity injections
    let gids: Vec<u64> = gt.iter().map(|t| t.id).collect();
    let pids: Vec<u64> = pred.iter().map(|t| t.id).collect();
    let overlap = |gi: u64, pi: u64| -> f64 {
        let (gt_t, pr_t) = (gt.iter().find(|t| t.id == gi).unwrap(), pred.iter().find(|t| t.id == pi).unwrap());
        gt_t.boxes
            .iter()
            .filter(|(f, b)| pr_t.get(**f).is_some_and(|pb| iou(*b, pb) >= 0.5))
            .count() as f64
    };
    let id_score = |r: usize, c: usize| overlap(gids[r], pids[c]);
    let idm = brute_matching(&id_score, gids.len(), pids.len());
    let idtp: f64 = idm.iter().map(|&(r, c)| id_score(r, c)).sum();
    let idf1 = idtp / (0.5 * (num_gt + num_pred) as f64).max(1.0);

    // HOTA
    let mut gcount: HashMap<u64, f64> = HashMap::new();
    let mut pcount: HashMap<u64, f64> = HashMap::new();
    let mut potential: HashMap<(u64, u64), f64> = HashMap::new();
    for f in &frames {
        let g = gf.get(f).unwrap_or(&empty);
        let p = pf.get(f).unwrap_or(&empty);
        for (gi, gb) in g {
            *gcount.entry(*gi).or_default() += 1.0;
            for (pi, pb) in p {
                let s = iou(gb, pb);
                let rs: f64 = p.iter().map(|(_, b)| iou(gb, b)).sum();
                let cs: f64 = g.iter().map(|(_, b)| iou(b, pb)).sum();
                let denom = rs + cs - s;
                if denom > f64::EPSILON {
                    *potential.entry((*gi, *pi)).or_default() += s / denom;
                }
            }
        }
        for (pi, _) in p {
            *pcount.entry(*pi).or_default() += 1.0;
        }
    }
    let align = |gi: u64, pi: u64| {
        let pot = potential.get(&(gi, pi)).copied().unwrap_or(0.0);
        pot / (gcount[&gi] + pcount[&pi] - pot)
    };
    let mut hota_sum = 0.0;
    let mut per_frame_matches = Vec::new();
    for f in &frames {
        let g = gf.get(f).unwrap_or(&empty);
        let p = pf.get(f).unwrap_or(&empty);
        let score = |r: usize, c: usize| align(g[r].0, p[c].0) * iou(&g[r].1, &p[c].1);
        let m: Vec<(u64, u64, f64)> = brute_matching(&score, g.len(), p.len())
            .into_iter()
            .map(|(r, c)| (g[r].0, p[c].0, iou(&g[r].1, &p[c].1)))
            .collect();
        per_frame_matches.push(m);
    }
    for &alpha in &ALPHAS {
        let mut pair_count: HashMap<(u64, u64), f64> = HashMap::new();
        let mut tp_a = 0.0;
        for m in &per_frame_matches {
            for &(gi, pi, s) in m {
                if s >= alpha - f64::EPSILON {
                    tp_a += 1.0;
                    *pair_count.entry((gi, pi)).or_default() += 1.0;
                }
            }
        }
        let fn_a = num_gt as f64 - tp_a;
        let fp_a = num_pred as f64 - tp_a;
        let deta = tp_a / (tp_a + fn_a + fp_a).max(1.0);
        let assa_sum: f64 = pair_count
            .iter()
            .map(|(&(gi, pi), &c)| c * c / (gcount[&gi] + pcount[&pi] - c).max(1.0))
            .sum();
        let assa = assa_sum / tp_a.max(1.0);
        hota_sum += (deta * assa).sqrt();
    }
    OracleScores {
        mota,
        idf1,
        hota: hota_sum / ALPHAS.len() as f64,
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Trajectory<f64>>, Vec<Trajectory<f64>>) {
    let n_gt = rng.random_range(1..=3u64);
    let n_pred = rng.random_range(0..=3u64);
    let frames = rng.random_range(1..=10u32);
    let starts: Vec<(f64, f64, f64)> = (0..n_gt)
        .map(|_| (rng.random_range(0.0..60.0), rng.random_range(0.0..30.0), rng.random_range(-4.0..4.0)))
        .collect();
    let gt_box = |g: usize, f: u32| {
        let (x, y, v) = starts[g];
        BBox::new(x + v * f as f64, y, 20.0, 40.0, 1.0, f)
    };
    let mut gt = Vec::new();
    for g in 0..n_gt as usize {
        let t = Trajectory::from_boxes(g as u64 + 1, (1..=frames).filter(|_| rng.random_bool(0.85)).map(|f| gt_box(g, f)));
        if !t.is_empty() {
            gt.push(t);
        }
    }
    if gt.is_empty() {
        gt.push(Trajectory::from_boxes(1, [gt_box(0, 1)]));
    }
    let mut pred = Vec::new();
    for p in 0..n_pred {
        let mut src = rng.random_range(0..n_gt as usize);
        let mut boxes = Vec::new();
        for f in 1..=frames {
            if rng.random_bool(0.15) {
                src = rng.random_range(0..n_gt as usize);
            }
            if rng.random_bool(0.8) {
                let g = gt_box(src, f);
                let s = if rng.random_bool(0.1) { 8.0 } else { 3.0 };
                boxes.push(BBox::new(g.x + rng.random_range(-s..s), g.y + rng.random_range(-s..s), g.w, g.h, 0.9, f));
            }
        }
        if !boxes.is_empty() {
            pred.push(Trajectory::from_boxes(p + 1, boxes));
        }
    }
    (pred, gt)
}

fn criterion_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (pred, gt) = random_instance(&mut rng);
        let ours = evaluate(&pred, &gt, &EvalOptions::default());
        let o = oracle_metrics(&pred, &gt);
        worst = worst
            .max((ours.clear.mota() - o.mota).abs())
            .max((ours.id.idf1() - o.idf1).abs())
            .max((ours.hota.hota() - o.hota).abs());
    }
    let mut identity = true;
    for _ in 0..20 {
        let (_, gt) = random_instance(&mut rng);
        let r = evaluate(&gt, &gt, &EvalOptions::default()).report();
        identity &= r.mota == 1.0 && r.idf1 == 1.0 && r.hota == 1.0 && r.deta == 1.0 && r.assa == 1.0;
    }
    verdict(
        worst <= 1e-9 && identity,
        format!("100 random cases, max |ours - oracle| {worst:.2e} (tol 1e-9), pred = gt gives 1.0: {identity}"),
    )
}

// ---------------------------------------------------------- 5: noiseless e2e

fn criterion_noiseless() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut all = true;
    let mut detail = Vec::new();
    for seed in 0..5 {
        let sim = generate(&SimConfig::noiseless(seed)).unwrap();
        let seq = LabelledSequence::from(&sim);
        let pred = run_sequence(&seq.input, &cfg).unwrap();
        let r = evaluate_sequence(&pred, &seq.gt, &cfg.eval).report();
        let ok = r.hota == 1.0 && r.idf1 == 1.0 && r.mota == 1.0;
        all &= ok;
        if !ok {
            detail.push(format!("seed {seed}: HOTA {} IDF1 {} MOTA {}", r.hota, r.idf1, r.mota));
        }
    }
    verdict(all, if all { "5 noiseless seeds: HOTA = IDF1 = MOTA = 1.0".into() } else { detail.join("; ") })
}

// -------------------------------------------------------- 6: directionality

const SEEDS: u64 = 20;

fn suite_config(seed: u64) -> SimConfig {
    SimConfig {
        drop_prob: 0.2,
        jitter: 2.0,
        fp_rate: 0.5,
        clip_at_border: true,
        seed,
        ..SimConfig::default()
    }
}

fn mean_scores(sims: &[SimConfig], comps: Components) -> (f64, f64, f64) {
    let base = PipelineConfig::default();
    let cfg = comps.apply(&base);
    let mut hota = 0.0;
    let mut idf1 = 0.0;
    let mut ids = 0.0;
    for s in sims {
        let out = generate(s).unwrap();
        let seq = LabelledSequence::from(&out);
        let pred = run_sequence(&seq.input, &cfg).unwrap();
        let st = evaluate_sequence(&pred, &seq.gt, &cfg.eval);
        hota += st.hota.hota();
        idf1 += st.id.idf1();
        ids += st.num_pred_ids as f64;
    }
    let n = sims.len() as f64;
    (100.0 * hota / n, 100.0 * idf1 / n, ids / n)
}

fn criterion_directionality() -> Outcome {
    let start = Instant::now();
    let all_on = Components { fullbox: true, motion_comp: true, gsi: true, merge: false };

    // (a) interpolation on static sequences
    let static_sims: Vec<SimConfig> = (0..SEEDS).map(suite_config).collect();
    let (a_off, _, _) = mean_scores(&static_sims, Components { gsi: false, ..all_on });
    let (a_on, _, _) = mean_scores(&static_sims, all_on);

    // (b) warp compensation on a panning, shaking camera. A constant pan alone is
    // absorbed by the constant-velocity model, and large people survive shake
    // within the IoU gate, so this uses small, distant pedestrians.
    let pan_sims: Vec<SimConfig> = (0..SEEDS)
        .map(|s| SimConfig { camera_pan: (8.0, 0.0), camera_shake: 6.0, height_model: (0.1, 10.0), ..suite_config(100 + s) })
        .collect();
    let (b_off, _, _) = mean_scores(&pan_sims, Components { motion_comp: false, ..all_on });
    let (b_on, _, _) = mean_scores(&pan_sims, all_on);

    // (c) full-box extension on sequences with many bottom-clipped people
    let clip_sims: Vec<SimConfig> = (0..SEEDS)
        .map(|s| SimConfig { spawn_bottom: (0.85, 1.25), ..suite_config(200 + s) })
        .collect();
    let (c_off, _, _) = mean_scores(&clip_sims, Components { fullbox: false, ..all_on });
    let (c_on, _, _) = mean_scores(&clip_sims, all_on);

    // (d) track merge on static sequences with forced fragmentation
    let frag_sims: Vec<SimConfig> = (0..SEEDS)
        .map(|s| SimConfig {
            occlusion: Some(Occlusion { prob: 0.7, min_len: 40, max_len: 60 }),
            ..suite_config(300 + s)
        })
        .collect();
    let (_, d_idf1_off, d_ids_off) = mean_scores(&frag_sims, all_on);
    let (_, d_idf1_on, d_ids_on) = mean_scores(&frag_sims, Components { merge: true, ..all_on });

    let a = a_on - a_off >= 2.0;
    let b = b_on - b_off >= 5.0;
    let c = c_on - c_off >= 2.0;
    let d = d_idf1_on - d_idf1_off >= 5.0 && d_ids_on < d_ids_off;
    let (fast, time) = within_budget(start.elapsed(), 120.0);
    verdict(
        a && b && c && d && fast,
        format!(
            "(a) GSI {a_off:.1} -> {a_on:.1} HOTA [{}]; (b) warps {b_off:.1} -> {b_on:.1} HOTA [{}]; \
             (c) fullbox {c_off:.1} -> {c_on:.1} HOTA [{}]; (d) merge IDF1 {d_idf1_off:.1} -> {d_idf1_on:.1}, \
             ids {d_ids_off:.1} -> {d_ids_on:.1} [{}]; {time}",
            ok(a),
            ok(b),
            ok(c),
            ok(d)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

// ------------------------------------------------------------------- 7: PPO

fn criterion_search() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut drift: f64 = 0.0;
    for seed in 0..100 {
        let cfg = SearchConfig { seed, ..SearchConfig::new(1) };
        let r = search(|x| Ok(-(x[0] - 0.7).powi(2)), &cfg).unwrap();
        if (r.best_params[0] - 0.7).abs() <= 0.05 {
            hits += 1;
        }
        let c = search(|_| Ok(0.25), &cfg).unwrap();
        drift = drift.max((c.means.last().unwrap()[0] - 0.5).abs());
    }
    let (fast, time) = within_budget(start.elapsed(), 30.0);
    verdict(
        hits >= 95 && drift < 0.01 && fast,
        format!("{hits}/100 seeds within 0.05 of 0.7 (need 95), constant-objective drift {drift:.2e} (limit 0.01), {time}"),
    )
}

// ----------------------------------------------------------- 8: consistency

fn criterion_consistency() -> Outcome {
    let identical = FeaturePyramidSet::new(vec![vec![vec![1.5, -2.0], vec![0.25]]; 3]);
    let zero = pyramid_consistency_loss(&identical).unwrap() == 0.0;
    let example = FeaturePyramidSet::new(vec![vec![vec![0.0]], vec![vec![2.0]]]);
    let one = pyramid_consistency_loss(&example).unwrap() == 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let styles = rng.random_range(2..=5);
        let dims: Vec<usize> = (0..rng.random_range(1..=4)).map(|_| rng.random_range(1..=6)).collect();
        let features: Vec<Vec<Vec<f64>>> = (0..styles)
            .map(|_| dims.iter().map(|&d| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect())
            .collect();
        let mut p = FeaturePyramidSet::new(features);
        p.layer_weights = dims.iter().map(|_| rng.random_range(0.1..2.0)).collect();
        let base = pyramid_consistency_loss(&p).unwrap();
        let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);

        let mut perm = p.clone();
        perm.features.shuffle(&mut rng);
        worst = worst.max(rel(pyramid_consistency_loss(&perm).unwrap(), base));

        let c = rng.random_range(0.1..5.0);
        let mut scaled = p.clone();
        scaled.layer_weights.iter_mut().for_each(|l| *l *= c);
        worst = worst.max(rel(pyramid_consistency_loss(&scaled).unwrap(), c * base));

        // additivity in lambda
        let extra: Vec<f64> = dims.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        let mut q = p.clone();
        q.layer_weights = extra.clone();
        let mut sum = p.clone();
        sum.layer_weights = p.layer_weights.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let lhs = pyramid_consistency_loss(&sum).unwrap();
        let rhs = base + pyramid_consistency_loss(&q).unwrap();
        worst = worst.max(rel(lhs, rhs));
        if base < 0.0 {
            worst = f64::INFINITY;
        }
    }
    verdict(
        zero && one && worst <= 1e-9,
        format!("identical styles 0: {zero}, K=1 example 1.0: {one}, 1000 random pyramids: max relative error {worst:.1e} (tol 1e-9)"),
    )
}

// ------------------------------------------------------------ 9: MOT17 data

fn criterion_mot17() -> Outcome {
    let Ok(root) = std::env::var("TRACKKIT_MOT17_DIR") else {
        return Outcome::Skip("set TRACKKIT_MOT17_DIR to a MOT17 train directory to run".into());
    };
    let root = std::path::PathBuf::from(root);
    let load = |dir: &std::path::Path| -> Result<(LabelledSequence, Vec<trackkit::metrics::GtBox>), String> {
        let read = |p: &str| std::fs::read_to_string(dir.join(p)).map_err(|e| format!("{}: {e}", dir.join(p).display()));
        let meta = moio::parse_seqinfo(&read("seqinfo.ini")?).map_err(|e| e.to_string())?;
        let gt = moio::parse_gt(&read("gt/gt.txt")?).map_err(|e| e.to_string())?;
        let dets = moio::parse_detections(&read("det/det.txt")?).map_err(|e| e.to_string())?;
        let seq = LabelledSequence {
            input: SequenceInput { meta, dets: dets.frames, warps: None, height_samples: None },
            gt: gt.clone(),
        };
        Ok((seq, gt))
    };
    let mut dirs: Vec<_> = match std::fs::read_dir(&root) {
        Ok(it) => it.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join("gt/gt.txt").exists()).collect(),
        Err(e) => return Outcome::Fail(format!("{}: {e}", root.display())),
    };
    dirs.sort();
    if dirs.is_empty() {
        return Outcome::Fail(format!("no sequences with gt under {}", root.display()));
    }
    let cfg = PipelineConfig::default();
    let mut self_ok = true;
    for d in &dirs {
        let (seq, gt) = match load(d) {
            Ok(v) => v,
            Err(e) => return Outcome::Fail(e),
        };
        let pred = moio::gt_trajectories(&gt);
        let r = evaluate_sequence(&pred, &seq.gt, &cfg.eval).report();
        self_ok &= (r.hota - 1.0).abs() < 1e-12;
    }
    let Some(d04) = dirs.iter().find(|d| d.file_name().is_some_and(|n| n.to_string_lossy().contains("-04"))) else {
        return verdict(self_ok, format!("gt self-evaluation HOTA 100: {self_ok}; sequence 04 not found"));
    };
    let (mut seq, _) = match load(d04) {
        Ok(v) => v,
        Err(e) => return Outcome::Fail(e),
    };
    seq.input.meta.scene_kind = SceneKind::Static;
    let rows = match run_ablation(&[seq], &cfg, &Components::cumulative()) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let hotas: Vec<f64> = rows.iter().map(|r| 100.0 * r.table.all.hota.hota()).collect();
    let monotone = hotas.windows(2).all(|w| w[1] >= w[0] - 0.5);
    println!("{}", format_ablation(&rows, "(det)"));
    verdict(
        self_ok && monotone,
        format!("gt self-evaluation HOTA 100: {self_ok}; sequence 04 ablation HOTA {hotas:.1?} monotone within 0.5: {monotone}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Kalman oracle", criterion_kalman),
        ("assignment oracle", criterion_assignment),
        ("WBF oracle", criterion_wbf),
        ("metrics oracle", criterion_metrics),
        ("noiseless end-to-end", criterion_noiseless),
        ("component directionality", criterion_directionality),
        ("PPO2 convergence", criterion_search),
        ("consistency loss", criterion_consistency),
        ("MOT17 data check", criterion_mot17),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let tag = format!("{}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| f == &tag || name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Outcome::Pass(d) => println!("acceptance {tag} [{name}]: PASS - {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("acceptance {tag} [{name}]: FAIL - {d}");
            }
            Outcome::Skip(d) => println!("acceptance {tag} [{name}]: SKIP - {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
