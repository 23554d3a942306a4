//! Oracles, fixtures and the acceptance checks shared by the test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use hsi_bandsel::bandcorr::{
    average_band_correlation, correlation_matrix, select_bands_by_abc, AbcVector,
};
use hsi_bandsel::baselines::pca_inverse_transform;
use hsi_bandsel::classify::KernelSpec;
use hsi_bandsel::cube::{save_cube, save_ground_truth, BandGroup, GroundTruthMap, SyntheticSpec};
use hsi_bandsel::pipeline::{cmd_classify, cmd_compare, cmd_select, Method, RunConfig};
use hsi_bandsel::{
    mask_background, pca_fit, pca_transform, report, standardize, svm_predict, svm_train,
    synthesize_cube, ConfusionMatrix, CorrelationMatrix, PixelMatrix, SvmConfig, SvmModel,
};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

/// Two-pass double-loop Pearson matrix; zero-variance bands get r = 0.
pub fn naive_correlation(pm: &PixelMatrix) -> Vec<f64> {
    let (n, nb) = (pm.n_pixels(), pm.n_bands());
    let mean: Vec<f64> = (0..nb)
        .map(|b| (0..n).map(|p| pm.get(p, b)).sum::<f64>() / n as f64)
        .collect();
    let mut out = vec![0.0; nb * nb];
    for i in 0..nb {
        for j in 0..nb {
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for p in 0..n {
                let dx = pm.get(p, i) - mean[i];
                let dy = pm.get(p, j) - mean[j];
                sxy += dx * dy;
                sxx += dx * dx;
                syy += dy * dy;
            }
            out[i * nb + j] = if sxx == 0.0 || syy == 0.0 {
                0.0
            } else {
                sxy / (sxx * syy).sqrt()
            };
        }
    }
    out
}

/// Direct evaluation of the average band correlation formula.
pub fn abc_oracle(cm: &CorrelationMatrix) -> Vec<f64> {
    let n = cm.n_bands();
    (0..n)
        .map(|i| {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| cm.get(i, j).abs()).sum();
            s / (n - 1) as f64
        })
        .collect()
}

/// Cyclic Jacobi eigensolver for a small symmetric matrix. Returns
/// eigenvalues in descending order with their unit eigenvectors.
pub fn jacobi_eigen(n: usize, matrix: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|c| (a[c * n + c], (0..n).map(|r| v[r * n + c]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

/// Sample covariance (1/(n-1)) by direct double loop.
pub fn naive_covariance(pm: &PixelMatrix) -> Vec<f64> {
    let (n, nb) = (pm.n_pixels(), pm.n_bands());
    let mean: Vec<f64> = (0..nb)
        .map(|b| (0..n).map(|p| pm.get(p, b)).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; nb * nb];
    for i in 0..nb {
        for j in 0..nb {
            let s: f64 = (0..n)
                .map(|p| (pm.get(p, i) - mean[i]) * (pm.get(p, j) - mean[j]))
                .sum();
            cov[i * nb + j] = s / (n - 1) as f64;
        }
    }
    cov
}

/// Brute-force metrics from raw counts: per-class (precision, recall, f1),
/// OA in percent, kappa. 0/0 gives 0; kappa is 1 when chance agreement is 1.
pub struct MetricsOracle {
    pub per_class: Vec<(f64, f64, f64)>,
    pub oa: f64,
    pub kappa: f64,
}

pub fn metrics_oracle(k: usize, counts: &[u64]) -> MetricsOracle {
    let at = |t: usize, p: usize| counts[t * k + p] as f64;
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut per_class = Vec::new();
    let mut agree = 0.0;
    let mut chance = 0.0;
    for c in 0..k {
        let row: f64 = (0..k).map(|p| at(c, p)).sum();
        let col: f64 = (0..k).map(|t| at(t, c)).sum();
        let precision = div(at(c, c), col);
        let recall = div(at(c, c), row);
        let f1 = div(2.0 * precision * recall, precision + recall);
        per_class.push((precision, recall, f1));
        agree += at(c, c);
        chance += row * col;
    }
    let p_o = agree / total;
    let p_e = chance / (total * total);
    let kappa = if p_e == 1.0 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    MetricsOracle {
        per_class,
        oa: 100.0 * p_o,
        kappa,
    }
}

// --------------------------------------------------------------- fixtures

/// Random `n × nb` matrix; with `degenerate` set, one band is constant.
pub fn random_pixels(
    rng: &mut impl Rng,
    n: usize,
    nb: usize,
    degenerate: Option<usize>,
) -> PixelMatrix {
    let latent: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let weights: Vec<f64> = (0..nb).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scale: Vec<f64> = (0..nb).map(|_| rng.random_range(0.1..50.0)).collect();
    let mut values = Vec::with_capacity(n * nb);
    for l in latent.iter().take(n) {
        for b in 0..nb {
            let v = if Some(b) == degenerate {
                3.25
            } else {
                let e: f64 = rng.sample(StandardNormal);
                scale[b] * (weights[b] * l + e) + b as f64
            };
            values.push(v);
        }
    }
    PixelMatrix::from_values(nb, values).unwrap()
}

/// Symmetric matrix with unit diagonal and entries in [-1, 1].
pub fn random_correlation(rng: &mut impl Rng, n: usize) -> CorrelationMatrix {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
        for j in i + 1..n {
            let r = rng.random_range(-1.0..=1.0);
            v[i * n + j] = r;
            v[j * n + i] = r;
        }
    }
    CorrelationMatrix::from_values(n, v).unwrap()
}

/// Single-class scene of `groups`, no class structure, 2-pixel border.
pub fn grouped_scene(groups: Vec<BandGroup>, size: usize, seed: u64) -> PixelMatrix {
    let n: usize = groups.iter().map(|g| g.size).sum();
    let spec = SyntheticSpec {
        width: size,
        height: size,
        groups,
        class_means: vec![vec![0.0; n]],
        noise_std: 1.0,
        background_border: 2,
    };
    let (cube, gt) = synthesize_cube(&spec, seed).unwrap();
    let pm = mask_background(&cube, &gt).unwrap();
    standardize(&pm).unwrap().0
}

/// Two Gaussian blobs in 2-D, labels 1 and 2.
pub fn blobs(seed: u64, per_class: usize) -> (PixelMatrix, Vec<u16>) {
    let mut r = rng(seed);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (label, center) in [(1u16, -2.0), (2u16, 2.0)] {
        for _ in 0..per_class {
            let dx: f64 = r.sample(StandardNormal);
            let dy: f64 = r.sample(StandardNormal);
            values.push(center + 0.5 * dx);
            values.push(center + 0.5 * dy);
            labels.push(label);
        }
    }
    (PixelMatrix::from_values(2, values).unwrap(), labels)
}

/// Four clusters on the corners of a square; opposite corners share a label.
pub fn xor(seed: u64, per_corner: usize) -> (PixelMatrix, Vec<u16>) {
    let mut r = rng(seed);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (sx, sy) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
        let label = if sx * sy > 0.0 { 1 } else { 2 };
        for _ in 0..per_corner {
            let dx: f64 = r.sample(StandardNormal);
            let dy: f64 = r.sample(StandardNormal);
            values.push(sx + 0.25 * dx);
            values.push(sy + 0.25 * dy);
            labels.push(label);
        }
    }
    (PixelMatrix::from_values(2, values).unwrap(), labels)
}

pub fn accuracy(truth: &[u16], predicted: &[u16]) -> f64 {
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Writes the demo scene plus a config into `dir`; returns the config.
pub fn synthetic_dataset(dir: &Path, seed: u64) -> RunConfig {
    let (cube, gt) = synthesize_cube(&SyntheticSpec::demo(), seed).unwrap();
    save_cube(&cube, dir.join("scene.hdr")).unwrap();
    save_ground_truth(&gt, dir.join("scene_gt.hdr")).unwrap();
    RunConfig {
        cube: Some(dir.join("scene.hdr")),
        ground_truth: Some(dir.join("scene_gt.hdr")),
        out_dir: dir.join("out"),
        ..RunConfig::default()
    }
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

// ---------------------------------------------------- acceptance checks

pub fn criterion_1() -> Check {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = r.random_range(3..=500);
        let nb = r.random_range(2..=16);
        let degenerate = (case % 5 == 0).then(|| r.random_range(0..nb));
        let pm = random_pixels(&mut r, n, nb, degenerate);
        let cm = correlation_matrix(&pm).map_err(|e| e.to_string())?;
        let oracle = naive_correlation(&pm);
        for i in 0..nb {
            for j in 0..nb {
                let got = cm.get(i, j);
                ensure(got == cm.get(j, i), || {
                    format!("case {case}: asymmetric at ({i},{j})")
                })?;
                if i == j {
                    if Some(i) != degenerate {
                        ensure(got == 1.0, || format!("case {case}: diagonal {i} = {got}"))?;
                    }
                    continue;
                }
                let err = (got - oracle[i * nb + j]).abs();
                worst = worst.max(err);
                ensure(err <= 1e-10, || {
                    format!("case {case}: ({i},{j}) off by {err:e}")
                })?;
            }
        }
        if let Some(d) = degenerate {
            ensure(cm.zero_variance_bands() == [d], || {
                format!("case {case}: degenerate band not flagged")
            })?;
        }
    }
    Ok(format!("100 cases, max error {worst:.1e}"))
}

pub fn criterion_2() -> Check {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = r.random_range(2..=32);
        let cm = random_correlation(&mut r, n);
        let abc = average_band_correlation(&cm);
        let oracle = abc_oracle(&cm);
        for (i, (&a, &o)) in abc.values().iter().zip(&oracle).enumerate() {
            ensure((0.0..=1.0).contains(&a), || {
                format!("case {case}: ABC[{i}] = {a}")
            })?;
            worst = worst.max((a - o).abs());
            ensure((a - o).abs() <= 1e-12, || {
                format!("case {case}: ABC[{i}] off by {:e}", (a - o).abs())
            })?;
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let mut pv = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                pv[i * n + j] = cm.get(perm[i], perm[j]);
            }
        }
        let pabc = average_band_correlation(&CorrelationMatrix::from_values(n, pv).unwrap());
        for (i, &pi) in perm.iter().enumerate() {
            ensure(pabc.values()[i] == abc.values()[pi], || {
                format!("case {case}: permutation equivariance broken at {i}")
            })?;
        }
    }
    Ok(format!(
        "100 cases, max error {worst:.1e}, permutation exact"
    ))
}

fn selected_set(abc: &AbcVector, t: f64) -> Vec<usize> {
    select_bands_by_abc(abc, t)
        .map(|s| s.selected)
        .unwrap_or_default()
}

pub fn criterion_3() -> Check {
    let abc = AbcVector::new(vec![0.65, 0.6499999999999999, 0.3, 0.9]).unwrap();
    let sel = selected_set(&abc, 0.65);
    ensure(sel == [1, 2], || {
        format!("boundary: selected {sel:?}, expected [1, 2]")
    })?;
    let only = AbcVector::new(vec![0.65, 0.65]).unwrap();
    ensure(select_bands_by_abc(&only, 0.65).is_err(), || {
        "all-equal-to-threshold must select nothing".into()
    })?;

    let mut r = rng(3);
    for case in 0..200 {
        let n = r.random_range(1..=40);
        let abc = AbcVector::new((0..n).map(|_| r.random_range(0.0..=1.0)).collect()).unwrap();
        let mut t1: f64 = r.random_range(0.01..=1.0);
        let mut t2: f64 = r.random_range(0.01..=1.0);
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        let (s1, s2) = (selected_set(&abc, t1), selected_set(&abc, t2));
        ensure(s1.iter().all(|b| s2.contains(b)), || {
            format!("case {case}: {t1} ⊄ {t2}")
        })?;
        ensure(s2.iter().all(|&b| abc.values()[b] < t2), || {
            format!("case {case}: non-strict selection")
        })?;
    }
    Ok("boundary excluded, 200 monotonicity cases".into())
}

pub fn criterion_4() -> Check {
    let mut groups = vec![BandGroup { size: 6, rho: 0.95 }];
    groups.extend((0..4).map(|_| BandGroup { size: 1, rho: 0.0 }));
    let mut detail = String::new();
    for seed in [11, 12, 13] {
        let pm = grouped_scene(groups.clone(), 64, seed);
        let cm = correlation_matrix(&pm).map_err(|e| e.to_string())?;
        let abc = average_band_correlation(&cm);
        let v = abc.values();
        let grouped_min = v[..6].iter().cloned().fold(f64::INFINITY, f64::min);
        let independent_max = v[6..].iter().cloned().fold(0.0, f64::max);
        ensure(independent_max < grouped_min, || {
            format!(
                "seed {seed}: independent max {independent_max:.3} >= grouped min {grouped_min:.3}"
            )
        })?;
        let sel = selected_set(&abc, 0.65);
        ensure((6..10).all(|b| sel.contains(&b)), || {
            format!("seed {seed}: selection {sel:?}")
        })?;
        detail = format!("grouped min {grouped_min:.3}, independent max {independent_max:.3}");
    }
    Ok(detail)
}

pub fn criterion_5() -> Check {
    let mut r = rng(5);
    // Orthonormality and the reconstruction identity on full-rank data.
    let pm = random_pixels(&mut r, 300, 8, None);
    let model = pca_fit(&pm, 3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for a in 0..model.k() {
        for b in 0..model.k() {
            let dot: f64 = model
                .component(a)
                .iter()
                .zip(model.component(b))
                .map(|(x, y)| x * y)
                .sum();
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("orthonormality error {worst:e}"))?;

    let scores = pca_transform(&pm, &model).map_err(|e| e.to_string())?;
    let back = pca_inverse_transform(&scores, &model).map_err(|e| e.to_string())?;
    let residual: f64 = pm
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let full = pca_fit(&pm, 8).map_err(|e| e.to_string())?;
    let discarded: f64 = full.eigenvalues[3..].iter().sum::<f64>() * (pm.n_pixels() - 1) as f64;
    let rel = (residual - discarded).abs() / discarded;
    ensure(rel <= 1e-6, || {
        format!("reconstruction identity off by {rel:e} relative")
    })?;

    // Rank-k data.
    let (n, nb, k) = (400, 10, 3);
    let basis: Vec<f64> = (0..k * nb).map(|_| r.sample(StandardNormal)).collect();
    let mut values = Vec::with_capacity(n * nb);
    for _ in 0..n {
        let s: Vec<f64> = (0..k).map(|_| r.sample(StandardNormal)).collect();
        for b in 0..nb {
            values.push((0..k).map(|c| s[c] * basis[c * nb + b]).sum::<f64>() + 7.0);
        }
    }
    let low = PixelMatrix::from_values(nb, values).unwrap();
    let ratio = pca_fit(&low, k)
        .map_err(|e| e.to_string())?
        .cumulative_variance_ratio;
    ensure(ratio >= 0.999, || {
        format!("rank-{k} cumulative ratio {ratio}")
    })?;
    Ok(format!(
        "orthonormality {worst:.1e}, identity {rel:.1e}, rank-{k} ratio {ratio:.6}"
    ))
}

pub fn criterion_6() -> Check {
    let mut checked = 0usize;
    for code in 0..4usize.pow(9) {
        let counts: Vec<u64> = (0..9)
            .map(|i| ((code / 4usize.pow(i as u32)) % 4) as u64)
            .collect();
        if counts.iter().all(|&c| c == 0) {
            continue;
        }
        let cm = ConfusionMatrix::from_counts(3, counts.clone()).map_err(|e| e.to_string())?;
        let rep = report(&cm).map_err(|e| e.to_string())?;
        let want = metrics_oracle(3, &counts);
        for (c, m) in rep.classes.iter().enumerate() {
            let (p, r, f) = want.per_class[c];
            let err = (m.precision - p)
                .abs()
                .max((m.recall - r).abs())
                .max((m.f1 - f).abs());
            ensure(err <= 1e-12, || {
                format!("{counts:?}: class {} off by {err:e}", c + 1)
            })?;
        }
        ensure((rep.overall_accuracy - want.oa).abs() <= 1e-12, || {
            format!("{counts:?}: OA")
        })?;
        ensure((rep.kappa - want.kappa).abs() <= 1e-12, || {
            format!("{counts:?}: kappa")
        })?;
        let diagonal = (0..3).all(|t| (0..3).all(|p| t == p || counts[t * 3 + p] == 0));
        ensure((rep.kappa == 1.0) == diagonal, || {
            format!("{counts:?}: kappa=1 iff diagonal")
        })?;
        checked += 1;
    }
    let chance = report(&ConfusionMatrix::from_counts(2, vec![1, 1, 1, 1]).unwrap()).unwrap();
    ensure(chance.kappa == 0.0, || {
        format!("chance fixture kappa {}", chance.kappa)
    })?;
    Ok(format!("{checked} matrices, chance kappa exactly 0"))
}

pub fn dual_feasibility(model: &SvmModel, c: f64, tolerance: f64) -> Result<(), String> {
    for b in &model.binary {
        ensure(b.dual_coef.iter().all(|a| a.abs() <= c + 1e-12), || {
            format!("class {}: alpha > C", b.label)
        })?;
        let sum: f64 = b.dual_coef.iter().sum();
        ensure(sum.abs() <= 10.0 * tolerance, || {
            format!("class {}: |sum alpha y| = {sum:e}", b.label)
        })?;
    }
    Ok(())
}

pub fn criterion_7() -> Check {
    let linear = SvmConfig {
        kernel: KernelSpec::Linear,
        ..SvmConfig::default()
    };
    let (x, y) = blobs(7, 100);
    let model = svm_train(&x, &y, &linear).map_err(|e| e.to_string())?;
    let acc_blobs = accuracy(&y, &svm_predict(&model, &x).map_err(|e| e.to_string())?);
    ensure(acc_blobs >= 0.99, || format!("blobs accuracy {acc_blobs}"))?;
    dual_feasibility(&model, linear.c, linear.tolerance)?;

    let rbf = SvmConfig::default();
    let (x, y) = xor(8, 50);
    let model = svm_train(&x, &y, &rbf).map_err(|e| e.to_string())?;
    let acc_xor = accuracy(&y, &svm_predict(&model, &x).map_err(|e| e.to_string())?);
    ensure(acc_xor >= 0.95, || format!("xor accuracy {acc_xor}"))?;
    dual_feasibility(&model, rbf.c, rbf.tolerance)?;
    Ok(format!(
        "blobs {acc_blobs:.3} (linear), xor {acc_xor:.3} (rbf), duals feasible"
    ))
}

fn classify_outputs(config: &RunConfig) -> Result<Vec<Vec<u8>>, String> {
    cmd_classify(config).map_err(|e| e.to_string())?;
    let tag = config.method.to_string();
    Ok([
        "report.json",
        "predictions.raw",
        "predictions.hdr",
        "map.png",
    ]
    .iter()
    .map(|s| read(config.out_dir.join(format!("{tag}_{s}"))))
    .collect())
}

pub fn criterion_8(work: &Path) -> Check {
    let base = synthetic_dataset(work, 8);
    let mut reference: Option<Vec<Vec<u8>>> = None;
    for method in [Method::Abc, Method::Pca] {
        reference = None;
        for threads in [1, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            for run in 0..2 {
                let config = RunConfig {
                    method,
                    out_dir: work.join(format!("{method}_{threads}_{run}")),
                    ..base.clone()
                };
                let outputs = pool.install(|| classify_outputs(&config))?;
                match &reference {
                    None => reference = Some(outputs),
                    Some(r) => ensure(*r == outputs, || {
                        format!("{method}: outputs differ at {threads} threads, run {run}")
                    })?,
                }
            }
        }
    }
    ensure(reference.is_some(), || "no runs".into())?;
    Ok("abc and pca byte-identical across 2 runs x {1, 8} workers".into())
}

// -------------------------------------------- real-data checks (optional)

pub struct Scene {
    pub name: &'static str,
    pub cube: PathBuf,
    pub gt: PathBuf,
}

/// Scenes found under `HSI_DATA_DIR` (`sa.hdr`/`sa_gt.hdr`, `pa.hdr`/`pa_gt.hdr`).
pub fn real_scenes() -> Option<Vec<Scene>> {
    let dir = PathBuf::from(std::env::var_os("HSI_DATA_DIR")?);
    let scenes: Vec<Scene> = [("sa", "SA"), ("pa", "PA")]
        .into_iter()
        .filter_map(|(stem, name)| {
            let cube = dir.join(format!("{stem}.hdr"));
            let gt = dir.join(format!("{stem}_gt.hdr"));
            (cube.exists() && gt.exists()).then_some(Scene { name, cube, gt })
        })
        .collect();
    (!scenes.is_empty()).then_some(scenes)
}

fn scene_config(scene: &Scene, out: &Path) -> RunConfig {
    let mut config = RunConfig {
        cube: Some(scene.cube.clone()),
        ground_truth: Some(scene.gt.clone()),
        out_dir: out.join(scene.name),
        ..RunConfig::default()
    };
    if let Some(cap) = std::env::var("HSI_SVM_SUBSAMPLE")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        config.svm_subsample = Some(cap);
    }
    config
}

/// Band count when correlation also includes background pixels.
fn unmasked_count(scene: &Scene) -> hsi_bandsel::Result<usize> {
    let cube = hsi_bandsel::load_cube(&scene.cube)?;
    let everything = GroundTruthMap::new(cube.width(), cube.height(), vec![1; cube.n_pixels()])?;
    let pm = standardize(&mask_background(&cube, &everything)?)?.0;
    let abc = average_band_correlation(&correlation_matrix(&pm)?);
    Ok(selected_set(&abc, 0.65).len())
}

pub fn criterion_9(scenes: &[Scene], out: &Path) -> Check {
    let mut detail = Vec::new();
    let mut failed = false;
    for s in scenes {
        let want = if s.name == "SA" { 88 } else { 54 };
        let got = cmd_select(&scene_config(s, out))
            .map_err(|e| e.to_string())?
            .selection
            .len();
        failed |= got != want;
        let unmasked = unmasked_count(s).map_err(|e| e.to_string())?;
        detail.push(format!(
            "{} {got} (expected {want}; all-pixel variant {unmasked})",
            s.name
        ));
    }
    if failed {
        Err(detail.join(", "))
    } else {
        Ok(detail.join(", "))
    }
}

pub fn criterion_10(scenes: &[Scene], out: &Path) -> Check {
    let mut detail = Vec::new();
    let mut failed = false;
    for s in scenes {
        let want = if s.name == "SA" { 98.83 } else { 99.51 };
        let config = scene_config(s, out);
        let cube = hsi_bandsel::load_cube(&s.cube).map_err(|e| e.to_string())?;
        let gt = hsi_bandsel::load_ground_truth(&s.gt).map_err(|e| e.to_string())?;
        let pm = mask_background(&cube, &gt).map_err(|e| e.to_string())?;
        let pm = standardize(&pm).map_err(|e| e.to_string())?.0;
        let got = 100.0
            * pca_fit(&pm, config.pca_k)
                .map_err(|e| e.to_string())?
                .cumulative_variance_ratio;
        failed |= (got - want).abs() > 0.5;
        detail.push(format!("{} {got:.2}% (expected {want} ± 0.5)", s.name));
    }
    if failed {
        Err(detail.join(", "))
    } else {
        Ok(detail.join(", "))
    }
}

pub fn criterion_11(scenes: &[Scene], out: &Path) -> Check {
    let mut detail = Vec::new();
    let mut failed = false;
    for s in scenes {
        let (abc_want, pca_want, sb_ref) = if s.name == "SA" {
            (89.33, 89.08, 90.41)
        } else {
            (89.56, 81.45, 91.0)
        };
        let cmp = cmd_compare(&[scene_config(s, out)], &[]).map_err(|e| e.to_string())?;
        let oa = |m| {
            cmp.result(m)
                .map_or(f64::NAN, |r| r.report.overall_accuracy)
        };
        let (abc, pca, sb) = (oa(Method::Abc), oa(Method::Pca), oa(Method::Sb));
        failed |= (abc - abc_want).abs() > 3.0 || (pca - pca_want).abs() > 3.0;
        detail.push(format!(
            "{}: proposed {abc:.2} (vs {abc_want}), PCA {pca:.2} (vs {pca_want}), SB stand-in {sb:.2} (reference {sb_ref}, not held)",
            s.name
        ));
    }
    if failed {
        Err(detail.join("; "))
    } else {
        Ok(detail.join("; "))
    }
}
