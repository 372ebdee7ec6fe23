//! Library results against naive reference computations.

use lexspec_core::attract_repel::{attract_cost, regularization_cost, repel_cost, BatchPair};
use lexspec_core::eval::{evaluate_similarity, spearman_rho, SimilarityDataset, SimilarityRecord};
use lexspec_core::nn::{Activation, Mlp, MlpSpec};
use lexspec_core::postspec::{gan_losses, wgan_losses};
use lexspec_core::{Matrix, VectorSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vec_of(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn random_pairs(rng: &mut ChaCha8Rng) -> Vec<BatchPair> {
    let k = rng.random_range(1..20);
    let d = rng.random_range(2..10);
    (0..k)
        .map(|i| BatchPair {
            left_token: format!("l{i}"),
            right_token: format!("r{i}"),
            left: vec_of(rng, d),
            right: vec_of(rng, d),
            neg_left: vec_of(rng, d),
            neg_right: vec_of(rng, d),
        })
        .collect()
}

#[test]
fn margin_costs_match_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let batch = random_pairs(&mut rng);
        let da = rng.random_range(0.0..1.0);
        let dr = rng.random_range(0.0..1.0);
        let mut a = 0.0;
        let mut r = 0.0;
        for p in &batch {
            let lr = naive_dot(&p.left, &p.right);
            a += relu(da + naive_dot(&p.left, &p.neg_left) - lr);
            a += relu(da + naive_dot(&p.right, &p.neg_right) - lr);
            r += relu(dr + lr - naive_dot(&p.left, &p.neg_left));
            r += relu(dr + lr - naive_dot(&p.right, &p.neg_right));
        }
        assert!((attract_cost(&batch, da) - a).abs() < 1e-12);
        assert!((repel_cost(&batch, dr) - r).abs() < 1e-12);
    }
}

#[test]
fn regularization_matches_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let n = rng.random_range(1..15);
        let d = rng.random_range(1..8);
        let originals: Vec<Vec<f64>> = (0..n).map(|_| vec_of(&mut rng, d)).collect();
        let current: Vec<Vec<f64>> = (0..n).map(|_| vec_of(&mut rng, d)).collect();
        let names: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        // list some words twice; they must count once
        let mut cur: Vec<(&str, &[f64])> = Vec::new();
        let mut orig: Vec<(&str, &[f64])> = Vec::new();
        for i in 0..n {
            let reps = 1 + (i % 3 == 0) as usize;
            for _ in 0..reps {
                cur.push((&names[i], &current[i]));
                orig.push((&names[i], &originals[i]));
            }
        }
        let lambda = rng.random_range(0.0..2.0);
        let mut expect = 0.0;
        for i in 0..n {
            let mut sq = 0.0;
            for k in 0..d {
                sq += (current[i][k] - originals[i][k]).powi(2);
            }
            expect += lambda * sq.sqrt();
        }
        let got = regularization_cost(&cur, &orig, lambda).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }
}

fn critic(rng: &mut ChaCha8Rng, d: usize) -> Mlp {
    Mlp::init(
        &MlpSpec::new(d, &[6, 5], Activation::LeakyRelu(0.2), 1, Activation::Identity),
        rng,
    )
    .unwrap()
}

fn score_one(d: &Mlp, row: &[f64]) -> f64 {
    let x = Matrix::from_vec(1, row.len(), row.to_vec()).unwrap();
    d.predict(&x).unwrap()[(0, 0)]
}

fn clamped_log(p: f64) -> f64 {
    p.max(1e-12).ln()
}

#[test]
fn adversarial_losses_match_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let dim = rng.random_range(2..6);
        let n = rng.random_range(1..12);
        let m = rng.random_range(1..12);
        let d = critic(&mut rng, dim);
        let fake = Matrix::from_vec(n, dim, vec_of(&mut rng, n * dim)).unwrap();
        let real = Matrix::from_vec(m, dim, vec_of(&mut rng, m * dim)).unwrap();

        let (mut lg, mut ld) = (0.0, 0.0);
        let (mut fake_mean, mut real_mean) = (0.0, 0.0);
        for i in 0..n {
            let s = score_one(&d, fake.row(i));
            let p = 1.0 / (1.0 + (-s).exp());
            lg -= clamped_log(p);
            ld -= clamped_log(1.0 - p);
            fake_mean += s / n as f64;
        }
        for i in 0..m {
            let s = score_one(&d, real.row(i));
            let p = 1.0 / (1.0 + (-s).exp());
            lg -= clamped_log(1.0 - p);
            ld -= clamped_log(p);
            real_mean += s / m as f64;
        }
        let (g, c) = gan_losses(&d, &fake, &real).unwrap();
        assert!((g - lg).abs() < 1e-12 && (c - ld).abs() < 1e-12, "{g} {lg} {c} {ld}");
        let (g, c) = wgan_losses(&d, &fake, &real).unwrap();
        assert!((g + fake_mean).abs() < 1e-12);
        assert!((c - (real_mean - fake_mean)).abs() < 1e-12);
    }
}

/// Rank = 1 + (number strictly below) + (number of other equal values) / 2.
fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn brute_spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (rx, ry) = (brute_ranks(xs), brute_ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

#[test]
fn spearman_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut compared = 0;
    for i in 0..1000 {
        let n = rng.random_range(2..40);
        // half the lists draw from a small integer range so ties are common
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if i % 2 == 0 {
                rng.random_range(0..5) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        };
        let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let ys: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        match (spearman_rho(&xs, &ys), brute_spearman(&xs, &ys)) {
            (Ok(a), Some(b)) => {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
                compared += 1;
            }
            (Err(_), None) => {}
            (a, b) => panic!("disagreement on definedness: {a:?} vs {b:?}"),
        }
    }
    assert!(compared > 900);
}

#[test]
fn evaluation_matches_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    let records: Vec<(String, Vec<f64>)> = words.iter().map(|w| (w.clone(), vec_of(&mut rng, 5))).collect();
    let space = VectorSpace::from_records(records.clone()).unwrap().0;
    let mut recs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    while recs.len() < 20 {
        let a = rng.random_range(0..10);
        let b = rng.random_range(0..10);
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        recs.push(SimilarityRecord {
            first: words[a].clone(),
            second: words[b].clone(),
            gold: rng.random_range(0..10) as f64,
        });
    }
    let ds = SimilarityDataset::new("rand", recs.clone()).unwrap();
    let report = evaluate_similarity(&space, &ds).unwrap();
    let cos = |a: &[f64], b: &[f64]| naive_dot(a, b) / (naive_dot(a, a).sqrt() * naive_dot(b, b).sqrt());
    let vec_for = |w: &str| &records.iter().find(|(t, _)| t == w).unwrap().1;
    let model: Vec<f64> = recs.iter().map(|r| cos(vec_for(&r.first), vec_for(&r.second))).collect();
    let gold: Vec<f64> = recs.iter().map(|r| r.gold).collect();
    assert!((report.rho - brute_spearman(&model, &gold).unwrap()).abs() < 1e-9);
    assert_eq!(report.pairs_used, 20);

    // dropping a word leaves the other pairs' scores unchanged
    let reduced = space.restrict(words[1..].iter().map(String::as_str)).unwrap();
    let (m2, _) = lexspec_core::eval::scored_pairs(&reduced, &ds).unwrap();
    let kept: Vec<f64> = recs
        .iter()
        .zip(&model)
        .filter(|(r, _)| r.first != "w0" && r.second != "w0")
        .map(|(_, &s)| s)
        .collect();
    assert_eq!(m2.len(), kept.len());
    for (a, b) in m2.iter().zip(&kept) {
        assert!((a - b).abs() < 1e-12);
    }
}
