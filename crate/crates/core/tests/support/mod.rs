//! Reference implementations kept deliberately separate from the crate
//! code paths they check. The transform oracle builds its boundary
//! extension by iterative reflection and explicit padding; the
//! nearest-neighbour oracle re-sorts and re-votes from scratch.

use emowave::dwt::ExtensionMode;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Extension by case analysis: reflect step by step instead of folding
/// the index arithmetically.
pub fn naive_extended(x: &[f64], j: isize, mode: ExtensionMode) -> f64 {
    let n = x.len() as isize;
    match mode {
        ExtensionMode::Zero => {
            if j < 0 || j >= n {
                0.0
            } else {
                x[j as usize]
            }
        }
        ExtensionMode::Symmetric => {
            let mut j = j;
            loop {
                if j < 0 {
                    j = -1 - j;
                } else if j >= n {
                    j = 2 * n - 1 - j;
                } else {
                    break;
                }
            }
            x[j as usize]
        }
        ExtensionMode::Periodic => x[(((j % n) + n) % n) as usize],
    }
}

/// One analysis step as a plain double loop over output index and tap:
/// a[i] = sum_t h[t] x~[2i - t], d[i] likewise with the highpass.
pub fn naive_dwt_step(
    x: &[f64],
    lowpass: &[f64],
    highpass: &[f64],
    mode: ExtensionMode,
) -> (Vec<f64>, Vec<f64>) {
    let mut padded = x.to_vec();
    if mode == ExtensionMode::Periodic && padded.len() % 2 == 1 {
        padded.push(*padded.last().unwrap());
    }
    let f = lowpass.len();
    let out_len = match mode {
        ExtensionMode::Periodic => (x.len() + 1) / 2,
        _ => (x.len() + f) / 2,
    };
    let mut approx = vec![0.0; out_len];
    let mut detail = vec![0.0; out_len];
    for i in 0..out_len {
        for t in 0..f {
            let v = naive_extended(&padded, 2 * i as isize - t as isize, mode);
            approx[i] += lowpass[t] * v;
            detail[i] += highpass[t] * v;
        }
    }
    (approx, detail)
}

pub fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen::<f64>() * 20.0 - 10.0).collect()
}

pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Full scan, sort, and vote, written independently of the crate's
/// classifier. Labels are plain class indices.
pub fn brute_knn_predict(
    train: &[(Vec<f64>, usize)],
    query: &[f64],
    k: usize,
    c: f64,
) -> usize {
    let distance = |a: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(query) {
            acc += (x - y).abs().powf(c);
        }
        acc.powf(1.0 / c)
    };
    let mut scored: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (x, _))| (distance(x), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);

    let mut votes = [0usize; 3];
    let mut sums = [0.0f64; 3];
    for (d, i) in &scored {
        let class = train[*i].1;
        votes[class] += 1;
        sums[class] += d;
    }
    let top = *votes.iter().max().unwrap();
    (0..3)
        .filter(|&cl| votes[cl] == top)
        .min_by(|&a, &b| sums[a].total_cmp(&sums[b]))
        .unwrap()
}
