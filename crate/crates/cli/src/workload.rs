//! Synthetic streams and signals.
//!
//! Stream values are dyadic rationals so every sum the sketch forms is exact and
//! conservation can be checked with `==`.

use anyhow::{bail, Result};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sparse_recovery::heavy_hitters::StreamUpdate;

use crate::config::Distribution;

pub const DEFAULT_SKEW: f64 = 1.3;
/// Zipf masses are multiples of this.
pub const ZIPF_QUANTUM: f64 = 1.0 / (1u64 << 30) as f64;

/// Uniformly random `k`-subset of `[0, n)`, sorted.
pub fn random_support<R: Rng>(n: u64, k: u64, rng: &mut R) -> Vec<u64> {
    let mut s: Vec<u64> = sample(rng, n as usize, k as usize).into_iter().map(|i| i as u64).collect();
    s.sort_unstable();
    s
}

/// Shuffled insertions of `x` (each entry split in two), plus a churn of paired
/// insert/delete on a quarter of the coordinates. Deletions come last, so every
/// prefix of the stream keeps `x ≥ 0`.
fn to_stream<R: Rng>(x: &[f64], churn: f64, rng: &mut R) -> Vec<StreamUpdate> {
    let mut inserts = Vec::with_capacity(2 * x.len());
    let mut deletes = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let half = v / 2.0;
        inserts.push(StreamUpdate { index: i as u64, delta: half });
        inserts.push(StreamUpdate { index: i as u64, delta: v - half });
    }
    for i in sample(rng, x.len(), x.len() / 4) {
        inserts.push(StreamUpdate { index: i as u64, delta: churn });
        deletes.push(StreamUpdate { index: i as u64, delta: -churn });
    }
    inserts.shuffle(rng);
    deletes.shuffle(rng);
    inserts.extend(deletes);
    inserts
}

/// `max(k/2, 1)` spikes of mass `2^10` and a flat tail of `2^10/n` on every other
/// coordinate.
pub fn spikes_flat<R: Rng>(n: u64, k: u64, rng: &mut R) -> Vec<f64> {
    let mass = 1024.0;
    let mut x = vec![mass / n as f64; n as usize];
    for i in random_support(n, (k / 2).max(1), rng) {
        x[i as usize] = mass;
    }
    x
}

/// Masses `∝ rank^-skew` on a random permutation, rounded down to multiples of
/// [`ZIPF_QUANTUM`] with total close to 1.
pub fn zipf<R: Rng>(n: u64, skew: f64, rng: &mut R) -> Vec<f64> {
    let h: f64 = (1..=n).map(|r| (r as f64).powf(-skew)).sum();
    let mut order: Vec<usize> = (0..n as usize).collect();
    order.shuffle(rng);
    let mut x = vec![0.0; n as usize];
    for (rank, &i) in order.iter().enumerate() {
        let p = ((rank + 1) as f64).powf(-skew) / h;
        x[i] = (p / ZIPF_QUANTUM).floor().max(1.0) * ZIPF_QUANTUM;
    }
    x
}

/// Fraction of zipf mass outside the top `k` ranks.
pub fn zipf_tail_fraction(n: u64, k: u64, skew: f64) -> f64 {
    let h = |m: u64| (1..=m).map(|r| (r as f64).powf(-skew)).sum::<f64>();
    1.0 - h(k) / h(n)
}

/// Final state of the adversarial stream: `k/2` coordinates exactly at `‖x‖₁/k`,
/// `k/2` at `‖x‖₁/(2k)`, and `n/2` tail coordinates sharing a quarter of the mass.
fn adversarial_target<R: Rng>(n: u64, k: u64, rng: &mut R) -> Result<(Vec<f64>, Vec<u64>)> {
    if k < 2 || 2 * k > n {
        bail!("adversarial-fn needs 2 <= k <= n/2");
    }
    let norm = (1u64 << 20) as f64;
    let picks = random_support(n, k, rng);
    let mut spikes = picks.clone();
    spikes.shuffle(rng);
    let mut x = vec![0.0; n as usize];
    for (j, &i) in spikes.iter().enumerate() {
        x[i as usize] = if j < (k / 2) as usize { norm / k as f64 } else { norm / (2 * k) as f64 };
    }
    let rest: Vec<u64> = (0..n).filter(|i| picks.binary_search(i).is_err()).collect();
    for j in sample(rng, rest.len(), (n / 2) as usize) {
        x[rest[j] as usize] = norm / (2 * n) as f64;
    }
    Ok((x, picks))
}

/// A strict-turnstile stream and the vector it leaves behind.
pub fn generate_stream(
    n: u64,
    k: u64,
    dist: Distribution,
    skew: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<StreamUpdate>, Vec<f64>)> {
    if !n.is_power_of_two() || k == 0 || k > n {
        bail!("stream generation needs n a power of two and 1 <= k <= n");
    }
    match dist {
        Distribution::SpikesFlat => {
            let x = spikes_flat(n, k, rng);
            let churn = 2.0 / n as f64;
            Ok((to_stream(&x, churn, rng), x))
        }
        Distribution::Zipf => {
            if !(skew > 0.0) {
                bail!("zipf skew must be positive");
            }
            let x = zipf(n, skew, rng);
            Ok((to_stream(&x, 4.0 * ZIPF_QUANTUM, rng), x))
        }
        Distribution::AdversarialFn => {
            let (x, spikes) = adversarial_target(n, k, rng)?;
            // Spikes climb to twice their final mass, then are cut back.
            let mut doubled = x.clone();
            for &i in &spikes {
                doubled[i as usize] *= 2.0;
            }
            let mut stream = to_stream(&doubled, 1.0, rng);
            let mut cuts: Vec<StreamUpdate> =
                spikes.iter().map(|&i| StreamUpdate { index: i, delta: -x[i as usize] }).collect();
            cuts.shuffle(rng);
            stream.extend(cuts);
            Ok((stream, x))
        }
    }
}

/// Dense vector a stream leaves behind; `None` if it ever goes negative.
pub fn replay(n: u64, stream: &[StreamUpdate]) -> Result<Option<Vec<f64>>> {
    let mut x = vec![0.0; n as usize];
    let mut ok = true;
    for u in stream {
        if u.index >= n {
            bail!("stream index {} outside a universe of {n}", u.index);
        }
        x[u.index as usize] += u.delta;
        ok &= x[u.index as usize] >= 0.0;
    }
    Ok(ok.then_some(x))
}

/// `k` spikes of magnitude in `[1, 2)` with random signs over i.i.d. Gaussian noise
/// scaled so the tail has expected ℓ2 norm `tail`. Returns the signal, its
/// exactly-sparse part and the spike positions.
pub fn spikes_gaussian_tail<R: Rng>(n: u64, k: u64, tail: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<u64>) {
    let support = random_support(n, k, rng);
    let sigma = tail / ((n - k).max(1) as f64).sqrt();
    let mut spikes = vec![0.0; n as usize];
    for &i in &support {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        spikes[i as usize] = sign * rng.gen_range(1.0..2.0);
    }
    let mut x = spikes.clone();
    for (i, v) in x.iter_mut().enumerate() {
        if support.binary_search(&(i as u64)).is_err() {
            *v = sigma * standard_normal(rng);
        }
    }
    (x, spikes, support)
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn streams_are_strict_turnstile_and_sum_to_target() {
        for dist in [Distribution::SpikesFlat, Distribution::Zipf, Distribution::AdversarialFn] {
            let (stream, x) = generate_stream(1024, 8, dist, DEFAULT_SKEW, &mut rng(3)).unwrap();
            let replayed = replay(1024, &stream).unwrap().expect("never negative");
            assert_eq!(replayed, x, "{dist:?}");
            let mass: f64 = stream.iter().map(|u| u.delta).sum();
            assert_eq!(mass, x.iter().sum::<f64>());
        }
    }

    #[test]
    fn spikes_are_heavy_and_tail_is_not() {
        let (n, k) = (1u64 << 14, 8u64);
        let x = spikes_flat(n, k, &mut rng(1));
        let norm: f64 = x.iter().sum();
        let heavy = x.iter().filter(|&&v| v >= norm / k as f64).count();
        assert_eq!(heavy, 4);
        assert_eq!(norm, 4.0 * 1024.0 + (n - 4) as f64 * 1024.0 / n as f64);
    }

    #[test]
    fn zipf_tail_mass_matches_skew() {
        for (n, k, skew) in [(1u64 << 14, 8u64, 1.3), (4096, 16, 1.1), (1024, 4, 2.0)] {
            let x = zipf(n, skew, &mut rng(n + k));
            let mut sorted = x.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let total: f64 = sorted.iter().sum();
            let measured = sorted[k as usize..].iter().sum::<f64>() / total;
            let expected = zipf_tail_fraction(n, k, skew);
            assert!((measured - expected).abs() <= 0.01 * expected, "{n} {k} {skew}: {measured} vs {expected}");
        }
    }

    #[test]
    fn adversarial_stream_ends_on_the_threshold() {
        let (n, k) = (4096u64, 8u64);
        let (_, x) = generate_stream(n, k, Distribution::AdversarialFn, DEFAULT_SKEW, &mut rng(5)).unwrap();
        let norm: f64 = x.iter().sum();
        assert_eq!(norm, (1u64 << 20) as f64);
        assert_eq!(x.iter().filter(|&&v| v == norm / k as f64).count(), 4);
        assert_eq!(x.iter().filter(|&&v| v == norm / (2 * k) as f64).count(), 4);
        assert!(generate_stream(n, 1, Distribution::AdversarialFn, DEFAULT_SKEW, &mut rng(5)).is_err());
    }

    #[test]
    fn replay_flags_negative_prefixes() {
        let s = [StreamUpdate { index: 1, delta: -1.0 }, StreamUpdate { index: 1, delta: 1.0 }];
        assert!(replay(4, &s).unwrap().is_none());
        assert!(replay(4, &[StreamUpdate { index: 4, delta: 1.0 }]).is_err());
        assert_eq!(replay(4, &[]).unwrap(), Some(vec![0.0; 4]));
    }

    #[test]
    fn gaussian_tail_signal_shape() {
        let (n, k) = (1u64 << 14, 8u64);
        let (x, spikes, support) = spikes_gaussian_tail(n, k, 1.0, &mut rng(2));
        assert_eq!(support.len(), 8);
        assert_eq!(spikes.iter().filter(|&&v| v != 0.0).count(), 8);
        for &i in &support {
            assert_eq!(x[i as usize], spikes[i as usize]);
            assert!((1.0..2.0).contains(&spikes[i as usize].abs()));
        }
        let tail: f64 = x.iter().zip(&spikes).filter(|(_, &s)| s == 0.0).map(|(v, _)| v * v).sum::<f64>().sqrt();
        assert!((tail - 1.0).abs() < 0.05, "{tail}");
    }
}
