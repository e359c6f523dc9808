//! Sample sets over boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Points of a box, either a full tensor grid or a seeded uniform sample
/// when the grid would exceed the cap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Samples {
    #[serde(skip)]
    pub points: Vec<Vec<f64>>,
    pub count: usize,
    /// `true` for the full grid, `false` for the random fallback.
    pub exhaustive: bool,
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|i| if i + 1 == k { hi } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 }).collect()
}

/// `per_axis^d` grid over `bounds`, or `cap` seeded uniform points if larger.
pub fn box_samples(bounds: &[(f64, f64)], per_axis: usize, cap: usize, seed: u64) -> Samples {
    let d = bounds.len();
    let total = (per_axis.max(1) as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    let points = if total <= cap as u128 {
        let axes: Vec<Vec<f64>> = bounds.iter().map(|&(lo, hi)| linspace(lo, hi, per_axis)).collect();
        let mut pts = vec![Vec::with_capacity(d)];
        for axis in &axes {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        pts
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cap).map(|_| bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()).collect()
    };
    Samples { count: points.len(), exhaustive: total <= cap as u128, points }
}

/// Every `len / k`-th element, at most `k` of them, always keeping the first.
pub fn thin<T: Clone>(items: &[T], k: usize) -> Vec<T> {
    if items.len() <= k || k == 0 {
        return items.to_vec();
    }
    let stride = items.len() as f64 / k as f64;
    (0..k).map(|i| items[(i as f64 * stride) as usize].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_fallback() {
        let s = box_samples(&[(-1.0, 1.0), (0.0, 2.0)], 3, 100, 42);
        assert!(s.exhaustive);
        assert_eq!(s.count, 9);
        assert!(s.points.contains(&vec![0.0, 1.0]));
        let r = box_samples(&[(-1.0, 1.0); 6], 5, 50, 42);
        assert!(!r.exhaustive);
        assert_eq!(r.count, 50);
        assert_eq!(r.points, box_samples(&[(-1.0, 1.0); 6], 5, 50, 42).points);
    }

    #[test]
    fn thinning_keeps_first() {
        let v: Vec<usize> = (0..10).collect();
        assert_eq!(thin(&v, 3), vec![0, 3, 6]);
        assert_eq!(thin(&v, 20), v);
    }
}
