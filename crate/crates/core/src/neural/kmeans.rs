use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::scalar::Scalar;

const MAX_ITERS: usize = 100;
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel<T> {
    pub centroids: Vec<Vec<T>>,
    pub inertia: T,
    /// Inertia after each Lloyd iteration.
    pub inertia_trace: Vec<T>,
}

fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

impl<T: Scalar> KMeansModel<T> {
    pub fn clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Nearest centroid, ties to the lowest index.
    pub fn assign(&self, x: &[T]) -> usize {
        nearest(&self.centroids, x).0
    }
}

fn nearest<T: Scalar>(centroids: &[Vec<T>], x: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (k, c) in centroids.iter().enumerate() {
        let d = dist_sq(c, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_init<T: Scalar, R: Rng + ?Sized>(points: &[Vec<T>], c: usize, rng: &mut R) -> Vec<Vec<T>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist_sq(p, &centroids[0]).f64()).collect();
    while centroids.len() < c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if u < acc && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        let chosen = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist_sq(p, &chosen).f64());
        }
        centroids.push(chosen);
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations. A cluster left empty
/// after assignment takes the point farthest from its current centroid.
pub fn kmeans_fit<T: Scalar, R: Rng + ?Sized>(
    points: &[Vec<T>],
    c: usize,
    rng: &mut R,
) -> Result<KMeansModel<T>, NeuralError> {
    if c == 0 || points.len() < c {
        return Err(NeuralError::TooFewPoints { points: points.len(), clusters: c });
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(NeuralError::DimensionMismatch { expected: d, got: p.len() });
    }

    let mut centroids = plus_plus_init(points, c, rng);
    let mut trace: Vec<T> = Vec::new();
    let mut assign = vec![0usize; points.len()];
    let mut cost = vec![T::zero(); points.len()];

    for _ in 0..MAX_ITERS {
        for (i, p) in points.iter().enumerate() {
            let (k, dk) = nearest(&centroids, p);
            assign[i] = k;
            cost[i] = dk;
        }

        let mut sizes = vec![0usize; c];
        for &k in &assign {
            sizes[k] += 1;
        }
        for k in 0..c {
            if sizes[k] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| sizes[assign[i]] > 1)
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if cost[b] >= cost[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                sizes[assign[i]] -= 1;
                sizes[k] = 1;
                assign[i] = k;
                cost[i] = T::zero();
                centroids[k] = points[i].clone();
            }
        }

        let mut sums = vec![vec![T::zero(); d]; c];
        for (p, &k) in points.iter().zip(&assign) {
            for (s, &x) in sums[k].iter_mut().zip(p) {
                *s += x;
            }
        }
        for k in 0..c {
            if sizes[k] > 0 {
                let n = T::of(sizes[k] as f64);
                centroids[k] = sums[k].iter().map(|&s| s / n).collect();
            }
        }

        let inertia: T = points
            .iter()
            .zip(&assign)
            .map(|(p, &k)| dist_sq(p, &centroids[k]))
            .sum();
        let prev = trace.last().copied();
        if let Some(prev) = prev {
            let slack = T::of(1e-9) * (prev.abs() + T::one());
            assert!(inertia <= prev + slack, "Lloyd inertia increased: {prev} -> {inertia}");
        }
        trace.push(inertia);
        match prev {
            Some(prev) if (prev - inertia).abs().f64() <= REL_TOL * prev.f64().max(f64::MIN_POSITIVE) => break,
            _ if inertia == T::zero() => break,
            _ => {}
        }
    }

    let inertia = points.iter().map(|p| nearest(&centroids, p).1).sum();
    Ok(KMeansModel { centroids, inertia, inertia_trace: trace })
}
