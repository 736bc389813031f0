use std::cmp::Ordering;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::envs::{ObjectSet, SceneObject};

/// Fixed-length operand vector: `(x, y, vx, vy)` per slot, zero padded.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Class of each filled slot, in slot order.
    pub slot_classes: Vec<u32>,
}

/// Confidence descending, then class, then x.
pub fn slot_order(a: &SceneObject, b: &SceneObject) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.class_id.cmp(&b.class_id))
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
}

pub fn featurize(set: &ObjectSet, m_bar: usize) -> FeatureVector {
    let mut objs: Vec<&SceneObject> = set.objects.iter().collect();
    objs.sort_by(|a, b| slot_order(a, b));
    objs.truncate(m_bar);
    let (w, h) = (set.width.max(1) as f64, set.height.max(1) as f64);
    let mut values = vec![0.0; 4 * m_bar];
    for (slot, o) in objs.iter().enumerate() {
        values[4 * slot..4 * slot + 4].copy_from_slice(&[o.x / w, o.y / h, o.vx / w, o.vy / h]);
    }
    FeatureVector {
        values,
        slot_classes: objs.iter().map(|o| o.class_id).collect(),
    }
}

/// Matches objects of the same class across frames, nearest pairs first,
/// and sets `v = curr - prev` for matched ones (zero otherwise).
pub fn align_and_velocity(prev: &ObjectSet, curr: &ObjectSet, radius: f64) -> ObjectSet {
    let mut pairs = Vec::new();
    for (i, c) in curr.objects.iter().enumerate() {
        for (j, p) in prev.objects.iter().enumerate() {
            if c.class_id != p.class_id {
                continue;
            }
            let d = (c.x - p.x).hypot(c.y - p.y);
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = curr.clone();
    for o in &mut out.objects {
        o.vx = 0.0;
        o.vy = 0.0;
    }
    let mut used_c = vec![false; curr.len()];
    let mut used_p = vec![false; prev.len()];
    for (_, i, j) in pairs {
        if used_c[i] || used_p[j] {
            continue;
        }
        used_c[i] = true;
        used_p[j] = true;
        out.objects[i].vx = curr.objects[i].x - prev.objects[j].x;
        out.objects[i].vy = curr.objects[i].y - prev.objects[j].y;
    }
    out
}

/// Removes each object independently with its class's drop probability.
pub fn inject_drop<R: Rng + ?Sized>(set: &ObjectSet, drop_probs: &[(u32, f64)], rng: &mut R) -> ObjectSet {
    let mut out = set.clone();
    out.objects.retain(|o| {
        let p = drop_probs
            .iter()
            .find(|(c, _)| *c == o.class_id)
            .map_or(0.0, |(_, p)| *p);
        // always draw so the stream does not depend on the probabilities
        let u: f64 = rng.random();
        u >= p
    });
    out
}

/// Detector degradation: centroid jitter with std `sigma` (in frame units)
/// and independent misses with probability `miss`.
pub fn perturb<R: Rng + ?Sized>(set: &ObjectSet, sigma: f64, miss: f64, rng: &mut R) -> ObjectSet {
    let mut out = set.clone();
    let (w, h) = (set.width as f64, set.height as f64);
    out.objects.retain_mut(|o| {
        let u: f64 = rng.random();
        let jx: f64 = rng.sample(StandardNormal);
        let jy: f64 = rng.sample(StandardNormal);
        o.x = (o.x + sigma * w * jx).clamp(0.0, w);
        o.y = (o.y + sigma * h * jy).clamp(0.0, h);
        u >= miss
    });
    out
}
