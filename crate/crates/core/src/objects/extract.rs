use crate::envs::{Frame, ObjectSet, SceneObject};

/// Connected components (4-connectivity) of pixels above `threshold`.
/// Each component's class is the nearest entry of `class_levels`
/// (`(intensity, class_id)`) to its mean intensity.
pub fn connected_components(frame: &Frame, threshold: f64, class_levels: &[(f64, u32)]) -> ObjectSet {
    let (w, h) = (frame.width, frame.height);
    let mut label = vec![usize::MAX; w * h];
    let mut comps: Vec<Component> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if label[start] != usize::MAX || frame.data[start] <= threshold {
            continue;
        }
        let id = comps.len();
        let mut c = Component::default();
        label[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            c.add(x, y, frame.data[p]);
            let mut visit = |q: usize| {
                if label[q] == usize::MAX && frame.data[q] > threshold {
                    label[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        comps.push(c);
    }
    let largest = comps.iter().map(|c| c.area).max().unwrap_or(1) as f64;
    let objects = comps
        .iter()
        .map(|c| {
            let mean = c.intensity / c.area as f64;
            let class_id = class_levels
                .iter()
                .min_by(|a, b| (a.0 - mean).abs().total_cmp(&(b.0 - mean).abs()))
                .map_or(0, |l| l.1);
            SceneObject::new(
                class_id,
                c.sx / c.area as f64 + 0.5,
                c.sy / c.area as f64 + 0.5,
                (c.x1 - c.x0 + 1) as f64,
                (c.y1 - c.y0 + 1) as f64,
                c.area as f64 / largest,
            )
        })
        .collect();
    ObjectSet::new(w, h, objects)
}

#[derive(Debug, Default)]
struct Component {
    area: usize,
    sx: f64,
    sy: f64,
    intensity: f64,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Component {
    fn add(&mut self, x: usize, y: usize, v: f64) {
        if self.area == 0 {
            (self.x0, self.x1, self.y0, self.y1) = (x, x, y, y);
        }
        self.area += 1;
        self.sx += x as f64;
        self.sy += y as f64;
        self.intensity += v;
        self.x0 = self.x0.min(x);
        self.x1 = self.x1.max(x);
        self.y0 = self.y0.min(y);
        self.y1 = self.y1.max(y);
    }
}

/// Bisects every object's box along its longer side into two half-boxes.
pub fn split_objects(set: &ObjectSet) -> ObjectSet {
    let mut out = Vec::with_capacity(set.len() * 2);
    for o in &set.objects {
        let (x0, y0) = (o.x - o.w / 2.0, o.y - o.h / 2.0);
        let halves = if o.w >= o.h {
            let hw = o.w / 2.0;
            [(x0 + hw / 2.0, o.y, hw, o.h), (x0 + hw + hw / 2.0, o.y, hw, o.h)]
        } else {
            let hh = o.h / 2.0;
            [(o.x, y0 + hh / 2.0, o.w, hh), (o.x, y0 + hh + hh / 2.0, o.w, hh)]
        };
        for (x, y, w, h) in halves {
            let mut s = o.clone();
            (s.x, s.y, s.w, s.h) = (x, y, w, h);
            out.push(s);
        }
    }
    ObjectSet::new(set.width, set.height, out)
}
