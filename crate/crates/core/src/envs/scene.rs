use serde::{Deserialize, Serialize};

/// Grayscale image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Frame {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Fills the axis-aligned rectangle with top-left `(x, y)`, clipped to the frame.
    pub fn fill_rect(&mut self, x: i64, y: i64, w: usize, h: usize, v: f64) {
        for yy in y.max(0)..(y + h as i64).min(self.height as i64) {
            for xx in x.max(0)..(x + w as i64).min(self.width as i64) {
                self.set(xx as usize, yy as usize, v);
            }
        }
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Plain-text PGM (P2) with 255 gray levels.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.data.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| ((v * 255.0).round() as u8).to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// A detected or ground-truth object. `(x, y)` is the box centre in pixels,
/// where pixel `i` spans `[i, i + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class_id: u32,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
}

impl SceneObject {
    pub fn new(class_id: u32, x: f64, y: f64, w: f64, h: f64, confidence: f64) -> Self {
        SceneObject {
            class_id,
            x,
            y,
            w,
            h,
            confidence,
            vx: 0.0,
            vy: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectSet {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<SceneObject>,
}

impl ObjectSet {
    pub fn new(width: usize, height: usize, objects: Vec<SceneObject>) -> Self {
        ObjectSet { width, height, objects }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}
