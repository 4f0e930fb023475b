//! Exact Euclidean distance transforms on voxel grids.
//!
//! Separable lower-envelope transform (one 1D pass per axis) that also tracks
//! which site is nearest. When several sites are equally near, the lowest site
//! label wins, which gives a deterministic Voronoi partition.

use crate::volume::{GridGeometry, LabelVolume};

/// Tolerance, in index units, used when comparing envelope breakpoints.
const BREAKPOINT_TOL: f64 = 1e-7;

/// Squared distances and nearest-site labels for every voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestSite {
    /// Squared distance to the nearest site; `f64::INFINITY` when there are no sites.
    pub squared_distance: Vec<f64>,
    /// Label of the nearest site (lowest label among ties); 0 when there are no sites.
    pub label: Vec<u32>,
}

/// Per-axis weights: `[1, 1, 1]` for index units, squared spacing for millimetres.
pub fn axis_weights(geometry: &GridGeometry, physical: bool) -> [f64; 3] {
    if physical {
        geometry.spacing_mm().map(|s| s * s)
    } else {
        [1.0; 3]
    }
}

/// Nearest-site transform. `sites[i]` is the site label of voxel `i` (0 = not a site).
pub fn nearest_site(geometry: &GridGeometry, sites: &[u32], weights: [f64; 3]) -> NearestSite {
    assert_eq!(sites.len(), geometry.voxel_count(), "site labels must cover the grid");
    let mut dist: Vec<f64> = sites
        .iter()
        .map(|&s| if s != 0 { 0.0 } else { f64::INFINITY })
        .collect();
    let mut label = sites.to_vec();

    let dims = geometry.dims();
    let n_max = dims.iter().copied().max().unwrap_or(1);
    let mut scratch = LineScratch::with_capacity(n_max);
    for axis in 0..3 {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        for start in line_starts(dims, axis) {
            scratch.load(&dist, &label, start, stride, len);
            scratch.transform(weights[axis]);
            scratch.store(&mut dist, &mut label, start, stride, len);
        }
    }
    NearestSite {
        squared_distance: dist,
        label,
    }
}

/// Squared distance from every voxel to the nearest foreground voxel of `mask`.
pub fn squared_distance_to(mask: &LabelVolume, weights: [f64; 3]) -> Vec<f64> {
    let sites: Vec<u32> = mask.voxels().iter().map(|&v| u32::from(v)).collect();
    nearest_site(mask.geometry(), &sites, weights).squared_distance
}

fn line_starts(dims: [usize; 3], axis: usize) -> Vec<usize> {
    let [nx, ny, nz] = dims;
    let mut out = Vec::new();
    match axis {
        0 => {
            for z in 0..nz {
                for y in 0..ny {
                    out.push(nx * (y + ny * z));
                }
            }
        }
        1 => {
            for z in 0..nz {
                for x in 0..nx {
                    out.push(x + nx * ny * z);
                }
            }
        }
        _ => {
            for y in 0..ny {
                for x in 0..nx {
                    out.push(x + nx * y);
                }
            }
        }
    }
    out
}

struct LineScratch {
    f: Vec<f64>,
    lab: Vec<u32>,
    out_d: Vec<f64>,
    out_l: Vec<u32>,
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl LineScratch {
    fn with_capacity(n: usize) -> Self {
        Self {
            f: Vec::with_capacity(n),
            lab: Vec::with_capacity(n),
            out_d: Vec::with_capacity(n),
            out_l: Vec::with_capacity(n),
            vertices: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    fn load(&mut self, dist: &[f64], label: &[u32], start: usize, stride: usize, len: usize) {
        self.f.clear();
        self.lab.clear();
        for i in 0..len {
            self.f.push(dist[start + i * stride]);
            self.lab.push(label[start + i * stride]);
        }
    }

    fn store(&self, dist: &mut [f64], label: &mut [u32], start: usize, stride: usize, len: usize) {
        for i in 0..len {
            dist[start + i * stride] = self.out_d[i];
            label[start + i * stride] = self.out_l[i];
        }
    }

    /// 1D pass: `d(x) = min_q f(q) + w (x - q)^2`, keeping the lowest label among minimizers.
    fn transform(&mut self, w: f64) {
        let n = self.f.len();
        self.vertices.clear();
        self.bounds.clear();
        let f = &self.f;
        let intersect = |p: usize, q: usize| -> f64 {
            let (pf, qf) = (p as f64, q as f64);
            ((f[q] + w * qf * qf) - (f[p] + w * pf * pf)) / (2.0 * w * (qf - pf))
        };
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                let Some(&p) = self.vertices.last() else {
                    self.vertices.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = intersect(p, q);
                // Parabolas that only touch the envelope at a single point are kept,
                // since they may tie for the minimum there.
                if s < *self.bounds.last().unwrap() - BREAKPOINT_TOL {
                    self.vertices.pop();
                    self.bounds.pop();
                } else {
                    self.vertices.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        self.bounds.push(f64::INFINITY);

        self.out_d.clear();
        self.out_l.clear();
        if self.vertices.is_empty() {
            self.out_d.resize(n, f64::INFINITY);
            self.out_l.resize(n, 0);
            return;
        }
        let mut k = 0;
        for x in 0..n {
            let xf = x as f64;
            while k + 1 < self.vertices.len() && self.bounds[k + 1] < xf - BREAKPOINT_TOL {
                k += 1;
            }
            let mut best = f64::INFINITY;
            let mut best_label = u32::MAX;
            let mut j = k;
            while j < self.vertices.len() && self.bounds[j] <= xf + BREAKPOINT_TOL {
                let q = self.vertices[j];
                let dq = xf - q as f64;
                let value = f[q] + w * dq * dq;
                if value < best || (value == best && self.lab[q] < best_label) {
                    best = value;
                    best_label = self.lab[q];
                }
                j += 1;
            }
            self.out_d.push(best);
            self.out_l.push(best_label);
        }
    }
}
