//! Brute-force reference implementations over explicit voxel sets.
//!
//! Everything here is written for clarity over speed: components by BFS flood
//! fill, distances by exhaustive pairing, clusters by graph search. Nothing is
//! shared with the library beyond plain data.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;

pub type Voxel = [usize; 3];

#[derive(Debug, Clone)]
pub struct Mask {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub voxels: BTreeSet<Voxel>,
}

impl Mask {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], voxels: impl IntoIterator<Item = Voxel>) -> Self {
        Self {
            dims,
            spacing,
            voxels: voxels.into_iter().collect(),
        }
    }

    pub fn voxel_ml(&self) -> f64 {
        self.spacing.iter().product::<f64>() / 1000.0
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    fn inside(&self, c: [i64; 3]) -> Option<Voxel> {
        (0..3)
            .all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a])
            .then(|| [c[0] as usize, c[1] as usize, c[2] as usize])
    }
}

/// Raster key with x fastest, so sorting components by their smallest key
/// reproduces first-encounter order of a z, y, x scan.
pub fn raster_key(v: Voxel) -> (usize, usize, usize) {
    (v[2], v[1], v[0])
}

fn neighbors(conn: u8) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dx in -1i64..=1 {
        for dy in -1i64..=1 {
            for dz in -1i64..=1 {
                let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                let ok = match conn {
                    6 => nonzero == 1,
                    18 => nonzero == 1 || nonzero == 2,
                    26 => nonzero >= 1,
                    _ => panic!("connectivity {conn}"),
                };
                if ok {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Components by breadth-first flood fill, ordered by first voxel in raster order.
pub fn components(mask: &Mask, conn: u8) -> Vec<BTreeSet<Voxel>> {
    let offsets = neighbors(conn);
    let mut seen: BTreeSet<Voxel> = BTreeSet::new();
    let mut out = Vec::new();
    let mut ordered: Vec<Voxel> = mask.voxels.iter().copied().collect();
    ordered.sort_by_key(|&v| raster_key(v));
    for start in ordered {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(v) = queue.pop_front() {
            comp.insert(v);
            for o in &offsets {
                let c = [v[0] as i64 + o[0], v[1] as i64 + o[1], v[2] as i64 + o[2]];
                if let Some(n) = mask.inside(c) {
                    if mask.voxels.contains(&n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

pub fn dsc(g: &Mask, p: &Mask) -> f64 {
    let inter = g.voxels.intersection(&p.voxels).count();
    2.0 * inter as f64 / (g.len() + p.len()) as f64
}

pub fn vs(g: &Mask, p: &Mask) -> f64 {
    let (a, b) = (g.len() as f64, p.len() as f64);
    1.0 - (a - b).abs() / (a + b)
}

pub fn volume_ratio(g: &Mask, p: &Mask, eps_ml: f64) -> f64 {
    (p.len() as f64 * p.voxel_ml() + eps_ml) / (g.len() as f64 * g.voxel_ml() + eps_ml)
}

/// Foreground voxels with a face neighbor that is background or off-grid.
pub fn boundary(m: &Mask) -> Vec<Voxel> {
    m.voxels
        .iter()
        .copied()
        .filter(|v| {
            neighbors(6).iter().any(|o| {
                let c = [v[0] as i64 + o[0], v[1] as i64 + o[1], v[2] as i64 + o[2]];
                match m.inside(c) {
                    None => true,
                    Some(n) => !m.voxels.contains(&n),
                }
            })
        })
        .collect()
}

fn dist2(a: Voxel, b: Voxel, w: [f64; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let d = (a[i] as f64 - b[i] as f64) * w[i];
            d * d
        })
        .sum()
}

/// Surface agreement with exhaustive boundary pairing in index units.
pub fn nsd(g: &Mask, p: &Mask, tol: f64) -> f64 {
    if p.voxels.is_empty() {
        return 0.0;
    }
    let (bg, bp) = (boundary(g), boundary(p));
    let within = |from: &[Voxel], to: &[Voxel]| {
        from.iter()
            .filter(|&&a| to.iter().any(|&b| dist2(a, b, [1.0; 3]).sqrt() <= tol))
            .count()
    };
    (within(&bg, &bp) + within(&bp, &bg)) as f64 / (bg.len() + bp.len()) as f64
}

/// Reference-by-prediction component association at the voxel level.
pub struct Pairing {
    pub refs: Vec<BTreeSet<Voxel>>,
    pub preds: Vec<BTreeSet<Voxel>>,
    pub voxel_ml: f64,
}

impl Pairing {
    pub fn new(g: &Mask, p: &Mask, conn: u8) -> Self {
        Self {
            refs: components(g, conn),
            preds: components(p, conn),
            voxel_ml: g.voxel_ml(),
        }
    }

    pub fn inter(&self, i: usize, l: usize) -> usize {
        self.refs[i].intersection(&self.preds[l]).count()
    }

    pub fn iou(&self, i: usize, l: usize) -> f64 {
        let inter = self.inter(i, l);
        let union = self.refs[i].union(&self.preds[l]).count();
        inter as f64 / union as f64
    }

    /// `tau == None` is the one-voxel criterion.
    pub fn edge(&self, i: usize, l: usize, tau: Option<f64>) -> bool {
        match tau {
            None => self.inter(i, l) > 0,
            Some(t) => self.inter(i, l) > 0 && self.iou(i, l) >= t,
        }
    }

    pub fn fpv(&self) -> f64 {
        let vox: usize = (0..self.preds.len())
            .filter(|&l| (0..self.refs.len()).all(|i| self.inter(i, l) == 0))
            .map(|l| self.preds[l].len())
            .sum();
        vox as f64 * self.voxel_ml
    }

    pub fn fnv(&self) -> f64 {
        let vox: usize = (0..self.refs.len())
            .filter(|&i| (0..self.preds.len()).all(|l| self.inter(i, l) == 0))
            .map(|i| self.refs[i].len())
            .sum();
        vox as f64 * self.voxel_ml
    }

    pub fn flags(&self, tau: Option<f64>) -> (Vec<bool>, Vec<bool>) {
        let detected = (0..self.refs.len())
            .map(|i| (0..self.preds.len()).any(|l| self.edge(i, l, tau)))
            .collect();
        let matched = (0..self.preds.len())
            .map(|l| (0..self.refs.len()).any(|i| self.edge(i, l, tau)))
            .collect();
        (detected, matched)
    }

    /// (tp, fp, fn)
    pub fn counts(&self, tau: Option<f64>) -> (usize, usize, usize) {
        let (d, m) = self.flags(tau);
        let tp = d.iter().filter(|&&x| x).count();
        let matched = m.iter().filter(|&&x| x).count();
        (tp, self.preds.len() - matched, self.refs.len() - tp)
    }

    /// [cd, fa, df, m, s, sm] from bipartite cluster search.
    pub fn taxonomy(&self, tau: Option<f64>) -> [usize; 6] {
        let (nr, np) = (self.refs.len(), self.preds.len());
        // nodes 0..nr are references, nr.. are predictions
        let mut seen = vec![false; nr + np];
        let mut out = [0; 6];
        for start in 0..nr + np {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let (mut r, mut p) = (0, 0);
            while let Some(node) = stack.pop() {
                if node < nr {
                    r += 1;
                    for l in 0..np {
                        if !seen[nr + l] && self.edge(node, l, tau) {
                            seen[nr + l] = true;
                            stack.push(nr + l);
                        }
                    }
                } else {
                    p += 1;
                    for i in 0..nr {
                        if !seen[i] && self.edge(i, node - nr, tau) {
                            seen[i] = true;
                            stack.push(i);
                        }
                    }
                }
            }
            let slot = match (r, p) {
                (1, 1) => 0,
                (0, 1) => 1,
                (1, 0) => 2,
                (_, 1) => 3,
                (1, _) => 4,
                _ => 5,
            };
            out[slot] += 1;
        }
        out
    }

    /// (pq, sq, rq)
    pub fn panoptic(&self, tau: f64) -> (f64, f64, f64) {
        let (tp, fp, fn_) = self.counts(Some(tau));
        if 2 * tp + fp + fn_ == 0 {
            return (0.0, 0.0, 0.0);
        }
        let rq = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        let best: Vec<f64> = (0..self.refs.len())
            .filter_map(|i| {
                (0..self.preds.len())
                    .filter(|&l| self.edge(i, l, Some(tau)))
                    .map(|l| self.iou(i, l))
                    .reduce(f64::max)
            })
            .collect();
        let sq = if best.is_empty() {
            0.0
        } else {
            best.iter().sum::<f64>() / best.len() as f64
        };
        (sq * rq, sq, rq)
    }
}

/// Per-lesion DSC inside the nearest-reference-component cells (mm distance,
/// ties to the earliest component), averaged over reference components.
pub fn cc_dsc(g: &Mask, p: &Mask, conn: u8) -> f64 {
    let refs = components(g, conn);
    let mut per = vec![(0usize, 0usize); refs.len()]; // (pred voxels in cell, intersection)
    for &v in &p.voxels {
        let mut best = (f64::INFINITY, 0);
        for (k, comp) in refs.iter().enumerate() {
            let d = comp
                .iter()
                .map(|&c| dist2(v, c, g.spacing))
                .fold(f64::INFINITY, f64::min);
            if d < best.0 {
                best = (d, k);
            }
        }
        per[best.1].0 += 1;
        if refs[best.1].contains(&v) {
            per[best.1].1 += 1;
        }
    }
    let total: f64 = refs
        .iter()
        .zip(&per)
        .map(|(comp, &(cell, inter))| 2.0 * inter as f64 / (comp.len() + cell) as f64)
        .sum();
    total / refs.len() as f64
}

/// Pooled detection F1 over several pairings.
pub fn pooled_f1(pairings: &[Pairing], tau: Option<f64>) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for p in pairings {
        let (a, b, c) = p.counts(tau);
        tp += a;
        fp += b;
        fn_ += c;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Exact signed-rank p-value by enumerating every sign assignment of the
/// non-zero differences. Ranks are average ranks of |d|.
pub fn signed_rank_enumeration(diffs: &[f64], alternative: &str) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    let n = d.len();
    let mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks: Vec<f64> = mags
        .iter()
        .map(|&m| {
            let below = mags.iter().filter(|&&o| o < m).count() as f64;
            let equal = mags.iter().filter(|&&o| o == m).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(&x, _)| x > 0.0).map(|(_, &r)| r).sum();
    let (mut ge, mut le) = (0u64, 0u64);
    for signs in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|&i| signs >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w >= observed - 1e-9 {
            ge += 1;
        }
        if w <= observed + 1e-9 {
            le += 1;
        }
    }
    let total = (1u64 << n) as f64;
    let (upper, lower) = (ge as f64 / total, le as f64 / total);
    match alternative {
        "greater" => upper,
        "less" => lower,
        _ => (2.0 * upper.min(lower)).min(1.0),
    }
}

/// Holm step-down adjustment written directly from its definition.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    for (i, &k) in idx.iter().enumerate() {
        out[k] = (0..=i)
            .map(|j| ((m - j) as f64 * p[idx[j]]).min(1.0))
            .fold(0.0, f64::max);
    }
    out
}

/// Map from component index to its set, keyed by first raster voxel.
pub fn by_first_voxel(comps: &[BTreeSet<Voxel>]) -> BTreeMap<(usize, usize, usize), usize> {
    comps
        .iter()
        .enumerate()
        .map(|(k, c)| (c.iter().map(|&v| raster_key(v)).min().unwrap(), k))
        .collect()
}

/// A random reference and a prediction derived from it by flips and a shift.
pub fn random_pair(rng: &mut impl Rng, max_dim: usize) -> (Mask, Mask) {
    let dims = [
        rng.gen_range(2..=max_dim),
        rng.gen_range(2..=max_dim),
        rng.gen_range(2..=max_dim),
    ];
    let spacing = [
        rng.gen_range(0.5..3.0),
        rng.gen_range(0.5..3.0),
        rng.gen_range(0.5..4.0),
    ];
    let density = rng.gen_range(0.02..0.35);
    let mut g = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if rng.gen_bool(density) {
                    g.push([x, y, z]);
                }
            }
        }
    }
    if g.is_empty() {
        g.push([0, 0, 0]);
    }
    let shift = rng.gen_range(0..2usize);
    let flip = rng.gen_range(0.0..0.3);
    let mut p = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let src = x.checked_sub(shift).map(|sx| g.contains(&[sx, y, z])).unwrap_or(false);
                if src != rng.gen_bool(flip) {
                    p.push([x, y, z]);
                }
            }
        }
    }
    (Mask::new(dims, spacing, g), Mask::new(dims, spacing, p))
}
