//! Packing classification and row-by-row lattice indexing.

use crate::error::{Error, Result};

use super::pyramid::{dist, lattice_spacing, SpatialIndex};
use super::{CentroidGrid, CentroidSet, Packing};

/// Minimum share of decisive votes needed to accept a packing.
const MAJORITY: f64 = 0.6;
/// Number of centroids near the image centre used as neighbourhood references.
const REFERENCES: usize = 64;

/// Diagnostics of [`sort_centroids`].
#[derive(Clone, Debug, PartialEq)]
pub struct PackingReport {
    pub packing: Packing,
    /// Number of neighbour vectors collected.
    pub neighbours: usize,
    /// Spacing guess from the centroid count and image aspect, `L / H`.
    pub pitch_estimate: f64,
    /// Median length of neighbour vectors along lattice directions.
    pub lattice_pitch: f64,
    /// Votes per angle bin `round(α·12/π)`, `α` measured against the 45° reference.
    pub votes: [usize; 13],
    pub hexagonal_votes: usize,
    pub rectangular_votes: usize,
    /// Vectors lying exactly on a bin boundary; counted as rectangular.
    pub ties: usize,
    /// Centroids absorbed by duplicate merging.
    pub merged: usize,
    /// Centroids not assigned to any grid cell.
    pub unassigned: usize,
}

/// Angle-bin classification of neighbour vectors `(Δk, Δl)`.
///
/// Vectors are folded into the first quadrant before measuring the angle to
/// `(1, 1)`. Bin 1 votes hexagonal, bin 0 votes rectangular, bin 3 (lattice
/// axes) is shared by both.
pub fn classify_packing(vectors: &[[f64; 2]]) -> Result<(Packing, [usize; 13], usize, usize, usize)> {
    let mut votes = [0usize; 13];
    let (mut hex, mut rect, mut ties) = (0, 0, 0);
    for v in vectors {
        let (a, b) = (v[0].abs(), v[1].abs());
        let norm = (a * a + b * b).sqrt();
        if norm == 0.0 {
            continue;
        }
        let cos = ((a + b) / (std::f64::consts::SQRT_2 * norm)).clamp(-1.0, 1.0);
        let x = cos.acos() * 12.0 / std::f64::consts::PI;
        if (x - x.floor() - 0.5).abs() < 1e-9 {
            ties += 1;
            rect += 1;
            continue;
        }
        let bin = x.round() as usize;
        votes[bin.min(12)] += 1;
        match bin {
            0 => rect += 1,
            1 => hex += 1,
            _ => {}
        }
    }
    let decisive = hex + rect;
    let packing = if decisive == 0 {
        if votes[3] > 0 {
            Packing::Rectangular
        } else {
            return Err(Error::AmbiguousPacking {
                hexagonal: 0,
                rectangular: 0,
            });
        }
    } else if hex as f64 >= MAJORITY * decisive as f64 {
        Packing::Hexagonal
    } else if rect as f64 >= MAJORITY * decisive as f64 {
        Packing::Rectangular
    } else {
        return Err(Error::AmbiguousPacking {
            hexagonal: hex,
            rectangular: rect,
        });
    };
    Ok((packing, votes, hex, rect, ties))
}

/// Replaces every cluster of points within `radius` of a seed point by its
/// mean. Returns the merged set and the number of points absorbed.
pub fn merge_duplicates(points: &[[f64; 2]], radius: f64) -> (Vec<[f64; 2]>, usize) {
    let index = SpatialIndex::new(points, radius.max(1e-9));
    let mut taken = vec![false; points.len()];
    let mut out = Vec::with_capacity(points.len());
    let mut absorbed = 0;
    for i in 0..points.len() {
        if taken[i] {
            continue;
        }
        let mut members = Vec::new();
        index.for_each_near(points[i], 1, |j| {
            if !taken[j] && dist(points[i], points[j]) < radius {
                members.push(j);
            }
        });
        members.sort_unstable();
        let (mut sk, mut sl) = (0.0, 0.0);
        for &j in &members {
            taken[j] = true;
            sk += points[j][0];
            sl += points[j][1];
        }
        let n = members.len() as f64;
        absorbed += members.len() - 1;
        out.push([sk / n, sl / n]);
    }
    (out, absorbed)
}

fn neighbour_vectors(points: &[[f64; 2]], dims: (usize, usize), spacing: f64) -> Vec<[f64; 2]> {
    let centre = [dims.0 as f64 / 2.0, dims.1 as f64 / 2.0];
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| dist(points[a], centre).total_cmp(&dist(points[b], centre)));
    let index = SpatialIndex::new(points, spacing);
    let (lo, hi) = (0.5 * spacing, 1.5 * spacing);
    let mut out = Vec::new();
    for &r in order.iter().take(REFERENCES) {
        let p = points[r];
        let mut near = Vec::new();
        index.for_each_near(p, 2, |n| near.push(n));
        near.sort_unstable();
        for n in near {
            let d = dist(points[n], p);
            if d > lo && d < hi {
                out.push([points[n][0] - p[0], points[n][1] - p[1]]);
            }
        }
    }
    out
}

struct Walker<'a> {
    points: &'a [[f64; 2]],
    index: SpatialIndex,
    pitch: f64,
    row_step: f64,
    packing: Packing,
}

impl Walker<'_> {
    /// Closest point to `target` with `Δk ∈ (k_lo, k_hi)` and `Δl ∈ (l_lo, l_hi)`
    /// relative to `from`.
    fn find(&self, from: [f64; 2], kw: (f64, f64), lw: (f64, f64), target: [f64; 2]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        self.index.for_each_near(from, 2, |n| {
            let q = self.points[n];
            let (dk, dl) = (q[0] - from[0], q[1] - from[1]);
            if dk > kw.0 && dk < kw.1 && dl > lw.0 && dl < lw.1 {
                let d = dist(q, target);
                if best.is_none_or(|(bd, bn)| d < bd || (d == bd && n < bn)) {
                    best = Some((d, n));
                }
            }
        });
        best.map(|b| b.1)
    }

    fn right(&self, i: usize) -> Option<usize> {
        let p = self.points[i];
        let m = self.pitch;
        self.find(p, (-m / 2.0, m / 2.0), (m / 2.0, 1.5 * m), [p[0], p[1] + m])
    }

    fn left(&self, i: usize) -> Option<usize> {
        let p = self.points[i];
        let m = self.pitch;
        self.find(p, (-m / 2.0, m / 2.0), (-1.5 * m, -m / 2.0), [p[0], p[1] - m])
    }

    fn vertical(&self, i: usize, sign: f64) -> Option<usize> {
        let p = self.points[i];
        let (m, t) = (self.pitch, self.row_step);
        let kw = if sign > 0.0 {
            (0.5 * t, 1.5 * t)
        } else {
            (-1.5 * t, -0.5 * t)
        };
        match self.packing {
            Packing::Rectangular => {
                self.find(p, kw, (-m / 2.0, m / 2.0), [p[0] + sign * t, p[1]])
            }
            // prefer the left of the two candidates
            Packing::Hexagonal => self.find(p, kw, (-m, m), [p[0] + sign * t, p[1] - m / 2.0]),
        }
    }
}

/// Orders centroids into a complete `J × H` grid.
///
/// Duplicates within half a lattice pitch are averaged first. Rows are walked
/// left to right starting at the upper-left centroid; rows may differ in
/// length by one lens, in which case trailing lenses are dropped.
pub fn sort_centroids(cs: &CentroidSet, image_dims: (usize, usize)) -> Result<(CentroidGrid, PackingReport)> {
    if cs.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "sorting needs at least 4 centroids, got {}",
            cs.len()
        )));
    }
    let (kk, ll) = image_dims;
    let h_est = (cs.len() as f64 * ll as f64 / kk as f64).sqrt();
    let pitch_estimate = ll as f64 / h_est;

    // The count-based estimate is inflated by the image border on small
    // lattices, so the band is centred on the nearest-neighbour spacing when
    // one exists.
    let spacing = lattice_spacing(&cs.points, 0.25 * pitch_estimate).unwrap_or(pitch_estimate);
    let mut vectors = neighbour_vectors(&cs.points, image_dims, spacing);
    if vectors.len() < 2 {
        vectors = neighbour_vectors(&cs.points, image_dims, pitch_estimate);
    }
    let (packing, votes, hexagonal_votes, rectangular_votes, ties) = classify_packing(&vectors)?;

    let mut axis_lengths: Vec<f64> = vectors
        .iter()
        .filter(|v| {
            let (a, b) = (v[0].abs(), v[1].abs());
            let n = (a * a + b * b).sqrt();
            let bin = (((a + b) / (std::f64::consts::SQRT_2 * n)).clamp(-1.0, 1.0).acos() * 12.0
                / std::f64::consts::PI)
                .round() as usize;
            bin == 1 || bin == 3
        })
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
        .collect();
    if axis_lengths.is_empty() {
        axis_lengths = vectors.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()).collect();
    }
    axis_lengths.sort_unstable_by(f64::total_cmp);
    let lattice_pitch = axis_lengths[axis_lengths.len() / 2];

    let (merged_points, merged) = merge_duplicates(&cs.points, 0.5 * lattice_pitch);
    // isolated detections (noise in the gaps or margins) cannot belong to the lattice
    let points = {
        let index = SpatialIndex::new(&merged_points, lattice_pitch);
        let keep: Vec<[f64; 2]> = merged_points
            .iter()
            .filter(|&&p| {
                let mut n = 0;
                index.for_each_near(p, 2, |q| {
                    let d = dist(p, merged_points[q]);
                    if d > 0.75 * lattice_pitch && d < 1.25 * lattice_pitch {
                        n += 1;
                    }
                });
                n >= 2
            })
            .copied()
            .collect();
        keep
    };
    let isolated = merged_points.len() - points.len();
    if points.len() < 4 {
        return Err(Error::InconsistentLattice("fewer than 4 centroids have lattice neighbours".into()));
    }
    let row_step = match packing {
        Packing::Hexagonal => lattice_pitch * 3f64.sqrt() / 2.0,
        Packing::Rectangular => lattice_pitch,
    };
    let walker = Walker {
        index: SpatialIndex::new(&points, lattice_pitch),
        points: &points,
        pitch: lattice_pitch,
        row_step,
        packing,
    };

    let mut start = (0..points.len())
        .min_by(|&a, &b| {
            let na = points[a][0].hypot(points[a][1]);
            let nb = points[b][0].hypot(points[b][1]);
            na.total_cmp(&nb).then(a.cmp(&b))
        })
        .expect("non-empty");
    loop {
        let mut moved = false;
        while let Some(u) = walker.vertical(start, -1.0) {
            start = u;
            moved = true;
        }
        while let Some(l) = walker.left(start) {
            start = l;
            moved = true;
        }
        if !moved {
            break;
        }
    }

    let mut used = vec![false; points.len()];
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut next = Some(start);
    while let Some(mut s) = next {
        while let Some(l) = walker.left(s).filter(|&l| !used[l]) {
            s = l;
        }
        if used[s] {
            break;
        }
        let mut row = vec![s];
        used[s] = true;
        let mut cur = s;
        while let Some(r) = walker.right(cur).filter(|&r| !used[r]) {
            used[r] = true;
            row.push(r);
            cur = r;
        }
        rows.push(row);
        next = walker.vertical(s, 1.0);
    }

    let min_len = rows.iter().map(Vec::len).min().unwrap_or(0);
    let max_len = rows.iter().map(Vec::len).max().unwrap_or(0);
    if max_len - min_len > 1 {
        return Err(Error::InconsistentLattice(format!(
            "row lengths range from {min_len} to {max_len}"
        )));
    }
    for w in rows.windows(2) {
        let dl = points[w[1][0]][1] - points[w[0][0]][1];
        let ok = match packing {
            Packing::Rectangular => dl.abs() < 0.25 * lattice_pitch,
            Packing::Hexagonal => (dl.abs() - 0.5 * lattice_pitch).abs() < 0.25 * lattice_pitch,
        };
        if !ok {
            return Err(Error::InconsistentLattice(format!(
                "row start offset {dl:.2} px does not match {packing} packing"
            )));
        }
    }

    let hex_row_phase = if packing == Packing::Hexagonal && rows.len() > 1 {
        let mut s = 0.0;
        for (j, w) in rows.windows(2).enumerate() {
            let mean: f64 = (0..min_len)
                .map(|h| points[w[1][h]][1] - points[w[0][h]][1])
                .sum::<f64>()
                / min_len as f64;
            s += if j % 2 == 0 { mean } else { -mean };
        }
        if s > 0.0 {
            0
        } else {
            1
        }
    } else {
        0
    };

    let entries: Vec<[f64; 2]> = rows
        .iter()
        .flat_map(|r| r[..min_len].iter().map(|&i| points[i]))
        .collect();
    let assigned = rows.len() * min_len;
    let grid = CentroidGrid::new(rows.len(), min_len, entries, packing, hex_row_phase)?;
    let report = PackingReport {
        packing,
        neighbours: vectors.len(),
        pitch_estimate,
        lattice_pitch,
        votes,
        hexagonal_votes,
        rectangular_votes,
        ties,
        merged,
        unassigned: points.len() - assigned + isolated,
    };
    Ok((grid, report))
}
