//! Per-leaf bin layout, extended histograms and bit-vector partitioning.
//!
//! Every leaf owns one contiguous byte array per feature holding the bin index of each of
//! its samples, in the same order as its sample-index array. Histogram construction then
//! streams a single byte array instead of chasing sample ids through the global bin
//! columns, and splitting a leaf is a stable partition of all its arrays driven by one
//! bit vector.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Contiguous per-leaf bin arrays. `bins[j][i] == global_bins[j][index[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafBinLayout {
    pub index: Vec<u32>,
    pub bins: Vec<Vec<u8>>,
}

impl LeafBinLayout {
    /// Layout of the root leaf: all samples in their original order.
    pub fn root(global_bins: &[Vec<u8>]) -> Self {
        let n = global_bins.first().map_or(0, Vec::len);
        LeafBinLayout { index: (0..n as u32).collect(), bins: global_bins.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Checks `bins[j][i] == global_bins[j][index[i]]` for every feature and position.
    pub fn is_consistent_with(&self, global_bins: &[Vec<u8>]) -> bool {
        self.bins.len() == global_bins.len()
            && self.bins.iter().zip(global_bins).all(|(leaf, global)| {
                leaf.len() == self.index.len() && leaf.iter().zip(&self.index).all(|(&b, &id)| b == global[id as usize])
            })
    }
}

/// One bit per leaf sample; bit `i` is set when sample `i` goes left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn from_bools(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            words[i / 64] |= u64::from(b) << (i % 64);
        }
        BitVector { words, len: bits.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bits `8k..8k+8` as one byte.
    #[inline]
    fn byte(&self, k: usize) -> u8 {
        (self.words[k / 8] >> (8 * (k % 8))) as u8
    }
}

/// Single sweep over a leaf's bin array: bit `i` = `bins[i] <= boundary_bin`.
pub fn build_bitvector(bins: &[u8], boundary_bin: u8) -> BitVector {
    let mut words = Vec::with_capacity(bins.len().div_ceil(64));
    for chunk in bins.chunks(64) {
        let mut w = 0u64;
        for (k, &b) in chunk.iter().enumerate() {
            w |= u64::from(b <= boundary_bin) << k;
        }
        words.push(w);
    }
    BitVector { words, len: bins.len() }
}

/// Stable partition of any slice by the bit vector.
pub fn partition_scalar<T: Copy>(src: &[T], bits: &BitVector) -> (Vec<T>, Vec<T>) {
    let n_left = bits.count_ones();
    let mut left = Vec::with_capacity(n_left);
    let mut right = Vec::with_capacity(src.len() - n_left);
    for (i, &v) in src.iter().enumerate() {
        if bits.get(i) {
            left.push(v);
        } else {
            right.push(v);
        }
    }
    (left, right)
}

#[cfg(target_arch = "x86_64")]
mod pext {
    use super::BitVector;
    use std::arch::x86_64::{_pdep_u64, _pext_u64};

    /// Eight bin bytes per step: spread the 8 mask bits to byte masks, then extract the
    /// selected bytes for the left child and the complement for the right child.
    #[target_feature(enable = "bmi2")]
    pub(super) unsafe fn partition_bytes(src: &[u8], bits: &BitVector) -> (Vec<u8>, Vec<u8>) {
        let n = src.len();
        let n_left = bits.count_ones();
        // 8 bytes of slack for the full-width stores
        let mut left: Vec<u8> = Vec::with_capacity(n_left + 8);
        let mut right: Vec<u8> = Vec::with_capacity(n - n_left + 8);
        let (lp, rp) = (left.as_mut_ptr(), right.as_mut_ptr());
        let (mut li, mut ri) = (0usize, 0usize);

        let full = n / 8;
        for k in 0..full {
            let m8 = u64::from(bits.byte(k));
            let mask = _pdep_u64(m8, 0x0101_0101_0101_0101) * 0xff;
            let chunk = u64::from_le_bytes(src[8 * k..8 * k + 8].try_into().unwrap());
            let l = _pext_u64(chunk, mask);
            let r = _pext_u64(chunk, !mask);
            let cnt = m8.count_ones() as usize;
            std::ptr::write_unaligned(lp.add(li) as *mut [u8; 8], l.to_le_bytes());
            std::ptr::write_unaligned(rp.add(ri) as *mut [u8; 8], r.to_le_bytes());
            li += cnt;
            ri += 8 - cnt;
        }
        for (i, &v) in src.iter().enumerate().skip(8 * full) {
            if bits.get(i) {
                *lp.add(li) = v;
                li += 1;
            } else {
                *rp.add(ri) = v;
                ri += 1;
            }
        }
        debug_assert_eq!(li, n_left);
        left.set_len(li);
        right.set_len(ri);
        (left, right)
    }
}

/// Whether the bit-extraction partition path is usable on this machine.
pub fn accelerated_partition_available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::is_x86_feature_detected!("bmi2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Stable byte partition using hardware bit extraction when available.
pub fn partition_bytes_accelerated(src: &[u8], bits: &BitVector) -> (Vec<u8>, Vec<u8>) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("bmi2") {
            // SAFETY: bmi2 support checked above.
            return unsafe { pext::partition_bytes(src, bits) };
        }
    }
    partition_scalar(src, bits)
}

/// Splits every array of the layout into left (bit set) and right children, preserving order.
pub fn partition_layout(layout: &LeafBinLayout, bits: &BitVector) -> Result<(LeafBinLayout, LeafBinLayout)> {
    if bits.len() != layout.len() {
        return Err(Error::LengthMismatch { left: bits.len(), right: layout.len() });
    }
    let (index_l, index_r) = partition_scalar(&layout.index, bits);
    let (bins_l, bins_r): (Vec<_>, Vec<_>) =
        layout.bins.par_iter().map(|col| partition_bytes_accelerated(col, bits)).unzip();
    Ok((LeafBinLayout { index: index_l, bins: bins_l }, LeafBinLayout { index: index_r, bins: bins_r }))
}

/// Number of lower-triangle entries of a `t x t` matrix.
#[inline]
pub fn tri_len(t: usize) -> usize {
    t * (t + 1) / 2
}

/// Index of `(a, b)` with `b <= a` in a packed lower triangle.
#[inline]
pub fn tri_index(a: usize, b: usize) -> usize {
    debug_assert!(b <= a);
    a * (a + 1) / 2 + b
}

/// Per-bin statistics of one feature on one leaf.
///
/// With `t` regressor terms `z` per sample, each bin row holds
/// `[sum g, sum h, sum g*z (t), sum h*z (t), sum h*z*z^T (packed lower triangle)]`.
/// Terms involving the histogram feature's own value are not stored: within a bin that
/// value is the bin average, so they are reconstructed from these sums when splits are
/// evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub feature: usize,
    pub n_terms: usize,
    pub counts: Vec<u32>,
    pub stats: Vec<f64>,
}

impl Histogram {
    pub fn zeros(feature: usize, n_bins: usize, n_terms: usize) -> Self {
        let width = Self::width_for(n_terms);
        Histogram { feature, n_terms, counts: vec![0; n_bins], stats: vec![0.0; n_bins * width] }
    }

    #[inline]
    pub fn width_for(n_terms: usize) -> usize {
        2 + 2 * n_terms + tri_len(n_terms)
    }

    #[inline]
    pub fn width(&self) -> usize {
        Self::width_for(self.n_terms)
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin(&self, b: usize) -> &[f64] {
        let w = self.width();
        &self.stats[b * w..(b + 1) * w]
    }

    /// Column-wise total over all bins.
    pub fn total(&self) -> (u64, Vec<f64>) {
        let w = self.width();
        let mut total = vec![0.0; w];
        for b in 0..self.n_bins() {
            for (t, v) in total.iter_mut().zip(self.bin(b)) {
                *t += v;
            }
        }
        (self.counts.iter().map(|&c| u64::from(c)).sum(), total)
    }
}

#[inline(always)]
fn accumulate(row: &mut [f64], t: usize, g: f64, h: f64, z: &[f64]) {
    row[0] += g;
    row[1] += h;
    let (gz, rest) = row[2..].split_at_mut(t);
    let (hz, hzz) = rest.split_at_mut(t);
    for a in 0..t {
        gz[a] += g * z[a];
        hz[a] += h * z[a];
    }
    let mut k = 0;
    for a in 0..t {
        let hza = h * z[a];
        for &zb in &z[..=a] {
            hzz[k] += hza * zb;
            k += 1;
        }
    }
}

/// Accumulates samples `0..n`, where `sample(i)` gives the bin, `g` and `h` of leaf sample `i`.
/// The term count is a const parameter for the common small cases so the inner loops unroll;
/// the arithmetic is the same for every `T`.
#[inline(always)]
fn fill<const T: usize>(
    hist: &mut Histogram,
    t: usize,
    n: usize,
    z: &[f64],
    sample: impl Fn(usize) -> (usize, f64, f64),
) {
    let t = if T == usize::MAX { t } else { T };
    let w = Histogram::width_for(t);
    for i in 0..n {
        let (b, g, h) = sample(i);
        hist.counts[b] += 1;
        accumulate(&mut hist.stats[b * w..(b + 1) * w], t, g, h, &z[i * t..(i + 1) * t]);
    }
}

fn fill_dispatch(hist: &mut Histogram, n: usize, z: &[f64], sample: impl Fn(usize) -> (usize, f64, f64)) {
    match hist.n_terms {
        0 => fill::<0>(hist, 0, n, z, sample),
        1 => fill::<1>(hist, 1, n, z, sample),
        2 => fill::<2>(hist, 2, n, z, sample),
        3 => fill::<3>(hist, 3, n, z, sample),
        4 => fill::<4>(hist, 4, n, z, sample),
        5 => fill::<5>(hist, 5, n, z, sample),
        6 => fill::<6>(hist, 6, n, z, sample),
        t => fill::<{ usize::MAX }>(hist, t, n, z, sample),
    }
}

/// Histogram from a leaf's contiguous bin array.
///
/// `g`, `h` are in leaf order and `z` is row-major `len x n_terms`, also in leaf order.
pub fn construct_histogram(
    feature: usize,
    leaf_bins: &[u8],
    n_bins: usize,
    g: &[f64],
    h: &[f64],
    z: &[f64],
    n_terms: usize,
) -> Histogram {
    let mut hist = Histogram::zeros(feature, n_bins, n_terms);
    let (g, h) = (&g[..leaf_bins.len()], &h[..leaf_bins.len()]);
    fill_dispatch(&mut hist, leaf_bins.len(), z, |i| (leaf_bins[i] as usize, g[i], h[i]));
    hist
}

/// Same histogram through the global bin column and the leaf's sample ids, with
/// gradients indexed by sample id. Kept as the reference path.
#[allow(clippy::too_many_arguments)]
pub fn construct_histogram_indirect(
    feature: usize,
    global_bins: &[u8],
    index: &[u32],
    n_bins: usize,
    g: &[f64],
    h: &[f64],
    z: &[f64],
    n_terms: usize,
) -> Histogram {
    let mut hist = Histogram::zeros(feature, n_bins, n_terms);
    fill_dispatch(&mut hist, index.len(), z, |i| {
        let id = index[i] as usize;
        (global_bins[id] as usize, g[id], h[id])
    });
    hist
}

/// Left-side cumulative statistics at one bin boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryStats {
    pub boundary_bin: usize,
    pub left_count: u64,
    pub left: Vec<f64>,
    pub right_count: u64,
    pub right: Vec<f64>,
}

/// Prefix sums over bins; one entry per boundary `0..n_bins-1`. Right = total - left.
pub fn scan_splits(hist: &Histogram) -> Vec<BoundaryStats> {
    let (total_count, total) = hist.total();
    let mut left = vec![0.0; hist.width()];
    let mut left_count = 0u64;
    let mut out = Vec::with_capacity(hist.n_bins().saturating_sub(1));
    for b in 0..hist.n_bins().saturating_sub(1) {
        for (l, v) in left.iter_mut().zip(hist.bin(b)) {
            *l += v;
        }
        left_count += u64::from(hist.counts[b]);
        out.push(BoundaryStats {
            boundary_bin: b,
            left_count,
            left: left.clone(),
            right_count: total_count - left_count,
            right: total.iter().zip(&left).map(|(t, l)| t - l).collect(),
        });
    }
    out
}
