//! Run-length-encoded binary masks.
//!
//! Encoding: row-major pixel order, alternating run counts starting with a
//! zero-pixel run. The leading run may be empty (mask starts with a set
//! pixel); every later run must be positive, which makes the encoding
//! canonical: two masks are pixel-equal iff their encodings are equal.

use serde::{Deserialize, Serialize};

use super::geometry::BBox;
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMask")]
pub struct Mask {
    width: u32,
    height: u32,
    rle: Vec<u32>,
}

#[derive(Deserialize)]
struct RawMask {
    width: u32,
    height: u32,
    rle: Vec<u32>,
}

impl TryFrom<RawMask> for Mask {
    type Error = ModelError;

    fn try_from(raw: RawMask) -> Result<Self, Self::Error> {
        Mask::from_rle(raw.width, raw.height, raw.rle)
    }
}

impl Mask {
    /// Validates and wraps an existing run-length encoding.
    pub fn from_rle(width: u32, height: u32, rle: Vec<u32>) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::Mask {
                reason: format!("mask dimensions must be positive, got {width}x{height}"),
            });
        }
        if rle.is_empty() {
            return Err(ModelError::Mask {
                reason: "rle must contain at least one run".into(),
            });
        }
        if rle.iter().skip(1).any(|&run| run == 0) {
            return Err(ModelError::Mask {
                reason: "only the leading run may be empty".into(),
            });
        }
        let total: u64 = rle.iter().map(|&run| u64::from(run)).sum();
        let area = u64::from(width) * u64::from(height);
        if total != area {
            return Err(ModelError::Mask {
                reason: format!("rle sums to {total}, expected {width}x{height} = {area}"),
            });
        }
        Ok(Self { width, height, rle })
    }

    /// Builds a mask from a row-major pixel sequence.
    pub fn from_pixels(width: u32, height: u32, pixels: &[bool]) -> Result<Self, ModelError> {
        let area = u64::from(width) * u64::from(height);
        if pixels.len() as u64 != area {
            return Err(ModelError::Mask {
                reason: format!("expected {area} pixels, got {}", pixels.len()),
            });
        }
        let mut builder = RleBuilder::new();
        for &p in pixels {
            builder.push(p, 1);
        }
        Mask::from_rle(width, height, builder.finish())
    }

    /// Rectangle mask with exactly the box's pixels set.
    pub fn from_bbox(b: &BBox) -> Self {
        let w = b.image_w();
        let (x0, x1, y0, y1) = (b.x0(), b.x1(), b.y0(), b.y1());
        let mut builder = RleBuilder::new();
        builder.push(false, u64::from(y0) * u64::from(w) + u64::from(x0));
        for row in y0..y1 {
            builder.push(true, u64::from(x1 - x0));
            if row + 1 < y1 {
                // gap from this row's x1 to the next row's x0
                builder.push(false, u64::from(w - x1) + u64::from(x0));
            }
        }
        builder.push(
            false,
            u64::from(w - x1) + u64::from(b.image_h() - y1) * u64::from(w),
        );
        Mask {
            width: w,
            height: b.image_h(),
            rle: builder.finish(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rle(&self) -> &[u32] {
        &self.rle
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    /// Number of set pixels.
    pub fn set_count(&self) -> u64 {
        self.rle
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&run| u64::from(run))
            .sum()
    }

    /// Decodes to a row-major pixel vector. Intended for small masks and tests.
    pub fn to_pixels(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.area() as usize);
        for (i, &run) in self.rle.iter().enumerate() {
            out.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
        }
        out
    }

    /// Iterates runs of set pixels as (start_index, length) in row-major order.
    pub fn set_runs(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        let mut pos = 0u64;
        self.rle.iter().enumerate().filter_map(move |(i, &run)| {
            let start = pos;
            pos += u64::from(run);
            (i % 2 == 1).then_some((start, run))
        })
    }

    /// Intersection and union pixel counts with another mask of equal size,
    /// computed by walking both encodings without materializing pixels.
    pub fn overlap_counts(&self, other: &Mask) -> Result<(u64, u64), ModelError> {
        if self.width != other.width || self.height != other.height {
            return Err(ModelError::Mask {
                reason: format!(
                    "dimension mismatch: {}x{} vs {}x{}",
                    self.width, self.height, other.width, other.height
                ),
            });
        }
        let (mut inter, mut union) = (0u64, 0u64);
        let (mut i, mut j) = (0usize, 0usize);
        let (mut rem_a, mut rem_b) = (u64::from(self.rle[0]), u64::from(other.rle[0]));
        let mut consumed = 0u64;
        let area = self.area();
        while consumed < area {
            while rem_a == 0 {
                i += 1;
                rem_a = u64::from(self.rle[i]);
            }
            while rem_b == 0 {
                j += 1;
                rem_b = u64::from(other.rle[j]);
            }
            let step = rem_a.min(rem_b);
            let a_set = i % 2 == 1;
            let b_set = j % 2 == 1;
            if a_set && b_set {
                inter += step;
            }
            if a_set || b_set {
                union += step;
            }
            rem_a -= step;
            rem_b -= step;
            consumed += step;
        }
        Ok((inter, union))
    }
}

/// Accumulates alternating runs, merging same-value pushes and dropping
/// empty ones so the result is always canonical.
struct RleBuilder {
    runs: Vec<u32>,
    current_set: bool,
}

impl RleBuilder {
    fn new() -> Self {
        Self {
            runs: vec![0],
            current_set: false,
        }
    }

    fn push(&mut self, value: bool, count: u64) {
        if count == 0 {
            return;
        }
        if value != self.current_set {
            self.runs.push(0);
            self.current_set = value;
        }
        let last = self.runs.last_mut().expect("builder starts non-empty");
        *last = last
            .checked_add(u32::try_from(count).expect("run fits u32"))
            .expect("run count overflow");
    }

    fn finish(self) -> Vec<u32> {
        self.runs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent rasterizer: paints the box onto a pixel grid.
    fn raster_oracle(b: &BBox) -> Vec<bool> {
        let (w, h) = (b.image_w(), b.image_h());
        let mut grid = vec![false; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                if b.contains_pixel(x, y) {
                    grid[(y * w + x) as usize] = true;
                }
            }
        }
        grid
    }

    #[test]
    fn from_bbox_small_box() {
        let b = BBox::new(0, 0, 2, 2, 4, 4).unwrap();
        let m = Mask::from_bbox(&b);
        assert_eq!(m.set_count(), 4);
        assert_eq!(m.rle().iter().map(|&r| u64::from(r)).sum::<u64>(), 16);
        assert_eq!(m.to_pixels(), raster_oracle(&b));
    }

    #[test]
    fn from_bbox_full_image() {
        let b = BBox::new(0, 0, 5, 3, 5, 3).unwrap();
        let m = Mask::from_bbox(&b);
        assert_eq!(m.rle(), &[0, 15]);
    }

    #[test]
    fn from_bbox_matches_pixel_grid_oracle() {
        let b = BBox::new(1, 1, 3, 2, 4, 3).unwrap();
        let m = Mask::from_bbox(&b);
        let pixels = m.to_pixels();
        assert_eq!(pixels, raster_oracle(&b));
        // set pixels are exactly (1,1) and (2,1)
        let set: Vec<usize> = pixels
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
            .collect();
        assert_eq!(set, vec![5, 6]);
    }

    #[test]
    fn full_width_box_merges_rows_into_one_run() {
        let b = BBox::new(0, 1, 4, 3, 4, 4).unwrap();
        let m = Mask::from_bbox(&b);
        assert_eq!(m.rle(), &[4, 8, 4]);
    }

    #[test]
    fn from_rle_validates() {
        assert!(Mask::from_rle(4, 4, vec![0, 16]).is_ok());
        assert!(Mask::from_rle(4, 4, vec![16]).is_ok());
        assert!(Mask::from_rle(4, 4, vec![15]).is_err()); // wrong sum
        assert!(Mask::from_rle(4, 4, vec![3, 0, 13]).is_err()); // interior empty run
        assert!(Mask::from_rle(0, 4, vec![0]).is_err());
        assert!(Mask::from_rle(4, 4, vec![]).is_err());
    }

    #[test]
    fn overlap_counts_match_pixel_counting() {
        let a = Mask::from_bbox(&BBox::new(0, 0, 3, 3, 6, 6).unwrap());
        let b = Mask::from_bbox(&BBox::new(2, 2, 5, 5, 6, 6).unwrap());
        let (inter, union) = a.overlap_counts(&b).unwrap();
        let (pa, pb) = (a.to_pixels(), b.to_pixels());
        let naive_inter = pa.iter().zip(&pb).filter(|(x, y)| **x && **y).count() as u64;
        let naive_union = pa.iter().zip(&pb).filter(|(x, y)| **x || **y).count() as u64;
        assert_eq!((inter, union), (naive_inter, naive_union));
        assert_eq!(inter, 1);
        assert_eq!(union, 17);
    }

    #[test]
    fn overlap_rejects_dimension_mismatch() {
        let a = Mask::from_rle(2, 2, vec![4]).unwrap();
        let b = Mask::from_rle(2, 3, vec![6]).unwrap();
        assert!(a.overlap_counts(&b).is_err());
    }

    #[test]
    fn from_pixels_round_trips() {
        let pixels = vec![true, false, false, true, true, false];
        let m = Mask::from_pixels(3, 2, &pixels).unwrap();
        assert_eq!(m.rle(), &[0, 1, 2, 2, 1]);
        assert_eq!(m.to_pixels(), pixels);
    }
}
