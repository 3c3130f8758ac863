//! Spatial evidence types: normalized regions and pixel-space bounding boxes.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Axis-aligned region in normalized image coordinates.
///
/// Bounds are fractions of the image: `0 <= left < right <= 1` and
/// `0 <= top < bottom <= 1`. Proposal adapters answer in this space; pixel
/// rasters only exist once dimensions are known (see [`BBox`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

#[derive(Deserialize)]
struct RawRegion {
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl TryFrom<RawRegion> for Region {
    type Error = ModelError;

    fn try_from(raw: RawRegion) -> Result<Self, Self::Error> {
        Region::new(raw.left, raw.right, raw.top, raw.bottom)
    }
}

impl Region {
    pub fn new(left: f64, right: f64, top: f64, bottom: f64) -> Result<Self, ModelError> {
        for (name, v) in [
            ("left", left),
            ("right", right),
            ("top", top),
            ("bottom", bottom),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(ModelError::Geometry {
                    field: name,
                    reason: format!("{v} is outside [0, 1]"),
                });
            }
        }
        if right <= left {
            return Err(ModelError::Geometry {
                field: "right",
                reason: format!("right ({right}) must exceed left ({left})"),
            });
        }
        if bottom <= top {
            return Err(ModelError::Geometry {
                field: "bottom",
                reason: format!("bottom ({bottom}) must exceed top ({top})"),
            });
        }
        Ok(Self {
            left,
            right,
            top,
            bottom,
        })
    }

    /// The whole frame.
    pub fn full() -> Self {
        Self {
            left: 0.0,
            right: 1.0,
            top: 0.0,
            bottom: 1.0,
        }
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn bottom(&self) -> f64 {
        self.bottom
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    /// True when `other` lies inside this region, within `eps` slack per edge.
    pub fn contains(&self, other: &Region, eps: f64) -> bool {
        other.left >= self.left - eps
            && other.right <= self.right + eps
            && other.top >= self.top - eps
            && other.bottom <= self.bottom + eps
    }

    /// Smallest region covering both `self` and `other`.
    pub fn envelope(&self, other: &Region) -> Region {
        Region {
            left: self.left.min(other.left),
            right: self.right.max(other.right),
            top: self.top.min(other.top),
            bottom: self.bottom.max(other.bottom),
        }
    }

    /// Grows each side by `fraction` of the region's own extent, clamped to the frame.
    pub fn padded(&self, fraction: f64) -> Region {
        let pw = self.width() * fraction;
        let ph = self.height() * fraction;
        Region {
            left: (self.left - pw).max(0.0),
            right: (self.right + pw).min(1.0),
            top: (self.top - ph).max(0.0),
            bottom: (self.bottom + ph).min(1.0),
        }
    }
}

/// Axis-aligned bounding box in pixel coordinates, carrying its image size.
///
/// `0 <= x0 < x1 <= image_w` and `0 <= y0 < y1 <= image_h`; degenerate boxes
/// are rejected at construction rather than clamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBBox")]
pub struct BBox {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
    image_w: u32,
    image_h: u32,
}

#[derive(Deserialize)]
struct RawBBox {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
    image_w: u32,
    image_h: u32,
}

impl TryFrom<RawBBox> for BBox {
    type Error = ModelError;

    fn try_from(raw: RawBBox) -> Result<Self, Self::Error> {
        BBox::new(raw.x0, raw.y0, raw.x1, raw.y1, raw.image_w, raw.image_h)
    }
}

impl BBox {
    pub fn new(
        x0: u32,
        y0: u32,
        x1: u32,
        y1: u32,
        image_w: u32,
        image_h: u32,
    ) -> Result<Self, ModelError> {
        if x1 <= x0 {
            return Err(ModelError::Geometry {
                field: "x1",
                reason: format!("x1 ({x1}) must exceed x0 ({x0})"),
            });
        }
        if y1 <= y0 {
            return Err(ModelError::Geometry {
                field: "y1",
                reason: format!("y1 ({y1}) must exceed y0 ({y0})"),
            });
        }
        if x1 > image_w {
            return Err(ModelError::Geometry {
                field: "x1",
                reason: format!("x1 ({x1}) exceeds image width ({image_w})"),
            });
        }
        if y1 > image_h {
            return Err(ModelError::Geometry {
                field: "y1",
                reason: format!("y1 ({y1}) exceeds image height ({image_h})"),
            });
        }
        Ok(Self {
            x0,
            y0,
            x1,
            y1,
            image_w,
            image_h,
        })
    }

    pub fn x0(&self) -> u32 {
        self.x0
    }

    pub fn y0(&self) -> u32 {
        self.y0
    }

    pub fn x1(&self) -> u32 {
        self.x1
    }

    pub fn y1(&self) -> u32 {
        self.y1
    }

    pub fn image_w(&self) -> u32 {
        self.image_w
    }

    pub fn image_h(&self) -> u32 {
        self.image_h
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x0) + f64::from(self.width()) / 2.0,
            f64::from(self.y0) + f64::from(self.height()) / 2.0,
        )
    }

    /// True when both dimensions are strictly below the given thresholds.
    ///
    /// This is the single definition of "too small to perceive"; the dataset
    /// builder and the scene oracle both route through it.
    pub fn is_sub_threshold(&self, threshold_w: u32, threshold_h: u32) -> bool {
        self.width() < threshold_w && self.height() < threshold_h
    }

    /// Normalized counterpart of this box within its image.
    pub fn to_region(&self) -> Region {
        // The box invariants make the division results valid region bounds.
        Region {
            left: f64::from(self.x0) / f64::from(self.image_w),
            right: f64::from(self.x1) / f64::from(self.image_w),
            top: f64::from(self.y0) / f64::from(self.image_h),
            bottom: f64::from(self.y1) / f64::from(self.image_h),
        }
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}
