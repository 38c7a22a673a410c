//! The infinite binary tree of dyadic subintervals of `[0, 1]`.
//!
//! Depth `l` holds the `2^l` closed intervals `[(k-1)/2^l, k/2^l]`, `k = 1..=2^l`.
//! Nodes are plain values; nothing is ever materialised. Indices and interval
//! endpoints are arbitrary-precision so the walk can descend without a depth cap.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A node of the interval tree: the `index`-th interval at `depth`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeId {
    depth: u64,
    index: BigUint,
}

impl NodeId {
    pub fn root() -> Self {
        NodeId {
            depth: 0,
            index: BigUint::one(),
        }
    }

    pub fn new(depth: u64, index: impl Into<BigUint>) -> Result<Self> {
        let index = index.into();
        if index.is_zero() || index > (BigUint::one() << depth) {
            return Err(Error::InvalidNode {
                depth,
                index: index.to_string(),
            });
        }
        Ok(NodeId { depth, index })
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    /// One-based position within the depth.
    pub fn index(&self) -> &BigUint {
        &self.index
    }

    pub fn is_root(&self) -> bool {
        self.depth == 0
    }

    pub fn left_child(&self) -> NodeId {
        NodeId {
            depth: self.depth + 1,
            index: (&self.index << 1u32) - 1u32,
        }
    }

    pub fn right_child(&self) -> NodeId {
        NodeId {
            depth: self.depth + 1,
            index: &self.index << 1u32,
        }
    }

    /// The parent node; the root is its own parent.
    pub fn parent(&self) -> NodeId {
        if self.depth == 0 {
            return self.clone();
        }
        NodeId {
            depth: self.depth - 1,
            index: (&self.index + 1u32) >> 1u32,
        }
    }

    /// Left endpoint, midpoint and right endpoint of the node's interval.
    pub fn interval(&self) -> Interval {
        let l = self.depth;
        Interval {
            left: DyadicPoint::new(&self.index - 1u32, l),
            mid: DyadicPoint::new((&self.index << 1u32) - 1u32, l + 1),
            right: DyadicPoint::new(self.index.clone(), l),
        }
    }

    /// Largest distance from any point of the interval to `xstar`.
    pub fn max_distance_to(&self, xstar: f64) -> f64 {
        let iv = self.interval();
        (iv.left.to_f64() - xstar)
            .abs()
            .max((iv.right.to_f64() - xstar).abs())
    }

    /// Exact version of [`NodeId::max_distance_to`] for a dyadic optimum.
    pub fn max_distance_exact(&self, xstar: &DyadicPoint) -> DyadicPoint {
        let iv = self.interval();
        let a = iv.left.abs_diff(xstar);
        let b = iv.right.abs_diff(xstar);
        if a >= b {
            a
        } else {
            b
        }
    }

    /// Whether the closed interval of this node contains `x`.
    pub fn contains(&self, x: f64) -> bool {
        let iv = self.interval();
        iv.left.to_f64() <= x && x <= iv.right.to_f64()
    }

    /// Whether the closed interval of this node contains the dyadic point `x`.
    pub fn contains_exact(&self, x: &DyadicPoint) -> bool {
        let iv = self.interval();
        iv.left <= *x && *x <= iv.right
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.depth, self.index)
    }
}

/// Endpoints and midpoint of a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub left: DyadicPoint,
    pub mid: DyadicPoint,
    pub right: DyadicPoint,
}

impl Interval {
    /// The three query points in test order: left, mid, right.
    pub fn points(&self) -> [&DyadicPoint; 3] {
        [&self.left, &self.mid, &self.right]
    }

    pub fn length(&self) -> DyadicPoint {
        self.right.abs_diff(&self.left)
    }
}

/// An exact dyadic rational `m / 2^l` in `[0, 1]`.
///
/// Always kept in lowest terms (odd numerator, or the two endpoints `0/1` and
/// `1/1`), so derived equality is value equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    numerator: BigUint,
    exponent: u64,
}

impl DyadicPoint {
    pub fn zero() -> Self {
        DyadicPoint {
            numerator: BigUint::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        DyadicPoint {
            numerator: BigUint::one(),
            exponent: 0,
        }
    }

    // Callers guarantee numerator <= 2^exponent.
    fn new(numerator: BigUint, exponent: u64) -> Self {
        debug_assert!(numerator <= BigUint::one() << exponent);
        if numerator.is_zero() {
            return Self::zero();
        }
        let tz = numerator.trailing_zeros().unwrap_or(0).min(exponent);
        DyadicPoint {
            numerator: numerator >> tz,
            exponent: exponent - tz,
        }
    }

    pub fn try_new(numerator: impl Into<BigUint>, exponent: u64) -> Result<Self> {
        let numerator = numerator.into();
        if numerator > BigUint::one() << exponent {
            return Err(Error::param(
                "numerator",
                format!("{numerator}/2^{exponent} lies outside [0, 1]"),
            ));
        }
        Ok(Self::new(numerator, exponent))
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.exponent == 0 && self.numerator.is_one()
    }

    /// `|self - other|`, exact.
    pub fn abs_diff(&self, other: &DyadicPoint) -> DyadicPoint {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        let d = if a >= b { a - b } else { b - a };
        DyadicPoint::new(d, e)
    }

    /// Nearest double. Exact whenever the reduced numerator fits in 53 bits.
    pub fn to_f64(&self) -> f64 {
        let bits = self.numerator.bits();
        let shift = bits.saturating_sub(64);
        let mut top = (&self.numerator >> shift)
            .to_u64()
            .expect("shifted numerator fits in 64 bits");
        // sticky bit so the u64 -> f64 conversion rounds like the full value would
        if shift > 0 && self.numerator.trailing_zeros().unwrap_or(0) < shift {
            top |= 1;
        }
        scale_by_pow2(top as f64, shift as i64 - self.exponent as i64)
    }
}

fn scale_by_pow2(mut v: f64, mut e: i64) -> f64 {
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    v * 2f64.powi(e as i32)
}

impl PartialOrd for DyadicPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        a.cmp(&b)
    }
}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}
