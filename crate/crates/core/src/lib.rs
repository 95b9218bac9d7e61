//! Affine curve shortening flow on strictly convex planar curves.
//!
//! Curves are stored through their support function on a uniform grid of
//! normal angles, which turns the flow into the scalar periodic equation
//! `h_t = −(h + h_θθ)^{−1/3}`. Around the solver sit the affine invariants,
//! John-ellipse normalization, arrival-time reconstruction and the
//! closed-form ellipsoid solutions of the higher-dimensional affine normal
//! flow.

pub mod arrival;
pub mod curve;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod invariants;
pub mod io;
pub mod ndim;
pub mod normalization;
pub mod spectral;

pub use curve::{
    from_polygon, from_polygon_rounded, polygon_support, support_of_ellipse, AffineMap,
    ConvexPolygon, Ellipse, FourierMode, Point, SupportCurve,
};
pub use error::{Error, Result};
