//! Exact-arithmetic geometry of half-translation surfaces.
//!
//! A half-translation surface is a euclidean polygon complex whose edges are
//! identified by maps `z ↦ ±z + c`, giving a flat metric with cone points of
//! angle `kπ`. Everything here is computed over arbitrary-precision rationals:
//! orientation tests, cone angles, geodesic tracing, saddle-connection
//! enumeration, cylinder decompositions, ribbon-graph constructions and the
//! linking tests for closed geodesics are all exact predicates, never
//! floating-point approximations.
//!
//! The main entry points are:
//!
//! * [`surface`] — building and validating surfaces, cone points, Euler
//!   characteristic;
//! * [`tracer`] — straight-line flow, germs at cone points, saddle
//!   connections;
//! * [`flow`] — separatrix diagrams, cylinder decompositions, maximal
//!   cylinders;
//! * [`ribbon`] — cyclically ordered metric graphs and the cylinder-gluing
//!   construction of the associated surface;
//! * [`linking`] — germ cyclic orders and entrelacement of closed geodesics;
//! * [`lamination`] — classification of finite leaf families into cylindrical
//!   and graph-supported components.

pub mod flow;
pub mod geom;
pub mod io;
pub mod lamination;
pub mod linking;
pub mod rational;
pub mod ribbon;
pub mod samples;
pub mod surface;
pub mod svg;
pub mod tracer;

pub use geom::{Angle, Direction, Vec2};
pub use rational::Rational;
pub use surface::{HalfTranslationSurface, Surface, ValidationReport};
