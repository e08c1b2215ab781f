//! Boundary geometry of rational inner functions on the bidisc and the
//! Carleson-box volume scaling of composition symbols built from them.
//!
//! The pipeline runs from polynomials ([`poly`]) to inner functions
//! ([`rif`]), their torus level sets ([`levelset`]), singular geometry
//! ([`geometry`]), Monte Carlo weighted volumes ([`carleson`]) and finally
//! a boundedness verdict ([`verdict`]).

pub mod carleson;
pub mod fit;
pub mod geometry;
pub mod levelset;
pub mod poly;
pub mod rif;
pub mod verdict;

pub use carleson::{
    box_volume, probe_lower_bound, scaling_exponent, volume_preimage, AdeltaSpec, CarlesonBox,
    LadderSpec, ScalingFit, WeightedVolumeEstimate, Window,
};
pub use geometry::{classify_intersections, contact_order, partial_growth, transversality_check};
pub use levelset::{detect_lines, trace_level_set, LevelSet};
pub use poly::{BivariatePolynomial, UnivariatePolynomial, C64};
pub use rif::{make_rif, Coordinate, RationalInnerFunction, SmoothSymbol};
pub use verdict::{decide, Conclusion, DecideOptions, SymbolPair, Verdict};
