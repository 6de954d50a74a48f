//! Monte Carlo percolation of device-to-device networks on Poisson-Voronoi
//! street systems, with line-of-sight SINR connectivity.
//!
//! Relays sit at crossroads, users along streets. A street is open when its
//! two relays reach each other directly or through every user on it. The
//! network percolates in a realization when open streets connect opposite
//! sides of the simulation window.

pub mod experiments;
pub mod geometry;
pub mod io;
pub mod percolation;
pub mod placement;
pub mod propagation;
pub mod seed;

pub use geometry::{Point, Street, StreetSystem, Window};
pub use percolation::{ProbabilityEstimate, RealizationOutcome};
pub use placement::{Deployment, DerivedParams, NetworkParams};
