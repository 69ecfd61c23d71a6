//! Most-probable transition paths and quasi-potentials for two-dimensional
//! stochastic systems in the small-noise limit, built around the geometric
//! minimum action method, with the upper-ocean carbonate cycle as the
//! concrete system of interest.
//!
//! Everything numeric is generic over the scalar via [`num::Real`]
//! (`f32`/`f64`); the aliases below fix the working precision used by the
//! command-line tools and tests.

pub mod carbon;
pub mod dynamics;
pub mod error;
pub mod gmam;
pub mod num;
pub mod oracles;
pub mod path;
pub mod rng;
pub mod sde;
pub mod system;

pub use error::{Error, Result};
pub use num::{Mat2, Real, Vec2};
pub use system::System;

/// Working scalar for the shipped binaries and tests.
pub type Scalar = f64;
pub type State = Vec2<Scalar>;
pub type Params = carbon::ModelParams<Scalar>;
pub type Carbonate = carbon::CarbonSystem<Scalar>;
pub type Path = path::DiscretePath<Scalar>;
pub type Cycle = dynamics::LimitCycle<Scalar>;
pub type Gmam = gmam::GmamConfig<Scalar>;
pub type Sim = sde::SimConfig<Scalar>;
pub type Transition = gmam::TransitionResult<Scalar>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_compose() {
        let s: State = Vec2::new(1.0, 2.0);
        assert_eq!(s.x + s.y, 3.0);
        let g: Gmam = Default::default();
        assert_eq!(g.n_points, 3000);
        let sim: Sim = Default::default();
        assert_eq!(sim.n_paths, 100);
    }
}
