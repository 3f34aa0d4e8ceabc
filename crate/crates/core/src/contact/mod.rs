//! Contact model: primitive distances, the clamped log barrier, slack
//! variables, the augmentation term, and the fully-implicit friction
//! potential.

pub mod auglag;
pub mod barrier;
pub mod distance;
pub mod friction;

pub use auglag::{AugLagState, ContactPair, PairTopo};
pub use barrier::{barrier, barrier_d, barrier_dd, slack_closed_form};
pub use distance::{ee_distance, vf_distance, DistanceResult, PairKind};
pub use friction::FrictionAnchor;
