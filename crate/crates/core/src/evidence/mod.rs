//! Frames of discernment, mass functions and Dempster's rule with conflict
//! tracking. Every value here is immutable once built.

mod frame;
mod mass;
mod report;

pub use frame::{same_frame, Frame, Subset, MAX_FRAME_SIZE};
pub use mass::{
    combine_all, combine_dempster, pairwise_conflict, plausibility, weight_of_conflict, MassFunction, SimpleSupport,
    MASS_TOLERANCE,
};
pub use report::{read_reports, write_reports, FrameInterner, Report};
