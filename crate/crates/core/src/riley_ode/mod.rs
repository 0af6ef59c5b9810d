//! The belief differential equation on the slack and binding regions and
//! its piecewise integration.

mod integrate;
mod lipschitz;
mod path;
mod rhs;
mod schedule;

pub use integrate::{integrate_schedule, Integration, StepControl, StopEvents, StopReason, EVENT_WIDTH};
pub use lipschitz::{estimate_lipschitz, LipschitzBox};
pub use path::{PathNode, SampledPath};
pub use rhs::{binding_rhs, rhs, slack_rhs, Region};
pub use schedule::PiecewiseSchedule;
