//! The organizer: orders, rewards, utility accounting, map merging and the
//! per-tick coordination loop.

pub mod assignment;
pub mod policy;
pub mod reward;
pub mod sim;
pub mod utility;

pub use assignment::{decode_action, encode_action, Assignment, Order};
pub use policy::{DecisionContext, DqnPolicy, NoCoopPolicy, Policy, RandomPolicy};
pub use reward::{reward, Outcome};
pub use sim::{AssistStatus, AssistTask, ObservationPost, SimConfig, Simulation, TickMetrics};
pub use utility::{utility_report, EdgeKind, GroupGraph, UtilityReport};

use crate::error::{Error, Result};
use crate::planner::{NavCell, NavMap};

/// Cell-wise join: occupied if any map says occupied, else free if any says
/// free, else unknown.
pub fn merge_maps(maps: &[&NavMap]) -> Result<NavMap> {
    let first = maps.first().ok_or_else(|| Error::InvalidArgument("no maps to merge".into()))?;
    if maps.iter().any(|m| !m.same_shape(first)) {
        return Err(Error::InvalidArgument("nav maps differ in dimensions".into()));
    }
    let cells = (0..first.cells().len())
        .map(|i| {
            let mut free = false;
            for m in maps {
                match m.cells()[i] {
                    NavCell::Occupied => return NavCell::Occupied,
                    NavCell::Free => free = true,
                    NavCell::Unknown => {}
                }
            }
            if free {
                NavCell::Free
            } else {
                NavCell::Unknown
            }
        })
        .collect();
    NavMap::from_cells(first.width(), first.height(), first.cell_size(), cells)
}
