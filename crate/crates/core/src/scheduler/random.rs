//! Seeded random scheduling instances for benchmarks and statistical checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Item, SchedulerInput};
use crate::geometry::VehicleId;
use crate::spatial::ObjectId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub vehicles: usize,
    /// Inclusive range of objects per vehicle.
    pub objects: (usize, usize),
    /// Inclusive range of object sizes in bytes.
    pub size: (u64, u64),
    /// Probability an object is relevant to a given peer.
    pub p_relevant: f64,
    /// Probability an object is hidden from a given peer.
    pub p_hidden: f64,
    pub frames: usize,
    pub frame_budget: u64,
}

impl InstanceParams {
    pub fn with_vehicles(vehicles: usize) -> Self {
        Self { vehicles, objects: (2, 12), size: (1000, 10_000), p_relevant: 0.3, p_hidden: 0.5, frames: 10, frame_budget: 9000 }
    }
}

/// Boolean-reward instance: `y = 1` exactly when the object is hidden from and
/// relevant to the receiver.
pub fn random_instance(params: &InstanceParams, seed: u64) -> SchedulerInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peers: Vec<VehicleId> = (0..params.vehicles as u32).map(VehicleId).collect();
    let mut items = Vec::new();
    for tx in &peers {
        let k = rng.gen_range(params.objects.0..=params.objects.1);
        for obj in 0..k {
            let size = rng.gen_range(params.size.0..=params.size.1);
            let rewards = peers
                .iter()
                .map(|j| {
                    let hidden = rng.gen_bool(params.p_hidden);
                    let relevant = rng.gen_bool(params.p_relevant);
                    if j != tx && hidden && relevant {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            items.push(Item { tx: *tx, object: ObjectId(obj as u64), size, rewards, starvation: 0 });
        }
    }
    SchedulerInput::new(peers, items, vec![params.frame_budget; params.frames], false)
}
