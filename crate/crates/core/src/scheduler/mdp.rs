use std::collections::HashMap;

use super::{ChannelMatrix, SchedulerInput};
use crate::error::{Error, Result};

pub const MDP_MAX_VEHICLES: usize = 3;
pub const MDP_MAX_OBJECTS: usize = 4;
pub const MDP_MAX_FRAMES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    /// Maximum expected reward over the frames (undiscounted).
    pub value: f64,
    /// Item indices to broadcast in the first frame, ascending.
    pub first_action: Vec<usize>,
}

struct Pair {
    reward: f64,
    p: f64,
}

struct Model<'a> {
    input: &'a SchedulerInput,
    pairs: Vec<Pair>,
    /// Pair indices per item.
    by_item: Vec<Vec<usize>>,
    memo: HashMap<(usize, u64), (f64, u32)>,
}

impl Model<'_> {
    /// Best expected value from frame `n` with delivered pairs `mask`, and the
    /// item subset achieving it.
    fn value(&mut self, n: usize, mask: u64) -> (f64, u32) {
        if n == self.input.frame_budgets.len() {
            return (0.0, 0);
        }
        if let Some(v) = self.memo.get(&(n, mask)) {
            return *v;
        }
        let live: Vec<usize> = (0..self.input.items.len())
            .filter(|&i| self.by_item[i].iter().any(|&q| mask & (1 << q) == 0))
            .collect();
        let budget = self.input.frame_budgets[n];
        let mut best = (f64::NEG_INFINITY, 0u32);
        for sub in 0u32..(1 << live.len()) {
            let mut size = 0;
            let mut action = 0u32;
            let mut open = Vec::new();
            for (b, &i) in live.iter().enumerate() {
                if sub & (1 << b) != 0 {
                    size += self.input.items[i].size;
                    action |= 1 << i;
                    open.extend(self.by_item[i].iter().copied().filter(|&q| mask & (1 << q) == 0));
                }
            }
            if size > budget {
                continue;
            }
            let mut expected = 0.0;
            for outcome in 0u32..(1 << open.len()) {
                let mut prob = 1.0;
                let mut reward = 0.0;
                let mut next = mask;
                for (b, &q) in open.iter().enumerate() {
                    let pair = &self.pairs[q];
                    if outcome & (1 << b) != 0 {
                        prob *= pair.p;
                        reward += pair.reward;
                        next |= 1 << q;
                    } else {
                        prob *= 1.0 - pair.p;
                    }
                }
                if prob == 0.0 {
                    continue;
                }
                expected += prob * (reward + self.value(n + 1, next).0);
            }
            if expected > best.0 + 1e-12 {
                best = (expected, action);
            }
        }
        self.memo.insert((n, mask), best);
        best
    }
}

/// Exact finite-horizon optimum over reception states for tiny domains.
/// Delivery of an undelivered (item, receiver) pair earns its reward; each
/// broadcast reaches each receiver independently with the link probability.
pub fn mdp_optimal(input: &SchedulerInput, channel: &ChannelMatrix) -> Result<MdpSolution> {
    input.validate()?;
    let mut per_tx: HashMap<_, usize> = HashMap::new();
    for it in &input.items {
        *per_tx.entry(it.tx).or_default() += 1;
    }
    if input.peers.len() > MDP_MAX_VEHICLES
        || per_tx.values().any(|&k| k > MDP_MAX_OBJECTS)
        || input.frame_budgets.len() > MDP_MAX_FRAMES
    {
        return Err(Error::ScaleExceeded(format!(
            "MDP limited to {MDP_MAX_VEHICLES} vehicles, {MDP_MAX_OBJECTS} objects each, {MDP_MAX_FRAMES} frames"
        )));
    }
    let mut pairs = Vec::new();
    let mut by_item = vec![Vec::new(); input.items.len()];
    for (i, it) in input.items.iter().enumerate() {
        for (j, peer) in input.peers.iter().enumerate() {
            if *peer != it.tx && !input.received[i][j] && it.rewards[j] > 0.0 {
                by_item[i].push(pairs.len());
                pairs.push(Pair { reward: it.rewards[j], p: channel.get(it.tx, *peer) });
            }
        }
    }
    let mut model = Model { input, pairs, by_item, memo: HashMap::new() };
    let (value, action) = model.value(0, 0);
    let first_action = (0..input.items.len()).filter(|&i| action & (1 << i) != 0).collect();
    Ok(MdpSolution { value: value.max(0.0), first_action })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VehicleId;
    use crate::scheduler::Item;
    use crate::spatial::ObjectId;

    fn two_vehicles(y: f64, frames: usize) -> SchedulerInput {
        let item = Item { tx: VehicleId(1), object: ObjectId(1), size: 100, rewards: vec![0.0, y], starvation: 0 };
        SchedulerInput::new(vec![VehicleId(1), VehicleId(2)], vec![item], vec![100; frames], false)
    }

    #[test]
    fn lossless_single_frame() {
        let input = two_vehicles(1.0, 1);
        let ch = ChannelMatrix::uniform(input.peers.clone(), 1.0);
        let s = mdp_optimal(&input, &ch).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.first_action, vec![0]);
    }

    #[test]
    fn half_loss_two_frames() {
        let input = two_vehicles(1.0, 2);
        let ch = ChannelMatrix::uniform(input.peers.clone(), 0.5);
        assert!((mdp_optimal(&input, &ch).unwrap().value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn visible_object_is_worthless() {
        let input = two_vehicles(0.0, 2);
        let ch = ChannelMatrix::uniform(input.peers.clone(), 1.0);
        assert_eq!(mdp_optimal(&input, &ch).unwrap().value, 0.0);
    }

    #[test]
    fn refuses_large_domains() {
        let peers: Vec<VehicleId> = (0..4).map(VehicleId).collect();
        let input = SchedulerInput::new(peers.clone(), vec![], vec![100], false);
        let ch = ChannelMatrix::uniform(peers, 1.0);
        assert!(matches!(mdp_optimal(&input, &ch), Err(Error::ScaleExceeded(_))));
    }
}
