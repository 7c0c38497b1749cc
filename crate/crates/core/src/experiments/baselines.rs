//! Heuristic allocators compared against the learned organizer: a one-shot
//! auction and an emotion-driven recruitment model.

use serde::{Deserialize, Serialize};

use crate::coordinator::{Assignment, DecisionContext, Order, Outcome, Policy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuctionParams {
    /// Loss (m) above which an agent requests help.
    pub threshold: f64,
    /// Weight of the bidder's own loss in its bid.
    pub loss_weight: f64,
}

impl Default for AuctionParams {
    fn default() -> Self {
        Self {
            threshold: 0.3,
            loss_weight: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionParams {
    /// Per-tick factor pulling empathy back toward `resting_empathy`.
    pub empathy_decay: f64,
    pub resting_empathy: f64,
    pub empathy_boost: f64,
    pub initial_empathy: f64,
    /// Volunteering threshold on `empathy * distress`.
    pub threshold: f64,
}

impl Default for EmotionParams {
    fn default() -> Self {
        Self {
            empathy_decay: 0.95,
            resting_empathy: 1.0,
            empathy_boost: 1.0,
            initial_empathy: 1.0,
            threshold: 1.0,
        }
    }
}

fn check_shapes(losses: &[f64], distances: &[Vec<Option<f64>>], committed: &[Option<usize>]) -> Result<()> {
    let m = losses.len();
    if distances.len() != m || distances.iter().any(|r| r.len() != m) || committed.len() != m {
        return Err(Error::InvalidArgument(format!("allocator inputs disagree on the agent count {m}")));
    }
    Ok(())
}

/// Lowest `key` among `candidates`, ties to the lower id.
fn argmin_by(candidates: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in candidates {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Needy agents (loss above the threshold) are auctioned in order of
/// decreasing loss. Every healthy, unallocated agent with a path bids
/// `distance + w * own_loss` and the lowest bid wins. Helpers listed in
/// `committed` keep a still-needy target without re-bidding. Served needy
/// agents wait; everyone else works independently.
pub fn auction_assign(
    losses: &[f64],
    distances: &[Vec<Option<f64>>],
    committed: &[Option<usize>],
    params: &AuctionParams,
) -> Result<Assignment> {
    check_shapes(losses, distances, committed)?;
    let m = losses.len();
    let needy: Vec<bool> = losses.iter().map(|l| *l > params.threshold).collect();
    let mut orders = vec![Order::Independent; m];
    let mut busy = vec![false; m];
    let mut served = vec![false; m];
    for (h, c) in committed.iter().enumerate() {
        if let Some(k) = *c {
            if k < m && k != h && needy[k] && !needy[h] && !served[k] {
                orders[h] = Order::Assist(k);
                busy[h] = true;
                served[k] = true;
            }
        }
    }
    let mut queue: Vec<usize> = (0..m).filter(|k| needy[*k] && !served[*k]).collect();
    queue.sort_by(|a, b| losses[*b].total_cmp(&losses[*a]).then(a.cmp(b)));
    for k in queue {
        let bids = (0..m)
            .filter(|h| *h != k && !needy[*h] && !busy[*h])
            .filter_map(|h| distances[h][k].map(|d| (h, d + params.loss_weight * losses[h])));
        if let Some(h) = argmin_by(bids) {
            orders[h] = Order::Assist(k);
            busy[h] = true;
            served[k] = true;
        }
    }
    for k in 0..m {
        if served[k] {
            orders[k] = Order::Wait;
        }
    }
    Ok(Assignment::from_orders(&orders))
}

/// Distress and empathy state of the emotional recruitment model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionModel {
    params: EmotionParams,
    distress: Vec<f64>,
    empathy: Vec<f64>,
}

impl EmotionModel {
    pub fn new(m: usize, params: EmotionParams) -> Self {
        Self {
            params,
            distress: vec![0.0; m],
            empathy: vec![params.initial_empathy; m],
        }
    }

    pub fn distress(&self) -> &[f64] {
        &self.distress
    }

    pub fn empathy(&self) -> &[f64] {
        &self.empathy
    }

    /// One tick. `previous` and `outcomes` describe the last orders; a
    /// successful assist boosts the helper's empathy and clears the
    /// target's distress. Then empathy relaxes toward its resting level and
    /// distress grows by the current loss. Helpers in `committed` keep their task (the target
    /// waits). Otherwise the most distressed agent recruits the nearest
    /// volunteer whose `empathy * distress` exceeds the threshold.
    pub fn step(
        &mut self,
        losses: &[f64],
        distances: &[Vec<Option<f64>>],
        committed: &[Option<usize>],
        previous: Option<&Assignment>,
        outcomes: &[Outcome],
    ) -> Result<Assignment> {
        check_shapes(losses, distances, committed)?;
        let m = losses.len();
        if self.distress.len() != m {
            return Err(Error::InvalidArgument(format!("emotion model built for {} agents, got {m}", self.distress.len())));
        }
        let mut boosted = vec![false; m];
        if let Some(prev) = previous {
            for h in 0..m.min(prev.agents()) {
                if let (Order::Assist(k), Some(Outcome::Successful)) = (prev.order(h), outcomes.get(h)) {
                    boosted[h] = true;
                    self.distress[k] = 0.0;
                }
            }
        }
        for h in 0..m {
            let rest = self.params.resting_empathy;
            self.empathy[h] = rest + self.params.empathy_decay * (self.empathy[h] - rest);
            if boosted[h] {
                self.empathy[h] += self.params.empathy_boost;
            }
            self.distress[h] += losses[h];
        }

        let mut orders = vec![Order::Independent; m];
        let mut involved = vec![false; m];
        for (h, c) in committed.iter().enumerate() {
            if let Some(k) = *c {
                if k < m && k != h && !involved[h] && !involved[k] {
                    orders[h] = Order::Assist(k);
                    orders[k] = Order::Wait;
                    involved[h] = true;
                    involved[k] = true;
                }
            }
        }
        let target = argmin_by((0..m).filter(|k| !involved[*k]).map(|k| (k, -self.distress[k])));
        if let Some(k) = target {
            let need = self.distress[k];
            let volunteers = (0..m)
                .filter(|h| *h != k && !involved[*h] && self.empathy[*h] * need > self.params.threshold)
                .filter_map(|h| distances[h][k].map(|d| (h, d)));
            if let Some(h) = argmin_by(volunteers) {
                orders[h] = Order::Assist(k);
                orders[k] = Order::Wait;
            }
        }
        Ok(Assignment::from_orders(&orders))
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuctionPolicy {
    params: AuctionParams,
}

impl AuctionPolicy {
    pub fn new(params: AuctionParams) -> Self {
        Self { params }
    }
}

impl Policy for AuctionPolicy {
    fn name(&self) -> &str {
        "auction"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Assignment> {
        auction_assign(ctx.losses, ctx.distances, ctx.active_targets, &self.params)
    }
}

#[derive(Debug, Clone)]
pub struct EmotionPolicy {
    params: EmotionParams,
    model: EmotionModel,
    previous: Option<Assignment>,
}

impl EmotionPolicy {
    pub fn new(m: usize, params: EmotionParams) -> Self {
        Self {
            params,
            model: EmotionModel::new(m, params),
            previous: None,
        }
    }

    pub fn model(&self) -> &EmotionModel {
        &self.model
    }
}

impl Policy for EmotionPolicy {
    fn name(&self) -> &str {
        "emotion"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Assignment> {
        let a = self
            .model
            .step(ctx.losses, ctx.distances, ctx.active_targets, self.previous.as_ref(), ctx.outcomes)?;
        self.previous = Some(a.clone());
        Ok(a)
    }

    fn end_episode(&mut self) {
        self.model = EmotionModel::new(self.model.distress.len(), self.params);
        self.previous = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(m: usize, d: f64) -> Vec<Vec<Option<f64>>> {
        (0..m).map(|i| (0..m).map(|k| Some(if i == k { 0.0 } else { d })).collect()).collect()
    }

    #[test]
    fn healthy_team_works_independently() {
        let a = auction_assign(&[0.1, 0.2, 0.0], &full(3, 1.0), &[None; 3], &AuctionParams::default()).unwrap();
        assert_eq!(a, Assignment::independent(3));
    }

    #[test]
    fn lowest_bid_wins() {
        // Agent 0 needy; bids: agent 1 -> 7.0, agent 2 -> 3.0.
        let losses = [0.5, 0.2, 0.0];
        let mut d = full(3, 0.0);
        d[1][0] = Some(6.0);
        d[2][0] = Some(3.0);
        let a = auction_assign(&losses, &d, &[None; 3], &AuctionParams::default()).unwrap();
        assert_eq!(a.orders(), vec![Order::Wait, Order::Independent, Order::Assist(0)]);
    }

    #[test]
    fn never_assists_itself() {
        let a = auction_assign(&[0.9, 0.9], &full(2, 1.0), &[Some(0), None], &AuctionParams::default()).unwrap();
        assert_eq!(a, Assignment::independent(2));
    }

    #[test]
    fn calm_team_stays_independent() {
        let mut e = EmotionModel::new(3, EmotionParams::default());
        let a = e.step(&[0.0; 3], &full(3, 1.0), &[None; 3], None, &[Outcome::Independent; 3]).unwrap();
        assert_eq!(a, Assignment::independent(3));
    }

    #[test]
    fn nearest_volunteer_recruited() {
        let mut e = EmotionModel::new(3, EmotionParams::default());
        let mut d = full(3, 0.0);
        d[1][0] = Some(9.0);
        d[2][0] = Some(4.0);
        let a = e.step(&[2.0, 0.0, 0.0], &d, &[None; 3], None, &[Outcome::Independent; 3]).unwrap();
        assert_eq!(a.orders(), vec![Order::Wait, Order::Independent, Order::Assist(0)]);
    }
}
