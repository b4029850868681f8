//! Active VMs under quantized billing: purchases live for exactly `tau`
//! slots and then expire on their own. There is no early return.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BillingConfig<S> {
    tau: usize,
    cost: S,
    gamma_star: S,
}

impl<S: Scalar> BillingConfig<S> {
    pub fn new(tau: usize, cost: S, gamma_star: S) -> Result<Self> {
        if tau < 2 {
            return Err(Error::Validation(format!(
                "tau >= 2 violated (tau = {tau})"
            )));
        }
        if !(cost > S::zero()) {
            return Err(Error::Validation(format!(
                "cost > 0 violated (cost = {cost})"
            )));
        }
        if !(gamma_star * S::from_count(tau as u64) > cost) {
            return Err(Error::Validation(format!(
                "gamma_star * tau > cost violated ({gamma_star} * {tau} <= {cost})"
            )));
        }
        Ok(Self::new_unchecked(tau, cost, gamma_star))
    }

    /// Skips the parameter checks; [`crate::demand_model::validate`] still
    /// reports them.
    pub fn new_unchecked(tau: usize, cost: S, gamma_star: S) -> Self {
        BillingConfig {
            tau,
            cost,
            gamma_star,
        }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn cost(&self) -> S {
        self.cost
    }

    pub fn gamma_star(&self) -> S {
        self.gamma_star
    }
}

/// Ring of the last `tau` per-slot purchase counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetState<S> {
    ring: Vec<u64>,
    slot: u64,
    active: u64,
    bought: u64,
    cost: S,
}

impl<S: Scalar> FleetState<S> {
    /// Empty fleet positioned at slot 1.
    pub fn new(config: &BillingConfig<S>) -> Self {
        FleetState {
            ring: vec![0; config.tau()],
            slot: 1,
            active: 0,
            bought: 0,
            cost: config.cost(),
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// VMs bought in the last `tau` slots, including the current one.
    pub fn active(&self) -> u64 {
        self.active
    }

    pub fn total_bought(&self) -> u64 {
        self.bought
    }

    pub fn total_cost(&self) -> S {
        self.cost * S::from_count(self.bought)
    }

    /// VMs bought in the current slot so far.
    pub fn bought_this_slot(&self) -> u64 {
        self.ring[self.index()]
    }

    pub fn buy(&mut self, n: u64) {
        let i = self.index();
        self.ring[i] += n;
        self.active += n;
        self.bought += n;
    }

    /// Moves to the next slot; purchases made `tau` slots ago expire.
    pub fn advance(&mut self) {
        self.slot += 1;
        let i = self.index();
        self.active -= self.ring[i];
        self.ring[i] = 0;
    }

    fn index(&self) -> usize {
        (self.slot % self.ring.len() as u64) as usize
    }
}
