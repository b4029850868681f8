//! Break-even resource scaling with dynamic pricing.
//!
//! Each slot the scaler prices demand down to the VMs it has and tracks the
//! net renting cost: the revenue it would have kept by serving one more unit
//! in every slot of the window `[t + w - tau + 1, t + w]`. Whenever that
//! reaches the price of a VM it buys one, marks it as available for the next
//! `tau` slots, and also credits the past part of the window, since those
//! slots have now been paid for. `w = 0` is the fully online case.

use crate::demand_model::PriceDemandCurve;
use crate::error::{Error, Result};
use crate::fleet::{BillingConfig, FleetState};
use crate::metrics::RunLedger;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalerConfig {
    window: usize,
}

impl ScalerConfig {
    pub fn new(window: usize, tau: usize) -> Result<Self> {
        if window >= tau {
            return Err(Error::Window { w: window, tau });
        }
        Ok(ScalerConfig { window })
    }

    pub fn fully_online() -> Self {
        ScalerConfig { window: 0 }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `w / tau`.
    pub fn alpha(&self, tau: usize) -> f64 {
        self.window as f64 / tau as f64
    }
}

/// Planned VM count per slot (1-based), including credits written back
/// into past slots.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HorizonCapacity {
    x: Vec<u64>,
}

impl HorizonCapacity {
    pub fn get(&self, slot: i64) -> u64 {
        if slot < 1 {
            return 0;
        }
        self.x.get(slot as usize).copied().unwrap_or(0)
    }

    /// Adds one VM to every slot in `from..=to`; slots before 1 are skipped.
    pub fn credit(&mut self, from: i64, to: i64) {
        let from = from.max(1);
        if to < from {
            return;
        }
        if self.x.len() <= to as usize {
            self.x.resize(to as usize + 1, 0);
        }
        for x in &mut self.x[from as usize..=to as usize] {
            *x += 1;
        }
    }
}

/// Net renting cost of a window: the sum of `R(d*_i, x_i + 1, 1)` over the
/// slots where one more VM would still be used (`x_i + 1 <= d*_i`).
pub fn net_renting_cost<S: Scalar>(
    curve: &PriceDemandCurve<S>,
    demand: &[S],
    x: &[u64],
) -> Result<S> {
    let mut l = S::zero();
    for (&d_star, &xi) in demand.iter().zip(x) {
        let next = S::from_count(xi + 1);
        if next <= d_star {
            l = l + curve.renting_cost(d_star, next, S::one())?;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDecision<S> {
    pub t: usize,
    pub gamma: S,
    pub v: u64,
    /// Served demand.
    pub d: S,
    /// VMs available this slot.
    pub x: u64,
}

/// Slot-by-slot driver for the partial online scaler.
#[derive(Debug, Clone)]
pub struct PartialOnline<'a, S> {
    curve: &'a PriceDemandCurve<S>,
    billing: BillingConfig<S>,
    config: ScalerConfig,
    /// Observed actual demand, index = slot.
    observed: Vec<S>,
    capacity: HorizonCapacity,
    fleet: FleetState<S>,
}

impl<'a, S: Scalar> PartialOnline<'a, S> {
    pub fn new(
        curve: &'a PriceDemandCurve<S>,
        billing: &BillingConfig<S>,
        config: ScalerConfig,
    ) -> Result<Self> {
        ScalerConfig::new(config.window(), billing.tau())?;
        Ok(PartialOnline {
            curve,
            billing: *billing,
            config,
            observed: vec![S::zero()],
            capacity: HorizonCapacity::default(),
            fleet: FleetState::new(billing),
        })
    }

    /// Slot the next call to [`step`](Self::step) decides.
    pub fn slot(&self) -> usize {
        self.observed.len()
    }

    pub fn capacity(&self) -> &HorizonCapacity {
        &self.capacity
    }

    /// Decides the current slot. `forecast[0]` is the current actual demand
    /// and `forecast[1..=w]` the predicted demand of the next `w` slots;
    /// missing entries count as zero demand.
    pub fn step(&mut self, forecast: &[S]) -> Result<SlotDecision<S>> {
        let t = self.slot() as i64;
        let w = self.config.window() as i64;
        let tau = self.billing.tau() as i64;
        let first = t + w - tau + 1;
        let demand_at = |i: i64| -> S {
            if i < 1 {
                S::zero()
            } else if i < t {
                self.observed[i as usize]
            } else {
                forecast.get((i - t) as usize).copied().unwrap_or(S::zero())
            }
        };
        let window: Vec<S> = (first..=t + w).map(demand_at).collect();

        let mut v = 0u64;
        loop {
            let x: Vec<u64> = (first..=t + w).map(|i| self.capacity.get(i)).collect();
            let l = net_renting_cost(self.curve, &window, &x)?;
            if l < self.billing.cost() {
                break;
            }
            v += 1;
            self.capacity.credit(t, t + tau - 1);
            self.capacity.credit(first, t - 1);
        }

        self.fleet.buy(v);
        let x_t = self.capacity.get(t);
        assert_eq!(
            x_t,
            self.fleet.active(),
            "planned capacity diverged from the active fleet at slot {t}"
        );

        let d_star = demand_at(t);
        let x_s = S::from_count(x_t);
        let (gamma, d) = if x_s <= d_star {
            let gamma = match self.curve.price_for_demand(d_star, x_s) {
                Err(Error::UnreachableDemand) => S::infinity(),
                other => other?,
            };
            (gamma, x_s)
        } else {
            (self.billing.gamma_star(), d_star)
        };

        self.observed.push(d_star);
        self.fleet.advance();
        Ok(SlotDecision {
            t: t as usize,
            gamma,
            v,
            d,
            x: x_t,
        })
    }
}

/// Runs the scaler over a whole trace with perfect lookahead.
pub fn run_partial_online<S: Scalar>(
    curve: &PriceDemandCurve<S>,
    billing: &BillingConfig<S>,
    config: ScalerConfig,
    trace: &[S],
) -> Result<RunLedger<S>> {
    let mut scaler = PartialOnline::new(curve, billing, config)?;
    let mut ledger = RunLedger::new(billing.gamma_star(), billing.cost());
    for t in 0..trace.len() {
        let end = (t + config.window() + 1).min(trace.len());
        let step = scaler.step(&trace[t..end])?;
        ledger.push(step.t, trace[t], step.d, step.gamma, step.v, step.x);
    }
    Ok(ledger)
}

/// Nominal price throughout; buys whatever the active fleet lacks.
pub fn run_static<S: Scalar>(billing: &BillingConfig<S>, trace: &[S]) -> RunLedger<S> {
    let mut fleet = FleetState::new(billing);
    let mut ledger = RunLedger::new(billing.gamma_star(), billing.cost());
    for (t, &d_star) in trace.iter().enumerate() {
        if t > 0 {
            fleet.advance();
        }
        let need = d_star.ceil().to_u64().unwrap_or(0);
        let v = need.saturating_sub(fleet.active());
        fleet.buy(v);
        ledger.push(
            t + 1,
            d_star,
            d_star,
            billing.gamma_star(),
            v,
            fleet.active(),
        );
    }
    ledger
}
