//! Exact offline optimum on small instances and competitive-ratio checks.
//!
//! Given the purchase vector, the loss-minimal price in every slot serves
//! `min(d*_t, active VMs)`: marginal unit revenue is at least `p_m > 0`, so
//! serving one more unit never costs anything. That leaves an integer program
//! over purchases only, solved here by a forward dynamic program whose state
//! is the purchases of the last `tau - 1` slots.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::demand_model::{synthesize_curve, CurveSpec, PriceDemandCurve};
use crate::error::{Error, Result};
use crate::fleet::BillingConfig;
use crate::metrics::{self, RunLedger};
use crate::rng;
use crate::scalar::Scalar;
use crate::scaler::{run_partial_online, ScalerConfig};

/// Default cap on DP states (`T * (d_max + 1)^(tau - 1)`) and on
/// brute-force candidates (`(d_max + 1)^T`).
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Slack on `L_A <= c * L_OPT`.
pub const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptSchedule<S> {
    /// Purchases per slot.
    pub v: Vec<u64>,
    /// Served demand per slot.
    pub served: Vec<S>,
    pub loss: S,
}

impl<S: Scalar> OptSchedule<S> {
    pub fn vms_bought(&self) -> u64 {
        self.v.iter().sum()
    }

    /// Expands the schedule into a ledger, pricing each slot with `g`.
    pub fn to_ledger(
        &self,
        curve: &PriceDemandCurve<S>,
        billing: &BillingConfig<S>,
        trace: &[S],
    ) -> Result<RunLedger<S>> {
        let mut ledger = RunLedger::new(billing.gamma_star(), billing.cost());
        let mut active = 0u64;
        for (t, &d_star) in trace.iter().enumerate() {
            active += self.v[t];
            if t >= billing.tau() {
                active -= self.v[t - billing.tau()];
            }
            let d = self.served[t];
            let gamma = match curve.price_for_demand(d_star, d) {
                Err(Error::UnreachableDemand) => S::infinity(),
                other => other?,
            };
            ledger.push(t + 1, d_star, d, gamma, self.v[t], active);
        }
        Ok(ledger)
    }
}

/// Demand loss for every slot and every possible active count.
struct StageTable<S> {
    loss: Vec<Vec<S>>,
    cost: S,
}

impl<S: Scalar> StageTable<S> {
    fn new(
        curve: &PriceDemandCurve<S>,
        billing: &BillingConfig<S>,
        trace: &[S],
        max_active: u64,
    ) -> Result<Self> {
        let loss = trace
            .iter()
            .map(|&d_star| {
                (0..=max_active)
                    .map(|x| curve.demand_loss(d_star, served(d_star, x)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StageTable {
            loss,
            cost: billing.cost(),
        })
    }

    fn stage(&self, t: usize, active: u64, v: u64) -> S {
        self.loss[t][active as usize] + self.cost * S::from_count(v)
    }
}

fn served<S: Scalar>(d_star: S, active: u64) -> S {
    d_star.min(S::from_count(active))
}

fn check_inputs<S: Scalar>(trace: &[S], d_max: u64) -> Result<()> {
    if let Some(&d) = trace
        .iter()
        .find(|&&d| !(d >= S::zero()) || d > S::from_count(d_max))
    {
        return Err(Error::Validation(format!(
            "d_max >= ceil(max d*) violated (demand {d} > d_max {d_max})"
        )));
    }
    Ok(())
}

fn budget_check(states: Option<u128>, budget: u128) -> Result<()> {
    match states {
        Some(s) if s <= budget => Ok(()),
        Some(s) => Err(Error::TooLarge { states: s, budget }),
        None => Err(Error::TooLarge {
            states: u128::MAX,
            budget,
        }),
    }
}

/// Tie order: lower loss, then fewer VMs, then lexicographically smaller.
fn better<S: Scalar>(loss: S, vms: u64, path: &[u64], best: &(S, u64, Vec<u64>)) -> bool {
    loss < best.0 || (loss == best.0 && (vms < best.1 || (vms == best.1 && path < &best.2[..])))
}

/// Exact minimizer of the offline loss with per-slot purchases in `0..=d_max`.
pub fn opt_dp<S: Scalar>(
    curve: &PriceDemandCurve<S>,
    billing: &BillingConfig<S>,
    trace: &[S],
    d_max: u64,
    budget: u128,
) -> Result<OptSchedule<S>> {
    check_inputs(trace, d_max)?;
    let tau = billing.tau();
    let states = (d_max as u128 + 1)
        .checked_pow(tau as u32 - 1)
        .and_then(|s| s.checked_mul(trace.len().max(1) as u128));
    budget_check(states, budget)?;

    let table = StageTable::new(curve, billing, trace, d_max * tau as u64)?;
    // Key: purchases of the last tau - 1 slots, oldest first.
    let mut layer: HashMap<Vec<u64>, (S, u64, Vec<u64>)> = HashMap::new();
    layer.insert(vec![0; tau - 1], (S::zero(), 0, Vec::new()));
    for t in 0..trace.len() {
        let mut next: HashMap<Vec<u64>, (S, u64, Vec<u64>)> = HashMap::with_capacity(layer.len());
        for (state, (acc, vms, path)) in &layer {
            let carried: u64 = state.iter().sum();
            for v in 0..=d_max {
                let total = *acc + table.stage(t, carried + v, v);
                let mut key = state[1..].to_vec();
                key.push(v);
                let mut candidate = path.clone();
                candidate.push(v);
                match next.get(&key) {
                    Some(best) if !better(total, vms + v, &candidate, best) => {}
                    _ => {
                        next.insert(key, (total, vms + v, candidate));
                    }
                }
            }
        }
        layer = next;
    }
    let mut best: Option<(S, u64, Vec<u64>)> = None;
    for entry in layer.into_values() {
        if best
            .as_ref()
            .is_none_or(|b| better(entry.0, entry.1, &entry.2, b))
        {
            best = Some(entry);
        }
    }
    let (loss, _, v) = best.expect("at least one state");
    Ok(schedule(trace, tau, v, loss))
}

fn schedule<S: Scalar>(trace: &[S], tau: usize, v: Vec<u64>, loss: S) -> OptSchedule<S> {
    let mut active = 0u64;
    let served = trace
        .iter()
        .enumerate()
        .map(|(t, &d)| {
            active += v[t];
            if t >= tau {
                active -= v[t - tau];
            }
            served(d, active)
        })
        .collect();
    OptSchedule { v, served, loss }
}

/// Exhaustive search over all `(d_max + 1)^T` purchase vectors. Ties go to
/// fewer VMs, then to the lexicographically smallest vector.
pub fn opt_bruteforce<S: Scalar>(
    curve: &PriceDemandCurve<S>,
    billing: &BillingConfig<S>,
    trace: &[S],
    d_max: u64,
    budget: u128,
) -> Result<OptSchedule<S>> {
    check_inputs(trace, d_max)?;
    let candidates = (d_max as u128 + 1).checked_pow(trace.len() as u32);
    budget_check(candidates, budget)?;
    let tau = billing.tau();
    let table = StageTable::new(curve, billing, trace, d_max * tau as u64)?;

    struct Search<'t, S> {
        table: &'t StageTable<S>,
        tau: usize,
        d_max: u64,
        len: usize,
        path: Vec<u64>,
        best: Option<(S, u64, Vec<u64>)>,
    }

    impl<S: Scalar> Search<'_, S> {
        // Depth-first in lexicographic order, so only strict improvements
        // (in loss, then VM count) replace the incumbent.
        fn go(&mut self, t: usize, acc: S, vms: u64, active: u64) {
            if t == self.len {
                let replace = match &self.best {
                    None => true,
                    Some(b) => acc < b.0 || (acc == b.0 && vms < b.1),
                };
                if replace {
                    self.best = Some((acc, vms, self.path.clone()));
                }
                return;
            }
            let expired = if t >= self.tau {
                self.path[t - self.tau]
            } else {
                0
            };
            for v in 0..=self.d_max {
                let now = active - expired + v;
                let total = acc + self.table.stage(t, now, v);
                self.path.push(v);
                self.go(t + 1, total, vms + v, now);
                self.path.pop();
            }
        }
    }

    let mut search = Search {
        table: &table,
        tau,
        d_max,
        len: trace.len(),
        path: Vec::with_capacity(trace.len()),
        best: None,
    };
    search.go(0, S::zero(), 0, 0);
    let (loss, _, v) = search.best.expect("search visits at least one leaf");
    Ok(schedule(trace, tau, v, loss))
}

/// Worst-case ratio `1 + min(1, p_M * tau * (1 - w / tau))`.
pub fn theoretical_ratio<S: Scalar>(p_max: S, tau: usize, w: usize) -> Result<S> {
    if w >= tau {
        return Err(Error::Window { w, tau });
    }
    let alpha = S::from_count(w as u64) / S::from_count(tau as u64);
    let scaled = p_max * S::from_count(tau as u64) * (S::one() - alpha);
    Ok(S::one() + S::one().min(scaled))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport<S> {
    pub instance_id: usize,
    pub w: usize,
    pub l_a: S,
    pub l_opt: S,
    pub c_alpha: S,
    pub n_w: u64,
    pub n_opt: u64,
}

pub const RATIO_HEADER: &str = "instance_id,w,L_A,L_OPT,ratio,c_alpha,pass,N_w,N_OPT";

impl<S: Scalar> RatioReport<S> {
    /// `L_A / L_OPT`; 1 when both vanish.
    pub fn ratio(&self) -> S {
        if self.l_opt > S::zero() {
            self.l_a / self.l_opt
        } else if self.l_a > S::zero() {
            S::infinity()
        } else {
            S::one()
        }
    }

    pub fn ratio_pass(&self) -> bool {
        self.l_a <= self.c_alpha * self.l_opt + S::lit(RATIO_SLACK)
    }

    /// The online scaler never buys more VMs than the optimum.
    pub fn purchase_pass(&self) -> bool {
        self.n_w <= self.n_opt
    }

    pub fn pass(&self) -> bool {
        self.ratio_pass() && self.purchase_pass()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.instance_id,
            self.w,
            self.l_a,
            self.l_opt,
            self.ratio(),
            self.c_alpha,
            self.ratio_pass(),
            self.n_w,
            self.n_opt
        )
    }
}

pub fn ratio_csv<S: Scalar>(reports: &[RatioReport<S>]) -> String {
    let mut out = String::from(RATIO_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Runs the scaler with window `w` and the exact oracle on one instance.
pub fn check_competitiveness<S: Scalar>(
    curve: &PriceDemandCurve<S>,
    billing: &BillingConfig<S>,
    trace: &[S],
    w: usize,
    budget: u128,
) -> Result<RatioReport<S>> {
    let config = ScalerConfig::new(w, billing.tau())?;
    let online = run_partial_online(curve, billing, config, trace)?;
    let d_max = peak(trace);
    let opt = opt_dp(curve, billing, trace, d_max, budget)?;
    Ok(RatioReport {
        instance_id: 0,
        w,
        l_a: metrics::loss(&online),
        l_opt: opt.loss,
        c_alpha: theoretical_ratio(curve.declared_p_max(), billing.tau(), w)?,
        n_w: online.vms_bought(),
        n_opt: opt.vms_bought(),
    })
}

/// `ceil(max d*)`, the largest useful per-slot purchase.
pub fn peak<S: Scalar>(trace: &[S]) -> u64 {
    trace
        .iter()
        .fold(S::zero(), |m, &d| m.max(d))
        .ceil()
        .to_u64()
        .unwrap_or(0)
}

/// One random small instance.
#[derive(Debug, Clone)]
pub struct Instance<S> {
    pub id: usize,
    pub curve: PriceDemandCurve<S>,
    pub billing: BillingConfig<S>,
    pub trace: Vec<S>,
}

/// Shape of a random instance battery.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub max_len: usize,
    pub taus: Vec<usize>,
    pub max_demand: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            max_len: 10,
            taus: vec![3, 4],
            max_demand: 3,
        }
    }
}

/// Draws instance `id` of the battery seeded by `seed`: unit VM cost, a
/// random billing cycle from `spec.taus`, a synthesized curve with random
/// valid bounds, and integer demand in `0..=max_demand`.
pub fn random_instance(seed: u64, id: usize, spec: &InstanceSpec) -> Result<Instance<f64>> {
    let mut rng = rng::stream(seed.wrapping_add(id as u64), rng::streams::INSTANCE);
    let tau = spec.taus[rng.gen_range(0..spec.taus.len())];
    let floor = 1.0 / tau as f64;
    let p_m = rng.gen_range(floor + 0.01..0.85);
    let p_max = rng.gen_range(p_m + 0.05..0.99);
    let gamma_star = rng.gen_range(p_m + 0.01..p_max - 0.02);
    let mut curve_spec = CurveSpec::new(p_m, p_max, gamma_star, tau, rng.gen());
    curve_spec.grid_steps = rng.gen_range(20..80);
    let curve = synthesize_curve(&curve_spec)?;
    let billing = BillingConfig::new(tau, 1.0, gamma_star)?;
    let len = rng.gen_range(1..=spec.max_len);
    let trace = (0..len)
        .map(|_| rng.gen_range(0..=spec.max_demand) as f64)
        .collect();
    Ok(Instance {
        id,
        curve,
        billing,
        trace,
    })
}

/// Checks every instance against every window in `windows` (restricted to
/// `w < tau`). Instances run in parallel; output is ordered by id, then `w`.
pub fn verify_batch(
    seed: u64,
    count: usize,
    windows: &[usize],
    spec: &InstanceSpec,
    budget: u128,
) -> Result<Vec<RatioReport<f64>>> {
    let per_instance: Vec<Result<Vec<RatioReport<f64>>>> = (0..count)
        .into_par_iter()
        .map(|id| {
            let inst = random_instance(seed, id, spec)?;
            windows
                .iter()
                .filter(|&&w| w < inst.billing.tau())
                .map(|&w| {
                    let mut r =
                        check_competitiveness(&inst.curve, &inst.billing, &inst.trace, w, budget)?;
                    r.instance_id = id;
                    Ok(r)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_instance {
        out.extend(r?);
    }
    Ok(out)
}
