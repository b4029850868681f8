//! Per-slot run records, profit and loss totals, and CSV reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance on the profit/loss identity.
pub const DUALITY_TOL: f64 = 1e-9;

pub const LEDGER_HEADER: &str = "t,d_star,d,gamma,v,x,demand_loss,vm_cost";
pub const SUMMARY_HEADER: &str = "run_id,w,p_m,p_M,P,L,vms_bought";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord<S> {
    pub t: usize,
    pub d_star: S,
    /// Demand actually served.
    pub d: S,
    /// Posted price; infinite when all demand was priced out on a
    /// semi-infinite curve.
    pub gamma: S,
    pub v: u64,
    pub x: u64,
    pub demand_loss: S,
    pub vm_cost: S,
}

impl<S: Scalar> SlotRecord<S> {
    /// Fills in the loss columns from the decision.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t: usize,
        d_star: S,
        d: S,
        gamma: S,
        v: u64,
        x: u64,
        gamma_star: S,
        cost: S,
    ) -> Self {
        let revenue = slot_revenue(gamma, d);
        SlotRecord {
            t,
            d_star,
            d,
            gamma,
            v,
            x,
            demand_loss: gamma_star * d_star - revenue,
            vm_cost: cost * S::from_count(v),
        }
    }

    pub fn revenue(&self) -> S {
        slot_revenue(self.gamma, self.d)
    }
}

fn slot_revenue<S: Scalar>(gamma: S, d: S) -> S {
    if d == S::zero() {
        S::zero()
    } else {
        gamma * d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLedger<S> {
    pub gamma_star: S,
    pub cost: S,
    pub rows: Vec<SlotRecord<S>>,
}

impl<S: Scalar> RunLedger<S> {
    pub fn new(gamma_star: S, cost: S) -> Self {
        RunLedger {
            gamma_star,
            cost,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, t: usize, d_star: S, d: S, gamma: S, v: u64, x: u64) {
        self.rows.push(SlotRecord::new(
            t,
            d_star,
            d,
            gamma,
            v,
            x,
            self.gamma_star,
            self.cost,
        ));
    }

    pub fn vms_bought(&self) -> u64 {
        self.rows.iter().map(|r| r.v).sum()
    }

    /// `gamma* * sum d*`, the part of the objective no decision can change.
    pub fn nominal_revenue(&self) -> S {
        self.gamma_star * self.rows.iter().map(|r| r.d_star).sum::<S>()
    }

    /// Mean of `gamma_t - gamma*` over slots with a finite price.
    pub fn mean_markup(&self) -> S {
        let finite: Vec<S> = self
            .rows
            .iter()
            .filter(|r| r.gamma.is_finite())
            .map(|r| r.gamma - self.gamma_star)
            .collect();
        if finite.is_empty() {
            S::zero()
        } else {
            finite.iter().copied().sum::<S>() / S::from_count(finite.len() as u64)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(LEDGER_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.t, r.d_star, r.d, r.gamma, r.v, r.x, r.demand_loss, r.vm_cost
            );
        }
        let _ = writeln!(out, "# P={}", profit(self));
        let _ = writeln!(out, "# L={}", loss(self));
        let _ = writeln!(out, "# gamma_star={}", self.gamma_star);
        let _ = writeln!(out, "# cost={}", self.cost);
        out
    }

    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let mut gamma_star = None;
        let mut cost = None;
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() || line == LEDGER_HEADER {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    let parse = || {
                        v.trim()
                            .parse::<S>()
                            .map_err(|_| Error::parse(source, lineno, format!("bad number {v:?}")))
                    };
                    match k.trim() {
                        "gamma_star" => gamma_star = Some(parse()?),
                        "cost" => cost = Some(parse()?),
                        _ => {}
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(Error::parse(source, lineno, "expected 8 ledger columns"));
            }
            let num = |s: &str| {
                s.parse::<S>()
                    .map_err(|_| Error::parse(source, lineno, format!("bad number {s:?}")))
            };
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| Error::parse(source, lineno, format!("bad integer {s:?}")))
            };
            rows.push(SlotRecord {
                t: int(f[0])? as usize,
                d_star: num(f[1])?,
                d: num(f[2])?,
                gamma: num(f[3])?,
                v: int(f[4])?,
                x: int(f[5])?,
                demand_loss: num(f[6])?,
                vm_cost: num(f[7])?,
            });
        }
        let gamma_star =
            gamma_star.ok_or_else(|| Error::parse(source, 0, "missing `# gamma_star=` line"))?;
        let cost = cost.ok_or_else(|| Error::parse(source, 0, "missing `# cost=` line"))?;
        Ok(RunLedger {
            gamma_star,
            cost,
            rows,
        })
    }
}

/// `P = sum(gamma_t d_t - cost v_t)`.
pub fn profit<S: Scalar>(ledger: &RunLedger<S>) -> S {
    ledger
        .rows
        .iter()
        .map(|r| r.revenue() - ledger.cost * S::from_count(r.v))
        .sum()
}

/// `L = sum(demand_loss_t + vm_cost_t)`, from the recorded loss columns.
pub fn loss<S: Scalar>(ledger: &RunLedger<S>) -> S {
    ledger.rows.iter().map(|r| r.demand_loss + r.vm_cost).sum()
}

/// `P + L = gamma* sum d*_t` up to relative tolerance [`DUALITY_TOL`].
pub fn check_duality<S: Scalar>(ledger: &RunLedger<S>) -> bool {
    let nominal = ledger.nominal_revenue();
    let gap = (profit(ledger) + loss(ledger) - nominal).abs();
    gap <= S::lit(DUALITY_TOL) * (S::one() + nominal.abs())
}

/// One run in a report, with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRun<S> {
    pub run_id: String,
    /// Prediction window; `None` for static pricing.
    pub w: Option<usize>,
    /// Curve bounds; `None` when the run was not tied to a known curve.
    pub p_m: Option<S>,
    pub p_max: Option<S>,
    pub ledger: RunLedger<S>,
}

impl<S: Scalar> LabeledRun<S> {
    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.run_id,
            blank_if_none(self.w),
            blank_if_none(self.p_m),
            blank_if_none(self.p_max),
            profit(&self.ledger),
            loss(&self.ledger),
            self.ledger.vms_bought()
        )
    }
}

fn blank_if_none<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_csv<S: Scalar>(runs: &[LabeledRun<S>]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for run in runs {
        out.push_str(&run.summary_row());
        out.push('\n');
    }
    out
}

/// Writes `<run_id>.csv` per run plus `summary.csv` into `dir`. Existing
/// files are only replaced when `overwrite` is set.
pub fn emit_report<S: Scalar>(
    runs: &[LabeledRun<S>],
    dir: impl AsRef<Path>,
    overwrite: bool,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files: Vec<(PathBuf, String)> = runs
        .iter()
        .map(|r| (dir.join(format!("{}.csv", r.run_id)), r.ledger.to_csv()))
        .collect();
    files.push((dir.join("summary.csv"), summary_csv(runs)));
    if !overwrite {
        if let Some((p, _)) = files.iter().find(|(p, _)| p.exists()) {
            return Err(Error::Exists(p.clone()));
        }
    }
    for (path, body) in &files {
        fs::write(path, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
