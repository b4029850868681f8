use std::path::{Path, PathBuf};

use rayon::prelude::*;

use qbc_core::demand_model::{synthesize_curve, validate, CurveSpec};
use qbc_core::fleet::BillingConfig;
use qbc_core::metrics::{
    check_duality, emit_report, loss, profit, summary_csv, LabeledRun, RunLedger, SUMMARY_HEADER,
};
use qbc_core::oracle::{
    check_competitiveness, opt_bruteforce, opt_dp, peak, ratio_csv, verify_batch, InstanceSpec,
    RatioReport, DEFAULT_BUDGET,
};
use qbc_core::scaler::{run_partial_online, run_static, ScalerConfig};
use qbc_core::trace::{generate_spiky_trace, DemandTrace};
use qbc_core::{Billing, Curve};

use crate::config::{
    parse_count, parse_counts, parse_num, parse_nums, parse_path, parse_u128, parse_u64,
    parse_windows, Config, Windows,
};
use crate::{
    BillingArgs, Cli, CliError, Command, OracleArgs, ReportArgs, SimulateArgs, SweepArgs,
    SynthArgs, TraceArgs, ValidateArgs, VerifyArgs,
};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Synth(a) => synth(&cfg, a),
        Command::Validate(a) => validate_cmd(&cfg, a),
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Oracle(a) => oracle(&cfg, a),
        Command::Verify(a) => verify(&cfg, a),
        Command::Sweep(a) => sweep(&cfg, a),
        Command::Report(a) => report(&cfg, a),
    }
}

fn write_file(path: &Path, body: &str, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(qbc_core::Error::Exists(path.to_path_buf()).into());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Names the file in bare I/O errors.
fn at(path: &Path) -> impl Fn(qbc_core::Error) -> CliError + '_ {
    move |e| match e {
        qbc_core::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => other.into(),
    }
}

fn load_curve(cfg: &Config, flag: Option<PathBuf>) -> Result<Curve> {
    let path = cfg.require("curve", flag, parse_path)?;
    Curve::load(&path).map_err(at(&path))
}

fn read_trace(path: &Path) -> Result<Vec<f64>> {
    Ok(DemandTrace::<f64>::load(path).map_err(at(path))?.slots)
}

fn billing(cfg: &Config, a: BillingArgs, curve: &Curve) -> Result<Billing> {
    let tau = cfg.require("tau", a.tau, parse_count)?;
    let cost = cfg.or("cost", a.cost, parse_num, 1.0)?;
    let gamma_star = cfg.or("gamma-star", a.gamma_star, parse_num, curve.gamma_star())?;
    Ok(BillingConfig::new(tau, cost, gamma_star)?)
}

fn load_trace(cfg: &Config, a: TraceArgs, seed: u64) -> Result<Vec<f64>> {
    if let Some(path) = cfg.pick("trace", a.trace, parse_path)? {
        return read_trace(&path);
    }
    let len = cfg.or("len", a.len, parse_count, 288)?;
    let base = cfg.or("base", a.base, parse_num, 5.0)?;
    let prob = cfg.or("spike-prob", a.spike_prob, parse_num, 0.08)?;
    let height = cfg.or("spike-height", a.spike_height, parse_num, 25.0)?;
    if base < 0.0 || height < 0.0 || !(0.0..=1.0).contains(&prob) {
        return Err(CliError::Usage(
            "synthetic trace needs base >= 0, spike-height >= 0, 0 <= spike-prob <= 1".into(),
        ));
    }
    Ok(generate_spiky_trace(seed, len, base, prob, height).slots)
}

fn synth(cfg: &Config, a: SynthArgs) -> Result<()> {
    let p_m = cfg.require("p-m", a.p_m, parse_num)?;
    let p_max = cfg.require("p-M", a.p_max, parse_num)?;
    let tau = cfg.require("tau", a.tau, parse_count)?;
    let gamma_star = cfg.require("gamma-star", a.gamma_star, parse_num)?;
    let seed = cfg.or("seed", a.seed, parse_u64, 1)?;
    let out = cfg.require("out", a.out, parse_path)?;
    let overwrite = cfg.switch("overwrite", a.overwrite)?;

    let mut spec = CurveSpec::new(p_m, p_max, gamma_star, tau, seed);
    spec.gamma_max = cfg.or("gamma-max", a.gamma_max, parse_num, p_max)?;
    spec.grid_steps = cfg.or("grid-steps", a.grid_steps, parse_count, spec.grid_steps)?;
    spec.cost = cfg.or("cost", a.cost, parse_num, 1.0)?;
    if let Err(e) = spec.check() {
        let hint = if p_m < spec.cost / tau as f64 {
            " (fractions such as 1/12 are accepted)"
        } else {
            ""
        };
        return Err(CliError::Validation(format!("{e}{hint}")));
    }
    let curve = synthesize_curve(&spec)?;
    let billing = BillingConfig::new(tau, spec.cost, gamma_star)?;
    let report = validate(&curve, &billing);
    if !report.all_passed() {
        print!("{report}");
        return Err(CliError::Validation(
            "synthesized curve failed its own checks".into(),
        ));
    }
    write_file(&out, &curve.to_csv(), overwrite)?;
    let (lo, hi) = curve.measured_bounds();
    println!("wrote {} ({} knots)", out.display(), curve.points().len());
    println!("measured p_m={lo} p_M={hi}");
    match curve.gamma_op() {
        Some(g) => println!("demand reaches zero at gamma={g}"),
        None => println!("demand never reaches zero"),
    }
    Ok(())
}

fn validate_cmd(cfg: &Config, a: ValidateArgs) -> Result<()> {
    let curve = load_curve(cfg, a.curve)?;
    // Billing is checked by the report itself, so build it unchecked.
    let tau = cfg.require("tau", a.billing.tau, parse_count)?;
    let cost = cfg.or("cost", a.billing.cost, parse_num, 1.0)?;
    let gamma_star = cfg.or(
        "gamma-star",
        a.billing.gamma_star,
        parse_num,
        curve.gamma_star(),
    )?;
    let report = validate(&curve, &BillingConfig::new_unchecked(tau, cost, gamma_star));
    print!("{report}");
    let failed = report.failed().count();
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn print_runs(runs: &[LabeledRun<f64>]) -> usize {
    println!(
        "{:<10} {:>4} {:>14} {:>14} {:>6}  duality",
        "run", "w", "P", "L", "vms"
    );
    let mut broken = 0;
    for r in runs {
        let ok = check_duality(&r.ledger);
        broken += usize::from(!ok);
        println!(
            "{:<10} {:>4} {:>14.6} {:>14.6} {:>6}  {}",
            r.run_id,
            r.w.map(|w| w.to_string()).unwrap_or_else(|| "-".into()),
            profit(&r.ledger),
            loss(&r.ledger),
            r.ledger.vms_bought(),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    broken
}

fn simulate(cfg: &Config, a: SimulateArgs) -> Result<()> {
    let curve = load_curve(cfg, a.curve)?;
    let billing = billing(cfg, a.billing, &curve)?;
    let seed = cfg.or("seed", a.seed, parse_u64, 1)?;
    let trace = load_trace(cfg, a.trace, seed)?;
    let windows = cfg.or("windows", a.windows, parse_counts, vec![0])?;
    let with_static = cfg.switch("static", a.with_static)?;
    let out = cfg.require("out", a.out, parse_path)?;
    let overwrite = cfg.switch("overwrite", a.overwrite)?;
    if windows.is_empty() && !with_static {
        return Err(CliError::Usage(
            "nothing to run: give --windows or --static".into(),
        ));
    }

    let label = |run_id: String, w, ledger| LabeledRun {
        run_id,
        w,
        p_m: Some(curve.declared_p_m()),
        p_max: Some(curve.declared_p_max()),
        ledger,
    };
    let mut runs = Vec::new();
    if with_static {
        runs.push(label("static".into(), None, run_static(&billing, &trace)));
    }
    for &w in &windows {
        let config = ScalerConfig::new(w, billing.tau())?;
        let ledger = run_partial_online(&curve, &billing, config, &trace)?;
        runs.push(label(format!("w{w}"), Some(w), ledger));
    }
    emit_report(&runs, &out, overwrite)?;
    let broken = print_runs(&runs);
    println!(
        "wrote {} ledgers and summary.csv to {}",
        runs.len(),
        out.display()
    );
    if broken > 0 {
        return Err(CliError::Bound(format!(
            "{broken} ledger(s) break P + L = gamma* sum d*"
        )));
    }
    Ok(())
}

fn oracle(cfg: &Config, a: OracleArgs) -> Result<()> {
    let curve = load_curve(cfg, a.curve)?;
    let billing = billing(cfg, a.billing, &curve)?;
    let path = cfg.require("trace", a.trace, parse_path)?;
    let trace = read_trace(&path)?;
    let d_max = cfg.or("d-max", a.d_max, parse_u64, peak(&trace))?;
    let budget = cfg.or("budget", a.budget, parse_u128, DEFAULT_BUDGET)?;
    let opt = opt_dp(&curve, &billing, &trace, d_max, budget)?;
    println!("L_OPT={}", opt.loss);
    println!("N_OPT={}", opt.vms_bought());
    let v: Vec<String> = opt.v.iter().map(u64::to_string).collect();
    println!("v={}", v.join(","));
    if cfg.switch("bruteforce", a.bruteforce)? {
        let bf = opt_bruteforce(&curve, &billing, &trace, d_max, budget)?;
        let agree = bf.loss == opt.loss;
        println!(
            "bruteforce L={} {}",
            bf.loss,
            if agree { "agrees" } else { "DISAGREES" }
        );
        if !agree {
            return Err(CliError::Bound("exact solvers disagree".into()));
        }
    }
    if let Some(out) = cfg.pick("out", a.out, parse_path)? {
        let ledger = opt.to_ledger(&curve, &billing, &trace)?;
        write_file(
            &out,
            &ledger.to_csv(),
            cfg.switch("overwrite", a.overwrite)?,
        )?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn verify(cfg: &Config, a: VerifyArgs) -> Result<()> {
    let windows = cfg.or("windows", a.windows, parse_windows, Windows::List(vec![0]))?;
    if windows == Windows::List(Vec::new()) {
        return Err(CliError::Usage("--windows is empty".into()));
    }
    let budget = cfg.or("budget", a.budget, parse_u128, DEFAULT_BUDGET)?;

    let reports: Vec<RatioReport<f64>> =
        if let Some(curve_path) = cfg.pick("curve", a.curve, parse_path)? {
            let curve = Curve::load(&curve_path).map_err(at(&curve_path))?;
            let billing = billing(cfg, a.billing, &curve)?;
            let path = cfg.require("trace", a.trace, parse_path)?;
            let trace = read_trace(&path)?;
            let ws = windows.resolve(billing.tau());
            ws.iter()
                .map(|&w| check_competitiveness(&curve, &billing, &trace, w, budget))
                .collect::<qbc_core::Result<_>>()?
        } else {
            let count = cfg.or("count", a.count, parse_count, 500)?;
            let seed = cfg.or("seed", a.seed, parse_u64, 1)?;
            let spec = InstanceSpec {
                max_len: cfg.or("max-len", a.max_len, parse_count, 10)?,
                taus: cfg.or("taus", a.taus, parse_counts, vec![3, 4])?,
                max_demand: cfg.or("max-demand", a.max_demand, parse_u64, 3)?,
            };
            if spec.taus.is_empty() || spec.max_len == 0 {
                return Err(CliError::Usage(
                    "--taus and --max-len must be non-empty".into(),
                ));
            }
            let ws = windows.resolve(spec.taus.iter().copied().max().unwrap_or(0));
            verify_batch(seed, count, &ws, &spec, budget)?
        };

    println!(
        "{:>4} {:>6} {:>12} {:>12} {:>8} {:>10}",
        "w", "runs", "max ratio", "max ratio/c", "over c", "N_w>N_OPT"
    );
    let mut ws: Vec<usize> = reports.iter().map(|r| r.w).collect();
    ws.sort_unstable();
    ws.dedup();
    for w in ws {
        let rs: Vec<_> = reports.iter().filter(|r| r.w == w).collect();
        let max_ratio = rs.iter().map(|r| r.ratio()).fold(0.0, f64::max);
        let max_rel = rs.iter().map(|r| r.ratio() / r.c_alpha).fold(0.0, f64::max);
        println!(
            "{:>4} {:>6} {:>12.6} {:>12.6} {:>8} {:>10}",
            w,
            rs.len(),
            max_ratio,
            max_rel,
            rs.iter().filter(|r| !r.ratio_pass()).count(),
            rs.iter().filter(|r| !r.purchase_pass()).count()
        );
    }
    if let Some(out) = cfg.pick("out", a.out, parse_path)? {
        write_file(
            &out,
            &ratio_csv(&reports),
            cfg.switch("overwrite", a.overwrite)?,
        )?;
        println!("wrote {}", out.display());
    }
    let over = reports.iter().filter(|r| !r.ratio_pass()).count();
    if over > 0 {
        return Err(CliError::Bound(format!(
            "{over} run(s) exceed c(alpha) * L_OPT"
        )));
    }
    Ok(())
}

struct SweepCell {
    p: f64,
    l: f64,
    vms: f64,
    markup: f64,
}

fn sweep(cfg: &Config, a: SweepArgs) -> Result<()> {
    let windows = cfg.or("windows", a.windows, parse_counts, vec![0, 1, 2, 3, 4])?;
    let p_ms = cfg.or("p-m", a.p_m, parse_nums, vec![1.0 / 12.0])?;
    if windows.is_empty() || p_ms.is_empty() {
        return Err(CliError::Usage("sweep lists must not be empty".into()));
    }
    let p_max = cfg.or("p-M", a.p_max, parse_num, 0.8)?;
    let tau = cfg.or("tau", a.tau, parse_count, 12)?;
    let gamma_star = cfg.or("gamma-star", a.gamma_star, parse_num, 0.3)?;
    let cost = cfg.or("cost", a.cost, parse_num, 1.0)?;
    let seeds = cfg.or("seeds", a.seeds, parse_count, 20)?;
    let first = cfg.or("seed", a.seed, parse_u64, 1)?;
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let billing = BillingConfig::new(tau, cost, gamma_star)?;
    let configs: Vec<ScalerConfig> = windows
        .iter()
        .map(|&w| ScalerConfig::new(w, tau))
        .collect::<qbc_core::Result<_>>()?;
    for &p_m in &p_ms {
        let mut spec = CurveSpec::new(p_m, p_max, gamma_star, tau, first);
        spec.cost = cost;
        spec.check()?;
    }
    let traces: Vec<Vec<f64>> = (0..seeds as u64)
        .map(|r| load_trace(cfg, a.trace.clone(), first + r))
        .collect::<Result<_>>()?;

    // One job per (p_m, replicate); each runs every window.
    let jobs: Vec<(usize, u64)> = (0..p_ms.len())
        .flat_map(|i| (0..seeds as u64).map(move |r| (i, r)))
        .collect();
    let results: Vec<Vec<SweepCell>> = jobs
        .par_iter()
        .map(|&(i, r)| -> qbc_core::Result<Vec<SweepCell>> {
            let mut spec = CurveSpec::new(p_ms[i], p_max, gamma_star, tau, first + r);
            spec.cost = cost;
            let curve = synthesize_curve(&spec)?;
            let trace = &traces[r as usize];
            configs
                .iter()
                .map(|&c| {
                    let ledger: RunLedger<f64> = run_partial_online(&curve, &billing, c, trace)?;
                    Ok(SweepCell {
                        p: profit(&ledger),
                        l: loss(&ledger),
                        vms: ledger.vms_bought() as f64,
                        markup: ledger.mean_markup(),
                    })
                })
                .collect()
        })
        .collect::<qbc_core::Result<_>>()?;

    let n = seeds as f64;
    let mut csv = format!("{SUMMARY_HEADER},mean_markup\n");
    for (i, &p_m) in p_ms.iter().enumerate() {
        let reps = &results[i * seeds..(i + 1) * seeds];
        for (k, &w) in windows.iter().enumerate() {
            let mean = |f: fn(&SweepCell) -> f64| reps.iter().map(|c| f(&c[k])).sum::<f64>() / n;
            csv.push_str(&format!(
                "pm{i}_w{w},{w},{p_m},{p_max},{},{},{},{}\n",
                mean(|c| c.p),
                mean(|c| c.l),
                mean(|c| c.vms),
                mean(|c| c.markup)
            ));
        }
    }
    match cfg.pick("out", a.out, parse_path)? {
        Some(out) => {
            write_file(&out, &csv, cfg.switch("overwrite", a.overwrite)?)?;
            println!(
                "wrote {} rows to {}",
                p_ms.len() * windows.len(),
                out.display()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn report(cfg: &Config, a: ReportArgs) -> Result<()> {
    if a.ledgers.is_empty() {
        return Err(CliError::Usage("give at least one ledger file".into()));
    }
    let mut runs = Vec::new();
    for path in &a.ledgers {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let ledger = RunLedger::from_csv(&text, &path.display().to_string())?;
        let run_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        runs.push(LabeledRun {
            run_id,
            w: None,
            p_m: None,
            p_max: None,
            ledger,
        });
    }
    let broken = print_runs(&runs);
    if let Some(out) = cfg.pick("out", a.out, parse_path)? {
        write_file(
            &out,
            &summary_csv(&runs),
            cfg.switch("overwrite", a.overwrite)?,
        )?;
        println!("wrote {}", out.display());
    }
    if broken > 0 {
        return Err(CliError::Bound(format!(
            "{broken} ledger(s) break P + L = gamma* sum d*"
        )));
    }
    Ok(())
}
