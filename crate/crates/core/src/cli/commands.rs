use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CasbahError, Result};
use crate::gibbs::{run_chain, PosteriorDraws};
use crate::model::{prior_dissociative_probability, rho_moments};
use crate::sim::{generate, replicate_study, ScenarioSpec, StudyReport};
use crate::strata::{point_partition, stratum_means, StratumEffects, StratumLabel};

use super::config::RunConfig;
use super::io::{
    fmt_f64, fmt_opt, io_err, parse_f64_field, parse_int_field, read_dataset, standardize, write_dataset, CsvIn, CsvOut,
    DataFile,
};

pub const DATA_FILE: &str = "data.csv";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    Ok(cfg)
}

pub fn simulate(scenario: u8, n: usize, seed: u64, out: &Path) -> Result<()> {
    let spec = ScenarioSpec::scenario(scenario)?.with_n(n);
    let (data, truth) = generate(&spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
    ensure_dir(out)?;
    let file = DataFile {
        ids: (1..=n).map(|i| i.to_string()).collect(),
        covariate_names: (1..=spec.covariates).map(|j| format!("x{j}")).collect(),
        data,
    };
    write_dataset(&out.join(DATA_FILE), &file)?;
    let mut t = CsvOut::create(&out.join("truth.csv"), &["p0", "p1", "y0", "y1", "stratum"])?;
    for i in 0..n {
        t.row(&[
            fmt_f64(truth.p0[i]),
            fmt_f64(truth.p1[i]),
            fmt_f64(truth.y0[i]),
            fmt_f64(truth.y1[i]),
            truth.strata[i].code().to_string(),
        ])?;
    }
    t.finish()
}

pub fn fit(data_path: &Path, config: Option<&Path>, out: &Path, standardize_flag: bool) -> Result<()> {
    let cfg = load_config(config)?;
    let file = read_dataset(data_path, cfg.covariates.as_deref())?;
    let mut data = file.data.clone();
    if standardize_flag || cfg.standardize {
        standardize(&mut data);
    }
    data.validate_for_fit()?;
    let started = Instant::now();
    let draws = run_chain(&data, &cfg.hyper, &cfg.gibbs)?;
    let elapsed = started.elapsed().as_secs_f64();
    ensure_dir(out)?;
    write_dataset(&out.join(DATA_FILE), &file)?;
    write_draws(out, &data, &draws)?;
    let mut meta = String::new();
    meta.push_str(&format!("casbah_version = {}\n", env!("CARGO_PKG_VERSION")));
    meta.push_str(&format!("data = {}\n", data_path.display()));
    meta.push_str(&format!("n = {}\n", data.n()));
    meta.push_str(&format!("kept_draws = {}\n", draws.len()));
    meta.push_str(&format!("lambda0_accepted = {}\n", draws.lambda_accepts.0));
    meta.push_str(&format!("lambda1_accepted = {}\n", draws.lambda_accepts.1));
    meta.push_str(&format!("wall_time_seconds = {}\n", fmt_f64(elapsed)));
    meta.push_str("# config\n");
    let mut echo = cfg.clone();
    echo.standardize = standardize_flag || cfg.standardize;
    meta.push_str(&echo.to_text());
    let meta_path = out.join("meta");
    std::fs::write(&meta_path, meta).map_err(io_err(&meta_path))
}

/// Writes the per-iteration draw files of a fit.
pub fn write_draws(out: &Path, data: &crate::model::ObservedDataset, draws: &PosteriorDraws) -> Result<()> {
    let mut atoms = CsvOut::create(&out.join("atoms.csv"), &["iter", "l", "eta", "sigma2"])?;
    let mut theta = CsvOut::create(
        &out.join("theta.csv"),
        &["iter", "theta00", "theta01", "theta10", "theta11", "theta12", "theta13"],
    )?;
    let mut lambda = CsvOut::create(&out.join("lambda.csv"), &["iter", "lambda0", "lambda1"])?;
    let mut labels = CsvOut::create(&out.join("labels.csv"), &["iter", "unit", "s0", "s1", "stratum"])?;
    let mut imputed = CsvOut::create(&out.join("imputed.csv"), &["iter", "unit", "p_miss", "y_miss"])?;
    for d in &draws.draws {
        let it = d.iteration.to_string();
        let m = &d.mixture;
        for l in 0..m.truncation() {
            atoms.row(&[it.clone(), (l + 1).to_string(), fmt_f64(m.eta[l]), fmt_f64(m.sigma2[l])])?;
        }
        let o = &d.outcome;
        let mut row = vec![it.clone()];
        row.extend(o.theta0.iter().chain(&o.theta1).map(|&v| fmt_f64(v)));
        theta.row(&row)?;
        lambda.row(&[it.clone(), fmt_f64(o.lambda0), fmt_f64(o.lambda1)])?;
        for i in 0..data.n() {
            let unit = (i + 1).to_string();
            labels.row(&[
                it.clone(),
                unit.clone(),
                (m.labels[0][i] + 1).to_string(),
                (m.labels[1][i] + 1).to_string(),
                d.strata[i].code().to_string(),
            ])?;
            imputed.row(&[it.clone(), unit, fmt_f64(m.p_missing[i]), fmt_f64(d.y_missing[i])])?;
        }
    }
    atoms.finish()?;
    theta.finish()?;
    lambda.finish()?;
    labels.finish()?;
    imputed.finish()
}

/// Per-iteration strata and imputations read back from a draws directory.
struct StoredDraws {
    iterations: Vec<usize>,
    strata: Vec<Vec<StratumLabel>>,
    p_missing: Vec<Vec<f64>>,
    y_missing: Vec<Vec<f64>>,
}

fn read_stored_draws(dir: &Path, n: usize) -> Result<StoredDraws> {
    let labels_path = dir.join("labels.csv");
    if !labels_path.exists() {
        return Err(CasbahError::input(format!("{}: no labels.csv, not a draws directory", dir.display())));
    }
    let mut strata: BTreeMap<usize, Vec<Option<StratumLabel>>> = BTreeMap::new();
    let mut input = CsvIn::open(&labels_path)?;
    let (ci, cu, cs) = (input.column("iter")?, input.column("unit")?, input.column("stratum")?);
    input.for_each(|row, rec| {
        let it: usize = parse_int_field(rec, ci, row, "iter")?;
        let unit: usize = parse_int_field(rec, cu, row, "unit")?;
        let code: i32 = parse_int_field(rec, cs, row, "stratum")?;
        let label = StratumLabel::from_code(code)
            .ok_or_else(|| CasbahError::input(format!("labels.csv row {row}: stratum code {code} not in -1/0/1")))?;
        if unit == 0 || unit > n {
            return Err(CasbahError::input(format!("labels.csv row {row}: unit {unit} outside 1..{n}")));
        }
        strata.entry(it).or_insert_with(|| vec![None; n])[unit - 1] = Some(label);
        Ok(())
    })?;
    let mut imputed: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut input = CsvIn::open(&dir.join("imputed.csv"))?;
    let (ci, cu, cp, cy) = (input.column("iter")?, input.column("unit")?, input.column("p_miss")?, input.column("y_miss")?);
    input.for_each(|row, rec| {
        let it: usize = parse_int_field(rec, ci, row, "iter")?;
        let unit: usize = parse_int_field(rec, cu, row, "unit")?;
        if unit == 0 || unit > n {
            return Err(CasbahError::input(format!("imputed.csv row {row}: unit {unit} outside 1..{n}")));
        }
        let entry = imputed.entry(it).or_insert_with(|| (vec![f64::NAN; n], vec![f64::NAN; n]));
        entry.0[unit - 1] = parse_f64_field(rec, cp, row, "p_miss")?;
        entry.1[unit - 1] = parse_f64_field(rec, cy, row, "y_miss")?;
        Ok(())
    })?;
    if strata.is_empty() {
        return Err(CasbahError::input(format!("{}: draws directory holds no iterations", dir.display())));
    }
    let mut out = StoredDraws { iterations: Vec::new(), strata: Vec::new(), p_missing: Vec::new(), y_missing: Vec::new() };
    for (it, labels) in strata {
        let labels: Vec<StratumLabel> = labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| CasbahError::input(format!("iteration {it}: no label for unit {}", i + 1))))
            .collect::<Result<_>>()?;
        let (p, y) = imputed
            .remove(&it)
            .ok_or_else(|| CasbahError::input(format!("iteration {it}: missing from imputed.csv")))?;
        if let Some(i) = p.iter().chain(&y).position(|v| v.is_nan()) {
            return Err(CasbahError::input(format!("iteration {it}: imputed.csv lacks unit {}", i % n + 1)));
        }
        out.iterations.push(it);
        out.strata.push(labels);
        out.p_missing.push(p);
        out.y_missing.push(y);
    }
    Ok(out)
}

fn write_effects(path: &Path, effects: &StratumEffects, iterations: usize) -> Result<()> {
    let mut out = CsvOut::create(path, &["stratum", "median", "lo90", "hi90", "presence"])?;
    for s in StratumLabel::ALL {
        let summary = effects.summary[s.index()];
        let presence = summary.map_or(0, |x| x.draws) as f64 / iterations as f64;
        out.row(&[
            s.name().to_string(),
            fmt_opt(summary.map(|x| x.median)),
            fmt_opt(summary.map(|x| x.lower)),
            fmt_opt(summary.map(|x| x.upper)),
            fmt_f64(presence),
        ])?;
    }
    out.finish()
}

pub fn summarize(draws_dir: &Path, out: &Path) -> Result<()> {
    if !draws_dir.join("labels.csv").is_file() {
        return Err(CasbahError::input(format!("{}: no labels.csv, not a draws directory", draws_dir.display())));
    }
    let file = read_dataset(&draws_dir.join(DATA_FILE), None)?;
    let data = &file.data;
    let n = data.n();
    let stored = read_stored_draws(draws_dir, n)?;
    let iterations = stored.iterations.len();
    let mut tau = Vec::with_capacity(iterations);
    let mut gap = Vec::with_capacity(iterations);
    let mut counts = vec![[0usize; 3]; n];
    for k in 0..iterations {
        let (mut dy, mut dp) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let (pm, ym) = (stored.p_missing[k][i], stored.y_missing[k][i]);
            let (po, yo) = (data.p_obs[i], data.y_obs[i]);
            if data.treated[i] {
                dp.push(po - pm);
                dy.push(yo - ym);
            } else {
                dp.push(pm - po);
                dy.push(ym - yo);
            }
            counts[i][stored.strata[k][i].index()] += 1;
        }
        tau.push(stratum_means(&stored.strata[k], &dy));
        gap.push(stratum_means(&stored.strata[k], &dp));
    }
    ensure_dir(out)?;
    write_effects(&out.join("pce.csv"), &StratumEffects::from_draws(tau), iterations)?;
    write_effects(&out.join("gap.csv"), &StratumEffects::from_draws(gap), iterations)?;

    let probs: Vec<[f64; 3]> = counts.iter().map(|c| c.map(|k| k as f64 / iterations as f64)).collect();
    let partition = point_partition(&probs);
    let mut sp = CsvOut::create(&out.join("strata_probs.csv"), &["unit", "p_neg", "p_diss", "p_pos", "point"])?;
    for i in 0..n {
        sp.row(&[
            file.ids[i].clone(),
            fmt_f64(probs[i][0]),
            fmt_f64(probs[i][1]),
            fmt_f64(probs[i][2]),
            partition[i].code().to_string(),
        ])?;
    }
    sp.finish()?;

    let mut header = vec!["stratum", "n"];
    header.extend(file.covariate_names.iter().map(String::as_str));
    let mut sc = CsvOut::create(&out.join("strata_covariates.csv"), &header)?;
    for s in StratumLabel::ALL {
        let members: Vec<usize> = (0..n).filter(|&i| partition[i] == s).collect();
        let mut row = vec![s.name().to_string(), members.len().to_string()];
        for j in 0..data.p() {
            let mean = (!members.is_empty())
                .then(|| members.iter().map(|&i| file.data.x[(i, j)]).sum::<f64>() / members.len() as f64);
            row.push(fmt_opt(mean));
        }
        sc.row(&row)?;
    }
    sc.finish()
}

pub struct StudyArgs<'a> {
    pub scenario: u8,
    pub replicates: usize,
    pub n: usize,
    pub config: Option<&'a Path>,
    pub out: &'a Path,
    pub jobs: usize,
    pub seed: Option<u64>,
}

pub fn study(args: &StudyArgs<'_>) -> Result<()> {
    let cfg = load_config(args.config)?;
    let spec = ScenarioSpec::scenario(args.scenario)?.with_n(args.n);
    let seed = args.seed.unwrap_or(cfg.gibbs.seed);
    let report = replicate_study(&spec, args.replicates, &cfg.hyper, &cfg.gibbs, seed, args.jobs)?;
    ensure_dir(args.out)?;
    write_study(args.out, &report)?;
    if report.replicates.is_empty() && !report.failures.is_empty() {
        return Err(CasbahError::numerical(format!("all {} replicates failed", report.failures.len())));
    }
    Ok(())
}

pub fn write_study(out: &Path, report: &StudyReport) -> Result<()> {
    let ok = report.replicates.len().to_string();
    let failed = report.failures.len().to_string();

    let mut t1 = CsvOut::create(&out.join("table1.csv"), &["quantity", "median_bias", "q1", "q3", "iqr", "replicates", "failures"])?;
    let (bp, by) = report.table1();
    for (name, v) in [("p_gap", bp), ("y_gap", by)] {
        t1.row(&[
            name.to_string(),
            fmt_opt(v.map(|x| x.median)),
            fmt_opt(v.map(|x| x.q1)),
            fmt_opt(v.map(|x| x.q3)),
            fmt_opt(v.map(|x| x.iqr())),
            ok.clone(),
            failed.clone(),
        ])?;
    }
    t1.finish()?;

    let mut t2 = CsvOut::create(&out.join("table2.csv"), &["ari_mean", "ari_sd", "replicates", "failures"])?;
    let ari = report.table2();
    t2.row(&[fmt_opt(ari.map(|a| a.mean)), fmt_opt(ari.and_then(|a| a.sd)), ok.clone(), failed.clone()])?;
    t2.finish()?;

    let mut t3 = CsvOut::create(&out.join("table3.csv"), &["stratum", "truth", "mean", "sd", "present", "failures"])?;
    for row in report.table3() {
        t3.row(&[
            row.stratum.name().to_string(),
            fmt_opt(row.truth),
            fmt_opt(row.estimate.map(|e| e.mean)),
            fmt_opt(row.estimate.and_then(|e| e.sd)),
            row.estimate.map_or(0, |e| e.count).to_string(),
            failed.clone(),
        ])?;
    }
    t3.finish()?;

    let mut rep = CsvOut::create(
        &out.join("replicates.csv"),
        &["replicate", "bias_p", "bias_y", "ari", "strata", "tau_neg", "tau_diss", "tau_pos", "true_tau_neg", "true_tau_diss", "true_tau_pos"],
    )?;
    for r in &report.replicates {
        let mut row = vec![r.index.to_string(), fmt_f64(r.bias_p), fmt_f64(r.bias_y), fmt_f64(r.ari), r.strata_recovered.to_string()];
        row.extend(r.tau_estimate.iter().chain(&r.tau_true).map(|&v| fmt_opt(v)));
        rep.row(&row)?;
    }
    rep.finish()?;

    if !report.failures.is_empty() {
        let mut f = CsvOut::create(&out.join("failures.csv"), &["replicate", "error"])?;
        for (idx, msg) in &report.failures {
            f.row(&[idx.to_string(), msg.clone()])?;
        }
        f.finish()?;
    }
    Ok(())
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CasbahError::input(format!("grid must be lo:hi:step, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !lo.is_finite() || !hi.is_finite() || !step.is_finite() || step <= 0.0 || hi < lo {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

pub struct PriorArgs {
    pub alpha_mean: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    pub truncation: usize,
    pub grid: Option<String>,
    pub out: PathBuf,
}

/// Returns the lines to print.
pub fn priorprob(args: &PriorArgs) -> Result<Vec<String>> {
    if let Some(grid) = &args.grid {
        let points = parse_grid(grid)?;
        ensure_dir(&args.out)?;
        let path = args.out.join("figure1.csv");
        let mut f = CsvOut::create(&path, &["alpha_mean", "rho1", "rho2", "probability"])?;
        for a in points {
            let (r1, r2) = rho_moments(a);
            let p = prior_dissociative_probability(r1, r2, args.truncation)?;
            f.row(&[fmt_f64(a), fmt_f64(r1), fmt_f64(r2), fmt_f64(p)])?;
        }
        f.finish()?;
        return Ok(vec![path.display().to_string()]);
    }
    let (r1, r2) = match (args.alpha_mean, args.rho1, args.rho2) {
        (Some(a), None, None) => rho_moments(a),
        (None, Some(r1), Some(r2)) => (r1, r2),
        _ => return Err(CasbahError::input("give either --alpha-mean, or both --rho1 and --rho2")),
    };
    Ok(vec![fmt_f64(prior_dissociative_probability(r1, r2, args.truncation)?)])
}
