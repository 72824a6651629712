//! One function per command. Each returns a JSON result, the CSV tables to
//! write next to it and whether its soundness checks passed.

use std::path::PathBuf;

use orlicz_regen::bounds::{
    default_pairs, divergence_certificate, run_suite, verify_cor_nu, verify_cor_pi, verify_thm_nu,
    verify_thm_pi, write_jsonl, write_suite_csv, BoundReport, ChainLaws, SuiteConfig, TheoremId,
};
use orlicz_regen::limits::{
    berry_esseen_experiment, berry_esseen_preconditions, clt_experiment, lil_statistic,
    linear_grid, tail_bound_experiment, CltParams, TailParams,
};
use orlicz_regen::norm::{orlicz_norm, psi_alpha_norm};
use orlicz_regen::numeric::log_grid;
use orlicz_regen::split_chain::{block_mean_check, pitman_check};
use orlicz_regen::tower::{
    build, weak_opt_nu_spec, weak_opt_pi_spec, SearchBudget, TowerChain, TowerExactLaws,
};
use orlicz_regen::young::{
    evaluate_case, fit_exponents, golden_cases, normalize_assumption_a, rho_of, zeta_of, FitKind,
    GeneralizedYoungFn, YoungFn,
};
use orlicz_regen::Ext;
use serde_json::{json, Value};

use crate::config::{Command, Config, Side};
use crate::CliError;

pub struct Outcome {
    pub result: Value,
    pub sound: bool,
    pub tables: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn ok(result: Value) -> Outcome {
        Outcome {
            result,
            sound: true,
            tables: Vec::new(),
        }
    }

    fn table(mut self, name: &str, bytes: Vec<u8>) -> Outcome {
        self.tables.push((name.to_string(), bytes));
        self
    }
}

type Res<T> = Result<T, CliError>;

fn need<'a, T>(v: &'a Option<T>, name: &str) -> Res<&'a T> {
    v.as_ref()
        .ok_or_else(|| CliError::Config(format!("missing {name}")))
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Res<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Run(e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn tower(cfg: &Config, center: bool) -> Res<(TowerChain, TowerExactLaws)> {
    let spec = cfg.chain.spec();
    let spec = if center { spec.centered() } else { spec };
    Ok(build(&spec)?)
}

fn seed(cfg: &Config) -> Res<u64> {
    cfg.seed
        .ok_or_else(|| CliError::Config("a seed is required".into()))
}

pub fn run(command: Command, cfg: &Config) -> Res<Outcome> {
    match command {
        Command::ComputeRho => compute_sup(cfg, true),
        Command::ComputeZeta => compute_sup(cfg, false),
        Command::VerifyBounds => verify_bounds(cfg),
        Command::CertifyCounterexample => certify(cfg),
        Command::PitmanCheck => pitman(cfg),
        Command::Clt => clt(cfg),
        Command::Lil => lil(cfg),
        Command::BerryEsseen => berry_esseen(cfg),
        Command::TailBound => tail_bound(cfg),
        Command::GoldenExamples => golden(cfg),
    }
}

fn compute_sup(cfg: &Config, rho: bool) -> Res<Outcome> {
    let phi = need(&cfg.functions.phi, "functions.phi")?;
    let psi = need(&cfg.functions.psi, "functions.psi")?;
    let g = if rho {
        rho_of(phi, psi)?
    } else {
        zeta_of(phi, psi)?
    };
    let GeneralizedYoungFn::Sup(sup) = &g else {
        unreachable!("derived functions are suprema")
    };
    let r = &cfg.run;
    let rows: Vec<(f64, f64, f64)> = log_grid(r.x_lo, r.x_hi, r.points)
        .into_iter()
        .map(|x| {
            let (l, y) = sup.ln_sup(x);
            (x, l, y)
        })
        .collect();
    let fit = fit_exponents(&g, FitKind::Power, r.x_lo, r.x_hi, r.points).ok();
    let values: Vec<Value> = rows
        .iter()
        .map(|&(x, l, y)| json!({ "x": x, "value": Ext::from_ln(l), "argmax": y }))
        .collect();
    let table = csv_table(
        &["x", "value", "argmax"],
        rows.iter()
            .map(|&(x, l, y)| vec![x.to_string(), Ext::from_ln(l).to_string(), y.to_string()]),
    )?;
    let name = if rho { "rho" } else { "zeta" };
    Ok(
        Outcome::ok(json!({ "function": name, "values": values, "power_fit": fit }))
            .table(&format!("{name}.csv"), table),
    )
}

fn normalized_psi(cfg: &Config) -> Res<(YoungFn, bool)> {
    let n = normalize_assumption_a(need(&cfg.functions.psi, "functions.psi")?);
    Ok((n.psi, n.changed))
}

fn verify_bounds(cfg: &Config) -> Res<Outcome> {
    let phi = need(&cfg.functions.phi, "functions.phi")?;
    let (psi, changed) = normalized_psi(cfg)?;
    let (chain, exact) = tower(cfg, false)?;
    let laws = ChainLaws::tower(&chain, &exact)?;
    let mut reports: Vec<BoundReport> = vec![
        verify_thm_nu(&laws, phi, &psi)?,
        verify_thm_pi(&laws, phi, &psi, cfg.run.improved)?,
    ];
    if let Some(rho) = &cfg.functions.rho {
        reports.push(verify_cor_nu(&laws, &psi, rho)?);
    }
    if let Some(zeta) = &cfg.functions.zeta {
        reports.push(verify_cor_pi(&laws, &psi, zeta, phi)?);
    }
    let mut sound = reports.iter().all(BoundReport::sound);
    let mut jsonl = Vec::new();
    write_jsonl(&reports, &mut jsonl)?;
    let mut result = json!({ "psi_normalized": changed, "reports": to_json(&reports) });
    let mut out = Outcome {
        result: Value::Null,
        sound: true,
        tables: vec![("bounds.jsonl".into(), jsonl)],
    };

    let r = &cfg.run;
    if r.suite_specs > 0 {
        let suite = SuiteConfig {
            n_specs: r.suite_specs,
            max_atoms: r.suite_max_atoms,
            h_max: r.suite_h_max,
            f_max: r.suite_f_max,
            seed: seed(cfg)?,
        };
        let rows = run_suite(&default_pairs(), &suite)?;
        let violations = rows.iter().filter(|row| !row.report.sound()).count();
        let max_ratio = |id: TheoremId| {
            rows.iter()
                .filter(|row| row.report.theorem_id == id)
                .filter_map(|row| row.report.ratio.value())
                .fold(0.0, f64::max)
        };
        sound &= violations == 0;
        result["suite"] = json!({
            "rows": rows.len(),
            "violations": violations,
            "max_ratio": {
                "thm_nu": max_ratio(TheoremId::ThmNu),
                "thm_pi": max_ratio(TheoremId::ThmPi),
                "cor_nu": max_ratio(TheoremId::CorNu),
            },
        });
        let mut buf = Vec::new();
        write_suite_csv(&rows, &mut buf)?;
        out.tables.push(("suite.csv".into(), buf));
    }
    out.result = result;
    out.sound = sound;
    Ok(out)
}

fn certify(cfg: &Config) -> Res<Outcome> {
    let phi = need(&cfg.functions.phi, "functions.phi")?;
    let candidate = need(&cfg.functions.candidate, "functions.candidate")?;
    let (psi, _) = normalized_psi(cfg)?;
    let r = &cfg.run;
    let budget = SearchBudget {
        n_max: r.search_n_max,
        k_max: r.search_k_max,
    };
    let outcome = match r.side {
        Side::Nu => weak_opt_nu_spec(phi, &psi, candidate, &budget)?,
        Side::Pi => weak_opt_pi_spec(phi, &psi, candidate, &budget)?,
    };
    let Some(w) = outcome.refuted() else {
        return Ok(Outcome::ok(
            json!({ "outcome": "not_refuted", "budget": budget }),
        ));
    };
    let cert = divergence_certificate(&w.series, r.theta, Ext::Finite(r.threshold), r.term_budget);
    // the truncated spec keeps τ + 1 and f integrable
    let (_, laws) = build(&w.spec)?;
    let tau_norm = orlicz_norm(&laws.tau_plus_1_law, &psi, 1.0)?;
    let f_norm = orlicz_norm(&laws.f_law_under_pi.map(f64::abs)?, candidate, 1.0)?;
    let atoms = csv_table(
        &["label", "alpha", "f_tilde", "h"],
        w.spec.atoms.iter().map(|a| {
            vec![
                a.label.clone(),
                a.alpha.to_string(),
                a.f_tilde.to_string(),
                a.h.to_string(),
            ]
        }),
    )?;
    let sums = csv_table(
        &["terms", "ln_partial_sum"],
        cert.ln_partial_sums
            .iter()
            .enumerate()
            .map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]),
    )?;
    Ok(Outcome::ok(json!({
        "outcome": "refuted",
        "atoms_found": w.steps.len() - 1,
        "complete": w.complete,
        "normalizer": w.normalizer,
        "tail_mass": w.tail_mass,
        "steps": to_json(&w.steps),
        "certificate": to_json(&cert),
        "truncated_spec_norms": { "tau_plus_1_psi": tau_norm, "f_candidate": f_norm },
    }))
    .table("atoms.csv", atoms)
    .table("partial_sums.csv", sums))
}

fn pitman(cfg: &Config) -> Res<Outcome> {
    let (chain, laws) = tower(cfg, false)?;
    let s = seed(cfg)?;
    let n = cfg.run.n_blocks;
    let e_tau = laws.tau_plus_1_law.mean();
    let rel_error = (e_tau - laws.r).abs() / laws.r;
    let checks = [
        ("occupation_one", pitman_check(&chain, |_, _| 1.0, n, s)?),
        (
            "occupation_f",
            pitman_check(&chain, |x, _| chain.f(x), n, s)?,
        ),
        (
            "occupation_abs_f_plus_mark",
            pitman_check(&chain, |x, y| chain.f(x).abs() + y as u8 as f64, n, s)?,
        ),
        (
            "block_mean_f",
            block_mean_check(&chain, |x| chain.f(x), n, s)?,
        ),
    ];
    let checks: Vec<Value> = checks
        .iter()
        .map(|(name, r)| json!({ "name": name, "report": to_json(r) }))
        .collect();
    Ok(Outcome {
        result: json!({
            "exact_identity": { "e_nu_tau_plus_1": e_tau, "inverse_regen_rate": laws.r, "rel_error": rel_error },
            "checks": checks,
        }),
        sound: rel_error <= 1e-12,
        tables: Vec::new(),
    })
}

fn clt_params(cfg: &Config) -> Res<CltParams> {
    let r = &cfg.run;
    Ok(CltParams {
        replicas: r.replicas,
        block_pairs: r.block_pairs,
        start: r.start,
        seed: seed(cfg)?,
    })
}

fn clt(cfg: &Config) -> Res<Outcome> {
    let (chain, _) = tower(cfg, cfg.run.center)?;
    let rep = clt_experiment(&chain, |x| chain.f(x), &cfg.run.n_values, &clt_params(cfg)?)?;
    let table = csv_table(
        &["n", "ks_distance", "sample_variance"],
        rep.n_values.iter().enumerate().map(|(j, n)| {
            vec![
                n.to_string(),
                rep.ks_distance
                    .get(j)
                    .map(|d| d.to_string())
                    .unwrap_or_default(),
                rep.sample_variance[j].to_string(),
            ]
        }),
    )?;
    Ok(Outcome::ok(to_json(&rep)).table("clt.csv", table))
}

fn lil(cfg: &Config) -> Res<Outcome> {
    let (chain, _) = tower(cfg, cfg.run.center)?;
    let rep = lil_statistic(&chain, |x| chain.f(x), cfg.run.n_max, &clt_params(cfg)?)?;
    let table = csv_table(
        &["replica", "statistic"],
        rep.statistic
            .iter()
            .enumerate()
            .map(|(i, s)| vec![i.to_string(), s.to_string()]),
    )?;
    Ok(Outcome::ok(to_json(&rep)).table("lil.csv", table))
}

fn berry_esseen(cfg: &Config) -> Res<Outcome> {
    let (chain, laws) = tower(cfg, cfg.run.center)?;
    let precheck = match &cfg.run.be_psi {
        Some(psi) => Some(berry_esseen_preconditions(
            psi,
            &ChainLaws::tower(&chain, &laws)?,
        )?),
        None => None,
    };
    let rep =
        berry_esseen_experiment(&chain, |x| chain.f(x), &cfg.run.n_values, &clt_params(cfg)?)?;
    let table = csv_table(
        &["n", "delta_n"],
        rep.n_values
            .iter()
            .zip(&rep.delta_n)
            .map(|(n, d)| vec![n.to_string(), d.to_string()]),
    )?;
    Ok(
        Outcome::ok(json!({ "preconditions": precheck, "report": to_json(&rep) }))
            .table("berry_esseen.csv", table),
    )
}

fn tail_bound(cfg: &Config) -> Res<Outcome> {
    let (chain, exact) = tower(cfg, cfg.run.center)?;
    let laws = ChainLaws::tower(&chain, &exact)?;
    let r = &cfg.run;
    let t_max = match r.t_max {
        Some(t) => t,
        None => 6.0 * (chain.e_nu_s2() / chain.r() * r.n as f64).sqrt(),
    };
    if !(t_max > 0.0) || r.t_points == 0 {
        return Err(CliError::Config(
            "tail grid needs t_max > 0 and t_points >= 1".into(),
        ));
    }
    let params = TailParams {
        alpha: r.alpha,
        beta: r.beta,
        n: r.n,
        t_grid: linear_grid(t_max, r.t_points),
        replicas: r.replicas,
        seed: seed(cfg)?,
        k: r.k,
    };
    // fail early on infinite norms, before any simulation
    psi_alpha_norm(&laws.tau_nu, r.alpha)?;
    let rep = tail_bound_experiment(&chain, |x| chain.f(x), &laws, &params)?;
    let mut rows = Vec::new();
    for s in [&rep.nu, &rep.pi] {
        let d = &s.decomposition;
        for (j, t) in rep.t_grid.iter().enumerate() {
            let b = &s.bound[j];
            rows.push(vec![
                t.to_string(),
                to_json(&s.start).as_str().unwrap_or_default().to_string(),
                s.empirical_tail[j].to_string(),
                b.gaussian.to_string(),
                b.exponential.to_string(),
                b.stretched.to_string(),
                b.stretched_tau.to_string(),
                b.total.to_string(),
                d.head[j].to_string(),
                d.blocks[j].to_string(),
                d.blocks_small[j].to_string(),
                d.blocks_large[j].to_string(),
                d.tail[j].to_string(),
            ]);
        }
    }
    let table = csv_table(
        &[
            "t",
            "start",
            "empirical",
            "gaussian",
            "exponential",
            "stretched",
            "stretched_tau",
            "bound",
            "head",
            "blocks",
            "blocks_small",
            "blocks_large",
            "tail",
        ],
        rows,
    )?;
    let covered = |s: &orlicz_regen::limits::StartTail| {
        s.empirical_tail
            .iter()
            .zip(&s.bound)
            .all(|(e, b)| b.total >= *e)
    };
    let pieces_ok = |s: &orlicz_regen::limits::StartTail| {
        s.decomposition.inequality_holds
            && s.decomposition.max_reconstruction_error <= 1e-9 * (1.0 + r.n as f64)
    };
    let sound = covered(&rep.nu) && covered(&rep.pi) && pieces_ok(&rep.nu) && pieces_ok(&rep.pi);
    Ok(Outcome {
        result: to_json(&rep),
        sound,
        tables: vec![("tail.csv".into(), table)],
    })
}

fn golden(cfg: &Config) -> Res<Outcome> {
    let r = &cfg.run;
    let outcomes = golden_cases()
        .iter()
        .map(|c| evaluate_case(c, r.x_lo, r.x_hi, r.points))
        .collect::<Result<Vec<_>, _>>()?;
    let table = csv_table(
        &[
            "id",
            "target",
            "kind",
            "expected_exponent",
            "fitted_exponent",
            "expected_log_power",
            "fitted_log_power",
            "pass",
        ],
        outcomes.iter().map(|o| {
            vec![
                o.case.id.to_string(),
                to_json(&o.case.target)
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                to_json(&o.expected.kind)
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                o.expected.exponent.to_string(),
                o.fitted.exponent.to_string(),
                o.expected.log_power.to_string(),
                o.fitted
                    .log_power
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
                o.pass.to_string(),
            ]
        }),
    )?;
    let passed = outcomes.iter().filter(|o| o.pass).count();
    Ok(Outcome::ok(
        json!({ "cases": to_json(&outcomes), "passed": passed, "total": outcomes.len() }),
    )
    .table("golden.csv", table))
}

/// Writes `report.json` and the tables; returns the report path.
pub fn write_outputs(command: Command, cfg: &Config, outcome: &Outcome) -> Res<PathBuf> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let report = json!({
        "command": command,
        "status": if outcome.sound { "ok" } else { "soundness_failure" },
        "config": to_json(cfg),
        "result": outcome.result,
        "timestamp": chrono::Utc::now().to_rfc3339(),
    });
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("json values serialize");
    std::fs::write(&path, text + "\n")?;
    for (name, bytes) in &outcome.tables {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(path)
}
