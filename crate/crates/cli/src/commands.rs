use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use dosefind::designs::{tally_history, Design, DesignConfig, DesignKind, PatientOutcome};
use dosefind::framework::DoseState;
use dosefind::sim::{
    evaluate, fixed_scenarios, format_scenarios, generate_scenarios, parse_scenarios, Evaluation,
    Scenario, SimSettings, METRIC_NAMES,
};
use dosefind::tables::{build_table, TableFormat};
use dosefind::verify::{run_all, VerifyConfig};

use crate::config::{load, RunConfig, DEFAULT_SEED};
use crate::{Command, Common, Format};

pub fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Table { common, max_n } => table(&common, max_n),
        Command::Simulate {
            common,
            seed,
            workers,
        } => simulate(&common, seed, workers),
        Command::Verify { common, seed } => verify(&common, seed),
        Command::Decide {
            design,
            n,
            y,
            history,
            doses,
            config,
        } => decide(&design, n, y, history.as_deref(), doses, config.as_deref()),
    }
}

fn load_config(common: &Common, required: bool) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(p) => load(p)?,
        None if required => bail!("--config is required for this command"),
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = match &common.out {
        Some(d) => d.clone(),
        None => cfg.resolve(&cfg.output.dir),
    };
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

fn formats(common: &Common, cfg: &RunConfig) -> Vec<TableFormat> {
    match common.format {
        Some(Format::Csv) => vec![TableFormat::Csv],
        Some(Format::Txt) => vec![TableFormat::Text],
        None => cfg
            .output
            .formats
            .iter()
            .map(|f| {
                if f == "txt" {
                    TableFormat::Text
                } else {
                    TableFormat::Csv
                }
            })
            .collect(),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn table(common: &Common, max_n: Option<u32>) -> Result<ExitCode> {
    let cfg = load_config(common, true)?;
    cfg.validate()?;
    for (i, d) in cfg.design.iter().enumerate() {
        if d.design.is_history_dependent() {
            bail!(
                "design[{i}].design: {} decisions depend on the whole trial history, so it has no decision table",
                d.design
            );
        }
    }
    let dir = out_dir(common, &cfg)?;
    let max_n = max_n.unwrap_or(cfg.trial.max_n);
    for d in &cfg.design {
        let t = build_table(d, max_n)?;
        for f in formats(common, &cfg) {
            let path = dir.join(format!("table_{}.{}", d.design.key(), f.extension()));
            write(&path, &t.emit(f))?;
            println!("{}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn scenarios(cfg: &RunConfig, seed: u64) -> Result<Vec<Scenario>> {
    let rule = cfg.mtd_rule()?;
    let sim = &cfg.sim;
    let set = match sim.scenarios.as_str() {
        "random" => {
            if sim.random_count == 0 {
                bail!("sim.random_count: must be at least 1");
            }
            if sim.dose_counts.iter().any(|&t| t < 2) || sim.dose_counts.is_empty() {
                bail!("sim.dose_counts: need one or more dose counts, each at least 2");
            }
            generate_scenarios(sim.random_count, &sim.dose_counts, &rule, sim.support, seed)?
        }
        "fixed" => fixed_scenarios(&rule)?,
        path => {
            let p = cfg.resolve(Path::new(path));
            let text = fs::read_to_string(&p)
                .with_context(|| format!("sim.scenarios: cannot read {}", p.display()))?;
            parse_scenarios(&text, &rule)
                .with_context(|| format!("sim.scenarios: {}", p.display()))?
        }
    };
    if let Some(s) = set.iter().find(|s| s.doses() < cfg.trial.start_dose) {
        bail!(
            "trial.start_dose: scenario {} has only {} doses",
            s.label,
            s.doses()
        );
    }
    Ok(set)
}

fn simulate(common: &Common, seed_flag: Option<u64>, workers: Option<usize>) -> Result<ExitCode> {
    let cfg = load_config(common, true)?;
    cfg.validate()?;
    if cfg.sim.replicates == 0 {
        bail!("sim.replicates: must be at least 1");
    }
    let seed = seed_flag.or(cfg.sim.seed).unwrap_or(DEFAULT_SEED);
    let scenarios = scenarios(&cfg, seed)?;
    let settings = SimSettings {
        max_n: cfg.trial.max_n,
        cohort_size: cfg.trial.cohort_size,
        start_dose: cfg.trial.start_dose - 1,
        replicates: cfg.sim.replicates,
        seed,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            bail!("--workers: must be at least 1");
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    let eval = pool.install(|| evaluate(&cfg.design, &scenarios, &settings))?;

    let dir = out_dir(common, &cfg)?;
    for f in formats(common, &cfg) {
        let (name, text) = match f {
            TableFormat::Csv => ("summary.csv", summary_csv(&eval)),
            TableFormat::Text => ("summary.txt", summary_text(&eval)),
        };
        write(&dir.join(name), &text)?;
    }
    write(&dir.join("per_scenario.csv"), &long_csv(&eval))?;
    write(&dir.join("agreement.csv"), &agreement_csv(&eval))?;
    write(
        &dir.join("scenarios.csv"),
        &format_scenarios(&eval.scenarios),
    )?;
    print!("{}", summary_text(&eval));
    Ok(ExitCode::SUCCESS)
}

fn summary_csv(eval: &Evaluation) -> String {
    let mut out = String::from("design,metric,mean,sd\n");
    for d in &eval.designs {
        let (m, s) = (d.mean.to_array(), d.sd.to_array());
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{name},{:.6},{:.6}",
                d.config.design.key(),
                m[i],
                s[i]
            );
        }
    }
    out
}

/// Designs as columns, metrics as rows, entries `mean (sd)`.
fn summary_text(eval: &Evaluation) -> String {
    let mut out = format!("{:<12}", "metric");
    for d in &eval.designs {
        let _ = write!(out, "{:>16}", d.config.design.to_string());
    }
    out.push('\n');
    for (i, name) in METRIC_NAMES.iter().enumerate() {
        let _ = write!(out, "{name:<12}");
        for d in &eval.designs {
            let cell = format!("{:.3} ({:.3})", d.mean.to_array()[i], d.sd.to_array()[i]);
            let _ = write!(out, "{cell:>16}");
        }
        out.push('\n');
    }
    out
}

fn long_csv(eval: &Evaluation) -> String {
    let mut out = String::from("design,scenario,metric,value\n");
    for d in &eval.designs {
        for (s, m) in eval.scenarios.iter().zip(&d.per_scenario) {
            for (name, v) in METRIC_NAMES.iter().zip(m.to_array()) {
                let _ = writeln!(out, "{},{},{name},{v:.6}", d.config.design.key(), s.label);
            }
        }
    }
    out
}

fn agreement_csv(eval: &Evaluation) -> String {
    let mut out = String::from("first,second,identical,total,fraction\n");
    for a in &eval.agreement {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            eval.designs[a.first].config.design.key(),
            eval.designs[a.second].config.design.key(),
            a.identical,
            a.total,
            a.fraction()
        );
    }
    out
}

fn verify(common: &Common, seed: Option<u64>) -> Result<ExitCode> {
    let cfg = load_config(common, false)?;
    let design = cfg
        .design
        .first()
        .cloned()
        .unwrap_or_else(|| DesignConfig::new(DesignKind::Boin));
    let v = &cfg.verify;
    let defaults = VerifyConfig::default();
    let vc = VerifyConfig {
        design,
        max_n: v.max_n,
        loss_max_n: v.loss_max_n,
        loss_cells: v.loss_cells,
        lambda1_shift: v.lambda1_shift,
        doses: v.doses,
        histories: v.histories,
        riemann_points: v.riemann_points,
        seed: seed.or(v.seed).unwrap_or(defaults.seed),
    };
    let cert = run_all(&vc)?;
    let text = cert.render();
    let dir = out_dir(common, &cfg)?;
    write(&dir.join("certificate.txt"), &text)?;
    print!("{text}");
    Ok(if cert.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn parse_history(path: &Path, doses: usize) -> Result<Vec<PatientOutcome>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read history {}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || {
            anyhow!(
                "{}:{}: expected `dose,dlt` with dose in 1..={doses} and dlt 0 or 1",
                path.display(),
                i + 1
            )
        };
        let (d, y) = line.split_once(',').ok_or_else(bad)?;
        let dose: usize = d.trim().parse().map_err(|_| bad())?;
        let dlt = match y.trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        if dose == 0 || dose > doses {
            return Err(bad());
        }
        out.push(PatientOutcome {
            dose: dose - 1,
            dlt,
        });
    }
    Ok(out)
}

fn decide(
    design: &str,
    n: Option<u32>,
    y: Option<u32>,
    history: Option<&Path>,
    doses: Option<usize>,
    config: Option<&Path>,
) -> Result<ExitCode> {
    let kind: DesignKind = design.parse()?;
    let cfg = match config {
        Some(p) => {
            let run = load(p)?;
            match run.design.iter().position(|d| d.design == kind) {
                Some(i) => {
                    run.design[i].validate_at(&format!("design[{i}]"))?;
                    run.design[i].clone()
                }
                None => DesignConfig::new(kind),
            }
        }
        None => DesignConfig::new(kind),
    };
    if kind.is_history_dependent() {
        let path = history.ok_or_else(|| anyhow!("{kind} needs --history (and --doses)"))?;
        let t = doses
            .or_else(|| cfg.skeleton.as_ref().map(Vec::len))
            .ok_or_else(|| anyhow!("{kind} needs --doses with --history"))?;
        let h = parse_history(path, t)?;
        let d = Design::build(&cfg, t)?;
        println!("{}", d.recommend(&tally_history(&h, t)?)? + 1);
    } else {
        let (n, y) = match (n, y) {
            (Some(n), Some(y)) => (n, y),
            _ => bail!("{kind} needs the tally at the current dose: decide {design} N Y"),
        };
        let state = DoseState::new(n, y)?;
        let d = Design::build(&cfg, 2)?;
        println!("{}", d.decide_local(state)?.tag());
    }
    Ok(ExitCode::SUCCESS)
}
