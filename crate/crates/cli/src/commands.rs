use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use axmc_core::measures::parse_measure_list;
use axmc_core::{
    DataSource, ReportSplit, RunBudget, RunControl, Session, SessionConfig, Status, WeightBox,
};
use axmc_service::{write_atomic, AppState};

use crate::{
    BoxArgs, BudgetArgs, ContinueArgs, FrontArgs, RunArgs, ServeArgs, SynthArgs, UsageError,
};

const SNAPSHOT: &str = "session.json";
const FRONT: &str = "front.csv";
const LOG: &str = "iterations.jsonl";

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn seed(flag: u64) -> Result<u64> {
    match std::env::var("AXMC_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            usage(format!(
                "AXMC_SEED must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(flag),
    }
}

fn budget(b: &BudgetArgs) -> RunBudget {
    match (b.budget, b.seconds) {
        (Some(n), _) => RunBudget::Iterations(n),
        (None, Some(s)) => RunBudget::Seconds(s),
        (None, None) => unreachable!("clap requires a budget"),
    }
}

/// The requested weight box, validated against `k` before anything runs.
fn weight_box(args: &BoxArgs, k: usize) -> Result<Option<WeightBox>> {
    if let (Some(lo), Some(hi)) = (args.wmin, args.wmax) {
        if k != 2 {
            return Err(usage(format!(
                "--wmin/--wmax apply to two-objective sessions; this one has {k}, use --box FILE"
            )));
        }
        return Ok(Some(WeightBox::first(2, lo, hi)?));
    }
    let Some(path) = &args.weight_box else {
        return Ok(None);
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bx: WeightBox =
        serde_json::from_str(&text).with_context(|| format!("weight box {}", path.display()))?;
    if bx.k() != k {
        bail!("weight box has {} objectives, session has {k}", bx.k());
    }
    Ok(Some(bx))
}

/// Writes the snapshot and iteration log of a session directory.
struct SessionDir {
    path: PathBuf,
}

impl SessionDir {
    fn checkpoint(&self, s: &Session) -> Result<()> {
        write_atomic(&self.path.join(SNAPSHOT), s.snapshot()?.as_bytes())?;
        let mut log = s.log_lines(0).join("\n");
        log.push('\n');
        write_atomic(&self.path.join(LOG), log.as_bytes())?;
        Ok(())
    }

    fn finish(&self, s: &Session) -> Result<()> {
        self.checkpoint(s)?;
        let table = s.report(ReportSplit::Valid)?;
        write_atomic(&self.path.join(FRONT), table.to_csv()?.as_bytes())?;
        print!("{}", table.to_text());
        let b = s.budget();
        eprintln!(
            "{}: {} after {}/{} iterations, {} records, {} on the front, {:.1}s",
            s.id,
            s.status().as_str(),
            b.iterations_done,
            b.iterations_allowed,
            s.archive().len(),
            table.rows.len(),
            b.seconds_used
        );
        Ok(())
    }
}

fn restore(dir: &Path) -> Result<Session> {
    let path = dir.join(SNAPSHOT);
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Session::restore(&text).with_context(|| format!("restoring {}", path.display()))
}

/// Run with per-iteration checkpoints; ctrl-c pauses at the next boundary.
fn drive(s: &mut Session, b: RunBudget, dir: &SessionDir) -> Result<()> {
    let ctrl = RunControl::new();
    let handler = ctrl.clone();
    ctrlc::set_handler(move || {
        eprintln!("pausing after the current iteration");
        handler.request_pause();
    })
    .context("installing the interrupt handler")?;
    let st = s.run(b, &ctrl, |s| {
        log::info!(
            "iteration {}: {} records, front {}",
            s.budget().iterations_done,
            s.archive().len(),
            s.archive().front_indices().len()
        );
        dir.checkpoint(s)
            .map_err(|e| axmc_core::Error::Io(std::io::Error::other(e.to_string())))
    });
    let st = match st {
        Ok(st) => st,
        Err(e) => {
            // Keep what was done before the failure.
            dir.checkpoint(s)?;
            return Err(e.into());
        }
    };
    if st == Status::Paused {
        eprintln!(
            "paused; resume with `axmc continue --session {} --budget 0`",
            dir.path.display()
        );
    }
    dir.finish(s)
}

pub fn run(a: RunArgs) -> Result<()> {
    let measures = parse_measure_list(&a.measures).map_err(|e| usage(e.to_string()))?;
    let mut config = SessionConfig::new(measures, seed(a.seed)?);
    config.initial_design = a.m;
    config.weight_box = weight_box(&a.weights, config.k())?;
    let schema = crate::schema::load(&a)?;
    let data =
        std::fs::canonicalize(&a.data).with_context(|| format!("dataset {}", a.data.display()))?;
    if a.out.join(SNAPSHOT).exists() {
        bail!(
            "{} already holds a session; use `axmc continue`",
            a.out.display()
        );
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let dir = SessionDir { path: a.out };
    let mut s = Session::create(DataSource::Path(data), schema, config)?;
    dir.checkpoint(&s)?;
    drive(&mut s, budget(&a.budget), &dir)
}

pub fn cont(a: ContinueArgs) -> Result<()> {
    let mut s = restore(&a.session)?;
    if let Some(bx) = weight_box(&a.weights, s.config().k())? {
        s.set_weight_box(bx)?;
    }
    let dir = SessionDir { path: a.session };
    drive(&mut s, budget(&a.budget), &dir)
}

pub fn front(a: FrontArgs) -> Result<()> {
    let s = restore(&a.session)?;
    let table = s.report(a.split.parse()?)?;
    let text = match a.format.as_str() {
        "csv" => table.to_csv()?,
        "json" => serde_json::to_string_pretty(&table)? + "\n",
        _ => table.to_text(),
    };
    match &a.out {
        Some(p) => {
            write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    let state = AppState::open(&a.sessions, a.ui.clone())
        .with_context(|| format!("opening session directory {}", a.sessions.display()))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axmc_service::serve(listener, state).await?;
        Ok(())
    })
}

pub fn synth(a: SynthArgs) -> Result<()> {
    use axmc_core::synthetic::{income_csv, income_schema, IncomeSpec};
    let spec = IncomeSpec {
        n: a.rows,
        seed: a.seed,
        ..IncomeSpec::default()
    };
    write_atomic(&a.out, income_csv(&spec).as_bytes())
        .with_context(|| format!("writing {}", a.out.display()))?;
    let schema_path = a.out.with_extension("schema.json");
    write_atomic(
        &schema_path,
        serde_json::to_string_pretty(&income_schema())?.as_bytes(),
    )?;
    eprintln!("wrote {} and {}", a.out.display(), schema_path.display());
    Ok(())
}
