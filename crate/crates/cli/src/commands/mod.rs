use std::path::Path;
use std::time::Instant;

use mixreg_core::kernels::FractionalOrder;

use crate::config::ExperimentConfig;
use crate::manifest::{RunContext, RunManifest};
use crate::{CliError, Command};

pub mod barriers;
pub mod counterexample;
pub mod lemma61;
pub mod norms;
pub mod solve;

/// A validated command, ready to run. Preparing every section up front means
/// config errors surface before any output is written.
pub enum Plan {
    Lemma61(lemma61::Plan),
    Counterexample(counterexample::Plan),
    Solve(solve::Plan),
    Barriers(barriers::Plan),
    Norms(norms::Plan),
    All(Vec<Plan>),
}

pub fn prepare(command: Command, config: &ExperimentConfig) -> Result<Plan, CliError> {
    Ok(match command {
        Command::VerifyLemma61 => Plan::Lemma61(lemma61::prepare(config)?),
        Command::Counterexample => Plan::Counterexample(counterexample::prepare(config)?),
        Command::Solve => Plan::Solve(solve::prepare(config)?),
        Command::Barriers => Plan::Barriers(barriers::prepare(config)?),
        Command::Norms => Plan::Norms(norms::prepare(config)?),
        Command::All => Plan::All(
            [Command::VerifyLemma61, Command::Counterexample, Command::Solve, Command::Barriers, Command::Norms]
                .iter()
                .map(|c| prepare(*c, config))
                .collect::<Result<_, _>>()?,
        ),
    })
}

impl Plan {
    pub fn command(&self) -> Command {
        match self {
            Plan::Lemma61(_) => Command::VerifyLemma61,
            Plan::Counterexample(_) => Command::Counterexample,
            Plan::Solve(_) => Command::Solve,
            Plan::Barriers(_) => Command::Barriers,
            Plan::Norms(_) => Command::Norms,
            Plan::All(_) => Command::All,
        }
    }

    pub fn list(&self) -> Vec<String> {
        match self {
            Plan::Lemma61(p) => p.list(),
            Plan::Counterexample(p) => p.list(),
            Plan::Solve(p) => p.list(),
            Plan::Barriers(p) => p.list(),
            Plan::Norms(p) => p.list(),
            Plan::All(ps) => ps
                .iter()
                .flat_map(|p| p.list().into_iter().map(move |l| format!("{}: {l}", p.command().name())))
                .collect(),
        }
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        match self {
            Plan::Lemma61(p) => p.run(ctx),
            Plan::Counterexample(p) => p.run(ctx),
            Plan::Solve(p) => p.run(ctx),
            Plan::Barriers(p) => p.run(ctx),
            Plan::Norms(p) => p.run(ctx),
            Plan::All(_) => unreachable!("handled by execute"),
        }
    }

    pub fn execute(&self, config: &ExperimentConfig, out: &Path) -> Result<RunManifest, CliError> {
        let start = Instant::now();
        let mut ctx = RunContext::new(out, "")?;
        if let Plan::All(plans) = self {
            for p in plans {
                let name = p.command().name();
                let m = p.execute(config, &out.join(name))?;
                ctx.checks.extend(m.checks.into_iter().map(|mut c| {
                    c.name = format!("{name}/{}", c.name);
                    c
                }));
                ctx.notes.extend(m.notes.into_iter().map(|n| format!("{name}: {n}")));
                ctx.artifacts.extend(m.artifacts.into_iter().map(|a| format!("{name}/{a}")));
            }
        } else {
            self.run(&mut ctx)?;
        }
        ctx.finish(self.command().name(), config, start.elapsed().as_secs_f64())
    }
}

/// Parses "num/den" or a decimal and applies the promotion rule, noting any promotion.
pub fn parse_order(text: &str, what: &str, notes: &mut Vec<String>) -> Result<FractionalOrder, CliError> {
    let raw = FractionalOrder::parse(text).map_err(|e| CliError::Config(format!("{what}: {e}")))?;
    let promoted = raw.promoted();
    if raw.rational_form().is_none() {
        match promoted.rational_form() {
            Some((n, d)) => notes.push(format!("{what}: order {text} promoted to {n}/{d}")),
            None => notes.push(format!("{what}: order {text} kept as a float (irrational branch)")),
        }
    }
    Ok(promoted)
}

pub fn window(w: [f64; 2], what: &str) -> Result<[f64; 2], CliError> {
    if !(w[0] > 0.0 && w[1] > w[0] && w[1].is_finite()) {
        return Err(CliError::Config(format!("{what}: window [{}, {}] must satisfy 0 < lo < hi", w[0], w[1])));
    }
    Ok(w)
}

pub fn positive(v: f64, what: &str) -> Result<f64, CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Config(format!("{what} = {v} must be positive")));
    }
    Ok(v)
}
