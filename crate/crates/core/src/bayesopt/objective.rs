//! Black-box objectives and the name registry used to select them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::Bounds;
use crate::error::{Error, Result};

/// A function to minimize. Implementations return the noiseless value;
/// observation noise is injected by the optimization loop.
pub trait Objective: Send {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// Natural search domain, if the objective has one.
    fn default_bounds(&self) -> Option<Bounds> {
        None
    }

    /// Known global minimum value, if any.
    fn known_minimum(&self) -> Option<f64> {
        None
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;
}

/// Branin-Hoo parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraninParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl Default for BraninParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 5.1 / (4.0 * PI * PI),
            c: 5.0 / PI,
            r: 6.0,
            s: 10.0,
            t: 1.0 / (8.0 * PI),
        }
    }
}

pub const BRANIN_MINIMUM: f64 = 0.397_887_357_729_738_1;

pub fn branin(x1: f64, x2: f64, p: &BraninParams) -> f64 {
    p.a * (x2 - p.b * x1 * x1 + p.c * x1 - p.r).powi(2) + p.s * (1.0 - p.t) * x1.cos() + p.s
}

pub fn xsinx(x: f64) -> f64 {
    x * x.sin()
}

#[derive(Clone, Debug, Default)]
pub struct Branin {
    pub params: BraninParams,
}

impl Objective for Branin {
    fn name(&self) -> String {
        "branin".into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn default_bounds(&self) -> Option<Bounds> {
        Some(Bounds::new(vec![(-5.0, 10.0), (0.0, 15.0)]).expect("valid"))
    }

    fn known_minimum(&self) -> Option<f64> {
        (self.params == BraninParams::default()).then_some(BRANIN_MINIMUM)
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        check_dim(x, 2)?;
        Ok(branin(x[0], x[1], &self.params))
    }
}

#[derive(Clone, Debug, Default)]
pub struct XSinX;

impl Objective for XSinX {
    fn name(&self) -> String {
        "xsinx".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn default_bounds(&self) -> Option<Bounds> {
        Some(Bounds::new(vec![(0.0, 2.0 * PI)]).expect("valid"))
    }

    fn known_minimum(&self) -> Option<f64> {
        // x sin x on [0, 2pi] bottoms out near x = 4.9132
        Some(-4.814_469_889_712_267)
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        check_dim(x, 1)?;
        Ok(xsinx(x[0]))
    }
}

/// `sum x_i^2` on `[-1, 1]^d`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub dim: usize,
}

impl Objective for Quadratic {
    fn name(&self) -> String {
        "quadratic".into()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn default_bounds(&self) -> Option<Bounds> {
        Some(Bounds::new(vec![(-1.0, 1.0); self.dim]).expect("valid"))
    }

    fn known_minimum(&self) -> Option<f64> {
        Some(0.0)
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.dim)?;
        Ok(x.iter().map(|v| v * v).sum())
    }
}

fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::invalid(format!(
            "objective expects {d} coordinates, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Objective evaluated by an external process.
///
/// The command runs under `sh -c` and stays alive for the whole run. Each
/// evaluation writes one whitespace-separated point per line to its stdin and
/// reads one decimal scalar per line from its stdout. Coordinates listed in
/// `integer_dims` are rounded before they are sent.
pub struct ExternalCommand {
    command: String,
    dim: usize,
    integer_dims: Vec<usize>,
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl ExternalCommand {
    pub fn spawn(command: &str, dim: usize, integer_dims: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("external objective needs a dimension >= 1"));
        }
        if let Some(d) = integer_dims.iter().find(|&&d| d >= dim) {
            return Err(Error::invalid(format!(
                "integer dimension {d} out of range for dimension {dim}"
            )));
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Objective(format!("failed to start '{command}': {e}")))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            command: command.to_string(),
            dim,
            integer_dims,
            child,
            stdin,
            stdout,
        })
    }

    /// The point actually sent to the command.
    pub fn transmitted(&self, x: &[f64]) -> Vec<f64> {
        let mut p = x.to_vec();
        for &d in &self.integer_dims {
            p[d] = p[d].round();
        }
        p
    }
}

impl Objective for ExternalCommand {
    fn name(&self) -> String {
        format!("cmd:{}", self.command)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.dim)?;
        let line: Vec<String> = self.transmitted(x).iter().map(|v| format!("{v}")).collect();
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Objective("command input already closed".into()))?;
        writeln!(stdin, "{}", line.join(" "))
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Objective(format!("writing to '{}': {e}", self.command)))?;
        let mut reply = String::new();
        let read = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| Error::Objective(format!("reading from '{}': {e}", self.command)))?;
        if read == 0 {
            return Err(Error::Objective(format!("'{}' closed its output", self.command)));
        }
        reply
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Objective(format!("'{}' replied '{}', not a number", self.command, reply.trim())))
    }
}

impl Drop for ExternalCommand {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved command exit on its own
        drop(self.stdin.take());
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            let _ = self.child.wait();
        }
    }
}

type ObjectiveFactory = fn(usize) -> Box<dyn Objective>;

/// Built-in objectives by name. The factory argument is the dimension, used
/// only by dimension-generic objectives.
pub fn registry() -> BTreeMap<&'static str, ObjectiveFactory> {
    let mut r: BTreeMap<&'static str, ObjectiveFactory> = BTreeMap::new();
    r.insert("branin", |_| Box::new(Branin::default()));
    r.insert("xsinx", |_| Box::new(XSinX));
    r.insert("quadratic", |d| Box::new(Quadratic { dim: d.max(1) }));
    r
}

pub fn lookup(name: &str, dim: usize) -> Result<Box<dyn Objective>> {
    let r = registry();
    r.get(name).map(|f| f(dim)).ok_or_else(|| Error::UnknownComponent {
        kind: "objective",
        name: name.to_string(),
        available: r.keys().copied().collect::<Vec<_>>().join(", "),
    })
}
