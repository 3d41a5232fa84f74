//! Small dense linear programs in inequality form.
//!
//! Every formulation in this crate has at most a few dozen variables, so the
//! solver is a textbook two-phase tableau simplex with Bland's rule.

mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::{solve, solve_with_limit};

/// Pivot threshold and primal feasibility tolerance.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Clone)]
pub enum LpError {
    #[error("{what} has length {got}, expected {expected}")]
    DimensionMismatch { what: String, got: usize, expected: usize },
    #[error("variable {0} has a non-finite lower bound")]
    UnsupportedBound(usize),
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { lower: 0.0, upper: f64::INFINITY }
    }
}

/// `maximize objective · x` subject to the constraints and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bounds>,
    pub var_names: Vec<String>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            bounds: vec![Bounds::default(); num_vars],
            var_names: (0..num_vars).map(|i| format!("x[{i}]")).collect(),
        }
    }

    pub fn set_name(&mut self, var: usize, name: impl Into<String>) {
        self.var_names[var] = name.into();
    }

    pub fn set_objective_coeff(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = Bounds { lower, upper };
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        let name = format!("c{}", self.constraints.len());
        self.constraints.push(Constraint { name, coeffs, relation, rhs });
    }

    /// Adds a constraint given as `(variable, coefficient)` terms; repeated
    /// variables accumulate.
    pub fn add_terms(&mut self, name: impl Into<String>, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars];
        for &(var, c) in terms {
            coeffs[var] += c;
        }
        self.constraints.push(Constraint { name: name.into(), coeffs, relation, rhs });
    }

    pub fn check_dimensions(&self) -> Result<(), LpError> {
        let expect = |what: &str, got: usize| {
            if got == self.num_vars {
                Ok(())
            } else {
                Err(LpError::DimensionMismatch { what: what.to_string(), got, expected: self.num_vars })
            }
        };
        expect("objective", self.objective.len())?;
        expect("bounds", self.bounds.len())?;
        for c in &self.constraints {
            expect(&format!("constraint {}", c.name), c.coeffs.len())?;
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest absolute violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs = dot(&c.coeffs, x);
            match c.relation {
                Relation::Le => (lhs - c.rhs).max(0.0),
                Relation::Ge => (c.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = self.bounds.iter().zip(x).map(|(b, &v)| (b.lower - v).max(v - b.upper).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Plain-text dump in an LP-file-like layout, for debugging.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::from("maximize\n  obj:");
        write_terms(&mut out, &self.objective, &self.var_names);
        out.push_str("\nsubject to\n");
        for c in &self.constraints {
            let _ = write!(out, "  {}:", c.name);
            write_terms(&mut out, &c.coeffs, &self.var_names);
            let _ = writeln!(out, " {} {}", c.relation.symbol(), c.rhs);
        }
        out.push_str("bounds\n");
        for (b, name) in self.bounds.iter().zip(&self.var_names) {
            if b.upper.is_finite() {
                let _ = writeln!(out, "  {} <= {} <= {}", b.lower, name, b.upper);
            } else {
                let _ = writeln!(out, "  {} >= {}", name, b.lower);
            }
        }
        out.push_str("end\n");
        out
    }
}

fn write_terms(out: &mut String, coeffs: &[f64], names: &[String]) {
    let mut any = false;
    for (c, name) in coeffs.iter().zip(names) {
        if *c != 0.0 {
            let sign = if *c < 0.0 { '-' } else { '+' };
            let _ = write!(out, " {sign} {} {name}", c.abs());
            any = true;
        }
    }
    if !any {
        out.push_str(" 0");
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective at `assignment`; meaningful only when optimal.
    pub objective_value: f64,
    pub assignment: Vec<f64>,
    /// Pivots performed across both phases.
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
