//! Model builder: variables with finite bounds, linear constraints and a
//! linear objective.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid bounds [{lower}, {upper}] for variable `{name}`")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("variable `{name}` is unbounded; all bounds must be finite")]
    Unbounded { name: String },
    #[error("binary variable `{name}` must have bounds [0, 1], got [{lower}, {upper}]")]
    BinaryBounds { name: String, lower: f64, upper: f64 },
    #[error("{context} references undeclared variable id {id}")]
    UnknownVariable { context: String, id: usize },
    #[error("{context} has a non-finite coefficient or right-hand side")]
    NonFinite { context: String },
}

/// Index of a variable inside a [`ModelSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrality {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Le,
    Eq,
    Ge,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Le => "<=",
            Comparison::Eq => "=",
            Comparison::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Comparison,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates this constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.cmp {
            Comparison::Le => (act - self.rhs).max(0.0),
            Comparison::Ge => (self.rhs - act).max(0.0),
            Comparison::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A mixed-integer linear model. Once built it is treated as an immutable
/// value by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    sense: Sense,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::new(Sense::Minimize)
    }
}

impl ModelSpec {
    pub fn new(sense: Sense) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    /// Declares a variable with finite bounds. Binary variables must be
    /// declared with bounds `[0, 1]`.
    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integrality: Integrality,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvalidBounds { name, lower, upper });
        }
        if !lower.is_finite() || !upper.is_finite() {
            return Err(ModelError::Unbounded { name });
        }
        if integrality == Integrality::Binary && (lower != 0.0 || upper != 1.0) {
            return Err(ModelError::BinaryBounds { name, lower, upper });
        }
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name,
            lower,
            upper,
            integrality,
        });
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        cmp: Comparison,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        self.check_terms(&terms, &format!("constraint `{name}`"))?;
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite {
                context: format!("constraint `{name}`"),
            });
        }
        self.constraints.push(Constraint {
            name,
            terms,
            cmp,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, sense: Sense, terms: Vec<(VarId, f64)>) -> Result<(), ModelError> {
        self.check_terms(&terms, "objective")?;
        self.sense = sense;
        self.objective = terms;
        Ok(())
    }

    fn check_terms(&self, terms: &[(VarId, f64)], context: &str) -> Result<(), ModelError> {
        for &(v, a) in terms {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable {
                    context: context.to_string(),
                    id: v.0,
                });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite {
                    context: context.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.integrality == Integrality::Binary)
            .count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest bound, integrality or constraint violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (var, &x) in self.variables.iter().zip(values) {
            worst = worst.max(var.lower - x).max(x - var.upper);
            if var.integrality == Integrality::Binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(values));
        }
        worst
    }
}
