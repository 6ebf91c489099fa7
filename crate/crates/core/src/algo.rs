//! Name-based dispatch over every solver in the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::error::{Error, Result};
use crate::lp;
use crate::model::Problem;
use crate::solver::{self, IterateView, SolveOutput, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Bpiree,
    BpireeLp,
    Pire,
    PirePs,
    PireAu,
    Irl1,
    Irl1e1,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Bpiree,
        Algorithm::BpireeLp,
        Algorithm::Pire,
        Algorithm::PirePs,
        Algorithm::PireAu,
        Algorithm::Irl1,
        Algorithm::Irl1e1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bpiree => "bpiree",
            Algorithm::BpireeLp => "bpiree-lp",
            Algorithm::Pire => "pire",
            Algorithm::PirePs => "pire-ps",
            Algorithm::PireAu => "pire-au",
            Algorithm::Irl1 => "irl1",
            Algorithm::Irl1e1 => "irl1e1",
        }
    }

    pub fn run(&self, problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
        self.run_observed(problem, config, x0, &mut |_| {})
    }

    pub fn run_observed(
        &self,
        problem: &Problem,
        config: &SolverConfig,
        x0: &[f64],
        observer: &mut dyn FnMut(IterateView<'_>),
    ) -> Result<SolveOutput> {
        match self {
            Algorithm::Bpiree => solver::solve_observed(problem, config, x0, observer),
            Algorithm::BpireeLp => lp::solve_lp_observed(problem, config, x0, observer),
            Algorithm::Pire => baselines::pire_solve_observed(problem, config, x0, observer),
            Algorithm::PirePs => baselines::pire_ps_solve_observed(problem, config, x0, observer),
            Algorithm::PireAu => baselines::pire_au_solve_observed(problem, config, x0, observer),
            Algorithm::Irl1 => baselines::irl1_solve_observed(problem, config, x0, observer),
            Algorithm::Irl1e1 => baselines::irl1e1_solve_observed(problem, config, x0, observer),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.iter().copied().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Algorithm::ALL.iter().map(Algorithm::name).collect();
            Error::invalid(format!("unknown algorithm '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.name().to_owned()
    }
}
