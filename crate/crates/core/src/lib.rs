//! Subjective causal models of random choice.
//!
//! A decision maker evaluates actions by expected utility under a belief
//! distorted by a subjective causal DAG, and her choices feed back into the
//! data she learns from. This crate computes those beliefs and the resulting
//! Logit personal equilibria, recovers the DAG from choice behavior alone,
//! and checks behavioral axioms.

pub mod axioms;
pub mod dag;
pub mod error;
pub mod fixtures;
pub mod gen;
pub mod probspace;
pub mod reveal;
pub mod scr;
pub mod varset;

pub use axioms::{Axiom, AxiomParams, AxiomReport, AxiomResult, Verdict};
pub use dag::{Dag, DagProperties, JunctionTree, SeparatorOrder};
pub use error::{Error, Result};
pub use probspace::{Action, ChoiceDist, Joint, Menu, VarSpace};
pub use reveal::{ChoiceOracle, Identification, Identifier, RecordedOracle, ScrOracle};
pub use scr::{Equilibrium, EquilibriumSet, ScrModel, SolverParams, Utility};
pub use varset::VarSet;
