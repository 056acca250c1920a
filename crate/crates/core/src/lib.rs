//! Blackboard coordination: tuples, multiset boards, forward and backward
//! rules, and an agent language driving them.

pub mod activation;
pub mod agent;
pub mod bench;
pub mod board;
pub mod cluster;
pub mod difftrace;
pub mod engage;
pub mod kernel;
pub mod oracle;
pub mod rule;
pub mod scenario;
pub mod syntax;
pub mod tuple;
pub mod witness;

pub use activation::ActivationState;
pub use board::{BoardRef, InstanceId};
pub use kernel::{Engine, FiringRecord, Kernel, KernelConfig, KernelError, Op, Reply, Submitted, Ticket};
pub use rule::{Direction, Presence, Rule, RuleId, RulePrimitive, RuleViolation};
pub use tuple::{Binding, Bound, Field, Template, Tuple, Value};
