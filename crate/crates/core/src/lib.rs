//! Worst-case linear discriminant analysis through a sequence of semidefinite
//! feasibility problems, each solved via the Lagrangian dual of a
//! Frobenius-regularized formulation.

pub mod boxqn;
pub mod evalkit;
pub mod oracle;
pub mod scatter;
pub mod sdpfeas;
pub mod symmat;
pub mod wlda;
