pub mod adapt_sim;
pub mod glvm_eval;
pub mod glvm_train;
pub mod ib_frontier;
pub mod topo_curve;
