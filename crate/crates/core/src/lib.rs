//! Gate-level simulation of masked circuits over concrete, symbolic,
//! leakage-set and stability domains, with probing-model verification.

pub mod bitvec;
pub mod expr;
pub mod gadgets;
pub mod netlist;
pub mod sim;
pub mod verify;
pub mod manager;
