// SPDX-License-Identifier: Apache-2.0

//! Cycle-accurate model of an AXI4 transaction monitoring unit.
//!
//! The unit sits in front of a subordinate, tracks every outstanding
//! transaction in a linked table, times each transaction (or each of its
//! phases) against a budget, checks response ordering and IDs, and isolates
//! and resets the subordinate on a fault. A manager/subordinate harness, a
//! fault injector and campaign statistics drive it.

pub mod axi;
pub mod config;
pub mod fault;
pub mod guard;
pub mod harness;
pub mod injector;
pub mod ott;
pub mod remap;
pub mod stats;
pub mod tmu;
pub mod trace;
