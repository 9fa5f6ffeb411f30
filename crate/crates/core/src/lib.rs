//! Compiler and design-space exploration for transformer inference on a
//! multi-kernel, multi-bank matrix accelerator.
//!
//! The pipeline lowers a model description to an operation DAG ([`model`]),
//! prices tile/parallelism configurations with an analytical latency model
//! ([`hw`]), searches the configuration space ([`dse`]), plans bank-aware
//! layouts and static schedules ([`layout`]), and checks hardware-friendly
//! non-linear approximations against exact references ([`approx`]). The
//! [`driver`] ties these into compile/search/report commands.

pub mod approx;
pub mod driver;
pub mod dse;
pub mod hw;
pub mod layout;
pub mod model;
