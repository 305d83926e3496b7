//! Deciding separability for fundamental groups of finite graphs of finite
//! p-groups.
//!
//! The crate answers two questions about a finite graph of finite p-groups:
//! whether its chief-series data satisfies the compatibility conditions that
//! make the fundamental group residually (finite p), and — when it does —
//! how to separate a given nontrivial element into a finite p-quotient,
//! producing a certificate that an independent checker can replay.
//!
//! Module map:
//! - [`fp`]: arithmetic in the prime field and prime-power helpers;
//! - [`pgroups`]: multiplication-table groups, subgroups, homomorphisms,
//!   quotients, chief series;
//! - [`gog`]: graphs, graphs of groups, words in the fundamental group, and
//!   the normal-form reduction used to decide the word problem;
//! - [`compat`]: the two compatibility conditions on chief-series data, and
//!   the search for compatible data;
//! - [`cover`]: level homomorphisms to F_p and the index-p kernel cover a
//!   level induces, with the word-rewriting machinery for descending;
//! - [`magnus`]: the free-group base case, decided in a truncated power
//!   series ring over F_p;
//! - [`separate`]: the descent driver, separation certificates, certificate
//!   verification, and explicit finite quotients;
//! - [`io`]: the JSON problem format, reports, and DOT export;
//! - [`fixtures`]: small worked examples used by tests and documentation.

#![forbid(unsafe_code)]

pub mod compat;
pub mod cover;
pub mod fixtures;
pub mod fp;
pub mod gog;
pub mod io;
pub mod magnus;
pub mod pgroups;
pub mod separate;
