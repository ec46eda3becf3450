//! Large-deviation normal-tail p-values for Pearson's chi-square and the
//! log-likelihood-ratio goodness-of-fit statistics in sparse multinomial
//! regimes — many cells, each individually rare — together with the exact
//! machinery needed to verify the approximation at desk scale:
//!
//! * [`poisson`] — exact central-moment polynomials of the Poisson
//!   distribution and truncated-support expectations;
//! * [`cumulants`] — moment/cumulant transforms and factorial-decay
//!   certificates;
//! * [`statistics`] — the statistics themselves and the Poissonized
//!   mean/variance profiles used for standardization;
//! * [`tail`] — the normal tail, p-value reports and validity-zone
//!   diagnostics;
//! * [`oracle`] — exact small-instance enumeration ground truth;
//! * [`simulate`] — seeded, partitionable Monte Carlo validation;
//! * [`io`] — parsers for the file formats shared with the CLI.

pub mod cumulants;
mod error;
pub mod io;
pub mod oracle;
pub mod poisson;
pub mod simulate;
pub mod statistics;
pub mod tail;
mod util;

pub use error::{Error, Result};
