//! Probabilistic amplitude shaping over IR-HARQ with symbol-wise puncturing.
//!
//! The crate is organized along the transmit chain:
//!
//! * [`shaping`]: Maxwell-Boltzmann distributions, the constant composition
//!   distribution matcher and the shaped codeword layout.
//! * [`fec`]: quasi-cyclic LDPC codes (n = 1296) and belief propagation.
//! * [`modem`]: Gray-labelled QAM, exact AWGN and 2×2 ML demappers.
//! * [`puncture`]: label assembly, puncturing schedules, inverse puncturing.
//! * [`channel`]: AWGN and Rayleigh fading with seeded streams.
//! * [`harq`]: the per-block HARQ loop and throughput accounting.
//! * [`sim`]: configuration, Monte Carlo sweeps and CSV output.

pub mod channel;
pub mod fec;
pub mod harq;
pub mod modem;
pub mod puncture;
pub mod shaping;
pub mod sim;

pub use fec::{CodeRate, LdpcCode, SoftCodeword};
pub use harq::{ChannelKind, HarqConfig, HarqLink};
pub use modem::{Constellation, LabelMap, SymbolPrior};
pub use puncture::{PunctureSchedule, Scheme};
pub use shaping::{AmplitudeDistribution, Composition, PsCodeParams};
pub use sim::{SimConfig, SweepRecord};
