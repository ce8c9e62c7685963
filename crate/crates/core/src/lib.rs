//! Wait-free single-writer/multi-reader atomic registers.
//!
//! [`ArcRegister`] is a (1,N) multi-word register that reads in constant
//! time with zero read-modify-write instructions when the value has not
//! changed, and writes with one copy and one atomic exchange. The
//! [`baselines`] module holds the registers it is measured against,
//! [`verify`] checks recorded histories for regularity and atomicity, and
//! [`bench`] drives throughput experiments.
//!
//! ```
//! use std::sync::Arc;
//! use arcreg::ArcRegister;
//!
//! let reg = Arc::new(ArcRegister::new(&[0u8; 64], 2, 64)?);
//! let mut w = reg.new_writer()?;
//! let mut r = reg.new_reader()?;
//! w.write(&[7u8; 64])?;
//! assert_eq!(r.read()[0], 7);
//! # Ok::<(), arcreg::RegisterError>(())
//! ```

pub mod arc;
pub mod baselines;
pub mod bench;
mod error;
#[doc(hidden)]
pub mod mutant;
pub mod payload;
pub mod register;
pub mod verify;
mod words;

pub use arc::{ArcReader, ArcRegister, ArcStats, ArcWriter, PackedCurrent};
pub use baselines::{PetersonRegister, RfRegister, RwlockRegister};
pub use error::{RegisterError, Result};
pub use payload::{decode_versioned, encode_versioned, Decoded, VersionedPayload};
pub use register::{ReadHandle, Register, RegisterKind, RmwCounters, WriteHandle};
