//! Comparison registers: Readers-Field, Peterson's construction, and a
//! reader-writer spinlock.

pub mod peterson;
pub mod rf;
pub mod rwlock;

pub use peterson::PetersonRegister;
pub use rf::RfRegister;
pub use rwlock::RwlockRegister;
