pub mod deletion;
pub mod driver;
pub mod error;
pub mod forward;
pub mod instance;
pub mod mis;
pub mod oracles;
pub mod rng;
pub mod snc;
pub mod system;
pub mod trace;

pub use error::{Result, SncError};
pub use system::{ElementSet, SubCollection, WeightedSetSystem};
