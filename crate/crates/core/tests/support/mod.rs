pub mod configs;
pub mod fixtures;
pub mod fuzz;
pub mod oracles;
pub mod xor;
