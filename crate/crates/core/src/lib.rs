pub mod cli;
pub mod fock;
pub mod genfun;
pub mod lattice;
pub mod oracle;
pub mod wick;
