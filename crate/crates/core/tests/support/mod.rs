pub mod kats;
pub mod reference;
