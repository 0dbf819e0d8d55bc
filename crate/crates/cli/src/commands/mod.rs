pub mod anonymize;
pub mod corpus;
pub mod eval;
pub mod restore;
