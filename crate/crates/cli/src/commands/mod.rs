pub mod circuit;
pub mod compile;
pub mod run;
pub mod transient;
pub mod validate;
