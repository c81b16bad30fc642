pub mod fields;
pub mod graph;
pub mod grid;
pub mod mrf;
pub mod par;
pub mod paths;
pub mod report;
pub mod rhp;
pub mod scenario;
pub mod trajopt;
