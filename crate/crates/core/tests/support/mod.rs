pub mod gen;
pub mod golden;
pub mod oracle;
