//! Grid syntax and file formats of the `lpcrit` command-line tool.

pub mod format;
pub mod grid;
