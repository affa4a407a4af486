//! Task plug-ins.

pub mod crf;
pub mod multiclass;
pub mod ranking;
