//! Speed, Einstein relation, diffusivity, concentration of the position and
//! a transience/recurrence diagnostic.

mod clt;
mod concentration;
mod constants;
mod einstein;
mod speed;
mod transience;

pub use clt::{clt_report, CltOptions, CltReport, DyadicRow};
pub use concentration::{concentration_tail_check, ConcentrationReport, MomentRecord, OneSided, TailRecord};
pub use constants::{environment_r, process_constants, ProcessConstants};
pub use einstein::{einstein_relation_check, EinsteinRecord, EinsteinRow};
pub use speed::{estimate_speed, SpeedReport};
pub use transience::{transience_recurrence_diagnostic, HorizonEvidence, TransienceReport};
