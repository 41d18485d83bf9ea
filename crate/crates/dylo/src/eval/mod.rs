//! Detection evaluation: suppression, matching, average precision, and
//! report rendering.

pub mod ap;
pub mod matching;
pub mod nms;
pub mod report;

pub use ap::{average_precision, mean_average_precision, PrSample};
pub use matching::{match_detections, MATCH_IOU};
pub use nms::{nms, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD};
pub use report::{evaluate, ClassRow, EvalReport, MicroMetrics};
