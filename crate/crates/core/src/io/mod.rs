// SPDX-License-Identifier: Apache-2.0

//! Dataset ingestion and generation.

pub mod fico;
pub mod synth;
pub mod table;

pub use fico::{fico_expand, FicoExpansion};
pub use synth::{synthetic_blobs, synthetic_curve, BlobParams, CurveDraw, CurveParams};
pub use table::{load_csv, read_raw, save_csv, CsvSchema, LabelMapping, RawTable};
