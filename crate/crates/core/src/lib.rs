//! Simulation and evaluation of two-zone personal sound zone (PSZ) systems.
//!
//! The crate covers the whole chain from geometry to isolation figures:
//!
//! * [`scene`]: loudspeaker array, listener ear positions, zone and program
//!   partitions.
//! * [`acoustics`]: free-field baffled-piston transfer matrices `H`.
//! * [`perturbation`]: reproducible amplitude/phase uncertainty on `H`.
//! * [`filter_design`]: rendering-mode target matrices and regularized
//!   pressure-matching filters `C`, plus the system matrix `M = HC`.
//! * [`metrics`]: inter-zone isolation (IZI), inter-program isolation (IPI),
//!   acoustic contrast and fractional-octave smoothing.
//! * [`spatial`]: single-point IPI maps, iso-level contours and enclosed area.
//!
//! Everything is generic over the real scalar type ([`Real`], implemented for
//! `f32` and `f64`). The `*64` / `*32` aliases below name the concrete types.

// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod error;
pub mod filter_design;
pub mod linalg;
pub mod metrics;
pub mod perturbation;
pub mod scalar;
pub mod scene;
pub mod spatial;

pub use acoustics::{
    bessel_j1, piston_directivity, piston_response, scene_transfer_matrix, transfer_matrix, TransferMatrix,
};
pub use error::{PszError, Result};
pub use filter_design::{
    build_target_matrix, cost, default_beta, pressure_matching, system_matrix, FilterMatrix, RenderingMode,
    SystemMatrix, TargetMatrix,
};
pub use linalg::{CMatrix, Cholesky};
pub use metrics::{
    acoustic_contrast, fractional_octave_smooth, ipi, izi, single_point_ipi, third_octave_smooth, MetricSpectrum,
    MetricValue,
};
pub use perturbation::{averaged_perturbed, perturb, UncertaintyModel, DESIGN_STREAM, EVALUATION_STREAM};
pub use scalar::{Cx, Real};
pub use scene::{ListenerDisplacement, Scene, Vec3, Violation, Zone};
pub use spatial::{enclosed_area, extract_contours, ipi_map, ContourSet, IpiMap, Polyline, Region};

pub type Complex64 = Cx<f64>;
pub type Complex32 = Cx<f32>;

pub type Scene64 = Scene<f64>;
pub type Scene32 = Scene<f32>;
pub type Vec3d = Vec3<f64>;
pub type CMatrix64 = CMatrix<f64>;
pub type CMatrix32 = CMatrix<f32>;
pub type TransferMatrix64 = TransferMatrix<f64>;
pub type TransferMatrix32 = TransferMatrix<f32>;
pub type TargetMatrix64 = TargetMatrix<f64>;
pub type FilterMatrix64 = FilterMatrix<f64>;
pub type FilterMatrix32 = FilterMatrix<f32>;
pub type SystemMatrix64 = SystemMatrix<f64>;
pub type SystemMatrix32 = SystemMatrix<f32>;
pub type MetricValue64 = MetricValue<f64>;
pub type MetricSpectrum64 = MetricSpectrum<f64>;
pub type UncertaintyModel64 = UncertaintyModel<f64>;
pub type IpiMap64 = IpiMap<f64>;
pub type ContourSet64 = ContourSet<f64>;
pub type Region64 = Region<f64>;
