//! Explicit maps with negative Calabi invariant and only non-negative fixed
//! point actions: a cut-off global rotation composed with many small rotors.

pub mod construction;
pub mod cutoff;
pub mod packing;
pub mod verify;

pub use cutoff::{make_cutoff, CutoffProfile};
pub use packing::{pack_sector, pack_sector_with, Disk, DiskPacking, PackingOptions, SectorIndex};
pub use construction::{
    build_counterexample, build_phi_minus, build_phi_plus, build_with_packing, MaximizerConstruction, MaximizerParams, PhiIsotopy,
    PhiMinus, Variant,
};
pub use verify::{area_defect, verify_construction, verify_construction_with, Check, CheckStatus, VerificationReport, VerifyOptions};
