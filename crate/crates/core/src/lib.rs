//! Space-variant variance-reduction filtering.
//!
//! Given a per-pixel variance reduction ratio (VRR) map, the filters in this
//! crate pick, for every pixel, a normalized kernel whose variance reduction
//! power (VRP) matches the requested ratio. Kernels come from precomputed
//! banks of *atomic kernels* `A_L(a) = U_L(a) ⊗ U_L(a)` with generator
//! `U_L(a)[l] = a^(l²)`, which sweep continuously from the delta kernel
//! (`a = 0`) to the box kernel (`a = 1`).
//!
//! Two engines are provided:
//!
//! * [`svfilter::apply_fixed`] runs one pass with a fixed-size bank. Its VRP
//!   saturates at `K²` for `K×K` kernels.
//! * [`svfilter::apply_recursive`] iterates small kernels, using one bank per
//!   iteration stage, and is not limited by the kernel size.
//!
//! The [`harness`] module holds the synthetic noise experiments and table
//! generators; [`rasterio`] reads and writes the FRAW and PGM interchange
//! formats.

pub mod error;
pub mod filterbank;
pub mod harness;
pub mod kernels;
pub mod raster;
pub mod rasterio;
pub mod svfilter;
pub mod vrrmaps;

pub use error::{Error, Result};
pub use filterbank::{FilterBank, RecursiveBankSet, VrpLookupTable};
pub use kernels::{GeneratingKernel1D, Kernel2D, Vrp};
pub use raster::{Raster, VrrMap};
pub use svfilter::{FilterReport, RecursiveOptions};
pub use vrrmaps::{EdgeMode, EdgeVrrConfig};
