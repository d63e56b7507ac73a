//! Resonances of periodic metallic gratings with dispersive permittivity.

pub mod geometry;
pub mod materials;
pub mod dtn;
pub mod mesh;
pub mod nep;
pub mod assembly;
pub mod pec_oracle;
pub mod analysis;
