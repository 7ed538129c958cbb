//! On-disk formats. Every reader accepts what the matching writer produces,
//! bit for bit; floats are written in shortest round-trip form.

pub mod matches;
pub mod pfm;
pub mod ply;
pub mod png;
pub mod tum;

pub use matches::{read_matches, write_matches};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use ply::{decode_ply, encode_ply, read_ply, write_ply};
pub use png::{read_color_png, read_mask_png, write_color_png, write_mask_png};
pub use tum::{read_tum, write_tum, Trajectory};
