//! Phase-mask camera optics: pupil construction and PSF synthesis.

mod camera;
mod mask;
mod psf;
mod zernike;

pub use camera::CameraConfig;
pub use mask::{
    height_from_zernike, phase_from_height, ApertureAmplitude, PhaseMask, RefractiveIndex,
    DEFAULT_GRID, DEFAULT_GRID_PITCH, DEFAULT_ZERNIKE, MAX_HEIGHT,
};
pub use psf::{
    build_psf_bank, defocus_phase, simulate_psf, simulate_psf_unnormalized, Psf, PsfBank,
    PupilGrid,
};
pub use zernike::{noll_to_nm, radial, zernike_eval};
