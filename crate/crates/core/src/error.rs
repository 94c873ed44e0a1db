use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("grid undersamples the resolution: voxel edge {voxel_edge:e} m > sigma/2 = {half_sigma:e} m")]
    ResolutionUndersampled { voxel_edge: f64, half_sigma: f64 },

    #[error("rasterization box too small: captured mass fraction {captured_fraction:.6}")]
    BoxTooSmall { captured_fraction: f64 },

    #[error("overlapping nuclei: lattice constant {lattice_constant:e} m <= 2 x nucleus size {nucleus_size:e} m")]
    OverlappingNuclei {
        lattice_constant: f64,
        nucleus_size: f64,
    },

    #[error("grids are not compatible, regrid required: {0}")]
    RegridRequired(String),

    #[error("grid dims {dims:?} are not powers of two")]
    NonPowerOfTwo { dims: [usize; 3] },

    #[error("memory bound exceeded: need {required_bytes} bytes, limit {limit_bytes} bytes")]
    MemoryBound {
        required_bytes: usize,
        limit_bytes: usize,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("mismatched configurations: {0}")]
    Mismatch(String),

    #[error("{overlapping} of {samples} samples contain overlapping nuclei (> 1%)")]
    OverlapAbort { overlapping: usize, samples: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unit error: {0}")]
    Unit(String),

    #[error("grid file format: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures map to a distinct exit code in the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::OverlapAbort { .. }
                | Error::MemoryBound { .. }
                | Error::ResolutionUndersampled { .. }
                | Error::BoxTooSmall { .. }
                | Error::RegridRequired(_)
                | Error::NonPowerOfTwo { .. }
        )
    }
}
