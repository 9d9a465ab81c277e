use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry config: {0}")]
    ConfigSyntax(String),

    #[error("geometry config: missing key `{0}`")]
    MissingKey(&'static str),

    #[error("geometry config: unparsable number for `{key}`: {value}")]
    BadNumber { key: &'static str, value: String },

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("non-positive edge `{field}` = {value}")]
    NonPositiveEdge { field: &'static str, value: f64 },

    #[error("non-positive base coordinate `a2x` = {0}")]
    NonPositiveBase(f64),

    #[error("triangle inequality violated by platform edges ({d1}, {d2}, {d3})")]
    TriangleInequality { d1: f64, d2: f64, d3: f64 },

    #[error("degenerate platform: arccos argument {0} outside [-1, 1]")]
    DegeneratePlatform(f64),

    #[error("degenerate leg {leg}: length {length:e} at or below {eps:e}")]
    DegenerateLeg { leg: usize, length: f64, eps: f64 },

    #[error("negative joint length rho{leg} = {value}")]
    NegativeJoint { leg: usize, value: f64 },

    #[error("direct kinematics returned {0} solutions, more than the 6 possible")]
    TooManySolutions(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("center {center:?} lies outside the sampled domain")]
    CenterOutsideDomain { center: [f64; 3] },

    #[error(
        "box degenerate: optimized clearance {d_min} does not exceed security margin {security}"
    )]
    BoxDegenerate { d_min: f64, security: f64 },

    #[error("ply export of an empty cloud")]
    EmptyCloud,

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in the filesystem rather than in the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
