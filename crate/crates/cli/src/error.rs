use serde::Serialize;

use wavefield::field::FieldError;
use wavefield::geometry::GeometryError;
use wavefield::kinematics::KinematicsError;
use wavefield::occlusion::OcclusionError;
use wavefield::potential::PotentialError;
use wavefield::spectra::SpectraError;
use wavefield::synth::SynthError;
use wavefield::whvs::WhvsError;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Failure reported on stderr as `{code, message, key}`.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub key: Option<String>,
    #[serde(skip)]
    pub exit: u8,
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code: "config", message: message.into(), key: Some(key.into()), exit: EXIT_VALIDATION }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: "usage", message: message.into(), key: None, exit: EXIT_VALIDATION }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { code: "input", message: message.into(), key: None, exit: EXIT_VALIDATION }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: "numerical", message: message.into(), key: None, exit: EXIT_NUMERICAL }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: "io", message: message.into(), key: None, exit: EXIT_NUMERICAL }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Io(io) => io.into(),
            FieldError::Format { .. } => Self::input(e.to_string()),
            FieldError::InvalidParameter(_) | FieldError::InvalidTimeStep(_) => Self::input(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Field(f) => f.into(),
            SynthError::NegativeDisparity { .. } => Self::numerical(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<KinematicsError> for CliError {
    fn from(e: KinematicsError) -> Self {
        match e {
            KinematicsError::Field(f) => f.into(),
            KinematicsError::InvalidConfig(_) => Self::input(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        match e {
            PotentialError::Field(f) => f.into(),
            PotentialError::InvalidBasis(_) | PotentialError::InvalidParameter(_) => Self::input(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::Field(f) => f.into(),
            SpectraError::InvalidParameter(_) | SpectraError::TooShort { .. } => Self::input(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Field(f) => f.into(),
            GeometryError::InvalidRig(_) | GeometryError::InvalidParameter(_) => Self::input(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<WhvsError> for CliError {
    fn from(e: WhvsError) -> Self {
        match e {
            WhvsError::Field(f) => f.into(),
            WhvsError::InvalidParameter(_) | WhvsError::DimMismatch(_) => Self::input(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<OcclusionError> for CliError {
    fn from(e: OcclusionError) -> Self {
        match e {
            OcclusionError::Whvs(x) => x.into(),
            OcclusionError::Geometry(x) => x.into(),
            OcclusionError::Synth(x) => x.into(),
            OcclusionError::Field(x) => x.into(),
            OcclusionError::InvalidSpec(_) => Self::input(e.to_string()),
            OcclusionError::EmptyReference => Self::numerical(e.to_string()),
        }
    }
}
