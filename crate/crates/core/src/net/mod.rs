//! The four ablation architectures, their parameter accounting, and
//! checkpoint serialization.
//!
//! Every network shares the classic three-layer Atari conv stack
//! (8x8/4, 4x4/2, 3x3/1). Two switches vary:
//!
//! * `width` – channels (32, 64, 64) or halved (16, 32, 32);
//! * `tail` – flatten the last conv maps into the first fully connected layer,
//!   or reduce each map to its global maximum first.

mod checkpoint;
mod network;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ConvSpec;

pub use checkpoint::{Checkpoint, CheckpointMeta, BlobEntry, FORMAT_VERSION, MAGIC};
pub use network::{ActivationRecord, Network, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Width {
    Same,
    Halved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    MaxPool,
    Flatten,
}

impl Width {
    pub fn channels(self) -> [usize; 3] {
        match self {
            Width::Same => [32, 64, 64],
            Width::Halved => [16, 32, 32],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Width::Same => "same",
            Width::Halved => "halved",
        }
    }
}

impl Tail {
    pub fn label(self) -> &'static str {
        match self {
            Tail::MaxPool => "max_pool",
            Tail::Flatten => "flatten",
        }
    }
}

/// Named cells of the architecture grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Flatten tail, full width.
    Expert,
    MaxSame,
    /// Max-pool tail, halved width: the compressed student.
    MaxHalved,
    NoneHalved,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Expert, Arch::MaxSame, Arch::MaxHalved, Arch::NoneHalved];

    pub fn cell(self) -> (Width, Tail) {
        match self {
            Arch::Expert => (Width::Same, Tail::Flatten),
            Arch::MaxSame => (Width::Same, Tail::MaxPool),
            Arch::MaxHalved => (Width::Halved, Tail::MaxPool),
            Arch::NoneHalved => (Width::Halved, Tail::Flatten),
        }
    }

    pub fn from_cell(width: Width, tail: Tail) -> Self {
        match (width, tail) {
            (Width::Same, Tail::Flatten) => Arch::Expert,
            (Width::Same, Tail::MaxPool) => Arch::MaxSame,
            (Width::Halved, Tail::MaxPool) => Arch::MaxHalved,
            (Width::Halved, Tail::Flatten) => Arch::NoneHalved,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Expert => "expert",
            Arch::MaxSame => "max-same",
            Arch::MaxHalved => "max-halved",
            Arch::NoneHalved => "none-halved",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture `{s}` (expert|max-same|max-halved|none-halved)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// `(frame_stack, H, W)`.
    pub input: [usize; 3],
    pub width: Width,
    pub tail: Tail,
    pub hidden: usize,
    pub actions: usize,
}

const KERNELS: [(usize, usize); 3] = [(8, 4), (4, 2), (3, 1)];

impl NetworkSpec {
    pub fn new(arch: Arch, input: [usize; 3], actions: usize) -> Self {
        let (width, tail) = arch.cell();
        Self {
            input,
            width,
            tail,
            hidden: 512,
            actions,
        }
    }

    pub fn arch(&self) -> Arch {
        Arch::from_cell(self.width, self.tail)
    }

    pub fn conv_layers(&self) -> [ConvSpec; 3] {
        let ch = self.width.channels();
        let ins = [self.input[0], ch[0], ch[1]];
        std::array::from_fn(|i| ConvSpec::new(ins[i], ch[i], KERNELS[i].0, KERNELS[i].1))
    }

    /// `(C, H', W')` of the last conv layer.
    pub fn final_maps(&self) -> Result<[usize; 3]> {
        let (mut h, mut w) = (self.input[1], self.input[2]);
        for conv in self.conv_layers() {
            (h, w) = conv
                .output_extent(h, w)
                .map_err(|e| Error::Shape(format!("input {:?} too small for the conv stack: {e}", self.input)))?;
        }
        Ok([self.width.channels()[2], h, w])
    }

    /// Input extent of the first fully connected layer.
    pub fn tail_features(&self) -> Result<usize> {
        let [c, h, w] = self.final_maps()?;
        Ok(match self.tail {
            Tail::MaxPool => c,
            Tail::Flatten => c * h * w,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.iter().any(|&d| d == 0) || self.hidden == 0 || self.actions == 0 {
            return Err(Error::Config(format!("degenerate network spec {self:?}")));
        }
        self.final_maps().map(|_| ())
    }
}

/// Closed-form parameter count: conv `(kh*kw*Cin*Cout + Cout)` terms plus
/// fully connected `(In*Out + Out)` terms.
pub fn count_params(spec: &NetworkSpec) -> Result<usize> {
    spec.validate()?;
    let conv: usize = spec
        .conv_layers()
        .iter()
        .map(|c| c.kernel_h * c.kernel_w * c.in_channels * c.out_channels + c.out_channels)
        .sum();
    let fc_in = spec.tail_features()?;
    let fc1 = fc_in * spec.hidden + spec.hidden;
    let fc2 = spec.hidden * spec.actions + spec.actions;
    Ok(conv + fc1 + fc2)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ATARI: [usize; 3] = [4, 84, 84];

    #[test]
    fn expert_final_maps_are_seven_by_seven() {
        let spec = NetworkSpec::new(Arch::Expert, ATARI, 9);
        assert_eq!(spec.final_maps().unwrap(), [64, 7, 7]);
        assert_eq!(spec.tail_features().unwrap(), 3136);
    }

    #[test]
    fn student_tail_is_thirty_two() {
        let spec = NetworkSpec::new(Arch::MaxHalved, ATARI, 9);
        assert_eq!(spec.tail_features().unwrap(), 32);
    }

    #[test]
    fn parameter_table() {
        let count = |a| count_params(&NetworkSpec::new(a, ATARI, 9)).unwrap();
        assert_eq!(count(Arch::MaxHalved), 43_097);
        assert_eq!(count(Arch::MaxSame), 115_881);
        assert_eq!(count(Arch::Expert), 1_688_745);
        assert_eq!(count(Arch::NoneHalved), 829_529);
    }

    #[test]
    fn desk_geometry() {
        let spec = NetworkSpec::new(Arch::Expert, [4, 40, 40], 3);
        assert_eq!(spec.final_maps().unwrap(), [64, 1, 1]);
        let spec = NetworkSpec::new(Arch::Expert, [4, 44, 44], 3);
        assert_eq!(spec.final_maps().unwrap(), [64, 2, 2]);
    }

    #[test]
    fn too_small_input_rejected() {
        let spec = NetworkSpec::new(Arch::Expert, [4, 20, 20], 3);
        assert!(spec.validate().is_err());
        assert!(count_params(&spec).is_err());
    }

    #[test]
    fn arch_names_round_trip() {
        for a in Arch::ALL {
            assert_eq!(a.name().parse::<Arch>().unwrap(), a);
            let (w, t) = a.cell();
            assert_eq!(Arch::from_cell(w, t), a);
        }
        assert!("huge".parse::<Arch>().is_err());
    }
}
