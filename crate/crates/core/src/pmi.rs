//! Index sets reported by the UE, one type per codebook family.

use serde::{Deserialize, Serialize};

use crate::etype2::EType2Config;
use crate::fetype2ps::FeConfig;
use crate::type1::{Type1Config, Type1MpConfig};
use crate::type2::Type2Config;

/// The seven NR codebook kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    #[serde(rename = "type1sp")]
    Type1SinglePanel,
    #[serde(rename = "type1mp")]
    Type1MultiPanel,
    Type2,
    #[serde(rename = "type2ps")]
    Type2PortSelection,
    EType2,
    #[serde(rename = "etype2ps")]
    EType2PortSelection,
    #[serde(rename = "fetype2ps")]
    FeType2PortSelection,
}

impl CodebookKind {
    pub const ALL: [CodebookKind; 7] = [
        CodebookKind::Type1SinglePanel,
        CodebookKind::Type1MultiPanel,
        CodebookKind::Type2,
        CodebookKind::Type2PortSelection,
        CodebookKind::EType2,
        CodebookKind::EType2PortSelection,
        CodebookKind::FeType2PortSelection,
    ];

    /// Short name used on the command line and in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            CodebookKind::Type1SinglePanel => "type1sp",
            CodebookKind::Type1MultiPanel => "type1mp",
            CodebookKind::Type2 => "type2",
            CodebookKind::Type2PortSelection => "type2ps",
            CodebookKind::EType2 => "etype2",
            CodebookKind::EType2PortSelection => "etype2ps",
            CodebookKind::FeType2PortSelection => "fetype2ps",
        }
    }

    pub fn from_name(s: &str) -> Option<CodebookKind> {
        CodebookKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_port_selection(self) -> bool {
        matches!(
            self,
            CodebookKind::Type2PortSelection
                | CodebookKind::EType2PortSelection
                | CodebookKind::FeType2PortSelection
        )
    }
}

impl std::fmt::Display for CodebookKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Type I single-panel PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmiType1SP {
    /// Horizontal beam index `m1`.
    pub i11: usize,
    /// Vertical beam index `m2`.
    pub i12: usize,
    /// Neighbor-beam offset, present only for more than 16 ports at rank 3 or 4.
    pub i13: Option<usize>,
    /// Co-phase index `n` per subband.
    pub i2: Vec<usize>,
}

/// Type I multi-panel PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmiType1MP {
    pub i11: usize,
    pub i12: usize,
    pub i13: Option<usize>,
    /// Panel co-phase indices `p`, 1 to 3 entries depending on `(ng, c_m)`.
    pub i14: Vec<usize>,
    /// Per subband: `[n]` in mode 1, `[n0, n1, n2]` in mode 2.
    pub i2: Vec<Vec<usize>>,
}

/// Spatial basis choice of the Type II family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpatialChoice {
    /// Rotation `(q1, q2)` and combinatorial beam code `i12`.
    Beams { q1: usize, q2: usize, i12: u64 },
    /// Port group `i11`; ports `i11 * d + i`.
    Ports { i11: usize },
}

/// One layer of a Type II PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Type2Layer {
    /// Strongest coefficient `i*` in `[0, 2L)`.
    pub i13: usize,
    /// Wideband amplitude indices `k1`, 2L entries; `k1[i*] = 7`.
    pub i14: Vec<usize>,
    /// Phase indices per subband, 2L entries each.
    pub i21: Vec<Vec<usize>>,
    /// Subband amplitude bits per subband, present in subband mode.
    pub i22: Option<Vec<Vec<usize>>>,
}

/// Type II / Type II port-selection PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmiType2 {
    pub spatial: SpatialChoice,
    pub layers: Vec<Type2Layer>,
}

/// One layer of an Enhanced Type II PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EType2Layer {
    /// Frequency-basis delays after remapping: ascending, `n3[0] = 0`.
    pub n3: Vec<usize>,
    /// Bitmap `i17`, index `i * m_v + f`.
    pub bitmap: Vec<bool>,
    /// Strongest beam `i18`; its coefficient sits at `f = 0`.
    pub i18: usize,
    /// Per-polarization reference amplitudes `i23`; the strongest beam's
    /// polarization holds 15.
    pub i23: [usize; 2],
    /// 3-bit amplitudes `i24` of bitmap-set positions other than the strongest.
    pub i24: Vec<usize>,
    /// Phases `i25`, same positions as `i24`.
    pub i25: Vec<usize>,
}

/// Enhanced Type II / Enhanced Type II port-selection PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmiEType2 {
    pub spatial: SpatialChoice,
    /// Window offset, present when `n_3 > 19`.
    pub i15: Option<usize>,
    pub layers: Vec<EType2Layer>,
}

/// One layer of a Further Enhanced Type II port-selection PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeLayer {
    /// Bitmap over `2 L M` coefficients, present above rank 2.
    pub bitmap: Option<Vec<bool>>,
    /// 3-bit amplitudes of reported coefficients.
    pub amps: Vec<usize>,
    /// Phases of reported coefficients.
    pub phases: Vec<usize>,
}

/// Further Enhanced Type II port-selection PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmiFeType2PS {
    /// Combinatorial code of the selected ports.
    pub port_choice: u64,
    /// Layer-common frequency basis, `[0]` or `[0, n]`.
    pub n3: Vec<usize>,
    pub layers: Vec<FeLayer>,
}

/// Any PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Pmi {
    Type1SP(PmiType1SP),
    Type1MP(PmiType1MP),
    Type2(PmiType2),
    EType2(PmiEType2),
    FeType2PS(PmiFeType2PS),
}

/// Full reporting configuration of one codebook, enough to encode, decode
/// and serialize its PMIs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CodebookConfig {
    Type1SP(Type1Config),
    Type1MP(Type1MpConfig),
    Type2(Type2Config),
    EType2(EType2Config),
    FeType2PS(FeConfig),
}

impl CodebookConfig {
    pub fn kind(&self) -> CodebookKind {
        match self {
            CodebookConfig::Type1SP(_) => CodebookKind::Type1SinglePanel,
            CodebookConfig::Type1MP(_) => CodebookKind::Type1MultiPanel,
            CodebookConfig::Type2(c) if c.port_selection.is_some() => {
                CodebookKind::Type2PortSelection
            }
            CodebookConfig::Type2(_) => CodebookKind::Type2,
            CodebookConfig::EType2(c) if c.port_selection.is_some() => {
                CodebookKind::EType2PortSelection
            }
            CodebookConfig::EType2(_) => CodebookKind::EType2,
            CodebookConfig::FeType2PS(_) => CodebookKind::FeType2PortSelection,
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            CodebookConfig::Type1SP(c) => c.rank,
            CodebookConfig::Type1MP(c) => c.rank,
            CodebookConfig::Type2(c) => c.rank,
            CodebookConfig::EType2(c) => c.rank,
            CodebookConfig::FeType2PS(c) => c.rank,
        }
    }

    /// Runs the configuration's own validation.
    pub fn validate(&self) -> crate::Result<()> {
        match self {
            CodebookConfig::Type1SP(c) => c.validate(),
            CodebookConfig::Type1MP(c) => c.validate(),
            CodebookConfig::Type2(c) => c.validate(),
            CodebookConfig::EType2(c) => c.validate(),
            CodebookConfig::FeType2PS(c) => c.validate(),
        }
    }

    /// Same configuration at another rank (not validated).
    pub fn with_rank(mut self, rank: usize) -> Self {
        match &mut self {
            CodebookConfig::Type1SP(c) => c.rank = rank,
            CodebookConfig::Type1MP(c) => c.rank = rank,
            CodebookConfig::Type2(c) => c.rank = rank,
            CodebookConfig::EType2(c) => c.rank = rank,
            CodebookConfig::FeType2PS(c) => c.rank = rank,
        }
        self
    }

    pub fn n_3(&self) -> usize {
        match self {
            CodebookConfig::Type1SP(c) => c.n_3,
            CodebookConfig::Type1MP(c) => c.n_3,
            CodebookConfig::Type2(c) => c.n_3,
            CodebookConfig::EType2(c) => c.params.n_3,
            CodebookConfig::FeType2PS(c) => c.n_3,
        }
    }
}
