use std::collections::HashMap;

/// The 41 target structures in channel order. The final entry of the soft
/// tissue group (`esophagus`) completes the set to 41; everything else keeps
/// the tabulated spelling, including the mixed `vertebrae L5` /
/// `vertebrae_T12` forms.
pub const LABEL_NAMES: [&str; 41] = [
    "spleen",
    "kidney right",
    "kidney left",
    "liver",
    "stomach",
    "pancreas",
    "lung right",
    "lung left",
    "trachea",
    "thyroid gland",
    "duodenum",
    "urinary bladder",
    "aorta",
    "heart",
    "esophagus",
    "scapula left",
    "scapula right",
    "clavicula left",
    "clavicula right",
    "femur left",
    "femur right",
    "hip left",
    "hip right",
    "sacrum",
    "vertebrae L5",
    "vertebrae L4",
    "vertebrae L3",
    "vertebrae L2",
    "vertebrae L1",
    "vertebrae_T12",
    "vertebrae_T11",
    "vertebrae_T10",
    "vertebrae_T9",
    "vertebrae_T8",
    "vertebrae_T7",
    "vertebrae_T6",
    "vertebrae_T5",
    "vertebrae_T4",
    "vertebrae_T3",
    "vertebrae_T2",
    "vertebrae_T1",
];

/// Name to channel-index lookup over [`LABEL_NAMES`].
#[derive(Clone, Debug)]
pub struct LabelRegistry {
    index: HashMap<&'static str, usize>,
}

impl Default for LabelRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelRegistry {
    pub fn new() -> Self {
        Self {
            index: LABEL_NAMES.iter().enumerate().map(|(i, &n)| (n, i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        LABEL_NAMES.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &'static [&'static str] {
        &LABEL_NAMES
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&'static str> {
        LABEL_NAMES.get(index).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}
