use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_CONV_LAYERS: usize = 4;
pub const MAX_WIDTH: usize = 64;

/// Stack of 3x3 "same" convolutions, each followed by a ReLU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrunkArch {
    pub in_channels: usize,
    pub widths: Vec<usize>,
}

impl TrunkArch {
    pub fn new(in_channels: usize, widths: impl Into<Vec<usize>>) -> Self {
        Self {
            in_channels,
            widths: widths.into(),
        }
    }

    pub fn out_channels(&self) -> usize {
        *self.widths.last().expect("validated trunk has layers")
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels != 1 && self.in_channels != 3 {
            return Err(Error::Config(format!(
                "input channels must be 1 or 3, got {}",
                self.in_channels
            )));
        }
        if self.widths.is_empty() || self.widths.len() > MAX_CONV_LAYERS {
            return Err(Error::Config(format!(
                "trunk needs 1..={MAX_CONV_LAYERS} conv layers, got {}",
                self.widths.len()
            )));
        }
        if let Some(w) = self.widths.iter().find(|&&w| w == 0 || w > MAX_WIDTH) {
            return Err(Error::Config(format!("conv width {w} outside 1..={MAX_WIDTH}")));
        }
        Ok(())
    }

    /// Input and output channel counts of every conv layer.
    pub(crate) fn layer_channels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        std::iter::once(self.in_channels)
            .chain(self.widths.iter().copied())
            .zip(self.widths.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    /// Trunk, global average pool, affine map to `num_classes` logits.
    Classifier,
    /// Trunk, 1x1 conv to `num_classes + 1` per-pixel logits (last = background).
    Segmenter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArch {
    pub kind: NetKind,
    pub trunk: TrunkArch,
    pub num_classes: usize,
}

impl NetArch {
    pub fn classifier(trunk: TrunkArch, num_classes: usize) -> Self {
        Self {
            kind: NetKind::Classifier,
            trunk,
            num_classes,
        }
    }

    pub fn segmenter(trunk: TrunkArch, num_classes: usize) -> Self {
        Self {
            kind: NetKind::Segmenter,
            trunk,
            num_classes,
        }
    }

    /// Logits per sample (classifier) or per pixel (segmenter).
    pub fn head_outputs(&self) -> usize {
        match self.kind {
            NetKind::Classifier => self.num_classes,
            NetKind::Segmenter => self.num_classes + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trunk.validate()?;
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be at least 1".into()));
        }
        if self.num_classes > 254 {
            return Err(Error::Config(format!(
                "num_classes must be <= 254, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> ParamLayout {
        let mut layout = ParamLayout::default();
        for (i, (cin, cout)) in self.trunk.layer_channels().enumerate() {
            layout.push(format!("conv{i}.weight"), vec![3, 3, cin, cout]);
            layout.push(format!("conv{i}.bias"), vec![cout]);
        }
        layout.trunk_len = layout.total;
        let c = self.trunk.out_channels();
        match self.kind {
            NetKind::Classifier => {
                layout.push("fc.weight".into(), vec![self.num_classes, c]);
                layout.push("fc.bias".into(), vec![self.num_classes]);
            }
            NetKind::Segmenter => {
                layout.push("head.weight".into(), vec![c, self.num_classes + 1]);
                layout.push("head.bias".into(), vec![self.num_classes + 1]);
            }
        }
        layout
    }
}

/// A named, shaped slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    /// Conv weights are `[ky, kx, in, out]`, the classifier matrix is
    /// `[class, channel]`, the segmenter head is `[channel, class]`.
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Layout of the flat parameter vector. Trunk parameters always come first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamLayout {
    pub segments: Vec<Segment>,
    pub trunk_len: usize,
    pub total: usize,
}

impl ParamLayout {
    fn push(&mut self, name: String, shape: Vec<usize>) {
        let segment = Segment {
            name,
            offset: self.total,
            shape,
        };
        self.total += segment.len();
        self.segments.push(segment);
    }

    pub fn get(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_parameters() {
        let arch = NetArch::classifier(TrunkArch::new(3, [8, 8]), 4);
        let layout = arch.layout();
        assert_eq!(layout.trunk_len, (27 * 8 + 8) + (72 * 8 + 8));
        assert_eq!(layout.total, layout.trunk_len + 8 * 4 + 4);
        assert_eq!(layout.segments.iter().map(Segment::len).sum::<usize>(), layout.total);
    }

    #[test]
    fn segmenter_head_has_background_logit() {
        let arch = NetArch::segmenter(TrunkArch::new(1, [4]), 2);
        assert_eq!(arch.head_outputs(), 3);
        assert_eq!(arch.layout().get("head.weight").unwrap().shape, vec![4, 3]);
    }

    #[test]
    fn rejects_bad_descriptors() {
        assert!(NetArch::classifier(TrunkArch::new(3, [8]), 0).validate().is_err());
        assert!(NetArch::classifier(TrunkArch::new(2, [8]), 2).validate().is_err());
        assert!(NetArch::classifier(TrunkArch::new(3, Vec::new()), 2)
            .validate()
            .is_err());
        assert!(NetArch::classifier(TrunkArch::new(3, [8, 0]), 2).validate().is_err());
    }
}
