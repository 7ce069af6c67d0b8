use super::features::FeatureTensor;
use super::targets::{DoaFormat, TargetTensor};
use crate::error::{invalid, Result, SeldError};

/// One fixed-length training example. Padding frames have `mask = false`
/// and zero features and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub features: FeatureTensor,
    pub targets: TargetTensor,
    pub mask: Vec<bool>,
}

impl Sequence {
    pub fn valid_frames(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Cuts aligned features and targets into non-overlapping `len`-frame chunks.
pub fn segment_sequences(x: &FeatureTensor, y: &TargetTensor, len: usize) -> Result<Vec<Sequence>> {
    if len == 0 {
        return Err(invalid("sequence length must be at least 1"));
    }
    if x.frames != y.frames {
        return Err(SeldError::ShapeMismatch(format!(
            "{} feature frames but {} target frames",
            x.frames, y.frames
        )));
    }
    let fw = x.bins * x.planes;
    let sw = y.classes;
    let dw = y.dims() * y.classes;
    let mut out = Vec::new();
    let mut start = 0;
    while start < x.frames {
        let valid = len.min(x.frames - start);
        let mut features = vec![0.0; len * fw];
        features[..valid * fw].copy_from_slice(&x.data[start * fw..(start + valid) * fw]);
        let mut sed = vec![0.0; len * sw];
        sed[..valid * sw].copy_from_slice(&y.sed[start * sw..(start + valid) * sw]);
        let mut doa = vec![0.0; len * dw];
        doa[..valid * dw].copy_from_slice(&y.doa[start * dw..(start + valid) * dw]);
        if y.format == DoaFormat::AzEl {
            for t in valid..len {
                for (a, v) in y.format.inactive().iter().enumerate() {
                    doa[t * dw + a * sw..t * dw + (a + 1) * sw].fill(*v);
                }
            }
        }
        out.push(Sequence {
            features: FeatureTensor {
                frames: len,
                bins: x.bins,
                planes: x.planes,
                data: features,
            },
            targets: TargetTensor {
                frames: len,
                classes: y.classes,
                format: y.format,
                sed,
                doa,
            },
            mask: (0..len).map(|t| t < valid).collect(),
        });
        start += len;
    }
    Ok(out)
}

/// Concatenates the valid frames of consecutive chunks.
pub fn join_targets(chunks: &[Sequence]) -> Option<TargetTensor> {
    let first = chunks.first()?;
    let (classes, format) = (first.targets.classes, first.targets.format);
    let dw = format.dims() * classes;
    let mut sed = Vec::new();
    let mut doa = Vec::new();
    let mut frames = 0;
    for c in chunks {
        let v = c.valid_frames();
        sed.extend_from_slice(&c.targets.sed[..v * classes]);
        doa.extend_from_slice(&c.targets.doa[..v * dw]);
        frames += v;
    }
    Some(TargetTensor {
        frames,
        classes,
        format,
        sed,
        doa,
    })
}
