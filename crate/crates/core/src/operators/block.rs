use super::{LinearOp, SharedOp};
use crate::error::{Error, Result};

/// Block operator over an augmented `(image, data)` vector:
///
/// ```text
/// [ A_obs    0 ] [ image ]   [ A_obs·image          ]
/// [ A_unobs −I ] [ data  ] = [ A_unobs·image − data ]
/// ```
///
/// The data slice has length `a_unobs.output_len()`.
pub struct BlockIncompleteOp {
    a_obs: SharedOp,
    a_unobs: SharedOp,
    label: String,
}

pub fn make_incomplete_op(a_obs: SharedOp, a_unobs: SharedOp) -> Result<BlockIncompleteOp> {
    if a_obs.input_len() != a_unobs.input_len() {
        return Err(Error::shape(format!(
            "observed operator {} takes {} values but unobserved operator {} takes {}",
            a_obs.label(),
            a_obs.input_len(),
            a_unobs.label(),
            a_unobs.input_len()
        )));
    }
    let label = format!("block[{}; {}, -I]", a_obs.label(), a_unobs.label());
    Ok(BlockIncompleteOp {
        a_obs,
        a_unobs,
        label,
    })
}

impl BlockIncompleteOp {
    pub fn image_len(&self) -> usize {
        self.a_obs.input_len()
    }
    pub fn data_len(&self) -> usize {
        self.a_unobs.output_len()
    }
    pub fn observed_len(&self) -> usize {
        self.a_obs.output_len()
    }
    pub fn a_obs(&self) -> &SharedOp {
        &self.a_obs
    }
    pub fn a_unobs(&self) -> &SharedOp {
        &self.a_unobs
    }
}

impl LinearOp for BlockIncompleteOp {
    fn input_len(&self) -> usize {
        self.image_len() + self.data_len()
    }
    fn output_len(&self) -> usize {
        self.observed_len() + self.data_len()
    }
    fn label(&self) -> &str {
        &self.label
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (image, data) = x.split_at(self.image_len());
        let (top, bottom) = out.split_at_mut(self.observed_len());
        self.a_obs.apply_into(image, top);
        self.a_unobs.apply_into(image, bottom);
        for (b, d) in bottom.iter_mut().zip(data) {
            *b -= d;
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (top, bottom) = y.split_at(self.observed_len());
        let (image, data) = out.split_at_mut(self.image_len());
        self.a_obs.adjoint_into(top, image);
        let mut tmp = vec![0.0; image.len()];
        self.a_unobs.adjoint_into(bottom, &mut tmp);
        for (i, t) in image.iter_mut().zip(&tmp) {
            *i += t;
        }
        for (d, b) in data.iter_mut().zip(bottom) {
            *d = -b;
        }
    }
}
