//! Flat tensor views shared by every trainable model and its gradient record.

/// A model (or gradient record) viewed as an ordered list of flat tensors.
///
/// A model and its gradient record must list tensors in the same order with
/// the same lengths; [`crate::nn::AdamState`] relies on this pairing.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn tensor_lens(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// All parameters concatenated in tensor order.
    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Adds `other` element-wise. Panics if the layouts differ.
    fn add_assign_from<P: Parameters + ?Sized>(&mut self, other: &P) {
        let src = other.tensors();
        let mut dst = self.tensors_mut();
        assert_eq!(src.len(), dst.len(), "tensor count mismatch");
        for (d, s) in dst.iter_mut().zip(src) {
            assert_eq!(d.len(), s.len(), "tensor length mismatch");
            d.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }

    /// Mutable reference to the `index`-th parameter in flattened order.
    fn param_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for t in self.tensors_mut() {
            if index < t.len() {
                return Some(&mut t[index]);
            }
            index -= t.len();
        }
        None
    }
}
