use super::tensor::{log_sum_exp, softmax, Tensor};
use crate::error::{Error, Result};

/// Softmax cross-entropy on plain tensors: `(-log p[gold], p)`.
pub fn softmax_xent(logits: &Tensor, gold_index: usize) -> Result<(f64, Tensor)> {
    if gold_index >= logits.len() {
        return Err(Error::Invalid(format!(
            "gold index {} outside {} logits",
            gold_index,
            logits.len()
        )));
    }
    let loss = log_sum_exp(logits.data()) - logits.data()[gold_index];
    Ok((loss, Tensor::vector(softmax(logits.data()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let (loss, p) = softmax_xent(&Tensor::vector(vec![0.3; 4]), 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
        for v in p.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_logits_do_not_overflow() {
        let (loss, p) = softmax_xent(&Tensor::vector(vec![1000.0, 0.0]), 0).unwrap();
        assert!(loss.abs() < 1e-300 || loss == 0.0);
        assert!(p.is_finite());
        let (loss, _) = softmax_xent(&Tensor::vector(vec![1000.0, 0.0]), 1).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_gold() {
        assert!(softmax_xent(&Tensor::vector(vec![0.0, 1.0]), 2).is_err());
    }
}
