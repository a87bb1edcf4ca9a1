//! Conversions between workload state and the closed value model.

use aos_core::{FloatArray, MethodError, Value};

use crate::tensor::Matrix;

pub fn matrix_to_value(m: &Matrix) -> Value {
    Value::float_array(vec![m.rows(), m.cols()], m.data().to_vec()).expect("consistent shape")
}

pub fn value_to_matrix(v: &Value, what: &str) -> Result<Matrix, MethodError> {
    let fa = v
        .as_float_array()
        .ok_or_else(|| MethodError::BadArgument(format!("{what}: expected FloatArray")))?;
    match *fa.shape() {
        [rows, cols] => Ok(Matrix::from_flat(rows, cols, fa.data().to_vec())),
        // An empty rank-1 array is accepted as "no rows".
        [0] => Ok(Matrix::zeros(0, 0)),
        ref other => Err(MethodError::BadArgument(format!(
            "{what}: expected a rank-2 FloatArray, got shape {other:?}"
        ))),
    }
}

pub fn vec_to_value(v: &[f64]) -> Value {
    Value::FloatArray(FloatArray::vector(v.to_vec()))
}

pub fn value_to_vec(v: &Value, what: &str) -> Result<Vec<f64>, MethodError> {
    let fa = v
        .as_float_array()
        .ok_or_else(|| MethodError::BadArgument(format!("{what}: expected FloatArray")))?;
    Ok(fa.data().to_vec())
}

pub fn need_int(v: &Value, what: &str) -> Result<i64, MethodError> {
    v.as_int()
        .ok_or_else(|| MethodError::BadArgument(format!("{what}: expected Int")))
}

pub fn need_positive(v: &Value, what: &str) -> Result<usize, MethodError> {
    let i = need_int(v, what)?;
    if i <= 0 {
        return Err(MethodError::BadArgument(format!("{what}: must be positive")));
    }
    Ok(i as usize)
}

pub fn need_float(v: &Value, what: &str) -> Result<f64, MethodError> {
    v.as_float()
        .ok_or_else(|| MethodError::BadArgument(format!("{what}: expected Float")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_flat(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = matrix_to_value(&m);
        let back = value_to_matrix(&v, "m").unwrap();
        assert_eq!(back, m);
    }
}
