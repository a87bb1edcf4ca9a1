//! Minimal row-major matrix used by the SVM workload. The LSTM works on
//! flat buffers directly; nothing here tries to be a tensor library.

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        assert_eq!(rows * cols, data.len(), "flat data does not match shape");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1))
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Rows `index` for which `keep(i)` holds, in order.
    pub fn select_rows(&self, keep: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(0, self.cols);
        out.data.reserve(keep.len() * self.cols);
        for &i in keep {
            out.push_row(self.row(i));
        }
        out
    }

    /// Stack matrices with identical widths, top to bottom.
    pub fn vstack(parts: &[&Matrix]) -> Matrix {
        let cols = parts.iter().find(|m| m.rows > 0).map_or(0, |m| m.cols);
        let mut out = Matrix::zeros(0, cols);
        for part in parts {
            if part.rows == 0 {
                continue;
            }
            assert_eq!(part.cols, cols, "width mismatch in vstack");
            out.data.extend_from_slice(&part.data);
            out.rows += part.rows;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_stacking() {
        let a = Matrix::from_flat(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_flat(1, 2, vec![5.0, 6.0]);
        let c = Matrix::vstack(&[&a, &b]);
        assert_eq!(c.rows(), 3);
        assert_eq!(c.row(2), &[5.0, 6.0]);
        let sel = c.select_rows(&[2, 0]);
        assert_eq!(sel.row(0), &[5.0, 6.0]);
        assert_eq!(sel.row(1), &[1.0, 2.0]);
    }
}
