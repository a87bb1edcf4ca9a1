//! Cascade training: blocks are trained independently, models merge
//! pairwise up a binary tree (training on the union of the two SV sets),
//! and a feedback pass re-runs the leaf layer with the final support
//! vectors appended to every block until no training point violates the
//! KKT conditions, or the iteration cap is reached.
//!
//! This local driver and the distributed active methods share the exact
//! same arithmetic; the distributed path only changes where each step
//! runs.

use crate::par::map_indexed;
use crate::tensor::Matrix;

use super::smo::{kkt_violations, train_smo, SmoParams, SvmError, SvmModel};

pub const DEFAULT_FEEDBACK_CAP: usize = 5;

#[derive(Debug, Clone)]
pub struct DataBlock {
    pub block_id: usize,
    pub home_backend: u32,
    pub points: Matrix,
    pub labels: Vec<f64>,
}

/// Split a dataset into blocks of `points_per_block` (the last block may
/// be smaller), assign home backends round-robin, and merge any
/// single-class block into its successor so every block can be trained.
pub fn partition_blocks(
    points: &Matrix,
    labels: &[f64],
    points_per_block: usize,
    backends: usize,
) -> Result<Vec<DataBlock>, SvmError> {
    assert!(points_per_block >= 2, "blocks need at least 2 points");
    assert!(backends >= 1);
    if points.rows() != labels.len() {
        return Err(SvmError::ShapeMismatch {
            points: points.rows(),
            labels: labels.len(),
        });
    }
    let two_class = |labels: &[f64]| {
        labels.iter().any(|&l| l > 0.0) && labels.iter().any(|&l| l < 0.0)
    };
    if !two_class(labels) {
        return Err(SvmError::SingleClass);
    }

    // Raw chunks first.
    let mut raw: Vec<(Matrix, Vec<f64>)> = Vec::new();
    let mut at = 0;
    while at < points.rows() {
        let take = points_per_block.min(points.rows() - at);
        let idx: Vec<usize> = (at..at + take).collect();
        raw.push((points.select_rows(&idx), labels[at..at + take].to_vec()));
        at += take;
    }

    // Merge degenerate single-class chunks forward (or backward for a
    // trailing one).
    let mut merged: Vec<(Matrix, Vec<f64>)> = Vec::new();
    let mut pending: Option<(Matrix, Vec<f64>)> = None;
    for (pts, lbs) in raw {
        let (pts, lbs) = match pending.take() {
            Some((ppts, plbs)) => {
                let mut l = plbs;
                l.extend_from_slice(&lbs);
                (Matrix::vstack(&[&ppts, &pts]), l)
            }
            None => (pts, lbs),
        };
        if two_class(&lbs) {
            merged.push((pts, lbs));
        } else {
            pending = Some((pts, lbs));
        }
    }
    if let Some((pts, lbs)) = pending {
        // Trailing single-class chunk: fold into the last valid block.
        let (lpts, mut llbs) = merged.pop().expect("two-class dataset has a valid block");
        llbs.extend_from_slice(&lbs);
        merged.push((Matrix::vstack(&[&lpts, &pts]), llbs));
    }

    Ok(merged
        .into_iter()
        .enumerate()
        .map(|(i, (points, labels))| DataBlock {
            block_id: i,
            home_backend: (i % backends) as u32,
            points,
            labels,
        })
        .collect())
}

/// Bring the block count to a power of two by splitting the largest
/// blocks. Contiguous halves are tried first, then an even/odd
/// interleave for class-sorted data; a half that would be single-class
/// is never produced.
pub fn pad_to_power_of_two(mut blocks: Vec<DataBlock>) -> Vec<DataBlock> {
    let two_class =
        |labels: &[f64]| labels.iter().any(|&l| l > 0.0) && labels.iter().any(|&l| l < 0.0);
    while !blocks.len().is_power_of_two() {
        // Largest splittable block first.
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(blocks[i].points.rows()));
        let mut split_done = false;
        for &i in &order {
            let rows = blocks[i].points.rows();
            if rows < 4 {
                continue;
            }
            let halves: Vec<usize> = (0..rows / 2).collect();
            let rest: Vec<usize> = (rows / 2..rows).collect();
            let interleaved_a: Vec<usize> = (0..rows).step_by(2).collect();
            let interleaved_b: Vec<usize> = (1..rows).step_by(2).collect();
            let candidates = [(halves, rest), (interleaved_a, interleaved_b)];
            let mut chosen = None;
            for (a, b) in candidates {
                let la: Vec<f64> = a.iter().map(|&r| blocks[i].labels[r]).collect();
                let lb: Vec<f64> = b.iter().map(|&r| blocks[i].labels[r]).collect();
                if two_class(&la) && two_class(&lb) {
                    chosen = Some((a, la, b, lb));
                    break;
                }
            }
            let Some((a, la, b, lb)) = chosen else { continue };
            let block = blocks.remove(i);
            blocks.insert(
                i,
                DataBlock {
                    block_id: 0,
                    home_backend: block.home_backend,
                    points: block.points.select_rows(&a),
                    labels: la,
                },
            );
            blocks.insert(
                i + 1,
                DataBlock {
                    block_id: 0,
                    home_backend: block.home_backend,
                    points: block.points.select_rows(&b),
                    labels: lb,
                },
            );
            split_done = true;
            break;
        }
        if !split_done {
            break; // nothing splittable; caller sees a non-power count
        }
    }
    for (i, b) in blocks.iter_mut().enumerate() {
        b.block_id = i;
    }
    blocks
}

/// Train on the union of two models' support-vector sets. The labels of
/// an SV are recovered from the sign of its coefficient.
pub fn merge_models(a: &SvmModel, b: &SvmModel, params: &SmoParams) -> Result<SvmModel, SvmError> {
    if a.sv_count() > 0 && b.sv_count() > 0 {
        if a.kernel != b.kernel || a.c != b.c {
            return Err(SvmError::ConfigConflict);
        }
    }
    let points = Matrix::vstack(&[&a.support_vectors, &b.support_vectors]);
    let labels: Vec<f64> = a
        .coef
        .iter()
        .chain(&b.coef)
        .map(|&c| if c >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    train_smo(&points, &labels, params)
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome {
    pub model: SvmModel,
    /// Models per layer of the final cascade pass, e.g. [8, 4, 2, 1].
    pub layer_counts: Vec<usize>,
    /// Feedback re-runs performed after the initial pass.
    pub feedback_iterations: usize,
    pub converged: bool,
    /// Total KKT violations observed after each pass.
    pub violation_history: Vec<usize>,
}

/// One full cascade pass over the given training sets.
fn cascade_pass(
    sets: &[(Matrix, Vec<f64>)],
    params: &SmoParams,
) -> Result<(SvmModel, Vec<usize>), SvmError> {
    let mut layer_counts = vec![sets.len()];
    let mut models: Vec<SvmModel> = {
        let results = map_indexed(sets.len(), |i| train_smo(&sets[i].0, &sets[i].1, params));
        results.into_iter().collect::<Result<_, _>>()?
    };
    while models.len() > 1 {
        let pairs = models.len() / 2;
        let next: Vec<Result<SvmModel, SvmError>> = map_indexed(pairs, |p| {
            merge_models(&models[2 * p], &models[2 * p + 1], params)
        });
        models = next.into_iter().collect::<Result<_, _>>()?;
        layer_counts.push(models.len());
    }
    Ok((models.pop().expect("at least one block"), layer_counts))
}

/// Local (in-process) cascade driver with the feedback loop.
pub fn cascade_train_local(
    blocks: &[DataBlock],
    params: &SmoParams,
    feedback_cap: usize,
) -> Result<CascadeOutcome, SvmError> {
    assert!(
        blocks.len().is_power_of_two(),
        "block count must be a power of two (use pad_to_power_of_two)"
    );
    let pristine: Vec<(Matrix, Vec<f64>)> = blocks
        .iter()
        .map(|b| (b.points.clone(), b.labels.clone()))
        .collect();

    let mut sets = pristine.clone();
    let mut violation_history = Vec::new();
    let mut feedback_iterations = 0usize;
    loop {
        let (model, layer_counts) = cascade_pass(&sets, params)?;
        // Feedback check: KKT of every training point against the final
        // model, evaluated block-locally.
        let per_block = map_indexed(blocks.len(), |i| {
            kkt_violations(&model, &blocks[i].points, &blocks[i].labels, params.tol)
        });
        let mut violations = 0usize;
        for v in per_block {
            violations += v?;
        }
        violation_history.push(violations);
        if violations == 0 || feedback_iterations >= feedback_cap {
            return Ok(CascadeOutcome {
                model,
                layer_counts,
                feedback_iterations,
                converged: violations == 0,
                violation_history,
            });
        }
        feedback_iterations += 1;
        // Re-run layer 1 with the final SVs appended to each pristine block.
        let sv_labels: Vec<f64> = model
            .coef
            .iter()
            .map(|&c| if c >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        sets = pristine
            .iter()
            .map(|(pts, lbs)| {
                let mut labels = lbs.clone();
                labels.extend_from_slice(&sv_labels);
                (Matrix::vstack(&[pts, &model.support_vectors]), labels)
            })
            .collect();
    }
}
