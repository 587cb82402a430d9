use crate::error::{Error, Result};
use crate::numerics::{Adam, AdamConfig};
use crate::pvae::{BaseView, HeadParams};

/// Trunk outputs of the context rows, with the adapted feature hidden from
/// the encoder.
pub fn context_trunks(
    view: &BaseView<'_>,
    feature: usize,
    rows: &[(usize, f64)],
) -> Result<Vec<(Vec<f64>, f64)>> {
    rows.iter()
        .map(|&(r, x)| Ok((view.trunk(r, feature)?.into_owned(), x)))
        .collect()
}

/// Mean NLL of `points` under `head` and its gradient with respect to the
/// head. Zero for an empty set.
pub fn head_nll(
    head: &HeadParams,
    points: &[(Vec<f64>, f64)],
    variance: f64,
) -> Result<(f64, HeadParams)> {
    let mut grad = HeadParams::zeros(head.d_dim(), head.link);
    if points.is_empty() {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / points.len() as f64;
    let mut total = 0.0;
    for (d, x) in points {
        total += head.accumulate_nll_grad(d, *x, variance, scale, &mut grad)?.0;
    }
    Ok((total * scale, grad))
}

/// Full-batch Adam on the mean context NLL, from `init`, for `epochs` steps.
/// Returns the head and the loss before each step plus the final loss.
pub fn fit_head(
    init: &HeadParams,
    points: &[(Vec<f64>, f64)],
    variance: f64,
    epochs: usize,
    lr: f64,
) -> Result<(HeadParams, Vec<f64>)> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be non-negative, got {lr}")));
    }
    let mut head = init.clone();
    if points.is_empty() {
        return Ok((head, Vec::new()));
    }
    let mut adam = Adam::new(AdamConfig::default());
    let mut losses = Vec::with_capacity(epochs + 1);
    for _ in 0..epochs {
        let (loss, grad) = head_nll(&head, points, variance)?;
        losses.push(loss);
        adam.step(&mut head, &grad, lr, 0.0)?;
    }
    losses.push(head_nll(&head, points, variance)?.0);
    Ok((head, losses))
}

/// Fine-tunes `init` on the context observations of `feature`; the base
/// model is untouched. An empty context returns `init`.
pub fn train_from_random(
    view: &BaseView<'_>,
    init: &HeadParams,
    feature: usize,
    context: &[(usize, f64)],
    epochs: usize,
    lr: f64,
) -> Result<HeadParams> {
    if epochs == 0 || context.is_empty() {
        return Ok(init.clone());
    }
    let points = context_trunks(view, feature, context)?;
    Ok(fit_head(init, &points, view.model.output_variance(), epochs, lr)?.0)
}
