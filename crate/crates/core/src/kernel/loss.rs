/// Huber loss and its derivative with respect to `pred`.
pub fn huber_loss(pred: f64, target: f64, delta: f64) -> (f64, f64) {
    let err = pred - target;
    if err.abs() <= delta {
        (0.5 * err * err, err)
    } else {
        (delta * (err.abs() - 0.5 * delta), delta * err.signum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_target() {
        assert_eq!(huber_loss(1.5, 1.5, 1.0), (0.0, 0.0));
    }

    #[test]
    fn quadratic_branch() {
        let (l, g) = huber_loss(0.5, 0.0, 1.0);
        assert_eq!(l, 0.125);
        assert_eq!(g, 0.5);
    }

    #[test]
    fn linear_branch() {
        let (l, g) = huber_loss(-3.0, 0.0, 1.0);
        assert_eq!(l, 2.5);
        assert_eq!(g, -1.0);
        let (l, g) = huber_loss(4.0, 1.0, 1.0);
        assert_eq!((l, g), (2.5, 1.0));
    }
}
